import numpy as np
import pytest

from pact.estimator import (
    BadInterval,
    EmptyWindow,
    EstimatorConfig,
    TOutOfRange,
    dn_curve,
    estimate,
    gamma_hat,
    limit_D,
    limit_H,
    split_means,
    write_dn_csv,
)
from pact.generator import RecordFlags, grow_tree
from pact.leaf_process import LeafTrajectory, p_inf
from pact.model_core import ChangePointSchedule, SeededRng

SINGLE = ChangePointSchedule.single(6.0, 1.0, 0.5)


def _constant_traj(n: int, c: float) -> LeafTrajectory:
    ms = np.arange(2, n + 1)
    return LeafTrajectory(n=n, counts=c * ms, root_second_child=None)


def _step_traj(n: int, low: float, high: float, gamma: float) -> LeafTrajectory:
    ms = np.arange(2, n + 1)
    props = np.where(ms <= gamma * n, low, high)
    return LeafTrajectory(n=n, counts=props * ms, root_second_child=None)


def test_split_means_constant_trajectory():
    traj = _constant_traj(1000, 0.42)
    for t in (0.25, 0.5, 0.733, 0.999):
        before, after = split_means(traj, t, 0.1)
        assert before == pytest.approx(0.42, abs=1e-12)
        assert after == pytest.approx(0.42, abs=1e-12)


def test_split_means_step_trajectory_exact():
    traj = _step_traj(1000, 0.5, 0.6, 0.5)
    before, after = split_means(traj, 0.5, 0.01)
    assert before == pytest.approx(0.5, abs=1e-12)
    assert after == pytest.approx(0.6, abs=1e-12)


def test_split_means_window_errors():
    traj = _constant_traj(100, 0.5)
    with pytest.raises(TOutOfRange):
        split_means(traj, 0.05, 0.1)
    with pytest.raises(TOutOfRange):
        split_means(traj, 1.0, 0.1)
    with pytest.raises(EmptyWindow):
        split_means(traj, 0.105, 0.1)  # before-window has no steps


def test_split_means_direction_on_simulated_change():
    tree = grow_tree(SINGLE, 20_000, SeededRng(60), RecordFlags(leaves=True))
    before, after = split_means(tree.leaf_trajectory, 0.5, 0.1)
    assert after > before  # leaves become more frequent after the offset drops


def test_dn_curve_constant_is_zero():
    curve = dn_curve(_constant_traj(500, 0.37), EstimatorConfig(epsilon=0.1))
    assert np.max(np.abs(curve.values)) < 1e-12
    assert curve.ts[-1] == 1.0 and curve.values[-1] == 0.0


def test_dn_affine_invariance():
    n = 2000
    tree = grow_tree(SINGLE, n, SeededRng(61), RecordFlags(leaves=True))
    traj = tree.leaf_trajectory
    ms = np.arange(2, n + 1)
    shifted = LeafTrajectory(n=n, counts=traj.counts + 0.17 * ms, root_second_child=None)
    base = dn_curve(traj, EstimatorConfig())
    moved = dn_curve(shifted, EstimatorConfig())
    assert np.allclose(base.values, moved.values, atol=1e-12)


def test_dn_custom_grid():
    traj = _step_traj(1000, 0.5, 0.6, 0.5)
    cfg = EstimatorConfig(epsilon=0.1, grid=[0.3, 0.5, 0.9, 1.0])
    curve = dn_curve(traj, cfg)
    assert curve.ts.tolist() == [0.3, 0.5, 0.9, 1.0]
    assert curve.values[-1] == 0.0
    with pytest.raises(TOutOfRange):
        dn_curve(traj, EstimatorConfig(epsilon=0.1, grid=[0.05]))
    with pytest.raises(EmptyWindow):
        dn_curve(traj, EstimatorConfig(epsilon=0.1, grid=[0.1005]))


def test_gamma_hat_on_clean_step():
    n = 20_000
    traj = _step_traj(n, 0.3, 0.7, 0.5)
    cfg = EstimatorConfig(epsilon=0.1, near_max_threshold=1e-4)
    report = gamma_hat(dn_curve(traj, cfg), cfg)
    assert report.detected
    assert report.gamma_hat == pytest.approx(0.5, abs=1e-3)
    assert report.gamma_hat == report.near_max_max


def test_gamma_hat_widening_threshold_moves_right():
    n = 20_000
    traj = _step_traj(n, 0.3, 0.7, 0.5)
    estimates = []
    for thr in (1e-4, 0.02, 0.05):
        cfg = EstimatorConfig(epsilon=0.1, near_max_threshold=thr)
        estimates.append(gamma_hat(dn_curve(traj, cfg), cfg).gamma_hat)
    assert estimates == sorted(estimates)


def test_dn_curve_shape_on_simulated_change():
    # flat plateau up to the change point, then a decay to zero at t=1
    tree = grow_tree(SINGLE, 200_000, SeededRng(62), RecordFlags(leaves=True))
    curve = dn_curve(tree.leaf_trajectory, EstimatorConfig(epsilon=0.1))
    ts, dn = curve.ts, curve.values

    def band_mean(lo, hi):
        sel = (ts >= lo) & (ts <= hi)
        return float(dn[sel].mean())

    plateau = band_mean(0.15, 0.5)
    assert abs(band_mean(0.15, 0.3) - band_mean(0.35, 0.5)) < 0.15 * plateau
    assert band_mean(0.7, 0.75) < 0.75 * plateau
    assert band_mean(0.95, 1.0) < 0.25 * plateau
    assert ts[int(np.argmax(dn))] < 0.65


def test_gamma_hat_no_change_detected_on_constant():
    report = estimate(_constant_traj(5000, 0.5))
    assert not report.detected
    assert report.gamma_hat is None
    assert report.to_json()["gamma_hat"] is None


def test_report_json_contract():
    traj = _step_traj(20_000, 0.3, 0.7, 0.5)
    report = estimate(traj, EstimatorConfig(epsilon=0.1))
    assert set(report.to_json()) == {"gamma_hat", "dn_star", "detected", "epsilon", "threshold"}


def test_limit_H_is_plateau_average():
    # H over the flat stretch equals the plateau value
    assert limit_H(0.1, 0.5, SINGLE) == pytest.approx(8.0 / 15.0, abs=1e-12)
    with pytest.raises(BadInterval):
        limit_H(0.5, 0.5, SINGLE)
    with pytest.raises(BadInterval):
        limit_H(0.0, 0.5, SINGLE)


def test_limit_D_flat_when_offsets_equal():
    s = ChangePointSchedule.single(2.0, 2.0, 0.5)
    ts = np.linspace(0.1, 1.0, 200)
    assert np.max(np.abs(np.asarray(limit_D(ts, s, 0.1)))) < 1e-12


def test_limit_D_constant_then_strictly_decreasing():
    eps = 0.1
    plateau_ts = np.linspace(eps, 0.5, 50)
    vals = np.asarray(limit_D(plateau_ts, SINGLE, eps))
    assert np.max(vals) - np.min(vals) < 1e-12
    decay_ts = np.linspace(0.5, 1.0, 300)
    decay = np.asarray(limit_D(decay_ts, SINGLE, eps))
    assert np.all(np.diff(decay) < 0)
    assert decay[-1] == pytest.approx(0.0, abs=1e-12)


def test_limit_D_right_derivative_negative():
    eps, g = 0.1, 0.5
    fd = (limit_D(g + 1e-4, SINGLE, eps) - limit_D(g, SINGLE, eps)) / 1e-4
    assert fd < 0


def test_limit_D_interval_validation():
    with pytest.raises(BadInterval):
        limit_D(0.05, SINGLE, 0.1)
    with pytest.raises(BadInterval):
        limit_D(0.5, SINGLE, 0.6)  # epsilon above gamma


def test_dn_csv(tmp_path):
    traj = _step_traj(1000, 0.4, 0.6, 0.5)
    cfg = EstimatorConfig(epsilon=0.1, grid=[0.3, 0.5, 0.9])
    curve = dn_curve(traj, cfg)
    d_lim = np.asarray(limit_D(curve.ts, SINGLE, cfg.epsilon))
    path = tmp_path / "dn.csv"
    write_dn_csv(curve, path, d_lim)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,dn,d_limit"
    assert len(lines) == 4
    path2 = tmp_path / "dn2.csv"
    write_dn_csv(curve, path2)
    assert path2.read_text().splitlines()[1].endswith(",")
