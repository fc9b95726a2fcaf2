import numpy as np
import pytest

from upwind_gsbp.experiments import (
    ConvergenceRow,
    ScanConfig,
    convergence_csv_lines,
    is_stable,
    max_stable_dt,
    run_burgers_demo,
    run_convergence,
    scan_many,
    stability_csv_lines,
)
from upwind_gsbp.problems import AdvDiffConfig


def scan_cfg(order, theta_adv, theta_diff, degree=1, n_cells=20, a=0.1, c=0.1, horizon=100.0):
    return ScanConfig(
        order=order,
        cfg=AdvDiffConfig(a, c, theta_adv, theta_diff, degree, n_cells),
        horizon=horizon,
    )


# ---------------------------------------------------------------- is_stable


def test_theory_floor_is_stable():
    cfg = scan_cfg(1, 0.5, 0.5)
    assert is_stable(cfg, 2 * 0.1 / 0.1**2)  # dt = 2c/a^2


def test_vanishing_step_is_stable():
    cfg = scan_cfg(2, 0.5, 0.0, n_cells=10)
    assert is_stable(cfg, 1e-3 * cfg.dt_scale)


def test_incompatible_pair_probes_bracket_threshold():
    # K=20 carries the 3.3e-1 threshold, K=40 the 1.6e-1 one
    cfg20 = scan_cfg(1, 0.5, 0.0, n_cells=20)
    assert is_stable(cfg20, 0.32 * cfg20.dt_scale)
    cfg40 = scan_cfg(1, 0.5, 0.0, n_cells=40)
    assert is_stable(cfg40, 0.08 * cfg40.dt_scale)
    assert not is_stable(cfg40, 0.32 * cfg40.dt_scale)
    assert not is_stable(cfg40, 2.0 * cfg40.dt_scale)


def test_is_stable_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        is_stable(scan_cfg(1, 0.0, 0.0), 0.0)


# ------------------------------------------------------------ max_stable_dt


def test_scan_finds_incompatible_threshold():
    res = max_stable_dt(scan_cfg(1, 0.5, 0.0, n_cells=40))
    assert not res.unbounded and not res.below_bracket
    assert res.tau == pytest.approx(0.16, rel=0.25)
    assert not res.non_monotone
    assert res.dt_max == pytest.approx(res.tau * res.config.dt_scale, rel=1e-12)


def test_scan_unbounded_at_cap():
    res = max_stable_dt(scan_cfg(1, 0.5, 0.5, n_cells=20), bracket=None)
    assert res.unbounded
    assert res.tau_label == "+"


def test_scan_below_bracket():
    # explicit bracket whose lower bound is already unstable
    cfg = scan_cfg(1, 0.5, 0.0, n_cells=40)
    res = max_stable_dt(cfg, bracket=(5.0 * cfg.dt_scale, 100.0 * cfg.dt_scale))
    assert res.below_bracket
    assert res.tau is None
    assert res.tau_label == "below_bracket"


def test_scan_auto_extends_below_default():
    # threshold sits under the default tau_lo = 0.01: halving must find it
    cfg = scan_cfg(1, 0.5, 0.0, degree=3, n_cells=320)
    res = max_stable_dt(cfg)
    assert not res.below_bracket
    assert res.tau == pytest.approx(6.5e-3, rel=0.3)


def test_scan_explicit_bracket_can_opt_into_extension():
    cfg = scan_cfg(1, 0.5, 0.0, n_cells=40)
    strict = max_stable_dt(cfg, bracket=(1.0 * cfg.dt_scale, 10.0 * cfg.dt_scale))
    assert strict.below_bracket
    extended = max_stable_dt(
        cfg, bracket=(1.0 * cfg.dt_scale, 10.0 * cfg.dt_scale), extend_lower=True
    )
    assert not extended.below_bracket
    assert extended.tau == pytest.approx(0.16, rel=0.25)


def test_scan_probe_log_is_consistent():
    res = max_stable_dt(scan_cfg(1, 0.5, 0.0, n_cells=40))
    stable = [dt for dt, s in res.probes if s == "stable"]
    unstable = [dt for dt, s in res.probes if s != "stable"]
    assert max(stable) == res.dt_max
    assert min(unstable) >= res.dt_max


def test_scan_determinism():
    a = max_stable_dt(scan_cfg(2, 0.25, 0.25, n_cells=20))
    b = max_stable_dt(scan_cfg(2, 0.25, 0.25, n_cells=20))
    assert a.dt_max == b.dt_max and a.probes == b.probes


def test_scan_many_orders_results_deterministically():
    cfgs = [scan_cfg(1, 0.5, 0.0, n_cells=k) for k in (20, 40)]
    serial = scan_many(cfgs, workers=1)
    parallel = scan_many(cfgs, workers=2)
    assert [r.dt_max for r in serial] == [r.dt_max for r in parallel]
    lines = stability_csv_lines(serial)
    assert lines[0].startswith("order,N,K")
    assert len(lines) == 3


# ------------------------------------------------------------- convergence


def test_convergence_zero_horizon_is_exact():
    base = AdvDiffConfig(0.1, 0.1, 0.5, 0.5, 1, 20)
    rows = run_convergence(base, order=2, mu=25.0, cell_counts=[20, 40], t_final=0.0)
    assert all(row.error == 0.0 for row in rows)


def test_convergence_table_shape():
    base = AdvDiffConfig(0.1, 0.1, 0.5, 0.5, 1, 20)
    rows = run_convergence(base, order=2, mu=25.0, cell_counts=[20, 40, 80])
    assert rows[0].eoc is None
    assert all(row.error is not None for row in rows)
    assert rows[1].eoc == pytest.approx(2.13, abs=0.1)
    csv = convergence_csv_lines([(base, 25.0, rows)])
    assert csv[0] == "N,K,dt_rule,theta_adv,theta_diff,l2_error,eoc"
    assert len(csv) == 4


def test_convergence_unstable_rows_are_dashes():
    # upwind advection with central diffusion at mu = 25 loses stability
    base = AdvDiffConfig(0.1, 0.1, 0.5, 0.0, 1, 20)
    rows = run_convergence(base, order=2, mu=25.0, cell_counts=[40, 80])
    assert all(row.unstable for row in rows)
    assert all(row.error_label() == "-" for row in rows)


def test_convergence_growth_solution_requires_unit_velocity():
    base = AdvDiffConfig(0.5, 0.1, 0.0, 0.0, 1, 20)
    with pytest.raises(ValueError):
        run_convergence(base, 2, 1.0, [20], solution_kind="growth")


def test_convergence_growth_solution_runs():
    base = AdvDiffConfig(1.0, 0.1, 0.0, 0.0, 2, 20)
    rows = run_convergence(base, order=3, mu=0.5, cell_counts=[20, 40], solution_kind="growth")
    assert all(not row.unstable for row in rows)
    assert rows[1].eoc == pytest.approx(3.0, abs=0.15)


# ----------------------------------------------------------------- Burgers


def test_burgers_demo_blowup_and_stable():
    results = run_burgers_demo(0.5, 0.0, [100], dt=0.1, t_final=2.0)
    assert results[0].blew_up
    assert results[0].blowup_time < 2.0

    ok = run_burgers_demo(0.0, 0.0, [50, 100], dt=0.1, t_final=2.0)
    for res in ok:
        assert not res.blew_up
        assert res.final_time == pytest.approx(2.0)
        assert 2.0 in res.snapshots
        assert np.all(np.isfinite(res.snapshots[2.0]))


def test_burgers_demo_snapshot_times():
    res = run_burgers_demo(0.0, 0.0, [50], dt=0.1, t_final=1.0, snapshot_times=[0.5, 1.0])[0]
    assert sorted(res.snapshots) == [0.5, 1.0]
    energies = np.array([row[2] for row in res.energy])
    assert np.all(np.isfinite(energies))


def test_burgers_demo_diffusion_dominated_is_monotone():
    res = run_burgers_demo(0.0, 0.0, [20], dt=0.01, t_final=0.5, c=1000.0)[0]
    energies = np.array([row[2] for row in res.energy])
    assert not res.blew_up
    # decays toward the mean; non-increasing up to roundoff at the zero floor
    assert np.all(np.diff(energies) <= 1e-12 * energies[:-1])
    assert energies[-1] <= 1e-12 * energies[0]
