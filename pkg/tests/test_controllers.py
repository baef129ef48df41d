import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drddpc import controllers as ctl
from drddpc import model as pm, ocp, solver
from drddpc.ambiguity import RadiusParams
from drddpc.controllers import ControllerConfig, OfflineData, PastWindow
from drddpc.data import RankDeficiencyWarning, excite_and_collect
from drddpc.model import NoiseSpec
from drddpc.ocp import ConstraintSpec, Costs, Kind, OutputCost

ZERO_RADIUS = RadiusParams(eps1=0.0, eps2=0.0, eps_con=0.0)
BENCH_BOXES = ConstraintSpec(-2, 2, -2, 2)


def _offline(plant, var, seed=3):
    if var == 0.0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RankDeficiencyWarning)
            return OfflineData.from_trajectory(excite_and_collect(plant, NoiseSpec.isotropic(1, 0.0), 200, seed=seed), 5, 10)
    return OfflineData.from_trajectory(excite_and_collect(plant, NoiseSpec.isotropic(1, var), 200, seed=seed), 5, 10)


@pytest.fixture(scope="module")
def noisy(plant):
    return _offline(plant, 0.012)


def test_warm_up_zero_noise_zero_state(plant):
    real = pm.NoiseRealization(seed=0, e=np.zeros((10, 1)), x0=np.zeros(2))
    x, win = ctl.warm_up(plant, real, 5)
    assert win.full and not win.u_p.any() and not win.y_p.any() and not x.any()


def test_warm_up_matches_simulation(plant):
    real = pm.realize_noise(NoiseSpec.isotropic(1, 0.012), 2, 20, seed=4)
    x, win = ctl.warm_up(plant, real, 5)
    sim = pm.simulate(plant, real.x0, np.zeros((5, 1)), real.e[:5])
    assert np.array_equal(win.y_p, sim.trajectory.y.ravel()) and np.array_equal(x, sim.states[-1])
    x2, win2 = ctl.warm_up(plant, pm.realize_noise(NoiseSpec.isotropic(1, 0.012), 2, 20, seed=4), 5)
    assert np.array_equal(win2.y_p, win.y_p) and np.array_equal(x2, x)


def test_warm_up_needs_enough_noise(plant):
    with pytest.raises(ValueError):
        ctl.warm_up(plant, pm.NoiseRealization(seed=0, e=np.zeros((3, 1)), x0=np.zeros(2)), 5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=4, max_size=12))
def test_window_shifts_by_one(samples):
    win = PastWindow(3, 1, 1)
    for k, (u, y) in enumerate(samples):
        before = (win.u_p.copy(), win.y_p.copy())
        win.push([u], [y])
        if k >= 3:
            assert np.array_equal(win.u_p, np.append(before[0][1:], u))
            assert np.array_equal(win.y_p, np.append(before[1][1:], y))
    assert len(win) == 3


def test_controller_config_validation(plant):
    with pytest.raises(ValueError):
        ControllerConfig(Tp=0)
    with pytest.raises(ValueError):
        ControllerConfig(lambda_g=-1.0)
    with pytest.raises(ValueError, match="plant order"):
        ControllerConfig(Tp=1).check_plant(plant)


def _exact_cfgs():
    costs = Costs(OutputCost(), 0.05)
    base = dict(costs=costs, constraints=ConstraintSpec(), radius=ZERO_RADIUS, lambda_g=0.0)
    return {k: ControllerConfig(kind=k, **base) for k in (Kind.SPC, Kind.REG_DEEPC, Kind.DRDDPC)}


def test_exact_data_step_agrees_across_kinds(plant):
    offline = _offline(plant, 0.0)
    real = pm.realize_noise(NoiseSpec.isotropic(1, 0.0), 2, 10, seed=1)
    _, win = ctl.warm_up(plant, real, 5)
    yr = ctl.horizon_reference(ctl.sinusoid_reference(50), 0, 10)
    us = [ctl.control_step(c, offline, win, yr, np.zeros(1))[0] for c in _exact_cfgs().values()]
    assert max(np.abs(u - us[0]).max() for u in us) <= 1e-5


@pytest.mark.parametrize("kind", [Kind.SPC, Kind.DRDDPC])
def test_steady_reference_yields_steady_input(plant, kind):
    u_ss = 0.5
    gain = (plant.C @ np.linalg.solve(np.eye(2) - plant.A, plant.B))[0, 0]
    cfg = ControllerConfig(kind=kind, costs=Costs(OutputCost(), 1e-6), constraints=ConstraintSpec(), radius=ZERO_RADIUS)
    real = pm.NoiseRealization(seed=0, e=np.zeros((65, 1)), x0=np.zeros(2))
    tr = ctl.run_closed_loop(plant, cfg, _offline(plant, 0.0), real, ctl.constant_reference(gain * u_ss), 60)
    assert np.abs(tr.u[40:, 0] - u_ss).max() <= 1e-4


def test_single_step_run(plant, noisy):
    real = pm.realize_noise(NoiseSpec.isotropic(1, 0.012), 2, 6, seed=2)
    tr = ctl.run_closed_loop(plant, ControllerConfig(kind=Kind.SPC, constraints=BENCH_BOXES), noisy, real, ctl.sinusoid_reference(50), 1)
    assert tr.T_run == 1 and len(tr.status) == 1 and tr.y.shape == (1, 1)


def test_run_rejects_short_realization(plant, noisy):
    real = pm.realize_noise(NoiseSpec.isotropic(1, 0.012), 2, 6, seed=2)
    with pytest.raises(ValueError, match="samples"):
        ctl.run_closed_loop(plant, ControllerConfig(kind=Kind.SPC), noisy, real, ctl.sinusoid_reference(50), 5)


def test_repeat_runs_identical(plant, noisy):
    cfg = ControllerConfig(kind=Kind.DRDDPC, constraints=BENCH_BOXES)
    traces = [ctl.run_closed_loop(plant, cfg, noisy, pm.realize_noise(NoiseSpec.isotropic(1, 0.012), 2, 25, seed=7),
                                  ctl.sinusoid_reference(50), 20) for _ in range(2)]
    assert np.array_equal(traces[0].u, traces[1].u) and np.array_equal(traces[0].y, traces[1].y)


def test_kinds_consume_same_noise(plant, noisy):
    # replaying each trace's inputs through the plant with the shared realization reproduces its outputs
    real = pm.realize_noise(NoiseSpec.isotropic(1, 0.012), 2, 25, seed=8)
    for kind in (Kind.SPC, Kind.DRDDPC, Kind.REG_DEEPC):
        tr = ctl.run_closed_loop(plant, ControllerConfig(kind=kind, constraints=BENCH_BOXES), noisy, real, ctl.sinusoid_reference(50), 20)
        u_all = np.vstack([np.zeros((5, 1)), tr.u])
        y_all = pm.simulate(plant, real.x0, u_all, real.e[:25]).trajectory.y
        assert np.array_equal(y_all[5:], tr.y)


def test_applied_input_stays_in_box(plant, noisy):
    cons = ConstraintSpec(-2, 2, -0.1, 0.1)
    real = pm.realize_noise(NoiseSpec.isotropic(1, 0.012), 2, 35, seed=9)
    for kind in (Kind.SPC, Kind.DRDDPC, Kind.REG_DEEPC):
        tr = ctl.run_closed_loop(plant, ControllerConfig(kind=kind, constraints=cons), noisy, real, ctl.sinusoid_reference(50), 30)
        assert np.all(np.abs(tr.u) <= 0.1)


def test_solver_failure_holds_previous_input(plant, noisy, monkeypatch):
    real = pm.realize_noise(NoiseSpec.isotropic(1, 0.012), 2, 10, seed=1)
    _, win = ctl.warm_up(plant, real, 5)

    def failing(prog, **kw):
        return solver.Solution(np.zeros(prog.n), np.nan, solver.Status.INFEASIBLE, 1.0, 1.0, 1.0, 0, np.zeros(prog.n_eq), np.zeros(prog.n_in))

    monkeypatch.setattr(solver, "solve", failing)
    u, diag = ctl.control_step(ControllerConfig(constraints=ConstraintSpec(-2, 2, -1, 1)), noisy, win, np.zeros(10), np.array([3.0]))
    assert u.tolist() == [1.0] and diag.status == "infeasible" and diag.plan is None and np.isnan(diag.objective)


def test_incomplete_window_rejected(noisy):
    with pytest.raises(ValueError, match="not full"):
        ctl.control_step(ControllerConfig(), noisy, PastWindow(5, 1, 1), np.zeros(10), np.zeros(1))


def test_larger_constraint_radius_reduces_violations(plant):
    # sweep setting: y in [0, 2] with y_r = 0; a large eps_con should violate no more often than a tiny one
    noise = NoiseSpec.isotropic(1, 0.012)
    cons = ConstraintSpec(0, 2, -2, 2)
    counts = {}
    for eps in (1e-5, 1.0):
        cfg = ControllerConfig(kind=Kind.DRDDPC, constraints=cons, radius=RadiusParams(eps_con=eps))
        total = 0
        for seed in range(4):
            off = _offline(plant, 0.012, seed)
            tr = ctl.run_closed_loop(plant, cfg, off, pm.realize_noise(noise, 2, 35, seed), ctl.constant_reference(0.0), 30)
            total += int(np.sum((tr.y < 0) | (tr.y > 2)))
        counts[eps] = total
    assert counts[1.0] <= counts[1e-5]


def test_trace_csv_round_trip(tmp_path, plant, noisy):
    real = pm.realize_noise(NoiseSpec.isotropic(1, 0.012), 2, 15, seed=5)
    tr = ctl.run_closed_loop(plant, ControllerConfig(constraints=BENCH_BOXES), noisy, real, ctl.sinusoid_reference(50), 10)
    path = tmp_path / "trace.csv"
    tr.to_csv(path)
    assert path.read_text().splitlines()[0] == "k,u,y,yr,status,objective,cvar_slack"
    back = ctl.read_trace_csv(path)
    assert np.array_equal(back.u, tr.u) and np.array_equal(back.y, tr.y) and back.status == tr.status
    assert np.array_equal(back.objective, tr.objective)


def test_reference_helpers():
    ref = ctl.sinusoid_reference(50)
    assert ref(0)[0] == 0.0 and ref(12.5 * 1)[0] == pytest.approx(1.0)
    h = ctl.horizon_reference(ref, 45, 10)
    assert h.size == 10 and h[9] == pytest.approx(np.sin(2 * np.pi * 54 / 50))
    assert np.array_equal(ctl.constant_reference([1.0, 2.0], 2)(7), [1.0, 2.0])
