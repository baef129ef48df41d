import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drddpc import solver
from drddpc.program import ConvexProgram, load_program
from drddpc.solver import Status

from conftest import random_kkt_program


def _box_qp():
    # min z^2 s.t. z >= 1
    return ConvexProgram(H=[[2.0]], f=[0.0], A_eq=np.zeros((0, 1)), b_eq=[], A_in=[[-1.0]], b_in=[-1.0])


def test_scalar_qp_with_active_bound():
    sol = solver.solve(_box_qp())
    assert sol.ok and sol.z == pytest.approx([1.0], abs=1e-7) and sol.objective == pytest.approx(1.0, abs=1e-7)


def test_lp_vertex():
    prog = ConvexProgram(H=[[0.0]], f=[-1.0], A_eq=np.zeros((0, 1)), b_eq=[], A_in=[[1.0], [-1.0]], b_in=[3.0, 0.0])
    sol = solver.solve(prog)
    assert sol.ok and sol.z == pytest.approx([3.0], abs=1e-7)


def test_equality_qp_matches_kkt_linear_system():
    rng = np.random.default_rng(0)
    for _ in range(10):
        L = rng.standard_normal((5, 5))
        H = L @ L.T + 0.5 * np.eye(5)
        f, A, b = rng.standard_normal(5), rng.standard_normal((2, 5)), rng.standard_normal(2)
        K = np.block([[H, A.T], [A, np.zeros((2, 2))]])
        z_star = np.linalg.solve(K, np.concatenate([-f, b]))[:5]
        sol = solver.solve(ConvexProgram(H=H, f=f, A_eq=A, b_eq=b, A_in=np.zeros((0, 5)), b_in=[]))
        assert sol.ok and np.abs(sol.z - z_star).max() <= 1e-6


def test_kkt_residuals_at_known_optimum():
    st_, pr, cp = solver.check_kkt(_box_qp(), np.array([1.0]), np.zeros(0), np.array([2.0]))
    assert max(st_, pr, cp) <= 1e-8


def test_kkt_stationarity_grows_linearly_with_perturbation():
    prog = _box_qp()
    r = [solver.check_kkt(prog, np.array([1.0 + d]), np.zeros(0), np.array([2.0]))[0] for d in (1e-3, 2e-3, 4e-3)]
    assert r[1] == pytest.approx(2 * r[0], rel=1e-9) and r[2] == pytest.approx(4 * r[0], rel=1e-9)


def test_kkt_complementarity_flags_suboptimal_feasible_point():
    _, pr, cp = solver.check_kkt(_box_qp(), np.array([2.0]), np.zeros(0), np.array([2.0]))
    assert pr == 0.0 and cp > 0.0


@pytest.mark.parametrize("lp", [False, True])
def test_random_analytic_programs(lp):
    rng = np.random.default_rng(42 + lp)
    for _ in range(60):
        prog, z_star = random_kkt_program(rng, lp)
        sol = solver.solve(prog)
        assert sol.ok
        assert max(solver.check_kkt(prog, sol.z, sol.y_eq, sol.y_in)) <= 1e-6
        opt = prog.objective(z_star)
        assert sol.objective >= opt - 1e-6 * (1 + abs(opt))
        assert abs(sol.objective - opt) <= 1e-6 * (1 + abs(opt))


def test_optimal_status_implies_residual_bounds():
    rng = np.random.default_rng(5)
    for _ in range(20):
        prog, _ = random_kkt_program(rng, bool(rng.integers(2)))
        sol = solver.solve(prog, tol_p=1e-7, tol_d=1e-7)
        if sol.ok:
            assert sol.primal_residual <= 1e-7 and sol.dual_residual <= 1e-7


def test_solves_are_bit_identical():
    rng = np.random.default_rng(6)
    for _ in range(10):
        prog, _ = random_kkt_program(rng, bool(rng.integers(2)))
        a, b = solver.solve(prog), solver.solve(prog)
        assert a.iterations == b.iterations and np.array_equal(a.z, b.z) and a.status == b.status


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 100.0))
def test_minimizer_invariant_under_cost_scaling(seed, c):
    rng = np.random.default_rng(seed)
    n = 6
    L = rng.standard_normal((n, n))
    H = L @ L.T + np.eye(n)
    f, G = rng.standard_normal(n), rng.standard_normal((4, n))
    h = np.abs(rng.standard_normal(4))
    base = solver.solve(ConvexProgram(H=H, f=f, A_eq=np.zeros((0, n)), b_eq=[], A_in=G, b_in=h))
    scaled = solver.solve(ConvexProgram(H=c * H, f=c * f, A_eq=np.zeros((0, n)), b_eq=[], A_in=G, b_in=h))
    assert base.ok and scaled.ok
    assert np.abs(base.z - scaled.z).max() <= 1e-5 * (1 + np.abs(base.z).max())


def test_infeasible_program_is_flagged():
    prog = ConvexProgram(H=[[1.0]], f=[0.0], A_eq=np.zeros((0, 1)), b_eq=[], A_in=[[1.0], [-1.0]], b_in=[-1.0, -1.0])
    assert solver.solve(prog).status is Status.INFEASIBLE


def test_inconsistent_equalities_are_infeasible():
    prog = ConvexProgram(H=np.eye(2), f=[0.0, 0.0], A_eq=[[1.0, 1.0], [1.0, 1.0]], b_eq=[1.0, 2.0], A_in=np.zeros((0, 2)), b_in=[])
    assert solver.solve(prog).status is Status.INFEASIBLE


def test_unbounded_lp_is_flagged():
    prog = ConvexProgram(H=np.zeros((2, 2)), f=[-1.0, 0.0], A_eq=np.zeros((0, 2)), b_eq=[], A_in=[[0.0, 1.0]], b_in=[1.0])
    assert solver.solve(prog).status is Status.UNBOUNDED


def test_starting_point_does_not_change_answer():
    rng = np.random.default_rng(8)
    prog, z_star = random_kkt_program(rng, False)
    cold = solver.solve(prog)
    warm = solver.solve(prog, z0=z_star + 0.1)
    assert cold.ok and warm.ok and abs(cold.objective - warm.objective) <= 1e-6 * (1 + abs(cold.objective))


def test_program_dump_round_trip():
    rng = np.random.default_rng(9)
    prog, _ = random_kkt_program(rng, False)
    prog = ConvexProgram(H=prog.H, f=prog.f, A_eq=prog.A_eq, b_eq=prog.b_eq, A_in=prog.A_in, b_in=prog.b_in,
                         constant=1.25, layout={"x": slice(0, 2), "rest": slice(2, prog.n)})
    buf = io.StringIO()
    prog.dump(buf)
    back = load_program(io.StringIO(buf.getvalue()))
    for name in ("H", "f", "A_eq", "b_eq", "A_in", "b_in"):
        assert np.array_equal(getattr(back, name), getattr(prog, name))
    assert back.constant == 1.25 and back.layout == prog.layout


def test_program_rejects_asymmetric_hessian():
    with pytest.raises(ValueError, match="symmetric"):
        ConvexProgram(H=[[1.0, 1.0], [0.0, 1.0]], f=[0.0, 0.0], A_eq=np.zeros((0, 2)), b_eq=[], A_in=np.zeros((0, 2)), b_in=[])
