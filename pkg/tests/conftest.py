"""Shared fixtures, problem generators and the acceptance summary hook."""

from __future__ import annotations

import warnings

import numpy as np
import pytest

from drddpc import data, predictor
from drddpc.model import NoiseSpec, StateSpaceModel, benchmark_model
from drddpc.program import ConvexProgram

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_kkt_program(rng: np.random.Generator, lp: bool) -> tuple[ConvexProgram, np.ndarray]:
    """Random QP or LP built around a chosen optimum.

    Picks ``z*``, equality multipliers, an active set with positive multipliers
    and positive slacks on the inactive rows, then sets ``f`` and the
    right-hand sides so that ``z*`` satisfies the KKT conditions exactly.
    """
    n = int(rng.integers(2, 25))
    me = int(rng.integers(0, n // 2 + 1))
    if lp:
        H = np.zeros((n, n))
        n_act = n - me  # vertex: active rows plus equalities pin z*
        mi = n_act + int(rng.integers(0, 10))
    else:
        k = int(rng.integers(0, n + 1))
        L = rng.standard_normal((n, k))
        H = L @ L.T + (rng.uniform(0, 1) * np.eye(n) if rng.random() < 0.5 else 0.0)
        mi = int(rng.integers(0, 2 * n))
        n_act = int(rng.integers(0, min(mi, n - me) + 1))
    A = rng.standard_normal((me, n))
    G = rng.standard_normal((mi, n)) * rng.uniform(0.1, 10)
    z = 3.0 * rng.standard_normal(n)
    y = rng.standard_normal(me)
    lam = np.zeros(mi)
    lam[:n_act] = rng.uniform(0.1, 5, n_act)
    slack = np.zeros(mi)
    slack[n_act:] = rng.uniform(0.1, 5, mi - n_act)
    prog = ConvexProgram(H=H, f=-H @ z - A.T @ y - G.T @ lam, A_eq=A, b_eq=A @ z, A_in=G, b_in=G @ z + slack)
    return prog, z


def random_stable_model(rng: np.random.Generator, n: int = 2, m: int = 1, p: int = 1) -> StateSpaceModel:
    """Random observable plant with spectral radius in [0.5, 0.95]."""
    while True:
        A = rng.standard_normal((n, n))
        A *= rng.uniform(0.5, 0.95) / max(abs(np.linalg.eigvals(A)))
        try:
            return StateSpaceModel(
                A=A, B=rng.standard_normal((n, m)), C=rng.standard_normal((p, n)),
                Ke=0.5 * rng.standard_normal((n, p)),
            )
        except ValueError:  # unobservable draw
            continue


@pytest.fixture(scope="session")
def plant() -> StateSpaceModel:
    return benchmark_model()


@pytest.fixture(scope="session")
def exact_offline(plant):
    """Noise-free offline experiment at T=200, Tp=5, Tf=10."""
    traj = data.excite_and_collect(plant, NoiseSpec.isotropic(1, 0.0), 200, seed=11)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", data.RankDeficiencyWarning)
        part = data.partition(traj, 5, 10)
    return traj, part, predictor.fit(part)


@pytest.fixture(scope="session")
def noisy_offline(plant):
    traj = data.excite_and_collect(plant, NoiseSpec.isotropic(1, 0.012), 200, seed=3)
    part = data.partition(traj, 5, 10)
    return traj, part, predictor.fit(part)
