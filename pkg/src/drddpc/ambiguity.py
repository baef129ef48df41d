"""Wasserstein radius selection and the discrete transport / CVaR oracles."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from drddpc.program import ConvexProgram
from drddpc.solver import solve

# exhaustive search up to this many atoms, the transport LP up to _LP_MAX_ATOMS
_BRUTE_MAX_ATOMS = 8
_LP_MAX_ATOMS = 20


class RadiusMode(str, enum.Enum):
    THEORETICAL = "theoretical"
    TUNED = "tuned"


@dataclass(frozen=True)
class RadiusParams:
    """Radius configuration.

    In ``theoretical`` mode both radii come from the finite-sample bound; in
    ``tuned`` mode the objective radius is ``eps1 * psi^(1/r) + eps2`` and the
    constraint radius is the fixed scalar ``eps_con``.
    """

    mode: RadiusMode = RadiusMode.TUNED
    alpha: float = 0.1
    r: float = 2.0
    gamma_alpha: float = 0.0
    C: float = 1.0
    q: float = 4.0
    eps1: float = 1e-3
    eps2: float = 1e-3
    eps_con: float = 1e-4

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", RadiusMode(self.mode))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.r < 1.0:
            raise ValueError(f"Wasserstein order must be >= 1, got {self.r}")
        if not self.q > self.r:
            raise ValueError(f"moment order q={self.q} must exceed r={self.r}")
        for name in ("gamma_alpha", "C", "eps1", "eps2", "eps_con"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def _norm(v: np.ndarray, r: float, axis: int = 0) -> np.ndarray:
    return np.linalg.norm(v, ord=r, axis=axis)


def psi_n(M: np.ndarray, m_f: np.ndarray, r: float) -> float:
    """Mean ``r``-th power distance between the regressor columns and ``m_f``."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    m_f = np.asarray(m_f, dtype=float).reshape(-1)
    if M.shape[0] != m_f.size:
        raise ValueError(f"M has {M.shape[0]} rows but m_f has {m_f.size} entries")
    if math.isinf(r):
        # r-th power mean degenerates to the max distance
        return float(_norm(M - m_f[:, None], np.inf).max())
    return float(np.mean(_norm(M - m_f[:, None], r) ** r))


def gamma_n(N: int, r: float, d: int, q: float = 4.0, C: float = 1.0) -> float:
    """Expected-``W_r^r`` concentration rate of an ``N``-sample empirical measure in dimension ``d``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not q > r:
        raise ValueError(f"q={q} must exceed r={r}")
    if d < 1 or r <= 0:
        raise ValueError("d must be >= 1 and r > 0")
    tail = N ** (-(q - r) / q)
    if r > d / 2:
        head = N ** -0.5
    elif r == d / 2:
        head = N ** -0.5 * math.log(1 + N)
    else:
        head = N ** (-r / d)
    return float(C * (head + tail))


def radius(params: RadiusParams, M: np.ndarray, m_f: np.ndarray, N: int, d: int) -> tuple[float, float]:
    """Objective and constraint radii ``(eps_obj, eps_con)``."""
    psi_root = psi_n(M, m_f, params.r) ** (1.0 / params.r) if not math.isinf(params.r) else psi_n(M, m_f, params.r)
    if params.mode is RadiusMode.TUNED:
        return params.eps1 * psi_root + params.eps2, params.eps_con
    g = gamma_n(N, params.r, d, params.q, params.C)
    eps = params.gamma_alpha * psi_root + (2.0 * g / params.alpha) ** (1.0 / params.r)
    return eps, eps


def _transport_cost(A: np.ndarray, B: np.ndarray, r: float) -> np.ndarray:
    diff = A[:, :, None] - B[:, None, :]  # (dim, k, k)
    return _norm(diff, r, axis=0) ** r


def wasserstein_discrete(atoms_a: np.ndarray, atoms_b: np.ndarray, r: float = 2.0, method: str = "auto") -> float:
    """Exact ``W_r`` between two uniform empirical measures with the same number of atoms.

    Atoms are columns. With equal uniform weights an optimal coupling is a
    permutation, found by exhaustive search (``"brute"``), by the transport LP
    through :func:`drddpc.solver.solve` (``"lp"``, integral by total
    unimodularity), or by the Hungarian method (``"assignment"``).
    ``"auto"`` picks in that order by size.
    """
    A = np.asarray(atoms_a, dtype=float)
    B = np.asarray(atoms_b, dtype=float)
    if A.ndim == 1:
        A = A[None, :]
    if B.ndim == 1:
        B = B[None, :]
    if A.shape != B.shape:
        raise ValueError(f"atom sets must have equal shapes, got {A.shape} and {B.shape}")
    if r < 1 or math.isinf(r):
        raise ValueError("supported orders are 1 <= r < inf")
    k = A.shape[1]
    cost = _transport_cost(A, B, r)
    if method == "auto":
        method = "brute" if k <= _BRUTE_MAX_ATOMS else "lp" if k <= _LP_MAX_ATOMS else "assignment"
    if method == "brute":
        rows = np.arange(k)
        best = min(cost[rows, list(perm)].sum() for perm in itertools.permutations(range(k)))
    elif method == "lp":
        best = _assignment_lp(cost)
    elif method == "assignment":
        ri, ci = linear_sum_assignment(cost)
        best = float(cost[ri, ci].sum())
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(max(best, 0.0) / k) ** (1.0 / r)


def _assignment_lp(cost: np.ndarray) -> float:
    k = cost.shape[0]
    nv = k * k
    A_eq = np.zeros((2 * k, nv))
    for i in range(k):
        A_eq[i, i * k:(i + 1) * k] = 1.0  # each source atom sends all its mass
        A_eq[k + i, i::k] = 1.0  # each target atom receives all its mass
    prog = ConvexProgram(
        H=np.zeros((nv, nv)), f=cost.reshape(-1),
        A_eq=A_eq[:-1], b_eq=np.ones(2 * k - 1),  # one row is redundant
        A_in=-np.eye(nv), b_in=np.zeros(nv),
    )
    sol = solve(prog)
    if not sol.ok:
        raise RuntimeError(f"transport LP failed: {sol.status.value}")
    return float(cost.reshape(-1) @ sol.z)


def empirical_cvar(samples: np.ndarray, beta: float) -> float:
    """Sample CVaR of the worst ``beta`` tail: ``min_t t + mean((x - t)_+) / beta``.

    The objective is convex piecewise linear in ``t`` with breakpoints at the
    samples, so scanning the breakpoints is exact.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("empirical_cvar needs at least one sample")
    if not 0.0 < beta < 1.0 and beta != 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    t = np.unique(x)
    vals = t + np.maximum(x[None, :] - t[:, None], 0.0).mean(axis=1) / beta
    return float(vals.min())
