"""Builders for the predictive-control programs as :class:`ConvexProgram` instances.

Three controllers share one assembly routine:

* the scenario form, with decision ``u_f`` and outputs ``Khat m_f + xi_i``;
* the direct Hankel form, with ``g = V z`` so that ``(I - P) g = 0`` holds by
  construction and outputs ``Yf V z + Yf (I - P) e_i``;
* the nominal baselines (SPC and l1-regularized DeePC), with one prediction
  and softened output boxes.

Every program keeps its objective in the units of the closed-loop cost:
``f1(u_f) + mean_i f2(y_i) + L_obj * eps_obj`` plus soft-constraint penalties,
with all data-dependent constants folded into ``ConvexProgram.constant``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from drddpc.data import HankelPartition
from drddpc.predictor import SpcPredictor
from drddpc.program import ConvexProgram

DEFAULT_DOMAIN_BOX = (-5.0, 5.0)
# exact vertex enumeration of the quadratic-cost Lipschitz bound up to this dimension
_MAX_VERTEX_DIM = 16


class CostVariant(str, enum.Enum):
    QUADRATIC = "quadratic"
    L1 = "l1"
    ASYMMETRIC = "asymmetric"


class Kind(str, enum.Enum):
    SPC = "spc"
    REG_DEEPC = "reg_deepc"
    DRDDPC = "drddpc"
    DR_SPC = "dr_spc"


def _per_step(W, p: int, name: str) -> np.ndarray:
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape == (1, 1) and p > 1:
        W = W[0, 0] * np.eye(p)
    if W.shape != (p, p):
        raise ValueError(f"{name} must be {p}x{p}, got {W.shape}")
    if not np.allclose(W, W.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(W).min() < -1e-12:
        raise ValueError(f"{name} must be positive semidefinite")
    return W


@dataclass(frozen=True)
class OutputCost:
    """Output tracking cost ``f2`` over the stacked horizon.

    Attributes:
        variant: quadratic ``||y - y_r||_Q^2``, ``l1`` ``||y - y_r||_1`` or
            asymmetric ``w_over ||(y - y_r)_+||_1 + w_under ||(y - y_r)_-||_1``.
        Q: per-step output weight (p x p, or a scalar for p = 1). Quadratic only.
        reference: stacked reference ``y_r`` (length p*Tf); ``None`` means zero.
    """

    variant: CostVariant = CostVariant.QUADRATIC
    Q: Any = 1.0
    reference: np.ndarray | None = None
    w_over: float = 2.0
    w_under: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", CostVariant(self.variant))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        object.__setattr__(self, "Q", _per_step(Q, Q.shape[0], "Q"))
        if self.reference is not None:
            object.__setattr__(self, "reference", np.asarray(self.reference, dtype=float).reshape(-1))
        if self.w_over < 0 or self.w_under < 0:
            raise ValueError("asymmetric weights must be nonnegative")

    @property
    def p(self) -> int:
        return self.Q.shape[0]

    def with_reference(self, reference: np.ndarray) -> "OutputCost":
        return OutputCost(self.variant, self.Q, reference, self.w_over, self.w_under)

    def ref(self, d: int) -> np.ndarray:
        if self.reference is None:
            return np.zeros(d)
        if self.reference.size != d:
            raise ValueError(f"reference has length {self.reference.size}, expected {d}")
        return self.reference

    def weights(self) -> tuple[float, float]:
        """Slopes ``(a_pos, a_neg)`` of the piecewise-linear penalty ``a_pos w_+ + a_neg w_-``."""
        if self.variant is CostVariant.L1:
            return 1.0, 1.0
        if self.variant is CostVariant.ASYMMETRIC:
            return float(self.w_over), float(self.w_under)
        raise ValueError("quadratic cost has no piecewise-linear weights")

    def evaluate(self, y: np.ndarray) -> np.ndarray | float:
        """Cost of a stacked output vector, or of each column of a matrix."""
        y = np.asarray(y, dtype=float)
        cols = y.ndim == 2
        Y = y if cols else y[:, None]
        w = Y - self.ref(Y.shape[0])[:, None]
        if self.variant is CostVariant.QUADRATIC:
            Qbar = np.kron(np.eye(Y.shape[0] // self.p), self.Q)
            val = np.einsum("ik,ij,jk->k", w, Qbar, w)
        else:
            a_pos, a_neg = self.weights()
            val = (a_pos * np.maximum(w, 0.0) + a_neg * np.maximum(-w, 0.0)).sum(axis=0)
        return val if cols else float(val[0])


@dataclass(frozen=True)
class Costs:
    """Stage costs: ``f1(u_f) = ||u_f||_R^2`` with per-step ``R``, and the output cost."""

    output: OutputCost = field(default_factory=OutputCost)
    R: Any = 0.05

    def __post_init__(self) -> None:
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        object.__setattr__(self, "R", _per_step(R, R.shape[0], "R"))

    def input_cost(self, u_f: np.ndarray) -> float:
        u = np.asarray(u_f, dtype=float).reshape(-1)
        Rbar = np.kron(np.eye(u.size // self.R.shape[0]), self.R)
        return float(u @ Rbar @ u)


@dataclass(frozen=True)
class ConstraintSpec:
    """Output and input boxes plus the CVaR settings.

    Bounds are per-step vectors (length p or m) and may be infinite. Input
    bounds are always enforced hard; output bounds enter the robust programs
    through ``h(y) = max_j max(y_j - hi_j, lo_j - y_j)`` in a softened CVaR
    constraint and the nominal programs as softened boxes.
    """

    y_lower: Any = -np.inf
    y_upper: Any = np.inf
    u_lower: Any = -np.inf
    u_upper: Any = np.inf
    beta: float = 0.2
    n_con_residuals: int = 20
    soft_penalty_cvar: float = 1e4
    soft_penalty_box: float = 1e4

    def __post_init__(self) -> None:
        for name in ("y_lower", "y_upper", "u_lower", "u_upper"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(np.isnan(arr)):
                raise ValueError(f"{name} contains NaN")
            object.__setattr__(self, name, arr)
        if np.any(self.y_lower > self.y_upper) or np.any(self.u_lower > self.u_upper):
            raise ValueError("lower bound exceeds upper bound")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.n_con_residuals < 1:
            raise ValueError("n_con_residuals must be >= 1")
        if self.soft_penalty_cvar <= 0 or self.soft_penalty_box <= 0:
            raise ValueError("soft penalties must be positive")

    def y_box(self, p: int, Tf: int) -> tuple[np.ndarray, np.ndarray]:
        return _tile(self.y_lower, p, Tf), _tile(self.y_upper, p, Tf)

    def u_box(self, m: int, Tf: int) -> tuple[np.ndarray, np.ndarray]:
        return _tile(self.u_lower, m, Tf), _tile(self.u_upper, m, Tf)

    @property
    def has_output_box(self) -> bool:
        return bool(np.any(np.isfinite(self.y_lower)) or np.any(np.isfinite(self.y_upper)))


def _tile(v: np.ndarray, width: int, Tf: int) -> np.ndarray:
    if v.size == 1:
        v = np.full(width, v[0])
    if v.size != width:
        raise ValueError(f"bound has {v.size} entries, expected {width}")
    return np.tile(v, Tf)


def box_violation(y: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray | float:
    """``h(y) = max_j max(y_j - hi_j, lo_j - y_j)`` for a vector or each column of a matrix."""
    y = np.asarray(y, dtype=float)
    Y = y if y.ndim == 2 else y[:, None]
    with np.errstate(invalid="ignore"):
        v = np.maximum(Y - hi[:, None], lo[:, None] - Y)
    v = np.where(np.isnan(v), -np.inf, v).max(axis=0)
    return v if y.ndim == 2 else float(v[0])


def _dual_exponent(r: float) -> float:
    if r == 1:
        return math.inf
    if math.isinf(r):
        return 1.0
    return r / (r - 1.0)


def lipschitz(cost: OutputCost | ConstraintSpec, r: float, d: int, domain_box: tuple[float, float] = DEFAULT_DOMAIN_BOX) -> float:
    """Lipschitz constant of ``f2`` (an :class:`OutputCost`) or of ``h`` (a :class:`ConstraintSpec`) in the ``r``-norm.

    Computed as the largest dual norm of a (sub)gradient. The quadratic cost
    is only Lipschitz on a bounded set, taken as ``domain_box`` in every
    coordinate; the supremum of the convex gradient norm over that box is
    attained at a vertex and is enumerated exactly for small ``d``.
    """
    if r not in (1, 2) and not math.isinf(r):
        raise ValueError(f"supported norms are r in {{1, 2, inf}}, got {r}")
    rs = _dual_exponent(r)
    if isinstance(cost, ConstraintSpec):
        # |h(y) - h(y')| <= ||y - y'||_inf <= ||y - y'||_r
        return 1.0
    if cost.variant is not CostVariant.QUADRATIC:
        a = max(cost.weights())
        return float(a * (d ** (1.0 / rs) if not math.isinf(rs) else 1.0))
    lo, hi = domain_box
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("quadratic cost needs a bounded domain box")
    yr = cost.ref(d)
    G = 2.0 * np.kron(np.eye(d // cost.p), cost.Q)
    dlo, dhi = lo - yr, hi - yr
    if np.allclose(G, np.diag(np.diag(G))):
        g = np.abs(np.diag(G)) * np.maximum(np.abs(dlo), np.abs(dhi))
        return float(np.linalg.norm(g, ord=rs))
    if d <= _MAX_VERTEX_DIM:
        best = 0.0
        for corner in itertools.product(*zip(dlo, dhi)):
            best = max(best, float(np.linalg.norm(G @ np.array(corner), ord=rs)))
        return best
    # triangle-inequality bound for large non-diagonal weights
    rad = np.maximum(np.abs(dlo), np.abs(dhi))
    return float(sum(rad[j] * np.linalg.norm(G[:, j], ord=rs) for j in range(d)))


def constraint_subset(N: int, n_con: int) -> np.ndarray:
    """Evenly spaced residual indices ``ceil(j N / n) - 1``, ``j = 1..n`` with ``n = min(n_con, N)``."""
    n = min(n_con, N)
    return np.array([math.ceil(j * N / n) - 1 for j in range(1, n + 1)], dtype=int)


def piecewise_mean(offsets: np.ndarray, a_pos: float, a_neg: float) -> tuple[np.ndarray, np.ndarray]:
    """Affine pieces of ``phi(w) = mean_i psi(w + c_i)`` with ``psi(x) = a_pos x_+ + a_neg x_-``.

    ``phi`` is convex piecewise linear in scalar ``w`` and equals the maximum of
    ``N + 1`` affine functions: piece ``k`` assumes that the ``k`` largest
    offsets sit on the positive side. Returns ``(slopes, intercepts)``.
    """
    c = np.sort(np.asarray(offsets, dtype=float))[::-1]
    N = c.size
    k = np.arange(N + 1)
    S = np.concatenate([[0.0], np.cumsum(c)])
    slopes = (a_pos * k - a_neg * (N - k)) / N
    intercepts = (a_pos * S - a_neg * (S[-1] - S)) / N
    return slopes, intercepts


@dataclass
class _Rows:
    """Incrementally built constraint rows over a variable vector of known size."""

    n: int
    A: list = field(default_factory=list)
    b: list = field(default_factory=list)

    def add(self, A, b) -> None:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0]:
            self.A.append(A.reshape(-1, self.n))
            self.b.append(np.asarray(b, dtype=float).reshape(-1))

    def stack(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.A:
            return np.zeros((0, self.n)), np.zeros(0)
        return np.vstack(self.A), np.concatenate(self.b)


def _assemble(
    *,
    kind: Kind,
    nx: int,
    Wy: np.ndarray,
    w0: np.ndarray,
    Wu: np.ndarray,
    u0: np.ndarray,
    costs: Costs,
    cons: ConstraintSpec,
    p: int,
    m: int,
    Tf: int,
    cost_offsets: np.ndarray,
    con_offsets: np.ndarray | None,
    eps_obj: float = 0.0,
    eps_con: float = 0.0,
    r: float = 2.0,
    l1_weight: float = 0.0,
    eq: tuple[np.ndarray, np.ndarray] | None = None,
    x_quad: np.ndarray | None = None,
) -> ConvexProgram:
    """Shared assembly.

    The core decision ``x`` (length ``nx``) maps affinely to the stacked
    prediction ``Wy x + w0`` and to the input ``Wu x + u0``. ``cost_offsets``
    (d x N) shift the prediction into the cost scenarios; ``con_offsets``
    (d x N') into the constraint scenarios, or ``None`` for softened boxes on
    the prediction itself.
    """
    if eps_obj < 0 or eps_con < 0:
        raise ValueError("radii must be nonnegative")
    d = p * Tf
    out = costs.output
    yr = out.ref(d)
    quadratic = out.variant is CostVariant.QUADRATIC
    N = cost_offsets.shape[1]
    robust = con_offsets is not None
    y_lo, y_hi = cons.y_box(p, Tf)
    u_lo, u_hi = cons.u_box(m, Tf)
    box_lo, box_hi = np.isfinite(y_lo), np.isfinite(y_hi)
    use_box = bool(box_lo.any() or box_hi.any())

    # variable layout
    layout: dict[str, slice] = {}
    pos = 0

    def take(name: str, size: int) -> None:
        nonlocal pos
        layout[name] = slice(pos, pos + size)
        pos += size

    take("x", nx)
    if l1_weight > 0:
        take("t_g", nx)
    if not quadratic:
        take("t_out", d)
    if robust and use_box:
        n_con = con_offsets.shape[1]
        take("tau", 1)
        take("s", n_con)
        take("v", 1)
    elif use_box:
        take("sigma", d)
    n = pos

    def embed(block: np.ndarray, name: str) -> np.ndarray:
        out_ = np.zeros((block.shape[0], n))
        out_[:, layout[name]] = block
        return out_

    H = np.zeros((n, n))
    f = np.zeros(n)
    constant = 0.0
    ineq = _Rows(n)
    equ = _Rows(n)
    sx = layout["x"]

    # input cost ||Wu x + u0||_R^2
    Rbar = np.kron(np.eye(Tf), costs.R)
    H[sx, sx] += 2.0 * Wu.T @ Rbar @ Wu
    f[sx] += 2.0 * Wu.T @ Rbar @ u0
    constant += float(u0 @ Rbar @ u0)
    if x_quad is not None:
        H[sx, sx] += x_quad

    # output cost averaged over the cost scenarios
    base = w0 - yr  # prediction error offset
    if quadratic:
        Qbar = np.kron(np.eye(Tf), out.Q)
        cbar = cost_offsets.mean(axis=1)
        H[sx, sx] += 2.0 * Wy.T @ Qbar @ Wy
        f[sx] += 2.0 * Wy.T @ Qbar @ (base + cbar)
        e0 = base + cbar
        spread = cost_offsets - cbar[:, None]
        constant += float(e0 @ Qbar @ e0) + float(np.einsum("ik,ij,jk->", spread, Qbar, spread)) / N
    else:
        a_pos, a_neg = out.weights()
        st = layout["t_out"]
        f[st] = 1.0
        for j in range(d):
            slopes, icpt = piecewise_mean(cost_offsets[j], a_pos, a_neg)
            # slope * (Wy[j] x + base_j) + icpt <= t_j
            A = np.zeros((slopes.size, n))
            A[:, sx] = slopes[:, None] * Wy[j][None, :]
            A[:, st.start + j] = -1.0
            ineq.add(A, -(icpt + slopes * base[j]))
    constant += lipschitz(out, r, d) * eps_obj if eps_obj > 0 else 0.0

    # l1 regularization on x via t_g >= |x|
    if l1_weight > 0:
        stg = layout["t_g"]
        f[stg] = l1_weight
        I = np.eye(nx)
        ineq.add(embed(I, "x") - embed(I, "t_g"), np.zeros(nx))
        ineq.add(-embed(I, "x") - embed(I, "t_g"), np.zeros(nx))

    # hard input box
    for sel, sign, bound in ((np.isfinite(u_hi), 1.0, u_hi), (np.isfinite(u_lo), -1.0, u_lo)):
        if sel.any():
            ineq.add(embed(sign * Wu[sel], "x"), sign * (bound[sel] - u0[sel]))

    # output constraints
    if robust and use_box:
        beta = cons.beta
        n_con = con_offsets.shape[1]
        lcon = lipschitz(cons, r, d)
        # -beta tau + L_con eps_con + mean(s) - v <= 0
        row = np.zeros(n)
        row[layout["tau"]] = -beta
        row[layout["s"]] = 1.0 / n_con
        row[layout["v"]] = -1.0
        ineq.add(row, -lcon * eps_con)
        # tau + h(y_i) <= s_i, one row per finite bound component
        for i in range(n_con):
            y0 = w0 + con_offsets[:, i]
            for sel, sign, bound in ((box_hi, 1.0, y_hi), (box_lo, -1.0, y_lo)):
                if not sel.any():
                    continue
                k = int(sel.sum())
                A = np.zeros((k, n))
                A[:, sx] = sign * Wy[sel]
                A[:, layout["tau"]] = 1.0
                A[:, layout["s"].start + i] = -1.0
                ineq.add(A, sign * (bound[sel] - y0[sel]))
        ineq.add(-embed(np.eye(n_con), "s"), np.zeros(n_con))
        ineq.add(-embed(np.eye(1), "v"), np.zeros(1))
        H[layout["v"], layout["v"]] += 2.0 * cons.soft_penalty_cvar
    elif use_box:
        ss = layout["sigma"]
        for sel, sign, bound in ((box_hi, 1.0, y_hi), (box_lo, -1.0, y_lo)):
            if sel.any():
                A = np.zeros((int(sel.sum()), n))
                A[:, sx] = sign * Wy[sel]
                A[:, ss] = -np.eye(d)[sel]
                ineq.add(A, sign * (bound[sel] - w0[sel]))
        ineq.add(-embed(np.eye(d), "sigma"), np.zeros(d))
        H[ss, ss] += 2.0 * cons.soft_penalty_box * np.eye(d)

    if eq is not None:
        equ.add(embed(eq[0], "x"), eq[1])
    A_eq, b_eq = equ.stack()
    A_in, b_in = ineq.stack()
    H = 0.5 * (H + H.T)
    info = {
        "kind": kind, "Wy": Wy, "w0": w0, "Wu": Wu, "u0": u0, "p": p, "m": m, "Tf": Tf,
        "cost_offsets": cost_offsets, "con_offsets": con_offsets, "costs": costs, "cons": cons,
        "eps_obj": eps_obj, "eps_con": eps_con, "r": r, "l1_weight": l1_weight,
    }
    return ConvexProgram(H=H, f=f, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in, constant=constant, layout=layout, info=info)


def _check_past(u_p, y_p, m: int, p: int, Tp: int) -> tuple[np.ndarray, np.ndarray]:
    u_p = np.asarray(u_p, dtype=float).reshape(-1)
    y_p = np.asarray(y_p, dtype=float).reshape(-1)
    if u_p.size != m * Tp or y_p.size != p * Tp:
        raise ValueError(f"past window has {u_p.size} inputs and {y_p.size} outputs, expected {m * Tp} and {p * Tp}")
    return u_p, y_p


def build_spc_form(
    pred: SpcPredictor,
    u_p: np.ndarray,
    y_p: np.ndarray,
    costs: Costs,
    cons: ConstraintSpec,
    eps_obj: float,
    eps_con: float,
    r: float = 2.0,
) -> ConvexProgram:
    """Robust scenario program in the input ``u_f`` with atoms ``Khat m_f + xi_i``.

    The objective averages ``f2`` over all ``N`` residuals; the CVaR
    constraint uses the evenly spaced subset from :func:`constraint_subset`.
    """
    m, p, Tp, Tf = pred.m, pred.p, pred.Tp, pred.Tf
    u_p, y_p = _check_past(u_p, y_p, m, p, Tp)
    K_past, K_uf = pred.split()
    w0 = K_past @ np.concatenate([u_p, y_p])
    idx = constraint_subset(pred.N, cons.n_con_residuals)
    return _assemble(
        kind=Kind.DR_SPC, nx=m * Tf, Wy=K_uf, w0=w0, Wu=np.eye(m * Tf), u0=np.zeros(m * Tf),
        costs=costs, cons=cons, p=p, m=m, Tf=Tf,
        cost_offsets=pred.residuals, con_offsets=pred.residuals[:, idx],
        eps_obj=eps_obj, eps_con=eps_con, r=r,
    )


def build_direct_form(
    part: HankelPartition,
    pred: SpcPredictor,
    u_p: np.ndarray,
    y_p: np.ndarray,
    costs: Costs,
    cons: ConstraintSpec,
    eps_obj: float,
    eps_con: float,
    r: float = 2.0,
) -> ConvexProgram:
    """Robust program over Hankel combinations ``g = V z`` (``z`` of length rank(M)).

    Equalities ``Up g = u_p`` and ``Yp g = y_p``; scenario atoms
    ``Yf g + Yf (I - P) e_i``.
    """
    m, p, Tp, Tf = part.m, part.p, part.Tp, part.Tf
    u_p, y_p = _check_past(u_p, y_p, m, p, Tp)
    V = pred.V
    idx = constraint_subset(pred.N, cons.n_con_residuals)
    Aeq = np.vstack([part.Up @ V, part.Yp @ V])
    return _assemble(
        kind=Kind.DRDDPC, nx=V.shape[1], Wy=part.Yf @ V, w0=np.zeros(p * Tf), Wu=part.Uf @ V, u0=np.zeros(m * Tf),
        costs=costs, cons=cons, p=p, m=m, Tf=Tf,
        cost_offsets=pred.residuals, con_offsets=pred.residuals[:, idx],
        eps_obj=eps_obj, eps_con=eps_con, r=r, eq=(Aeq, np.concatenate([u_p, y_p])),
    )


def build_spc_nominal(pred: SpcPredictor, u_p: np.ndarray, y_p: np.ndarray, costs: Costs, cons: ConstraintSpec) -> ConvexProgram:
    """Certainty-equivalent SPC: cost on ``Khat m_f`` only, output boxes softened."""
    m, p, Tp, Tf = pred.m, pred.p, pred.Tp, pred.Tf
    u_p, y_p = _check_past(u_p, y_p, m, p, Tp)
    K_past, K_uf = pred.split()
    return _assemble(
        kind=Kind.SPC, nx=m * Tf, Wy=K_uf, w0=K_past @ np.concatenate([u_p, y_p]), Wu=np.eye(m * Tf),
        u0=np.zeros(m * Tf), costs=costs, cons=cons, p=p, m=m, Tf=Tf,
        cost_offsets=np.zeros((p * Tf, 1)), con_offsets=None,
    )


def build_reg_deepc(
    part: HankelPartition,
    u_p: np.ndarray,
    y_p: np.ndarray,
    costs: Costs,
    cons: ConstraintSpec,
    lambda_g: float,
) -> ConvexProgram:
    """l1-regularized DeePC: ``f1(Uf g) + f2(Yf g) + lambda_g ||g||_1`` with ``Up g = u_p``, ``Yp g = y_p``."""
    if lambda_g < 0:
        raise ValueError("lambda_g must be nonnegative")
    m, p, Tp, Tf = part.m, part.p, part.Tp, part.Tf
    u_p, y_p = _check_past(u_p, y_p, m, p, Tp)
    Aeq = np.vstack([part.Up, part.Yp])
    return _assemble(
        kind=Kind.REG_DEEPC, nx=part.N, Wy=part.Yf, w0=np.zeros(p * Tf), Wu=part.Uf, u0=np.zeros(m * Tf),
        costs=costs, cons=cons, p=p, m=m, Tf=Tf,
        cost_offsets=np.zeros((p * Tf, 1)), con_offsets=None,
        l1_weight=lambda_g, eq=(Aeq, np.concatenate([u_p, y_p])),
    )


@dataclass(frozen=True)
class ControlSolution:
    """Named view of a solved program.

    ``g`` is the Hankel combination for Hankel-based programs and ``None``
    for programs in ``u_f``. ``cvar_lhs`` is ``-beta tau + L_con eps_con +
    mean(s)`` (``None`` without a CVaR constraint); ``soft_violation`` is the
    CVaR slack ``v`` or the largest box slack.
    """

    u_f: np.ndarray
    y_pred: np.ndarray
    objective: float
    g: np.ndarray | None = None
    tau: float | None = None
    s: np.ndarray | None = None
    cvar_lhs: float | None = None
    soft_violation: float = 0.0


def extract_solution(program: ConvexProgram, raw: np.ndarray, V: np.ndarray | None = None) -> ControlSolution:
    """Read the named blocks of ``raw``.

    Args:
        program: program produced by one of the builders.
        raw: solver output of length ``program.n``.
        V: row-space basis; when given for a direct-form program, ``g = V z``.
    """
    raw = np.asarray(raw, dtype=float).reshape(-1)
    if raw.size != program.n:
        raise ValueError(f"raw vector has length {raw.size}, program has {program.n} variables")
    info = program.info
    x = raw[program.layout["x"]]
    u_f = info["Wu"] @ x + info["u0"]
    y_pred = info["Wy"] @ x + info["w0"]
    kind = info["kind"]
    g = None
    if kind is Kind.REG_DEEPC:
        g = x.copy()
    elif kind is Kind.DRDDPC and V is not None:
        g = V @ x
    tau = s = cvar_lhs = None
    soft = 0.0
    if "tau" in program.layout:
        tau = float(raw[program.layout["tau"]][0])
        s = raw[program.layout["s"]].copy()
        cons: ConstraintSpec = info["cons"]
        d = info["p"] * info["Tf"]
        cvar_lhs = -cons.beta * tau + lipschitz(cons, info["r"], d) * info["eps_con"] + float(s.mean())
        soft = max(float(raw[program.layout["v"]][0]), 0.0)
    elif "sigma" in program.layout:
        soft = max(float(raw[program.layout["sigma"]].max(initial=0.0)), 0.0)
    return ControlSolution(
        u_f=u_f, y_pred=y_pred, objective=program.objective(raw), g=g, tau=tau, s=s, cvar_lhs=cvar_lhs, soft_violation=soft,
    )


def evaluate_objective(program: ConvexProgram, sol: ControlSolution) -> float:
    """Independent re-evaluation of a builder's objective from its cost terms.

    Sums ``f1``, the scenario-mean of ``f2``, the Lipschitz radius term, the
    l1 regularizer and the soft-constraint penalties at the optimal slacks.
    """
    info = program.info
    costs: Costs = info["costs"]
    cons: ConstraintSpec = info["cons"]
    p, Tf = info["p"], info["Tf"]
    d = p * Tf
    atoms = sol.y_pred[:, None] + info["cost_offsets"]
    total = costs.input_cost(sol.u_f) + float(np.mean(costs.output.evaluate(atoms)))
    if info["eps_obj"] > 0:
        total += lipschitz(costs.output, info["r"], d) * info["eps_obj"]
    if sol.g is not None and info["l1_weight"] > 0:
        total += info["l1_weight"] * float(np.abs(sol.g).sum())
    y_lo, y_hi = cons.y_box(p, Tf)
    if "tau" in program.layout:
        total += cons.soft_penalty_cvar * max(sol.cvar_lhs, 0.0) ** 2
    elif "sigma" in program.layout:
        with np.errstate(invalid="ignore"):
            viol = np.maximum(np.maximum(sol.y_pred - y_hi, y_lo - sol.y_pred), 0.0)
        total += cons.soft_penalty_box * float(np.sum(viol**2))
    return total
