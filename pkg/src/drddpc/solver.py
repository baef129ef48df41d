"""Primal-dual interior-point solver for :class:`~drddpc.program.ConvexProgram`.

Mehrotra predictor-corrector on the dense reduced KKT system, with row
equilibration, a small primal-dual regularization and iterative refinement.
Every operation is a fixed sequence of dense LAPACK/BLAS calls, so identical
inputs give bit-identical iterates. When the iteration fails, two auxiliary
LPs (minimum constraint violation, recession direction) decide between
``infeasible``, ``unbounded`` and ``max_iterations``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from drddpc.program import ConvexProgram


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Solution:
    z: np.ndarray
    objective: float
    status: Status
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    y_eq: np.ndarray
    y_in: np.ndarray

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


_REG = 1e-10
_REFINE = 3
_STEP_FRACTION = 0.99
_BLOWUP = 1e12
_POLISH_REG = 1e-11
_POLISH_GAP = 1e-5
_STALL_ITERS = 8


def _row_scale(A: np.ndarray) -> np.ndarray:
    norms = np.abs(A).max(axis=1, initial=0.0)
    return np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)


def _residuals(H, f, A, b, G, h, z, y, lam):
    """Dual and primal residuals in the infinity norm, with their normalizers.

    A normalizer is ``1 +`` the largest term its residual balances. Normalized
    residuals make the tolerances relative for programs with large penalty
    weights or bounds.
    """
    Hz, Aty, Gtl = H @ z, A.T @ y, G.T @ lam
    rd = Hz + f + Aty + Gtl
    Az, Gz = A @ z, G @ z
    pe = np.abs(Az - b).max(initial=0.0)
    pi = np.maximum(Gz - h, 0.0).max(initial=0.0)
    d_scale = 1.0 + max(np.abs(v).max(initial=0.0) for v in (Hz, f, Aty, Gtl))
    p_scale = 1.0 + max(np.abs(v).max(initial=0.0) for v in (Az, b, Gz, h))
    return float(np.abs(rd).max(initial=0.0)), float(max(pe, pi)), d_scale, p_scale


def check_kkt(program: ConvexProgram, z: np.ndarray, y_eq: np.ndarray, y_in: np.ndarray) -> tuple[float, float, float]:
    """KKT residual norms ``(stationarity, primal, complementarity)`` in the infinity norm.

    Complementarity also absorbs dual infeasibility (negative ``y_in``).
    """
    z = np.asarray(z, dtype=float)
    y_eq = np.asarray(y_eq, dtype=float).reshape(program.n_eq)
    y_in = np.asarray(y_in, dtype=float).reshape(program.n_in)
    stat = program.H @ z + program.f + program.A_eq.T @ y_eq + program.A_in.T @ y_in
    slack = program.b_in - program.A_in @ z
    primal = max(
        np.abs(program.A_eq @ z - program.b_eq).max(initial=0.0),
        np.maximum(-slack, 0.0).max(initial=0.0),
    )
    comp = max(
        np.abs(y_in * slack).max(initial=0.0),
        np.maximum(-y_in, 0.0).max(initial=0.0),
    )
    return float(np.abs(stat).max(initial=0.0)), float(primal), float(comp)


def solve(
    program: ConvexProgram,
    tol_p: float = 1e-6,
    tol_d: float = 1e-6,
    max_iter: int = 200,
    z0: np.ndarray | None = None,
    tol_gap: float = 1e-9,
) -> Solution:
    """Solve ``program`` to primal/dual residuals ``tol_p``/``tol_d``.

    Residuals are infinity norms in the original units divided by ``1 +`` the
    largest term they balance (``Hz, f, A'y, G'lam`` for stationarity;
    ``Az, b, Gz, h`` for feasibility); the returned solution reports them in
    the same normalized form.

    ``tol_gap`` bounds the complementarity gap relative to ``1 + |objective|``.
    ``z0`` only seeds the starting point.
    """
    sol = _ipm(program, tol_p, tol_d, tol_gap, max_iter, z0)
    if sol.status is Status.OPTIMAL:
        return sol
    status = _classify(program, tol_p)
    return Solution(
        z=sol.z, objective=sol.objective, status=status, primal_residual=sol.primal_residual,
        dual_residual=sol.dual_residual, gap=sol.gap, iterations=sol.iterations, y_eq=sol.y_eq, y_in=sol.y_in,
    )


def _ipm(program: ConvexProgram, tol_p, tol_d, tol_gap, max_iter, z0) -> Solution:
    n, me, mi = program.n, program.n_eq, program.n_in
    H0, f0 = program.H, program.f
    A0, b0, G0, h0 = program.A_eq, program.b_eq, program.A_in, program.b_in

    d_eq = _row_scale(A0)
    d_in = _row_scale(G0)
    A, b = A0 * d_eq[:, None], b0 * d_eq
    G, h = G0 * d_in[:, None], h0 * d_in
    c_obj = 1.0 / max(1.0, float(np.abs(H0).max(initial=0.0)), float(np.abs(f0).max(initial=0.0)))
    H, f = H0 * c_obj, f0 * c_obj

    I_eq = np.eye(me)

    class _Factor:
        """Regularized quasidefinite KKT factorization ``[K11 + d I, A'; A, -d I]``.

        The (1,1) block is factored by Cholesky with a Schur complement over
        the equality rows; an LU of the full matrix is the fallback when
        Cholesky breaks down.
        """

        def __init__(self, W):
            if mi:
                # G' W G through a symmetric rank-k update of sqrt(W) G
                up = sla.blas.dsyrk(1.0, G * np.sqrt(W)[:, None], trans=1)
                self.K11 = H + np.triu(up) + np.triu(up, 1).T
            else:
                self.K11 = H.copy()
            K11r = self.K11 + _REG * np.eye(n)
            self.lu = None
            try:
                self.c11 = sla.cho_factor(K11r, check_finite=False)
                if me:
                    self.KA = sla.cho_solve(self.c11, A.T, check_finite=False)
                    self.cS = sla.cho_factor(A @ self.KA + _REG * I_eq, check_finite=False)
                if not np.all(np.isfinite(self.c11[0])):
                    raise np.linalg.LinAlgError("non-finite factor")
            except (np.linalg.LinAlgError, ValueError):
                Kr = np.zeros((n + me, n + me))
                Kr[:n, :n] = K11r
                Kr[n:, :n] = A
                Kr[:n, n:] = A.T
                Kr[n:, n:] = -_REG * I_eq
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", sla.LinAlgWarning)
                    self.lu = sla.lu_factor(Kr, check_finite=False)

        def _solve_reg(self, rhs):
            if self.lu is not None:
                return sla.lu_solve(self.lu, rhs, check_finite=False)
            r1, r2 = rhs[:n], rhs[n:]
            x1 = sla.cho_solve(self.c11, r1, check_finite=False)
            if not me:
                return x1
            y = sla.cho_solve(self.cS, A @ x1 - r2, check_finite=False)
            return np.concatenate([x1 - self.KA @ y, y])

        def apply(self, x):
            xz, xy = x[:n], x[n:]
            return np.concatenate([self.K11 @ xz + A.T @ xy, A @ xz])

    def factor(W):
        fac = _Factor(W)
        return fac, fac

    def kkt_solve(K, lu, rhs):
        x = K._solve_reg(rhs)
        floor = 1e-15 * (1.0 + np.abs(rhs).max(initial=0.0))
        for _ in range(_REFINE):
            res = rhs - K.apply(x)
            if not np.abs(res).max(initial=0.0) > floor:
                break
            x = x + K._solve_reg(res)
        return x

    # starting point: regularized least-squares solve with unit weights, then
    # shift (s, lam) into the positive orthant
    if z0 is None:
        K, lu = factor(np.ones(mi))
        x = kkt_solve(K, lu, np.concatenate([-f + G.T @ h, b]))
        z = x[:n]
    else:
        z = np.asarray(z0, dtype=float).reshape(n).copy()
    y = np.zeros(me)
    s = h - G @ z
    lam = -s.copy()
    if mi:
        s = s + max(-1.5 * s.min(), 0.0)
        lam = lam + max(-1.5 * lam.min(), 0.0)
        sl = float(s @ lam)
        if sl <= 0.0 or not np.isfinite(sl):
            s = s + 1.0
            lam = lam + 1.0
        else:
            s = s + 0.5 * sl / lam.sum()
            lam = lam + 0.5 * sl / s.sum()
        s = np.maximum(s, 1e-8)
        lam = np.maximum(lam, 1e-8)

    def unscaled(z, y, lam):
        return y * d_eq / c_obj, lam * d_in / c_obj

    def polish(z, s, lam):
        # equality-constrained KKT on the identified active set
        act = lam > s
        Ga = G[act]
        na = Ga.shape[0]
        dim_p = n + me + na
        K = np.zeros((dim_p, dim_p))
        K[:n, :n] = H
        K[n:n + me, :n] = A
        K[:n, n:n + me] = A.T
        K[n + me:, :n] = Ga
        K[:n, n + me:] = Ga.T
        Kr = K.copy()
        delta = _POLISH_REG * (1.0 + np.abs(np.diag(H)).max(initial=0.0))
        Kr[np.diag_indices(dim_p)] += np.concatenate([np.full(n, delta), np.full(me + na, -delta)])
        rhs = np.concatenate([-f, b, h[act]])
        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu = sla.lu_factor(Kr, check_finite=False)
            x = sla.lu_solve(lu, rhs, check_finite=False)
            for _ in range(2 * _REFINE):
                x = x + sla.lu_solve(lu, rhs - K @ x, check_finite=False)
        if not np.all(np.isfinite(x)):
            return None
        zp, yp = x[:n], x[n:n + me]
        lp = np.zeros(mi)
        lp[act] = x[n + me:]
        y_o, lam_o = unscaled(zp, yp, lp)
        dres_p, pres_p, dsc, psc = _residuals(H0, f0, A0, b0, G0, h0, zp, y_o, lam_o)
        comp = float(np.abs(lam_o * (h0 - G0 @ zp)).sum())
        dres_p = max(dres_p, float(np.maximum(-lam_o, 0.0).max(initial=0.0)))
        return zp, y_o, lam_o, pres_p, dres_p, pres_p / psc, dres_p / dsc, comp

    it = 0
    status = Status.MAX_ITERATIONS
    dres = pres = gap = np.inf
    polished = None
    best = None
    best_merit = np.inf
    stall = 0
    while True:
        y_o, lam_o = unscaled(z, y, lam)
        dabs, pabs, dsc, psc = _residuals(H0, f0, A0, b0, G0, h0, z, y_o, lam_o)
        dres, pres = dabs / dsc, pabs / psc
        obj = program.objective(z)
        gap = float(s @ lam) / c_obj if mi else 0.0
        gap_tol = tol_gap * (1.0 + abs(obj))
        # strict: absolute residuals within tolerance; loose: normalized ones
        strict = pabs <= tol_p and dabs <= tol_d and gap <= gap_tol
        loose = pres <= tol_p and dres <= tol_d and gap <= gap_tol
        merit = max(pres / tol_p, dres / tol_d, gap / gap_tol)
        if merit < best_merit:
            best_merit, stall = merit, 0
            best = (z.copy(), y.copy(), s.copy(), lam.copy(), pres, dres, gap)
        else:
            stall += 1
        if mi and (loose or gap <= _POLISH_GAP * (1.0 + abs(obj))):
            cand = polish(z, s, lam)
            if cand is not None:
                zp, yp_o, lp_o, pa, da, pr, dr, comp = cand
                comp_ok = comp <= tol_gap * (1.0 + abs(program.objective(zp)))
                strict_p = comp_ok and pa <= tol_p and da <= tol_d
                loose_p = comp_ok and pr <= tol_p and dr <= tol_d
                if strict_p or (loose_p and not loose):
                    polished = (zp, yp_o, lp_o, pr, dr, comp)
                    status = Status.OPTIMAL
                    break
        if strict:
            status = Status.OPTIMAL
            break
        if it >= max_iter or stall >= _STALL_ITERS:
            break
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(lam))):
            break
        if np.abs(z).max(initial=0.0) > _BLOWUP or np.abs(lam).max(initial=0.0) > _BLOWUP:
            break
        it += 1

        rd = H @ z + f + A.T @ y + G.T @ lam
        re = A @ z - b
        ri = G @ z + s - h
        with np.errstate(all="ignore"):
            W = lam / s
            K, lu = factor(W)

        def direction(rc):
            rhs = np.concatenate([-rd + G.T @ ((rc - lam * ri) / s), -re])
            with np.errstate(all="ignore"):
                x = kkt_solve(K, lu, rhs)
            dz, dy = x[:n], x[n:]
            ds = -ri - G @ dz
            dlam = (-rc - lam * ds) / s
            return dz, dy, ds, dlam

        def max_step(v, dv):
            neg = dv < 0
            if not np.any(neg):
                return 1.0
            return float(min(1.0, np.min(-v[neg] / dv[neg])))

        mu = float(s @ lam) / mi if mi else 0.0
        dz, dy, ds, dlam = direction(s * lam)
        if not all(np.all(np.isfinite(v)) for v in (dz, ds, dlam)):
            break
        if mi:
            a_aff = min(max_step(s, ds), max_step(lam, dlam))
            mu_aff = float((s + a_aff * ds) @ (lam + a_aff * dlam)) / mi
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            dz, dy, ds, dlam = direction(s * lam + ds * dlam - sigma * mu)
            alpha = min(1.0, _STEP_FRACTION * min(max_step(s, ds), max_step(lam, dlam)))
        else:
            alpha = 1.0
        if not all(np.all(np.isfinite(v)) for v in (dz, dy, ds, dlam)):
            break  # numerical breakdown: keep the last finite iterate
        z = z + alpha * dz
        y = y + alpha * dy
        s = s + alpha * ds
        lam = lam + alpha * dlam
        if mi and alpha < 1e-12:
            break

    if polished is not None:
        zp, y_o, lam_o, pres, dres, gap = polished
        return Solution(
            z=zp, objective=program.objective(zp), status=status, primal_residual=pres, dual_residual=dres,
            gap=gap, iterations=it, y_eq=y_o, y_in=lam_o,
        )
    if status is not Status.OPTIMAL and best is not None:
        z, y, s, lam, pres, dres, gap = best
        if best_merit <= 1.0:
            status = Status.OPTIMAL
    y_o, lam_o = unscaled(z, y, lam)
    return Solution(
        z=z, objective=program.objective(z), status=status, primal_residual=pres, dual_residual=dres,
        gap=gap, iterations=it, y_eq=y_o, y_in=lam_o,
    )


def _classify(program: ConvexProgram, tol: float) -> Status:
    """Decide why the main iteration failed."""
    n, me, mi = program.n, program.n_eq, program.n_in
    A, b, G, h = program.A_eq, program.b_eq, program.A_in, program.b_in
    scale = 1.0 + max(np.abs(b).max(initial=0.0), np.abs(h).max(initial=0.0))

    # minimum total violation: variables (z, t_eq, t_in)
    nv = n + me + mi
    rows, rhs = [], []
    if me:
        rows.append(np.hstack([A, -np.eye(me), np.zeros((me, mi))]))
        rows.append(np.hstack([-A, -np.eye(me), np.zeros((me, mi))]))
        rhs += [b, -b]
    if mi:
        rows.append(np.hstack([G, np.zeros((mi, me)), -np.eye(mi)]))
        rows.append(np.hstack([np.zeros((mi, n + me)), -np.eye(mi)]))
        rhs += [h, np.zeros(mi)]
    if rows:
        phase1 = ConvexProgram(
            H=np.zeros((nv, nv)), f=np.concatenate([np.zeros(n), np.ones(me + mi)]),
            A_eq=np.zeros((0, nv)), b_eq=np.zeros(0), A_in=np.vstack(rows), b_in=np.concatenate(rhs),
        )
        p1 = _ipm(phase1, 1e-9, 1e-9, 1e-8, 200, None)
        if p1.status is Status.OPTIMAL and p1.objective > tol * scale:
            return Status.INFEASIBLE

    # recession direction: H d = 0, A d = 0, G d <= 0, |d| <= 1, f'd < 0
    Hn = program.H
    eq = np.vstack([Hn, A]) if me else Hn
    ray = ConvexProgram(
        H=np.zeros((n, n)), f=program.f,
        A_eq=eq, b_eq=np.zeros(eq.shape[0]),
        A_in=np.vstack([G, np.eye(n), -np.eye(n)]), b_in=np.concatenate([np.zeros(mi), np.ones(2 * n)]),
    )
    rr = _ipm(ray, 1e-9, 1e-9, 1e-8, 200, None)
    if rr.status is Status.OPTIMAL and rr.objective < -1e-7 * (1.0 + np.abs(program.f).max(initial=0.0)):
        return Status.UNBOUNDED
    return Status.MAX_ITERATIONS
