"""Least-squares SPC predictor, row-space projector, and residual scenarios."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from drddpc.data import HankelPartition

DEFAULT_RCOND = 1e-12


@dataclass(frozen=True)
class SpcPredictor:
    """Fitted multi-step predictor ``y_f ~ Khat m_f`` and its residuals.

    Attributes:
        Khat: (p*Tf, m*(Tp+Tf) + p*Tp) least-squares predictor ``Yf M^+``.
        V: (N, rank) orthonormal basis of the row space of ``M``.
        residuals: (p*Tf, N) matrix ``Yf (I - P)``; column ``i`` is the
            residual of offline window ``i``.
        svd_cutoff: absolute singular-value threshold used for ``M^+``.
        singular_values: all singular values of ``M``.
    """

    Khat: np.ndarray
    V: np.ndarray
    residuals: np.ndarray
    svd_cutoff: float
    singular_values: np.ndarray
    Tp: int
    Tf: int
    m: int
    p: int

    @property
    def rank(self) -> int:
        return self.V.shape[1]

    @property
    def N(self) -> int:
        return self.V.shape[0]

    @property
    def P(self) -> np.ndarray:
        """Orthogonal projector ``M^+ M`` onto the row space of ``M`` (N x N)."""
        return self.V @ self.V.T

    @property
    def regressor_dim(self) -> int:
        return self.Khat.shape[1]

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """Columns of ``Khat`` acting on ``(u_p, y_p)`` and on ``u_f``."""
        n_past = (self.m + self.p) * self.Tp
        return self.Khat[:, :n_past], self.Khat[:, n_past:]


@dataclass(frozen=True)
class ScenarioSet:
    """Uniform empirical distribution over ``center + residuals[:, i]``."""

    atoms: np.ndarray  # (p*Tf, N)
    center: np.ndarray

    @property
    def N(self) -> int:
        return self.atoms.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.N, 1.0 / self.N)


def fit(part: HankelPartition, rcond: float = DEFAULT_RCOND) -> SpcPredictor:
    """Estimate ``Khat = Yf M^+`` through a truncated SVD of the regressor.

    Singular values below ``sigma_max * max(M.shape) * rcond`` are treated as
    zero; the retained right singular vectors define the projector and are
    reused downstream, so every consumer sees the same rank.
    """
    M = part.M
    Yf = part.Yf
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(Yf))):
        raise ValueError("offline data contains non-finite entries")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    cutoff = float(s[0] * max(M.shape) * rcond) if s.size and s[0] > 0 else 0.0
    r = int(np.sum(s > cutoff))
    U_r, s_r, V_r = U[:, :r], s[:r], Vt[:r].T
    M_pinv = (V_r / s_r) @ U_r.T
    Khat = Yf @ M_pinv
    residuals = Yf - (Yf @ V_r) @ V_r.T
    return SpcPredictor(
        Khat=Khat, V=np.ascontiguousarray(V_r), residuals=residuals, svd_cutoff=cutoff,
        singular_values=s, Tp=part.Tp, Tf=part.Tf, m=part.m, p=part.p,
    )


def regressor(u_p: np.ndarray, y_p: np.ndarray, u_f: np.ndarray) -> np.ndarray:
    """Stack ``m_f = [u_p; y_p; u_f]`` (each already time-major flattened)."""
    return np.concatenate([np.ravel(u_p), np.ravel(y_p), np.ravel(u_f)])


def _check_mf(pred: SpcPredictor, m_f: np.ndarray) -> np.ndarray:
    m_f = np.asarray(m_f, dtype=float).reshape(-1)
    if m_f.size != pred.regressor_dim:
        raise ValueError(f"m_f has length {m_f.size}, expected {pred.regressor_dim}")
    return m_f


def predict(pred: SpcPredictor, m_f: np.ndarray) -> np.ndarray:
    return pred.Khat @ _check_mf(pred, m_f)


def scenarios(pred: SpcPredictor, m_f: np.ndarray) -> ScenarioSet:
    center = predict(pred, m_f)
    return ScenarioSet(atoms=center[:, None] + pred.residuals, center=center)


def oracle_residuals(K_true: np.ndarray, part: HankelPartition) -> np.ndarray:
    """Residuals ``Yf - K M`` of a known predictor on the offline data."""
    M = part.M
    if K_true.shape != (part.Yf.shape[0], M.shape[0]):
        raise ValueError(f"K has shape {K_true.shape}, expected {(part.Yf.shape[0], M.shape[0])}")
    return part.Yf - K_true @ M


def oracle_scenarios(K_true: np.ndarray, part: HankelPartition, m_f: np.ndarray) -> ScenarioSet:
    center = K_true @ np.asarray(m_f, dtype=float).reshape(-1)
    return ScenarioSet(atoms=center[:, None] + oracle_residuals(K_true, part), center=center)
