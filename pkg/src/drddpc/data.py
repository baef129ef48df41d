"""Offline trajectories, Hankel matrices, and the past/future data partition."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from os import PathLike
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from drddpc.model import NoiseSpec, StateSpaceModel


class RankDeficiencyWarning(UserWarning):
    """The regressor matrix is not full row rank."""


@dataclass(frozen=True)
class Trajectory:
    """Input/output record with ``u`` of shape (T, m) and ``y`` of shape (T, p)."""

    u: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if u.shape[0] != y.shape[0]:
            raise ValueError(f"u has {u.shape[0]} rows but y has {y.shape[0]}")
        if u.shape[0] < 1:
            raise ValueError("trajectory must contain at least one sample")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def T(self) -> int:
        return self.u.shape[0]

    @property
    def m(self) -> int:
        return self.u.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]


def hankel(z: np.ndarray, L: int) -> np.ndarray:
    """Depth-``L`` block Hankel matrix of a (T, eta) sequence.

    Column ``j`` stacks ``z[j], ..., z[j+L-1]``; the result has shape
    ``(eta * L, T - L + 1)``.

    >>> hankel(np.array([1.0, 2.0, 3.0, 4.0]), 2)
    array([[1., 2., 3.],
           [2., 3., 4.]])
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    T, eta = z.shape
    if L < 1:
        raise ValueError(f"depth must be positive, got {L}")
    if T < L:
        raise ValueError(f"sequence of length {T} is shorter than depth {L}")
    cols = T - L + 1
    windows = np.lib.stride_tricks.sliding_window_view(z, (L, eta))[:, 0]  # (cols, L, eta)
    return np.ascontiguousarray(windows.reshape(cols, L * eta).T)


@dataclass(frozen=True)
class HankelPartition:
    """Past/future blocks of the input and output Hankel matrices.

    ``M`` is the regressor ``[Up; Yp; Uf]``.
    """

    Up: np.ndarray
    Uf: np.ndarray
    Yp: np.ndarray
    Yf: np.ndarray
    Tp: int
    Tf: int
    rank_deficient: bool = False

    @property
    def M(self) -> np.ndarray:
        return np.vstack([self.Up, self.Yp, self.Uf])

    @property
    def L(self) -> int:
        return self.Tp + self.Tf

    @property
    def N(self) -> int:
        return self.Up.shape[1]

    @property
    def m(self) -> int:
        return self.Up.shape[0] // self.Tp

    @property
    def p(self) -> int:
        return self.Yp.shape[0] // self.Tp

    def column_window(self, i: int) -> np.ndarray:
        """``M e_i``: the regressor column of offline window ``i``."""
        return np.concatenate([self.Up[:, i], self.Yp[:, i], self.Uf[:, i]])


def partition(traj: Trajectory, Tp: int, Tf: int) -> HankelPartition:
    """Split depth ``Tp + Tf`` Hankel matrices into past and future blocks.

    Emits :class:`RankDeficiencyWarning` (and sets ``rank_deficient``) when the
    regressor is not full row rank; downstream code still works through the
    pseudoinverse.
    """
    if Tp < 1 or Tf < 1:
        raise ValueError("Tp and Tf must be positive")
    L = Tp + Tf
    if traj.T < L:
        raise ValueError(f"trajectory length {traj.T} is shorter than Tp + Tf = {L}")
    m, p = traj.m, traj.p
    Hu = hankel(traj.u, L)
    Hy = hankel(traj.y, L)
    Up, Uf = Hu[: m * Tp], Hu[m * Tp:]
    Yp, Yf = Hy[: p * Tp], Hy[p * Tp:]
    M = np.vstack([Up, Yp, Uf])
    deficient = bool(np.linalg.matrix_rank(M) < M.shape[0])
    if deficient:
        warnings.warn(
            f"regressor M ({M.shape[0]}x{M.shape[1]}) is not full row rank",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return HankelPartition(Up=Up, Uf=Uf, Yp=Yp, Yf=Yf, Tp=Tp, Tf=Tf, rank_deficient=deficient)


def excite_and_collect(
    model: StateSpaceModel,
    noise: NoiseSpec,
    T: int,
    input_std: float = 1.0,
    seed: int = 0,
) -> Trajectory:
    """Open-loop run of length ``T`` under i.i.d. Gaussian input ``N(0, input_std^2 I)``.

    Input, innovation sequence and initial state each come from their own
    seeded stream, so the trajectory is a pure function of ``seed``.
    """
    from drddpc import model as plant

    if T < 1:
        raise ValueError("T must be positive")
    u = input_std * plant.generator(seed, plant.STREAM_OFFLINE_INPUT).standard_normal((T, model.m))
    real = plant.realize_noise(noise, model.n, T, seed,
                               noise_stream=plant.STREAM_OFFLINE_NOISE,
                               x0_stream=plant.STREAM_OFFLINE_X0)
    return plant.simulate(model, real.x0, u, real.e).trajectory


def write_csv(traj: Trajectory, path: str | PathLike) -> None:
    """Write ``k,u_1..u_m,y_1..y_p`` rows with round-trip float precision."""
    header = ["k"] + [f"u_{i + 1}" for i in range(traj.m)] + [f"y_{i + 1}" for i in range(traj.p)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(traj.T):
            writer.writerow([k] + [repr(float(v)) for v in traj.u[k]] + [repr(float(v)) for v in traj.y[k]])


def read_csv(path: str | PathLike) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trajectory file")
    header = rows[0]
    if not header or header[0] != "k":
        raise ValueError(f"{path}: header must start with 'k'")
    u_cols = [i for i, name in enumerate(header) if name.startswith("u_")]
    y_cols = [i for i, name in enumerate(header) if name.startswith("y_")]
    if not u_cols or not y_cols or len(u_cols) + len(y_cols) + 1 != len(header):
        raise ValueError(f"{path}: malformed header {header}")
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no samples")
    data = np.empty((len(body), len(header) - 1))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {r + 1} has {len(row)} fields, expected {len(header)}")
        try:
            data[r] = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ValueError(f"{path}: row {r + 1}: {exc}") from None
    return Trajectory(u=data[:, [c - 1 for c in u_cols]], y=data[:, [c - 1 for c in y_cols]])
