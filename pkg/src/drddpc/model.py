"""Ground-truth stochastic LTI plant, seeded noise, and the exact multi-step predictor.

The plant is simulated in innovation form::

    x[k+1] = A x[k] + B u[k] + Ke e[k]
    y[k]   = C x[k] + D u[k] + e[k]

Independent process/measurement noise is expressible by stacking
``e = (w, v)`` and choosing ``C``/``Ke`` accordingly; only the innovation
form is needed by the rest of the toolkit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from os import PathLike
from typing import Any

import numpy as np

from drddpc.data import Trajectory

# Stream identifiers for the counter-based generator. Each (seed, stream) pair
# is an independent Philox key, so e.g. the online noise of run j is the same
# array no matter which controller consumes it.
STREAM_OFFLINE_INPUT = 0
STREAM_OFFLINE_NOISE = 1
STREAM_OFFLINE_X0 = 2
STREAM_ONLINE_NOISE = 3
STREAM_ONLINE_X0 = 4


def _as_matrix(value: Any, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if rows is not None and arr.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got shape {arr.shape}")
    if cols is not None and arr.shape[1] != cols:
        raise ValueError(f"expected {cols} columns, got shape {arr.shape}")
    return arr


def observability_matrix(A: np.ndarray, C: np.ndarray, horizon: int) -> np.ndarray:
    """Stack ``C, CA, ..., CA^(horizon-1)``."""
    blocks = []
    Ak = np.eye(A.shape[0])
    for _ in range(horizon):
        blocks.append(C @ Ak)
        Ak = Ak @ A
    return np.vstack(blocks)


def toeplitz_matrix(A: np.ndarray, B: np.ndarray, C: np.ndarray, D: np.ndarray, horizon: int) -> np.ndarray:
    """Lower block-triangular map from a stacked input window to the forced output."""
    p, m = D.shape
    markov = [D]
    Ak = np.eye(A.shape[0])
    for _ in range(1, horizon):
        markov.append(C @ Ak @ B)
        Ak = Ak @ A
    T = np.zeros((p * horizon, m * horizon))
    for i in range(horizon):
        for j in range(i + 1):
            T[i * p:(i + 1) * p, j * m:(j + 1) * m] = markov[i - j]
    return T


@dataclass(frozen=True)
class StateSpaceModel:
    """Discrete-time LTI system in innovation form.

    Attributes:
        A, B, C, D: System matrices of shapes (n,n), (n,m), (p,n), (p,m).
        Ke: Innovation gain (n,p). Zero means purely additive output noise.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = None  # type: ignore[assignment]
    Ke: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        A = _as_matrix(self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        B = _as_matrix(self.B, rows=n)
        C = _as_matrix(self.C, cols=n)
        m, p = B.shape[1], C.shape[0]
        D = np.zeros((p, m)) if self.D is None else _as_matrix(self.D, rows=p, cols=m)
        Ke = np.zeros((n, p)) if self.Ke is None else _as_matrix(self.Ke, rows=n, cols=p)
        rank = np.linalg.matrix_rank(observability_matrix(A, C, n))
        if rank < n:
            raise ValueError(f"(A, C) is not observable: observability rank {rank} < {n}")
        for name, arr in (("A", A), ("B", B), ("C", C), ("D", D), ("Ke", Ke)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian innovation law, i.i.d. over time."""

    mean: np.ndarray
    covariance: np.ndarray
    family: str = "gaussian"

    def __post_init__(self) -> None:
        if self.family != "gaussian":
            raise ValueError(f"unsupported noise family {self.family!r}")
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = _as_matrix(self.covariance, rows=mean.size, cols=mean.size)
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=0.0):
            raise ValueError("noise covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-12:
            raise ValueError("noise covariance must be positive semidefinite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def isotropic(cls, p: int, variance: float, mean: float | np.ndarray = 0.0) -> NoiseSpec:
        return cls(mean=np.broadcast_to(np.asarray(mean, dtype=float), (p,)).copy(),
                   covariance=variance * np.eye(p))

    @property
    def p(self) -> int:
        return self.mean.size

    def factor(self) -> np.ndarray:
        """Square-root factor ``L`` with ``L @ L.T == covariance`` (PSD-safe)."""
        w, U = np.linalg.eigh(self.covariance)
        return U * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class NoiseRealization:
    """One seeded draw of the innovation sequence and initial state."""

    seed: int
    e: np.ndarray
    x0: np.ndarray

    @property
    def T(self) -> int:
        return self.e.shape[0]


def generator(seed: int, stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``(seed, stream)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def sample_innovations(noise: NoiseSpec, T: int, seed: int, stream: int = STREAM_ONLINE_NOISE) -> np.ndarray:
    """Draw ``T`` innovation vectors. Row ``k`` does not depend on ``T`` (prefix stable)."""
    z = generator(seed, stream).standard_normal((T, noise.p))
    return noise.mean + z @ noise.factor().T


def realize_noise(
    noise: NoiseSpec,
    n: int,
    T: int,
    seed: int,
    noise_stream: int = STREAM_ONLINE_NOISE,
    x0_stream: int = STREAM_ONLINE_X0,
    x0_scale: float = 1.0,
) -> NoiseRealization:
    """Seeded innovation sequence of length ``T`` plus a standard-normal initial state."""
    e = sample_innovations(noise, T, seed, noise_stream)
    x0 = x0_scale * generator(seed, x0_stream).standard_normal(n)
    e.setflags(write=False)
    x0.setflags(write=False)
    return NoiseRealization(seed=int(seed), e=e, x0=x0)


def step(model: StateSpaceModel, x: np.ndarray, u: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Advance the plant one sample. Returns ``(x_next, y)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    e = np.asarray(e, dtype=float).reshape(-1)
    if x.size != model.n or u.size != model.m or e.size != model.p:
        raise ValueError(
            f"dimension mismatch: x={x.size}, u={u.size}, e={e.size} "
            f"for model (n={model.n}, m={model.m}, p={model.p})"
        )
    y = model.C @ x + model.D @ u + e
    x_next = model.A @ x + model.B @ u + model.Ke @ e
    return x_next, y


@dataclass(frozen=True)
class SimulationResult:
    trajectory: Trajectory
    states: np.ndarray  # (T+1, n), including the initial and final state


def simulate(model: StateSpaceModel, x0: np.ndarray, u_seq: np.ndarray, e_seq: np.ndarray) -> SimulationResult:
    """Iterate :func:`step` over an input and innovation sequence of equal length."""
    u_seq = np.asarray(u_seq, dtype=float).reshape(len(u_seq), -1)
    e_seq = np.asarray(e_seq, dtype=float).reshape(len(e_seq), -1)
    if u_seq.shape[0] != e_seq.shape[0]:
        raise ValueError(f"length mismatch: {u_seq.shape[0]} inputs vs {e_seq.shape[0]} noise samples")
    T = u_seq.shape[0]
    xs = np.empty((T + 1, model.n))
    ys = np.empty((T, model.p))
    xs[0] = np.asarray(x0, dtype=float).reshape(-1)
    for k in range(T):
        xs[k + 1], ys[k] = step(model, xs[k], u_seq[k], e_seq[k])
    return SimulationResult(trajectory=Trajectory(u=u_seq.copy(), y=ys), states=xs)


def true_predictor(model: StateSpaceModel, Tp: int, Tf: int) -> np.ndarray:
    """Exact noise-free multi-step predictor ``K`` with ``y_f = K [u_p; y_p; u_f]``.

    The state at the start of the past window is recovered from ``(u_p, y_p)``
    through the pseudoinverse of the extended observability matrix, then
    propagated over the future window.
    """
    if Tp < model.n:
        raise ValueError(f"Tp={Tp} must be at least the state dimension n={model.n}")
    A, B, C, D = model.A, model.B, model.C, model.D
    O_p = observability_matrix(A, C, Tp)
    if np.linalg.matrix_rank(O_p) < model.n:
        raise ValueError("(A, C) is not observable")
    O_f = observability_matrix(A, C, Tf)
    T_p = toeplitz_matrix(A, B, C, D, Tp)
    T_f = toeplitz_matrix(A, B, C, D, Tf)
    # reachability over the past window: x_k = A^Tp x_{k-Tp} + R_p u_p
    R_p = np.hstack([np.linalg.matrix_power(A, Tp - 1 - j) @ B for j in range(Tp)])
    A_Tp = np.linalg.matrix_power(A, Tp)
    O_p_pinv = np.linalg.pinv(O_p)
    K_up = O_f @ (R_p - A_Tp @ O_p_pinv @ T_p)
    K_yp = O_f @ A_Tp @ O_p_pinv
    K = np.hstack([K_up, K_yp, T_f])
    # When p*Tp > n the representation is not unique. Keep the one whose rows lie
    # in the span of feasible windows (u_p, O_p x + T_p u_p, u_f): it is the
    # minimum-norm exact predictor, i.e. what least squares returns on exact data.
    m, p, n = model.m, model.p, model.n
    S = np.zeros((m * Tp + p * Tp + m * Tf, m * Tp + n + m * Tf))
    S[: m * Tp, : m * Tp] = np.eye(m * Tp)
    S[m * Tp: m * Tp + p * Tp, : m * Tp] = T_p
    S[m * Tp: m * Tp + p * Tp, m * Tp: m * Tp + n] = O_p
    S[m * Tp + p * Tp:, m * Tp + n:] = np.eye(m * Tf)
    return K @ (S @ np.linalg.pinv(S))


def output_snr_db(y: np.ndarray, e: np.ndarray) -> float:
    """Measured-output power over innovation power, in dB."""
    return float(10.0 * np.log10(np.mean(np.square(y)) / np.mean(np.square(e))))


def benchmark_model() -> StateSpaceModel:
    """Second-order benchmark plant used throughout the experiments."""
    return StateSpaceModel(
        A=np.array([[0.7326, -0.0861], [0.1722, 0.9909]]),
        B=np.array([[0.0609], [0.0064]]),
        C=np.array([[0.0, 1.4142]]),
        Ke=np.array([[-0.5], [0.5]]),
    )


@dataclass(frozen=True)
class ModelDocument:
    """Parsed model JSON: plant, innovation law and an optional seed."""

    model: StateSpaceModel
    noise: NoiseSpec
    seed: int | None = None
    extra: dict = field(default_factory=dict)


def model_from_dict(doc: dict) -> ModelDocument:
    """Build a model from the JSON field names ``A, B, C, D, Ke, noise_mean, noise_cov, seed``."""
    for key in ("A", "B", "C"):
        if key not in doc:
            raise ValueError(f"model document is missing {key!r}")
    model = StateSpaceModel(A=doc["A"], B=doc["B"], C=doc["C"], D=doc.get("D"), Ke=doc.get("Ke"))
    mean = doc.get("noise_mean", 0.0)
    cov = doc.get("noise_cov", 0.0)
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (model.p,)).copy()
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = float(cov) * np.eye(model.p)
    noise = NoiseSpec(mean=mean, covariance=cov)
    seed = doc.get("seed")
    known = {"A", "B", "C", "D", "Ke", "noise_mean", "noise_cov", "seed"}
    return ModelDocument(model=model, noise=noise, seed=None if seed is None else int(seed),
                         extra={k: v for k, v in doc.items() if k not in known})


def model_to_dict(model: StateSpaceModel, noise: NoiseSpec | None = None, seed: int | None = None) -> dict:
    doc: dict[str, Any] = {
        "A": model.A.tolist(), "B": model.B.tolist(), "C": model.C.tolist(),
        "D": model.D.tolist(), "Ke": model.Ke.tolist(),
    }
    if noise is not None:
        doc["noise_mean"] = noise.mean.tolist()
        doc["noise_cov"] = noise.covariance.tolist()
    if seed is not None:
        doc["seed"] = int(seed)
    return doc


def load_model_json(path: str | PathLike) -> ModelDocument:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
