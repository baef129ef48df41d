"""Receding-horizon closed loops for SPC, l1-regularized DeePC and the robust controller."""

from __future__ import annotations

import csv
import math
import re
from collections import deque
from dataclasses import dataclass, field
from os import PathLike
from typing import Callable

import numpy as np

from drddpc import ambiguity, ocp, solver
from drddpc.data import HankelPartition, Trajectory, partition
from drddpc.model import NoiseRealization, StateSpaceModel, step
from drddpc.predictor import DEFAULT_RCOND, SpcPredictor, fit

Reference = Callable[[int], np.ndarray]

STATUS_FALLBACK = "fallback"


@dataclass(frozen=True)
class ControllerConfig:
    """Everything one controller needs besides the offline data.

    ``radius`` only matters for the robust kinds and ``lambda_g`` only for
    ``reg_deepc``.
    """

    kind: ocp.Kind = ocp.Kind.DRDDPC
    Tp: int = 5
    Tf: int = 10
    costs: ocp.Costs = field(default_factory=ocp.Costs)
    constraints: ocp.ConstraintSpec = field(default_factory=ocp.ConstraintSpec)
    radius: ambiguity.RadiusParams = field(default_factory=ambiguity.RadiusParams)
    lambda_g: float = 1.0
    tol_p: float = 1e-6
    tol_d: float = 1e-6
    max_iter: int = 200
    rcond: float = DEFAULT_RCOND

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ocp.Kind(self.kind))
        if self.Tp < 1 or self.Tf < 1:
            raise ValueError("Tp and Tf must be positive")
        if self.lambda_g < 0:
            raise ValueError("lambda_g must be nonnegative")

    def check_plant(self, model: StateSpaceModel) -> None:
        if self.Tp < model.n:
            raise ValueError(f"Tp={self.Tp} is shorter than the plant order n={model.n}")


@dataclass(frozen=True)
class OfflineData:
    """Hankel partition and fitted predictor of one offline experiment, frozen for a run."""

    part: HankelPartition
    pred: SpcPredictor

    @classmethod
    def from_trajectory(cls, traj: Trajectory, Tp: int, Tf: int, rcond: float = DEFAULT_RCOND) -> "OfflineData":
        part = partition(traj, Tp, Tf)
        return cls(part=part, pred=fit(part, rcond))


class PastWindow:
    """Ring buffer of the last ``Tp`` inputs and outputs."""

    def __init__(self, Tp: int, m: int, p: int):
        if Tp < 1:
            raise ValueError("Tp must be positive")
        self.Tp, self.m, self.p = Tp, m, p
        self._u: deque = deque(maxlen=Tp)
        self._y: deque = deque(maxlen=Tp)

    def push(self, u: np.ndarray, y: np.ndarray) -> None:
        u = np.asarray(u, dtype=float).reshape(self.m)
        y = np.asarray(y, dtype=float).reshape(self.p)
        self._u.append(u.copy())
        self._y.append(y.copy())

    @property
    def full(self) -> bool:
        return len(self._u) == self.Tp

    def __len__(self) -> int:
        return len(self._u)

    @property
    def u_p(self) -> np.ndarray:
        """Oldest-first stacked inputs ``u_[k-Tp, k-1]``."""
        return np.concatenate(list(self._u)) if self._u else np.zeros(0)

    @property
    def y_p(self) -> np.ndarray:
        return np.concatenate(list(self._y)) if self._y else np.zeros(0)

    def copy(self) -> "PastWindow":
        w = PastWindow(self.Tp, self.m, self.p)
        for u, y in zip(self._u, self._y):
            w.push(u, y)
        return w


@dataclass
class ClosedLoopTrace:
    u: np.ndarray  # (T_run, m)
    y: np.ndarray  # (T_run, p)
    yr: np.ndarray  # (T_run, p)
    status: list[str]
    objective: np.ndarray
    cvar_slack: np.ndarray

    @property
    def T_run(self) -> int:
        return self.u.shape[0]

    @property
    def fallback_steps(self) -> int:
        return sum(s != solver.Status.OPTIMAL.value for s in self.status)

    def to_csv(self, path: str | PathLike) -> None:
        """Write ``k,u,y,yr,status,objective,cvar_slack`` (indexed columns when m or p exceed 1)."""
        m, p = self.u.shape[1], self.y.shape[1]

        def names(base: str, width: int) -> list[str]:
            return [base] if width == 1 else [f"{base}_{i + 1}" for i in range(width)]

        header = ["k"] + names("u", m) + names("y", p) + names("yr", p) + ["status", "objective", "cvar_slack"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(self.T_run):
                w.writerow(
                    [k] + [repr(float(v)) for v in self.u[k]] + [repr(float(v)) for v in self.y[k]]
                    + [repr(float(v)) for v in self.yr[k]] + [self.status[k], repr(float(self.objective[k])), repr(float(self.cvar_slack[k]))]
                )


def sinusoid_reference(period: int, p: int = 1) -> Reference:
    """``y_r,k = sin(2 pi k / period)`` in every output channel, defined for every ``k >= 0``."""

    def ref(k: int) -> np.ndarray:
        return np.full(p, math.sin(2.0 * math.pi * k / period))

    return ref


def constant_reference(value: float | np.ndarray, p: int = 1) -> Reference:
    v = np.broadcast_to(np.asarray(value, dtype=float), (p,)).copy()
    return lambda k: v.copy()


def horizon_reference(reference: Reference, k: int, Tf: int) -> np.ndarray:
    return np.concatenate([np.asarray(reference(k + j), dtype=float).reshape(-1) for j in range(Tf)])


def warm_up(model: StateSpaceModel, noise: NoiseRealization, Tp: int) -> tuple[np.ndarray, PastWindow]:
    """Run ``Tp`` zero-input steps from ``noise.x0`` with innovations ``noise.e[:Tp]``."""
    if Tp < 1:
        raise ValueError("Tp must be positive")
    if noise.T < Tp:
        raise ValueError(f"noise realization has {noise.T} samples, warm-up needs {Tp}")
    window = PastWindow(Tp, model.m, model.p)
    x = np.array(noise.x0, dtype=float)
    u0 = np.zeros(model.m)
    for k in range(Tp):
        x, y = step(model, x, u0, noise.e[k])
        window.push(u0, y)
    return x, window


@dataclass(frozen=True)
class StepDiagnostics:
    status: str
    objective: float
    cvar_slack: float
    plan: np.ndarray | None
    solution: ocp.ControlSolution | None = None


def build_program(cfg: ControllerConfig, offline: OfflineData, window: PastWindow, yr: np.ndarray, u_guess: np.ndarray) -> ocp.ConvexProgram:
    """The program a controller of kind ``cfg.kind`` solves at one step."""
    costs = ocp.Costs(cfg.costs.output.with_reference(yr), cfg.costs.R)
    u_p, y_p = window.u_p, window.y_p
    pred, part = offline.pred, offline.part
    if cfg.kind is ocp.Kind.SPC:
        return ocp.build_spc_nominal(pred, u_p, y_p, costs, cfg.constraints)
    if cfg.kind is ocp.Kind.REG_DEEPC:
        return ocp.build_reg_deepc(part, u_p, y_p, costs, cfg.constraints, cfg.lambda_g)
    m_f = np.concatenate([u_p, y_p, u_guess])
    eps_obj, eps_con = ambiguity.radius(cfg.radius, part.M, m_f, pred.N, pred.p * pred.Tf)
    if cfg.kind is ocp.Kind.DR_SPC:
        return ocp.build_spc_form(pred, u_p, y_p, costs, cfg.constraints, eps_obj, eps_con, r=cfg.radius.r)
    return ocp.build_direct_form(part, pred, u_p, y_p, costs, cfg.constraints, eps_obj, eps_con, r=cfg.radius.r)


def control_step(
    cfg: ControllerConfig,
    offline: OfflineData,
    window: PastWindow,
    yr: np.ndarray,
    u_prev: np.ndarray,
    u_guess: np.ndarray | None = None,
) -> tuple[np.ndarray, StepDiagnostics]:
    """Solve one receding-horizon problem and return the first input block.

    Args:
        yr: stacked reference over the prediction horizon.
        u_prev: input applied at the previous step; held (clipped to the
            input box) when the solver does not return an optimal point.
        u_guess: planned future inputs used only in the radius regressor;
            zeros when omitted.
    """
    if not window.full:
        raise ValueError("past window is not full")
    m = window.m
    if u_guess is None:
        u_guess = np.zeros(m * cfg.Tf)
    u_lo, u_hi = cfg.constraints.u_box(m, 1)
    prog = build_program(cfg, offline, window, yr, u_guess)
    sol = solver.solve(prog, tol_p=cfg.tol_p, tol_d=cfg.tol_d, max_iter=cfg.max_iter)
    if not sol.ok:
        u = np.clip(np.asarray(u_prev, dtype=float).reshape(m), u_lo, u_hi)
        return u, StepDiagnostics(status=sol.status.value, objective=math.nan, cvar_slack=math.nan, plan=None)
    cs = ocp.extract_solution(prog, sol.z, offline.pred.V)
    # input boxes are hard: clip the solver's tolerance-level excursions
    u = np.clip(cs.u_f[:m], u_lo, u_hi)
    return u, StepDiagnostics(status=sol.status.value, objective=cs.objective, cvar_slack=cs.soft_violation, plan=cs.u_f, solution=cs)


def run_closed_loop(
    model: StateSpaceModel,
    cfg: ControllerConfig,
    offline: OfflineData,
    noise: NoiseRealization,
    reference: Reference,
    T_run: int,
) -> ClosedLoopTrace:
    """Warm up for ``Tp`` steps, then run ``T_run`` control steps.

    Innovation ``noise.e[Tp + k]`` drives step ``k``, so every controller fed
    the same realization sees the same noise at the same time index.
    """
    cfg.check_plant(model)
    if T_run < 1:
        raise ValueError("T_run must be positive")
    if noise.T < cfg.Tp + T_run:
        raise ValueError(f"noise realization has {noise.T} samples, need Tp + T_run = {cfg.Tp + T_run}")
    m, p = model.m, model.p
    x, window = warm_up(model, noise, cfg.Tp)
    u_hist = np.zeros((T_run, m))
    y_hist = np.zeros((T_run, p))
    yr_hist = np.zeros((T_run, p))
    status: list[str] = []
    obj = np.zeros(T_run)
    slack = np.zeros(T_run)
    u_prev = np.zeros(m)
    guess = np.zeros(m * cfg.Tf)
    for k in range(T_run):
        yr = horizon_reference(reference, k, cfg.Tf)
        u, diag = control_step(cfg, offline, window, yr, u_prev, guess)
        x, y = step(model, x, u, noise.e[cfg.Tp + k])
        window.push(u, y)
        u_hist[k], y_hist[k], yr_hist[k] = u, y, yr[:p]
        status.append(diag.status)
        obj[k], slack[k] = diag.objective, diag.cvar_slack
        u_prev = u
        # shift the plan forward for the next radius evaluation
        guess = np.concatenate([diag.plan[m:], np.zeros(m)]) if diag.plan is not None else np.zeros(m * cfg.Tf)
    return ClosedLoopTrace(u=u_hist, y=y_hist, yr=yr_hist, status=status, objective=obj, cvar_slack=slack)


def read_trace_csv(path: str | PathLike) -> ClosedLoopTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace file")
    header, body = rows[0], rows[1:]
    cols = {name: i for i, name in enumerate(header)}

    def arr(base: str) -> np.ndarray:
        idx = [i for i, name in enumerate(header) if name == base or re.fullmatch(rf"{base}_\d+", name)]
        return np.array([[float(r[i]) for i in idx] for r in body]).reshape(len(body), len(idx))

    return ClosedLoopTrace(
        u=arr("u"), y=arr("y"), yr=arr("yr"), status=[r[cols["status"]] for r in body],
        objective=np.array([float(r[cols["objective"]]) for r in body]),
        cvar_slack=np.array([float(r[cols["cvar_slack"]]) for r in body]),
    )
