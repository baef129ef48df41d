"""Monte-Carlo campaigns, closed-loop metrics, parameter sweeps and report files.

Run ``j`` of a campaign uses seed ``base_seed + j`` for its offline
experiment, its online innovation sequence and its initial state, and every
controller in the campaign replays that same realization.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema
import numpy as np

from drddpc import ambiguity, ocp
from drddpc.controllers import (
    ClosedLoopTrace,
    ControllerConfig,
    OfflineData,
    Reference,
    constant_reference,
    run_closed_loop,
    sinusoid_reference,
)
from drddpc.data import excite_and_collect
from drddpc.model import NoiseSpec, StateSpaceModel, model_from_dict, benchmark_model, realize_noise

SCHEMA_VERSION = 1
RUNS_HEADER = ["run", "seed", "level", "method", "j_test", "violation_pct", "fallback_steps", "failed"]
REPORT_HEADER = ["level", "method", "n_runs", "n_failed", "mean_j", "std_j", "mean_violation_pct", "std_violation_pct"]


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


_NUM = {"type": "number"}
_NUM_OR_LIST = {"anyOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1}]}
_MATRIX = {"anyOf": [_NUM, {"type": "array", "minItems": 1, "items": {"type": "array", "items": _NUM, "minItems": 1}}]}
_COSTS = {
    "type": "object",
    "properties": {
        "variant": {"enum": [v.value for v in ocp.CostVariant]},
        "Q": _MATRIX, "R": _MATRIX, "w_over": _NUM, "w_under": _NUM,
    },
    "additionalProperties": False,
}
_CONSTRAINTS = {
    "type": "object",
    "properties": {
        "y_lower": _NUM_OR_LIST, "y_upper": _NUM_OR_LIST, "u_lower": _NUM_OR_LIST, "u_upper": _NUM_OR_LIST,
        "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "n_con_residuals": {"type": "integer", "minimum": 1},
        "soft_penalty_cvar": {"type": "number", "exclusiveMinimum": 0},
        "soft_penalty_box": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}
_RADIUS = {
    "type": "object",
    "properties": {
        "mode": {"enum": [m.value for m in ambiguity.RadiusMode]},
        "alpha": _NUM, "r": _NUM, "gamma_alpha": _NUM, "C": _NUM, "q": _NUM,
        "eps1": {"type": "number", "minimum": 0}, "eps2": {"type": "number", "minimum": 0},
        "eps_con": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}
CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["schema_version", "controllers"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "model": {"anyOf": [{"const": "benchmark"}, {"type": "object", "required": ["A", "B", "C"]}]},
        "noise": {
            "type": "object",
            "properties": {
                "mean": _NUM_OR_LIST,
                "covariances": {"type": "array", "minItems": 1, "items": _MATRIX},
            },
            "additionalProperties": False,
        },
        "T": {"type": "integer", "minimum": 1},
        "Tp": {"type": "integer", "minimum": 1},
        "Tf": {"type": "integer", "minimum": 1},
        "T_run": {"type": "integer", "minimum": 1},
        "n_runs": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "input_std": {"type": "number", "minimum": 0},
        "x0_scale": {"type": "number", "minimum": 0},
        "reference": {
            "type": "object",
            "properties": {
                "type": {"enum": ["sinusoid", "constant"]},
                "period": {"type": "integer", "minimum": 1},
                "value": _NUM_OR_LIST,
            },
            "required": ["type"],
            "additionalProperties": False,
        },
        "costs": _COSTS,
        "constraints": _CONSTRAINTS,
        "radius": _RADIUS,
        "solver": {
            "type": "object",
            "properties": {
                "tol_p": {"type": "number", "exclusiveMinimum": 0},
                "tol_d": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "controllers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "kind"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "kind": {"enum": [k.value for k in ocp.Kind]},
                    "lambda_g": {"type": "number", "minimum": 0},
                    "costs": _COSTS, "constraints": _CONSTRAINTS, "radius": _RADIUS,
                },
                "additionalProperties": False,
            },
        },
        "sweep": {
            "type": "object",
            "properties": {
                "controller": {"type": "string"},
                "eps_con": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "beta": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "lambda_grid": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
    },
    "additionalProperties": False,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated campaign description (see ``CONFIG_SCHEMA`` for the JSON layout)."""

    model: StateSpaceModel
    noise_levels: tuple[NoiseSpec, ...]
    controllers: tuple[tuple[str, ControllerConfig], ...]
    reference: dict
    T: int = 200
    Tp: int = 5
    Tf: int = 10
    T_run: int = 50
    n_runs: int = 50
    base_seed: int = 0
    input_std: float = 1.0
    x0_scale: float = 1.0
    sweep_eps_con: tuple[float, ...] = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    sweep_beta: tuple[float, ...] = (0.1, 0.2, 0.5, 0.7, 0.9)
    sweep_controller: str | None = None
    lambda_grid: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    name: str = "experiment"
    document: dict = field(default_factory=dict, compare=False, repr=False)

    def controller(self, name: str) -> ControllerConfig:
        for n, c in self.controllers:
            if n == name:
                return c
        raise KeyError(f"no controller named {name!r}; have {[n for n, _ in self.controllers]}")

    def reference_fn(self) -> Reference:
        p = self.model.p
        if self.reference.get("type", "sinusoid") == "constant":
            return constant_reference(self.reference.get("value", 0.0), p)
        return sinusoid_reference(int(self.reference.get("period", self.T_run)), p)

    def level_label(self, level: int) -> str:
        cov = self.noise_levels[level].covariance
        mean = self.noise_levels[level].mean
        if cov.size == 1 and mean.size == 1:
            return f"cov={float(cov[0, 0])!r};mean={float(mean[0])!r}"
        return f"level{level}"

    def with_controllers(self, controllers: Iterable[tuple[str, ControllerConfig]]) -> "ExperimentConfig":
        return dataclasses.replace(self, controllers=tuple(controllers))


def _merge(base: dict, override: dict | None) -> dict:
    out = dict(base)
    out.update(override or {})
    return out


def _costs(d: dict) -> ocp.Costs:
    out = ocp.OutputCost(
        variant=d.get("variant", "quadratic"), Q=d.get("Q", 1.0),
        w_over=d.get("w_over", 2.0), w_under=d.get("w_under", 1.0),
    )
    return ocp.Costs(output=out, R=d.get("R", 0.05))


def _constraints(d: dict) -> ocp.ConstraintSpec:
    inf = math.inf
    return ocp.ConstraintSpec(
        y_lower=d.get("y_lower", -inf), y_upper=d.get("y_upper", inf),
        u_lower=d.get("u_lower", -inf), u_upper=d.get("u_upper", inf),
        beta=d.get("beta", 0.2), n_con_residuals=d.get("n_con_residuals", 20),
        soft_penalty_cvar=d.get("soft_penalty_cvar", 1e4), soft_penalty_box=d.get("soft_penalty_box", 1e4),
    )


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a parsed JSON document and build the typed configuration.

    Raises:
        ConfigError: on schema violations or inconsistent values.
    """
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    try:
        mdoc = doc.get("model", "benchmark")
        model = benchmark_model() if mdoc == "benchmark" else model_from_dict(mdoc).model
        noise = doc.get("noise", {})
        mean = noise.get("mean", 0.0)
        covs = noise.get("covariances", [0.012])
        levels = []
        for cov in covs:
            cov = np.asarray(cov, dtype=float)
            if cov.ndim == 0:
                levels.append(NoiseSpec.isotropic(model.p, float(cov), mean))
            else:
                levels.append(NoiseSpec(mean=np.broadcast_to(np.asarray(mean, dtype=float), (model.p,)).copy(), covariance=cov))
        g_costs = doc.get("costs", {})
        g_cons = doc.get("constraints", {})
        g_rad = doc.get("radius", {})
        sol = doc.get("solver", {})
        Tp, Tf = doc.get("Tp", 5), doc.get("Tf", 10)
        ctrls = []
        names = set()
        for c in doc["controllers"]:
            if c["name"] in names:
                raise ConfigError(f"duplicate controller name {c['name']!r}")
            names.add(c["name"])
            cc = ControllerConfig(
                kind=c["kind"], Tp=Tp, Tf=Tf,
                costs=_costs(_merge(g_costs, c.get("costs"))),
                constraints=_constraints(_merge(g_cons, c.get("constraints"))),
                radius=ambiguity.RadiusParams(**_merge(g_rad, c.get("radius"))),
                lambda_g=c.get("lambda_g", 1.0),
                tol_p=sol.get("tol_p", 1e-6), tol_d=sol.get("tol_d", 1e-6), max_iter=sol.get("max_iter", 200),
            )
            cc.check_plant(model)
            ctrls.append((c["name"], cc))
        sw = doc.get("sweep", {})
        if "controller" in sw and sw["controller"] not in names:
            raise ConfigError(f"sweep controller {sw['controller']!r} is not configured")
        T = doc.get("T", 200)
        if T < Tp + Tf:
            raise ConfigError(f"T={T} is shorter than Tp + Tf = {Tp + Tf}")
        return ExperimentConfig(
            model=model, noise_levels=tuple(levels), controllers=tuple(ctrls),
            reference=doc.get("reference", {"type": "sinusoid"}),
            T=T, Tp=Tp, Tf=Tf, T_run=doc.get("T_run", 50), n_runs=doc.get("n_runs", 50),
            base_seed=doc.get("base_seed", 0), input_std=doc.get("input_std", 1.0), x0_scale=doc.get("x0_scale", 1.0),
            sweep_eps_con=tuple(sw.get("eps_con", ExperimentConfig.sweep_eps_con)),
            sweep_beta=tuple(sw.get("beta", ExperimentConfig.sweep_beta)),
            sweep_controller=sw.get("controller"),
            lambda_grid=tuple(doc.get("lambda_grid", ExperimentConfig.lambda_grid)),
            name=doc.get("name", "experiment"), document=copy.deepcopy(doc),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"config invalid: {exc}") from None


def load_config(path: str | PathLike) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(doc)


def j_test(trace: ClosedLoopTrace, costs: ocp.Costs) -> float:
    """Average stage cost ``(1/T_run) sum_k ||u_k||_R^2 + f2_step(y_k)`` with the configured output cost."""
    total = 0.0
    out = costs.output
    for k in range(trace.T_run):
        total += costs.input_cost(trace.u[k])
        total += float(out.with_reference(trace.yr[k]).evaluate(trace.y[k]))
    return total / trace.T_run


def violation_rate(trace: ClosedLoopTrace, cons: ocp.ConstraintSpec) -> float:
    """Percentage of steps with any output component outside the box."""
    p = trace.y.shape[1]
    lo, hi = cons.y_box(p, 1)
    outside = np.any((trace.y < lo) | (trace.y > hi), axis=1)
    return 100.0 * float(outside.sum()) / trace.T_run


@dataclass(frozen=True)
class RunRecord:
    run: int
    seed: int
    level: str
    method: str
    j_test: float
    violation_pct: float
    fallback_steps: int
    failed: bool
    error: str = ""


def run_single(cfg: ExperimentConfig, level: int, run: int) -> list[RunRecord]:
    """One Monte-Carlo run: fresh offline data, one shared realization, every controller."""
    seed = cfg.base_seed + run
    label = cfg.level_label(level)
    noise = cfg.noise_levels[level]
    records = []
    try:
        traj = excite_and_collect(cfg.model, noise, cfg.T, cfg.input_std, seed)
        offline = OfflineData.from_trajectory(traj, cfg.Tp, cfg.Tf)
        real = realize_noise(noise, cfg.model.n, cfg.Tp + cfg.T_run, seed, x0_scale=cfg.x0_scale)
    except Exception as exc:  # a broken run must not stop the campaign
        return [RunRecord(run, seed, label, name, math.nan, math.nan, 0, True, repr(exc)) for name, _ in cfg.controllers]
    ref = cfg.reference_fn()
    for name, cc in cfg.controllers:
        try:
            tr = run_closed_loop(cfg.model, cc, offline, real, ref, cfg.T_run)
            records.append(RunRecord(run, seed, label, name, j_test(tr, cc.costs), violation_rate(tr, cc.constraints), tr.fallback_steps, False))
        except Exception as exc:
            records.append(RunRecord(run, seed, label, name, math.nan, math.nan, 0, True, repr(exc)))
    return records


def _task(args: tuple[ExperimentConfig, int, int]) -> list[RunRecord]:
    return run_single(*args)


def _map_runs(cfg: ExperimentConfig, tasks: Sequence[tuple[int, int]], jobs: int) -> list[list[RunRecord]]:
    payload = [(cfg, level, run) for level, run in tasks]
    if jobs <= 1 or len(payload) <= 1:
        return [_task(a) for a in payload]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves submission order, so results join in run-index order
        return list(pool.map(_task, payload))


@dataclass(frozen=True)
class MethodSummary:
    method: str
    n_runs: int
    n_failed: int
    mean_j: float
    std_j: float
    mean_violation_pct: float
    std_violation_pct: float
    j_values: tuple[float, ...]
    violation_values: tuple[float, ...]


@dataclass(frozen=True)
class MonteCarloReport:
    """Per-method statistics of one campaign at one noise level.

    Standard deviations are sample deviations (``ddof=1``); failed runs are
    excluded from the statistics and counted in ``n_failed``.
    """

    level: str
    base_seed: int
    methods: tuple[MethodSummary, ...]
    records: tuple[RunRecord, ...]
    runtime_s: float = 0.0

    def method(self, name: str) -> MethodSummary:
        for m in self.methods:
            if m.method == name:
                return m
        raise KeyError(name)


def _std(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def aggregate(records: Sequence[RunRecord]) -> list[tuple[str, MethodSummary]]:
    """Group records by (level, method) in first-seen order and summarize each group."""
    groups: dict[tuple[str, str], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.level, r.method), []).append(r)
    out = []
    for (level, method), rs in groups.items():
        rs = sorted(rs, key=lambda r: r.run)
        ok = [r for r in rs if not r.failed]
        J = np.array([r.j_test for r in ok])
        V = np.array([r.violation_pct for r in ok])
        out.append((level, MethodSummary(
            method=method, n_runs=len(rs), n_failed=len(rs) - len(ok),
            mean_j=float(J.mean()) if J.size else math.nan, std_j=_std(J),
            mean_violation_pct=float(V.mean()) if V.size else math.nan, std_violation_pct=_std(V),
            j_values=tuple(float(v) for v in J), violation_values=tuple(float(v) for v in V),
        )))
    return out


def run_monte_carlo(cfg: ExperimentConfig, level: int = 0, jobs: int = 1) -> MonteCarloReport:
    t0 = time.perf_counter()
    results = _map_runs(cfg, [(level, j) for j in range(cfg.n_runs)], jobs)
    records = tuple(r for rs in results for r in rs)
    summaries = tuple(s for _, s in aggregate(records))
    return MonteCarloReport(level=cfg.level_label(level), base_seed=cfg.base_seed, methods=summaries,
                            records=records, runtime_s=time.perf_counter() - t0)


def run_benchmark(cfg: ExperimentConfig, jobs: int = 1) -> list[MonteCarloReport]:
    """One campaign per configured noise level."""
    return [run_monte_carlo(cfg, level, jobs) for level in range(len(cfg.noise_levels))]


def _fmt(v: float) -> str:
    return repr(float(v))


def _seed_comment(base_seed: int, n_runs: int) -> str:
    return f"# seed(run) = base_seed + run_index; base_seed={base_seed}; n_runs={n_runs}\n"


def write_runs_csv(records: Sequence[RunRecord], path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RUNS_HEADER)
        for r in records:
            w.writerow([r.run, r.seed, r.level, r.method, _fmt(r.j_test), _fmt(r.violation_pct), r.fallback_steps, int(r.failed)])


def read_runs_csv(path: str | PathLike) -> list[RunRecord]:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    if not rows or rows[0] != RUNS_HEADER:
        raise ValueError(f"{path}: not a per-run results file")
    out = []
    for row in rows[1:]:
        if len(row) != len(RUNS_HEADER):
            raise ValueError(f"{path}: malformed row {row!r}")
        out.append(RunRecord(int(row[0]), int(row[1]), row[2], row[3], float(row[4]), float(row[5]), int(row[6]), bool(int(row[7]))))
    return out


def write_report_csv(records: Sequence[RunRecord], path: str | PathLike, base_seed: int) -> None:
    """Summary table, one row per (level, method), computed from ``records`` only."""
    runs = {r.run for r in records}
    with open(path, "w", newline="") as fh:
        fh.write(_seed_comment(base_seed, len(runs)))
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        for level, s in aggregate(records):
            w.writerow([level, s.method, s.n_runs, s.n_failed, _fmt(s.mean_j), _fmt(s.std_j),
                        _fmt(s.mean_violation_pct), _fmt(s.std_violation_pct)])


def read_report_csv(path: str | PathLike) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    if not rows or rows[0] != REPORT_HEADER:
        raise ValueError(f"{path}: not a report file")
    return [dict(zip(REPORT_HEADER, row)) for row in rows[1:]]


def write_sidecar(path: str | PathLike, cfg: ExperimentConfig, kind: str, runtime_s: float, jobs: int, extra: dict | None = None) -> None:
    meta = {
        "name": cfg.name, "kind": kind, "schema_version": SCHEMA_VERSION,
        "seed_scheme": "base_seed + run_index", "base_seed": cfg.base_seed, "n_runs": cfg.n_runs,
        "levels": [cfg.level_label(i) for i in range(len(cfg.noise_levels))],
        "methods": [n for n, _ in cfg.controllers], "runtime_s": runtime_s, "jobs": jobs,
    }
    meta.update(extra or {})
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class SweepResult:
    eps_con: tuple[float, ...]
    beta: tuple[float, ...]
    violation: np.ndarray  # (len(eps_con), len(beta)) mean violation %
    cost: np.ndarray  # mean J_test
    records: tuple[RunRecord, ...]
    runtime_s: float = 0.0


def sweep(
    cfg: ExperimentConfig,
    eps_con_grid: Sequence[float] | None = None,
    beta_grid: Sequence[float] | None = None,
    level: int = 0,
    jobs: int = 1,
    controller: str | None = None,
) -> SweepResult:
    """One campaign per ``(eps_con, beta)`` cell for a robust controller.

    Every cell reuses the same seeds, so cells differ only in the two swept
    parameters. The configuration supplies the constraint setup and
    reference (for the standard sweep: ``y in [0, 2]`` and ``y_r = 0``).
    """
    eps_con_grid = tuple(cfg.sweep_eps_con if eps_con_grid is None else eps_con_grid)
    beta_grid = tuple(cfg.sweep_beta if beta_grid is None else beta_grid)
    if not eps_con_grid or not beta_grid:
        raise ValueError("sweep grids must be nonempty")
    name = controller or cfg.sweep_controller
    if name is None:
        robust = [n for n, c in cfg.controllers if c.kind in (ocp.Kind.DRDDPC, ocp.Kind.DR_SPC)]
        if not robust:
            raise ValueError("sweep needs a robust controller")
        name = robust[0]
    base = cfg.controller(name)
    t0 = time.perf_counter()
    viol = np.zeros((len(eps_con_grid), len(beta_grid)))
    cost = np.zeros_like(viol)
    records: list[RunRecord] = []
    for a, eps in enumerate(eps_con_grid):
        for b, beta in enumerate(beta_grid):
            cell_name = f"{name}[eps_con={eps!r},beta={beta!r}]"
            cc = dataclasses.replace(
                base,
                radius=dataclasses.replace(base.radius, eps_con=float(eps)),
                constraints=dataclasses.replace(base.constraints, beta=float(beta)),
            )
            rep = run_monte_carlo(cfg.with_controllers([(cell_name, cc)]), level, jobs)
            s = rep.methods[0]
            viol[a, b], cost[a, b] = s.mean_violation_pct, s.mean_j
            records.extend(rep.records)
    return SweepResult(eps_con_grid, beta_grid, viol, cost, tuple(records), time.perf_counter() - t0)


def write_matrix_csv(path: str | PathLike, eps_con: Sequence[float], beta: Sequence[float], values: np.ndarray) -> None:
    """Rows are ``eps_con`` values, columns are ``beta`` values."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps_con"] + [f"beta={b!r}" for b in beta])
        for a, e in enumerate(eps_con):
            w.writerow([_fmt(e)] + [_fmt(v) for v in values[a]])


def read_matrix_csv(path: str | PathLike) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    beta = np.array([float(h.split("=", 1)[1]) for h in rows[0][1:]])
    eps = np.array([float(r[0]) for r in rows[1:]])
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return eps, beta, vals


def select_lambda_g(
    cfg: ExperimentConfig,
    grid: Sequence[float] | None = None,
    n_runs: int = 10,
    seed_offset: int = 100_000,
    level: int = 0,
    controller: str | None = None,
) -> tuple[float, dict[float, float]]:
    """Offline grid search of the DeePC regularization weight.

    Runs a small campaign per grid value on seeds disjoint from the
    evaluation seeds and returns the value with the lowest mean J_test,
    along with all the means.
    """
    grid = tuple(cfg.lambda_grid if grid is None else grid)
    if controller is None:
        names = [n for n, c in cfg.controllers if c.kind is ocp.Kind.REG_DEEPC]
        if not names:
            raise ValueError("no reg_deepc controller configured")
        controller = names[0]
    base = cfg.controller(controller)
    means = {}
    for lam in grid:
        trial = dataclasses.replace(
            cfg, n_runs=n_runs, base_seed=cfg.base_seed + seed_offset,
            controllers=((controller, dataclasses.replace(base, lambda_g=float(lam))),),
        )
        means[float(lam)] = run_monte_carlo(trial, level).methods[0].mean_j
    best = min(means, key=lambda k: (means[k], k))
    return best, means


def ensure_dir(path: str | PathLike) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
