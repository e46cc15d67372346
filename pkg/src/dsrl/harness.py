"""Monte Carlo experiment harness: parameter sweeps, trial averaging, CSV output.

Each trial draws its network (unless the network is fixed), target, noisy
ranges and initial estimates from its own random stream keyed on
``(seed, sweep_index, trial_index)``; results therefore never depend on how
trials are scheduled across worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import centralized_l1_subgradient, centralized_l2_descent
from .core import PUBLISHED_SCHEDULE, Schedule, dsrl_run, uniform_init
from .errors import ConfigInvalid, GenerationExhausted, NonFiniteState
from .measurement import OUTLIER_UPPER, SCENARIOS, SWEEP_PARAM, make_scenario, measure
from .network import generate_network

log = logging.getLogger(__name__)

SOLVERS = ("dsrl", "l1", "l2")
SWEEP_COLUMNS = ("sweep_param", "sweep_value", "solver", "mean_rmse", "stderr_rmse", "trials_ok", "trials_failed")
TRIAL_COLUMNS = ("sweep_param", "sweep_value", "trial", "solver", "rmse", "status")
CURVE_COLUMNS = ("sweep_value", "solver", "k", "mean_rmse", "trials")

# spawn-key slot reserved for the shared network in fixed-network mode
_NETWORK_KEY = 2**32 - 1


def default_iterations(s: Schedule) -> int:
    """First multiple of 100 at which the step has decayed below 1% of its start."""
    k = math.floor(100.0 ** (1.0 / s.tau_beta)) + 1
    return int(math.ceil(k / 100.0) * 100)


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class NetworkConfig:
    L: int = 31
    dimension: int = 3
    half_width: float = 3.0
    connect_radius: float = 1.75
    min_deg: int = 2
    max_deg: int = 10
    max_attempts: int = 100
    method: str = "sequential"


@dataclass(frozen=True)
class SweepConfig:
    """Either an arithmetic grid (``start``, ``stop``, ``increment``) or explicit ``values``."""

    start: float | None = None
    stop: float | None = None
    increment: float | None = None
    values: tuple | None = None

    def grid(self) -> list[float]:
        if self.values is not None:
            return [float(v) for v in self.values]
        count = int(math.floor((self.stop - self.start) / self.increment + 1e-9)) + 1
        return [round(self.start + i * self.increment, 12) for i in range(count)]


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "noiseless"
    params: dict = field(default_factory=dict)
    sweep: SweepConfig = field(default_factory=lambda: SweepConfig(values=(0.0,)))

    @property
    def sweep_param(self) -> str:
        return SWEEP_PARAM[self.kind] or "none"

    def build(self, value: float):
        return make_scenario(self.kind, value, **self.params)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    network: NetworkConfig = field(default_factory=NetworkConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    schedule: Schedule = PUBLISHED_SCHEDULE
    iterations: int | None = None
    trials: int = 1000
    seed: int = 0
    solvers: tuple = SOLVERS
    l2_step0: float = 0.5
    fixed_network: bool = False
    curve_stride: int = 100
    out: str = "results"

    @property
    def K(self) -> int:
        return default_iterations(self.schedule) if self.iterations is None else self.iterations

    def grid(self) -> list[float]:
        return self.scenario.sweep.grid()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schedule"] = self.schedule.to_dict()
        d["solvers"] = list(self.solvers)
        sw = d["scenario"]["sweep"]
        d["scenario"]["sweep"] = {k: (list(v) if k == "values" else v) for k, v in sw.items() if v is not None}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _fields(cls):
    return {f.name: f for f in dataclasses.fields(cls)}


def _take(doc, cls, path, convert=None):
    if not isinstance(doc, dict):
        raise ConfigInvalid(path, "expected an object")
    known = _fields(cls)
    for key in doc:
        if key not in known:
            raise ConfigInvalid(f"{path}.{key}" if path else key, "unknown field")
    out = {}
    for key, value in doc.items():
        sub = f"{path}.{key}" if path else key
        out[key] = convert(key, value, sub) if convert else value
    return out


def _number(value, path, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigInvalid(path, f"expected a number, got {value!r}")
    if kind is int and not float(value).is_integer():
        raise ConfigInvalid(path, f"expected an integer, got {value!r}")
    return kind(value)


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Parse and validate a configuration document; unknown fields are rejected."""

    def net_conv(key, value, path):
        if key == "method":
            return str(value)
        return _number(value, path, int if key in ("L", "dimension", "min_deg", "max_deg", "max_attempts") else float)

    def sweep_conv(key, value, path):
        if key == "values":
            if not isinstance(value, list) or not value:
                raise ConfigInvalid(path, "expected a non-empty list")
            return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))
        return _number(value, path)

    def scen_conv(key, value, path):
        if key == "kind":
            if value not in SCENARIOS:
                raise ConfigInvalid(path, f"unknown scenario {value!r}; expected one of {sorted(SCENARIOS)}")
            return value
        if key == "sweep":
            return SweepConfig(**_take(value, SweepConfig, path, sweep_conv))
        if not isinstance(value, dict):
            raise ConfigInvalid(path, "expected an object")
        return dict(value)

    def sched_conv(key, value, path):
        if key == "strict":
            if not isinstance(value, bool):
                raise ConfigInvalid(path, "expected true or false")
            return value
        return _number(value, path)

    def top_conv(key, value, path):
        if key == "network":
            return NetworkConfig(**_take(value, NetworkConfig, path, net_conv))
        if key == "scenario":
            return ScenarioConfig(**_take(value, ScenarioConfig, path, scen_conv))
        if key == "schedule":
            body = _take(value, Schedule, path, sched_conv)
            try:
                return Schedule(**body)
            except (TypeError, ValueError) as exc:
                raise ConfigInvalid(path, str(exc)) from None
        if key == "solvers":
            if not isinstance(value, list) or not value:
                raise ConfigInvalid(path, "expected a non-empty list")
            return tuple(value)
        if key in ("iterations", "trials", "seed", "curve_stride"):
            return None if value is None and key == "iterations" else _number(value, path, int)
        if key == "l2_step0":
            return _number(value, path)
        if key == "fixed_network":
            if not isinstance(value, bool):
                raise ConfigInvalid(path, "expected true or false")
            return value
        return str(value)

    try:
        cfg = ExperimentConfig(**_take(doc, ExperimentConfig, "", top_conv))
    except TypeError as exc:
        raise ConfigInvalid("", str(exc)) from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    net = cfg.network
    if net.L < 2:
        raise ConfigInvalid("network.L", "need at least 2 sensors")
    if net.dimension < 1:
        raise ConfigInvalid("network.dimension", "must be at least 1")
    if net.connect_radius <= 0:
        raise ConfigInvalid("network.connect_radius", "must be positive")
    if net.half_width < 0:
        raise ConfigInvalid("network.half_width", "must be nonnegative")
    if net.min_deg > net.max_deg:
        raise ConfigInvalid("network.min_deg", "exceeds max_deg")
    if net.max_attempts < 1:
        raise ConfigInvalid("network.max_attempts", "must be at least 1")
    if net.method not in ("sequential", "rejection"):
        raise ConfigInvalid("network.method", "expected 'sequential' or 'rejection'")

    sw = cfg.scenario.sweep
    if sw.values is None:
        for key in ("start", "stop", "increment"):
            if getattr(sw, key) is None:
                raise ConfigInvalid(f"scenario.sweep.{key}", "required unless 'values' is given")
        if sw.increment <= 0:
            raise ConfigInvalid("scenario.sweep.increment", "must be positive")
        if sw.start > sw.stop:
            raise ConfigInvalid("scenario.sweep.start", "must not exceed stop")
    elif any(getattr(sw, k) is not None for k in ("start", "stop", "increment")):
        raise ConfigInvalid("scenario.sweep", "give either 'values' or start/stop/increment, not both")
    for v in cfg.grid():
        try:
            cfg.scenario.build(v)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid("scenario", f"invalid at sweep value {v}: {exc}") from None

    if cfg.trials < 1:
        raise ConfigInvalid("trials", "must be at least 1")
    if cfg.iterations is not None and cfg.iterations < 0:
        raise ConfigInvalid("iterations", "must be nonnegative")
    if cfg.seed < 0:
        raise ConfigInvalid("seed", "must be nonnegative")
    if cfg.curve_stride < 1:
        raise ConfigInvalid("curve_stride", "must be at least 1")
    if cfg.l2_step0 <= 0:
        raise ConfigInvalid("l2_step0", "must be positive")
    for i, s in enumerate(cfg.solvers):
        if s not in SOLVERS:
            raise ConfigInvalid(f"solvers[{i}]", f"unknown solver {s!r}; expected one of {list(SOLVERS)}")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("", f"{path} is not valid JSON: {exc}") from None
    return config_from_dict(doc)


# -- presets -----------------------------------------------------------------

def presets() -> dict[str, ExperimentConfig]:
    """Configurations mirroring the four published simulation studies."""
    base = ExperimentConfig(trials=1000, seed=2024, schedule=PUBLISHED_SCHEDULE)
    upper = OUTLIER_UPPER
    return {
        "fig1_outliers": dataclasses.replace(
            base, name="fig1_outliers",
            scenario=ScenarioConfig("outlier", {"upper": upper}, SweepConfig(0.05, 0.95, 0.05))),
        "fig2_laplace": dataclasses.replace(
            base, name="fig2_laplace",
            scenario=ScenarioConfig("laplace", {}, SweepConfig(0.25, 25.0, 0.25))),
        "fig3_cauchy": dataclasses.replace(
            base, name="fig3_cauchy",
            scenario=ScenarioConfig("cauchy", {}, SweepConfig(0.05, 2.5, 0.05))),
        "fig4_convergence": dataclasses.replace(
            base, name="fig4_convergence", curve_stride=10,
            scenario=ScenarioConfig("cauchy", {}, SweepConfig(values=(1.0,)))),
    }


# -- trials ------------------------------------------------------------------

@dataclass
class TrialResult:
    sweep_index: int
    trial: int
    rmse: dict            # solver -> float, NaN for a failed solve
    status: dict          # solver -> "ok" or a short error label
    curves: dict          # solver -> error at k = 1, 1 + stride, ..., K + 1
    warnings: list = field(default_factory=list)


def trial_rng(seed: int, sweep_index: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(sweep_index, trial_index)))


def _draw_network(cfg: ExperimentConfig, rng):
    n = cfg.network
    return generate_network(rng, n.L, n.dimension, n.half_width, n.connect_radius,
                            n.min_deg, n.max_deg, n.max_attempts, n.method)


def fixed_network(cfg: ExperimentConfig):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_NETWORK_KEY,)))
    return _draw_network(cfg, rng)


def draw_instance(cfg: ExperimentConfig, sweep_index: int, trial_index: int, network=None):
    """Network, true source, measurements and initial estimates for one trial."""
    rng = trial_rng(cfg.seed, sweep_index, trial_index)
    net = network if network is not None else _draw_network(cfg, rng)
    hw = cfg.network.half_width
    x_true = rng.uniform(-hw, hw, size=cfg.network.dimension)
    m = measure(net, x_true, cfg.scenario.build(cfg.grid()[sweep_index]), rng)
    X0 = uniform_init(rng, net.size, net.dimension, hw)
    return net, x_true, m, X0


def run_trial(cfg: ExperimentConfig, sweep_index: int, trial_index: int, network=None) -> TrialResult:
    """Run every selected solver on one random instance.

    Steady-state RMSE is read at the final iterate. The centralized solvers
    start from the average of the distributed initial estimates and are scored
    by the distance of their best iterate to the source. A solver that
    diverges, or an instance whose network cannot be drawn, is recorded as a
    failure rather than raised.
    """
    K = cfg.K
    res = TrialResult(sweep_index, trial_index, {}, {}, {})
    if network is None and cfg.fixed_network:
        network = fixed_network(cfg)
    try:
        net, x_true, m, X0 = draw_instance(cfg, sweep_index, trial_index, network)
    except GenerationExhausted:
        for s in cfg.solvers:
            res.rmse[s], res.status[s] = math.nan, "network_exhausted"
        return res

    stride = cfg.curve_stride
    keep = np.unique(np.r_[np.arange(0, K + 1, stride), K])
    for solver in cfg.solvers:
        try:
            if solver == "dsrl":
                trace = dsrl_run(net, m, cfg.schedule, K, X0, x_true, trace_cadence=K if K else 1)
                res.rmse[solver] = float(trace.rmse[-1])
                res.curves[solver] = trace.rmse[keep]
                res.warnings = trace.warnings
            elif solver == "l1":
                out = centralized_l1_subgradient(net, m, cfg.schedule, K, X0.mean(axis=0), x_true)
                res.rmse[solver] = float(np.linalg.norm(out.estimate - x_true))
                res.curves[solver] = out.error_trace[keep]
            else:
                out = centralized_l2_descent(net, m, cfg.l2_step0, K, X0.mean(axis=0), x_true)
                res.rmse[solver] = float(np.linalg.norm(out.estimate - x_true))
                res.curves[solver] = out.error_trace[keep]
            res.status[solver] = "ok"
        except NonFiniteState:
            res.rmse[solver], res.status[solver] = math.nan, "non_finite"
    return res


# -- sweeps ------------------------------------------------------------------

@dataclass
class SweepRow:
    sweep_value: float
    solver: str
    mean_rmse: float
    stderr_rmse: float
    trials_ok: int
    trials_failed: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list              # SweepRow per (sweep value, solver)
    trials: list            # TrialResult in (sweep index, trial) order
    curve_k: np.ndarray     # iteration numbers of the curve samples
    curves: dict            # (sweep value, solver) -> (mean error per sample, trials used)
    warnings: list

    def row(self, sweep_value: float, solver: str) -> SweepRow:
        for r in self.rows:
            if r.solver == solver and math.isclose(r.sweep_value, sweep_value, rel_tol=0, abs_tol=1e-9):
                return r
        raise KeyError((sweep_value, solver))

    def provenance(self) -> dict:
        return provenance(self.config)


def provenance(cfg: ExperimentConfig, **extra) -> dict:
    """Config echo embedded in every output file; the output directory is left out
    so identical runs written to different places stay byte-identical."""
    conf = cfg.to_dict()
    conf.pop("out")
    return {"tool": "dsrl", "version": __version__, "seed": cfg.seed, "iterations": cfg.K,
            "config": conf, **extra}


def resolve_workers(workers: int | None = None) -> int:
    """Worker count from the argument or ``DSRL_THREADS`` (0 or unset means all CPUs)."""
    if workers is None:
        raw = os.environ.get("DSRL_THREADS", "0").strip() or "0"
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigInvalid("DSRL_THREADS", f"expected an integer, got {raw!r}") from None
    if workers < 0:
        raise ConfigInvalid("DSRL_THREADS", "must be nonnegative")
    return workers or (os.cpu_count() or 1)


def _trial_task(args):
    cfg, i, t, network = args
    return run_trial(cfg, i, t, network)


def aggregate(values) -> tuple[float, float]:
    """Mean and standard error (sample std / sqrt(n)); NaN where undefined."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    mean = float(v.mean())
    if v.size < 2:
        return mean, math.nan
    return mean, float(v.std(ddof=1) / math.sqrt(v.size))


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Run ``cfg.trials`` trials at every sweep value and aggregate per solver."""
    validate_config(cfg)
    grid = cfg.grid()
    network = fixed_network(cfg) if cfg.fixed_network else None
    tasks = [(cfg, i, t, network) for i in range(len(grid)) for t in range(cfg.trials)]
    nworkers = min(resolve_workers(workers), len(tasks))
    log.info("sweep %s: %d points x %d trials, K=%d, %d worker(s)",
             cfg.name, len(grid), cfg.trials, cfg.K, nworkers)
    if nworkers <= 1:
        results = [_trial_task(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (8 * nworkers))
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            results = list(pool.map(_trial_task, tasks, chunksize=chunk))

    K = cfg.K
    curve_k = np.unique(np.r_[np.arange(0, K + 1, cfg.curve_stride), K]) + 1
    rows, curves, warnings = [], {}, []
    for i, value in enumerate(grid):
        block = results[i * cfg.trials:(i + 1) * cfg.trials]
        for solver in cfg.solvers:
            ok = [r for r in block if r.status[solver] == "ok"]
            mean, se = aggregate([r.rmse[solver] for r in ok])
            rows.append(SweepRow(value, solver, mean, se, len(ok), len(block) - len(ok)))
            total = np.zeros(curve_k.size)
            for r in ok:
                total += r.curves[solver]
            curves[(value, solver)] = (total / len(ok) if ok else total * math.nan, len(ok))
        for r in block:
            for w in r.warnings:
                if w not in warnings:
                    warnings.append(w)
    return ExperimentResult(cfg, rows, results, curve_k, curves, warnings)


# -- output ------------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v))


def _header(fh, provenance: dict):
    fh.write("# " + json.dumps(provenance, sort_keys=True, separators=(",", ":")) + "\n")


def sweep_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    _header(buf, result.provenance())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    param = result.config.scenario.sweep_param
    for r in result.rows:
        w.writerow([param, _fmt(r.sweep_value), r.solver, _fmt(r.mean_rmse), _fmt(r.stderr_rmse),
                    r.trials_ok, r.trials_failed])
    return buf.getvalue()


def trials_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    _header(buf, result.provenance())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    param = result.config.scenario.sweep_param
    grid = result.config.grid()
    for tr in result.trials:
        for solver in result.config.solvers:
            w.writerow([param, _fmt(grid[tr.sweep_index]), tr.trial, solver,
                        _fmt(tr.rmse[solver]), tr.status[solver]])
    return buf.getvalue()


def curves_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    _header(buf, result.provenance())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for (value, solver), (mean, used) in result.curves.items():
        for k, v in zip(result.curve_k, mean):
            w.writerow([_fmt(value), solver, int(k), _fmt(v), used])
    return buf.getvalue()


def write_sweep(result: ExperimentResult, out_dir) -> dict:
    """Write ``sweep.csv``, ``trials.csv``, ``curves.csv`` and ``sweep.meta.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "sweep.csv": sweep_csv(result),
        "trials.csv": trials_csv(result),
        "curves.csv": curves_csv(result),
    }
    meta = dict(result.provenance(), files=sorted(files), warnings=result.warnings)
    files["sweep.meta.json"] = json.dumps(meta, indent=2, sort_keys=True) + "\n"
    paths = {}
    for name, text in files.items():
        paths[name] = out / name
        paths[name].write_text(text)
    return paths


def read_csv(path) -> list[dict]:
    """Rows of an output CSV, skipping the provenance comment line."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))
