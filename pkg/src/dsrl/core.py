"""Distributed sub-gradient method for robust (L1) range-based localization.

Every sensor ``i`` keeps its own estimate ``x_i`` of the source position and
only knows its own range ``d_i``. One iteration ``k`` does, for all sensors at
once (synchronously, reading only the pre-step states):

    v_i = x_i + alpha_k * sum_{j in N_i} (x_j - x_i)       # diffusion
    g_i = subgradient of f_i at x_i                          # local, non-smooth
    x_i <- v_i - beta_k * g_i

with ``f_i(x) = | ||x - a_i|| - d_i | / L`` and the decaying schedules
``alpha_k = a / k**tau_alpha`` and ``beta_k = b / k**tau_beta``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteState, SizeMismatch
from .measurement import MeasurementSet
from .network import SensorNetwork, row_norms


@dataclass(frozen=True)
class Schedule:
    """Weight ``alpha_k = a / k**tau_alpha`` and step ``beta_k = b / k**tau_beta``.

    The convergence theory asks for ``0 < tau_alpha < tau_beta`` and
    ``1/2 < tau_beta <= 1``. With ``strict`` set, violating that raises;
    otherwise the violations are reported by :meth:`violations`.
    ``b = 0`` is accepted so pure consensus dynamics can be run.
    """

    a: float
    tau_alpha: float
    b: float
    tau_beta: float
    strict: bool = False

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not self.b >= 0:
            raise ValueError("b must be nonnegative")
        if self.strict and self.violations():
            raise ValueError("schedule violates the convergence conditions: " + "; ".join(self.violations()))

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.tau_alpha < self.tau_beta:
            out.append(f"need 0 < tau_alpha < tau_beta (got {self.tau_alpha}, {self.tau_beta})")
        if not 0.5 < self.tau_beta <= 1:
            out.append(f"need 1/2 < tau_beta <= 1 (got {self.tau_beta})")
        if self.b == 0:
            out.append("b = 0: no sub-gradient forcing, consensus only")
        return out

    def weight(self, k):
        return self.a / np.power(k, self.tau_alpha)

    def step(self, k):
        return self.b / np.power(k, self.tau_beta)

    def to_dict(self) -> dict:
        return {"a": self.a, "tau_alpha": self.tau_alpha, "b": self.b,
                "tau_beta": self.tau_beta, "strict": self.strict}


# published simulation values (these break the theoretical conditions)
PUBLISHED_SCHEDULE = Schedule(a=0.3, tau_alpha=0.55, b=3.5, tau_beta=0.5)
# same constants with a step decay that satisfies the theory
COMPLIANT_SCHEDULE = Schedule(a=0.3, tau_alpha=0.55, b=3.5, tau_beta=0.75, strict=True)


def weight_at(s: Schedule, k: int) -> float:
    if k < 1:
        raise ValueError("iterations are numbered from 1")
    return float(s.weight(k))


def step_at(s: Schedule, k: int) -> float:
    if k < 1:
        raise ValueError("iterations are numbered from 1")
    return float(s.step(k))


# -- local objective and its sub-gradient ------------------------------------

def local_objective(x, a_i, d_i: float, L: int) -> float:
    x = np.asarray(x, dtype=float)
    a_i = np.asarray(a_i, dtype=float)
    if x.shape != a_i.shape:
        raise DimensionMismatch(f"x has shape {x.shape}, sensor has {a_i.shape}")
    return abs(float(row_norms(x - a_i)) - d_i) / L


def local_subgradient(x, a_i, d_i: float, L: int) -> np.ndarray:
    """An element of the sub-differential of ``f_i`` at ``x``.

    Zero at the sensor itself and, since ``sign(0) = 0``, on the sphere
    ``||x - a_i|| = d_i``.
    """
    x = np.asarray(x, dtype=float)
    a_i = np.asarray(a_i, dtype=float)
    if x.shape != a_i.shape:
        raise DimensionMismatch(f"x has shape {x.shape}, sensor has {a_i.shape}")
    diff = x - a_i
    r = float(row_norms(diff))
    if r == 0.0:
        return np.zeros_like(diff)
    return diff * (np.sign(r - d_i) / (L * r))


def subgradients(X: np.ndarray, anchors: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Row ``i`` is ``local_subgradient(X[i], anchors[i], d[i], L)``."""
    L = X.shape[0]
    diff = X - anchors
    r = row_norms(diff)
    if r.all():
        coef = np.sign(r - d) / (L * r)
    else:
        nz = r > 0
        coef = np.where(nz, np.sign(r - d) / (L * np.where(nz, r, 1.0)), 0.0)
    return diff * coef[:, None]


def _check_sizes(net: SensorNetwork, m: MeasurementSet):
    if len(m) != net.size:
        raise SizeMismatch(f"{len(m)} measurements for {net.size} sensors")


def global_objective(net: SensorNetwork, m: MeasurementSet, x) -> float:
    """Sum of the local objectives, i.e. the mean absolute range residual."""
    _check_sizes(net, m)
    x = np.asarray(x, dtype=float)
    if x.shape != (net.dimension,):
        raise DimensionMismatch(f"x has shape {x.shape}, network dimension is {net.dimension}")
    r = row_norms(x[None, :] - net.positions)
    return float(np.mean(np.abs(r - m.ranges)))


def lemma2_radius(net: SensorNetwork, m: MeasurementSet) -> float:
    """Radius beyond which every local sub-gradient points away from the origin.

    ``R = 3 * max_ij |a_ij| + max_i d_i + 1``. Negative ranges (possible under
    additive noise) contribute 0 so that ``R >= 1`` always.
    """
    _check_sizes(net, m)
    return 3.0 * float(np.max(np.abs(net.positions))) + max(float(np.max(m.ranges)), 0.0) + 1.0


# -- node states and diffusion ------------------------------------------------

@dataclass(frozen=True, eq=False)
class NodeStates:
    estimates: np.ndarray
    iteration: int = 1

    def __post_init__(self):
        X = np.array(self.estimates, dtype=float)
        if X.ndim != 2:
            raise ValueError("estimates must be an (L, n) array")
        if not np.all(np.isfinite(X)):
            raise NonFiniteState(f"non-finite estimate at iteration {self.iteration}")
        if self.iteration < 1:
            raise ValueError("iterations are numbered from 1")
        X.setflags(write=False)
        object.__setattr__(self, "estimates", X)


def _as_estimates(states) -> np.ndarray:
    if isinstance(states, NodeStates):
        return states.estimates
    return np.asarray(states, dtype=float)


def diffuse(states, net: SensorNetwork, alpha: float) -> np.ndarray:
    """``v_i = x_i + alpha * sum_{j in N_i} (x_j - x_i)`` for every node."""
    X = _as_estimates(states)
    if X.shape != (net.size, net.dimension):
        raise SizeMismatch(f"states have shape {X.shape}, network is {(net.size, net.dimension)}")
    return X + alpha * net.neighbor_differences(X)


def uniform_init(rng, L: int, n: int, half_width: float) -> np.ndarray:
    """Independent uniform starting points in ``[-half_width, half_width]^n``."""
    return np.random.default_rng(rng).uniform(-half_width, half_width, size=(L, n))


# -- full runs ----------------------------------------------------------------

@dataclass
class RunTrace:
    """Per-iteration record of a run.

    ``k[t]``, ``objective[t]``, ``rmse[t]`` and ``disagreement[t]`` describe the
    states ``x^(k)`` for ``k = 1 .. K+1`` (``K+1`` is the state after the last
    update). ``objective`` is the global objective at the average estimate. ``rmse`` is NaN when no ground truth was given. Full estimate
    snapshots are kept every ``cadence`` iterations and for the final state.
    """

    k: np.ndarray
    objective: np.ndarray
    rmse: np.ndarray
    disagreement: np.ndarray
    snapshots: dict
    final: NodeStates
    cadence: int = 1
    warnings: list = field(default_factory=list)

    def to_csv(self, solver: str = "dsrl", wide: bool = False) -> str:
        buf = io.StringIO()
        write_trace_rows(buf, self, solver, wide=wide, header=True)
        return buf.getvalue()


TRACE_COLUMNS = ("k", "solver", "objective", "rmse", "disagreement")


def write_trace_rows(fh, trace: RunTrace, solver: str, wide: bool = False, header: bool = True):
    w = csv.writer(fh, lineterminator="\n")
    L, n = trace.final.estimates.shape
    if header:
        cols = list(TRACE_COLUMNS)
        if wide:
            cols += [f"x{i}_{c}" for i in range(L) for c in range(n)]
        w.writerow(cols)
    for t, k in enumerate(trace.k):
        row = [int(k), solver, repr(float(trace.objective[t])), repr(float(trace.rmse[t])),
               repr(float(trace.disagreement[t]))]
        if wide:
            snap = trace.snapshots.get(int(k))
            if snap is None:
                row += [""] * (L * n)
            else:
                row += [repr(float(v)) for v in snap.ravel()]
        w.writerow(row)


_CHUNK = 512


def _chunk_metrics(net, m, B, truth):
    """Objective, disagreement and RMSE for a stack of states ``B`` of shape (T, L, n).

    The objective is the global objective at the network-average estimate.
    """
    L = B.shape[1]
    centre = B.mean(axis=1, keepdims=True)
    r = row_norms(centre - net.positions[None, :, :])
    obj = np.abs(r - m.ranges).mean(axis=1)
    dev = B - centre
    dis = np.sqrt(np.einsum("tij,tij->t", dev, dev) / L)
    if truth is None:
        return obj, dis, None
    off = B - truth
    return obj, dis, np.sqrt(np.einsum("tij,tij->t", off, off) / L)


def schedule_warnings(s: Schedule, net: SensorNetwork) -> list[str]:
    out = list(s.violations())
    max_deg = int(net.degrees.max()) if net.size else 0
    if s.a * max_deg >= 1:
        out.append(f"alpha_1 * max_degree = {s.a * max_deg:g} >= 1: early diffusion steps overshoot")
    return out


def dsrl_run(
    net: SensorNetwork,
    m: MeasurementSet,
    s: Schedule,
    K: int,
    init=None,
    x_true=None,
    trace_cadence: int = 1,
    rng=None,
    half_width: float | None = None,
) -> RunTrace:
    """Run ``K`` synchronous iterations of the distributed sub-gradient method.

    ``init`` is an ``(L, n)`` array or :class:`NodeStates`. When omitted, each
    node starts uniformly in the deployment cube (``half_width``, defaulting
    to the network's generation parameter) drawn from ``rng``.

    Raises:
        SizeMismatch: measurements, initial states and network disagree in size.
        NonFiniteState: an estimate became NaN/inf.
    """
    _check_sizes(net, m)
    if K < 0:
        raise ValueError("K must be nonnegative")
    if trace_cadence < 1 or (K > 0 and K % trace_cadence):
        raise ValueError(f"trace_cadence {trace_cadence} must be a positive divisor of K={K}")
    L, n = net.size, net.dimension
    if init is None:
        hw = half_width if half_width is not None else net.params.get("half_width")
        if hw is None or rng is None:
            raise ValueError("default initialisation needs rng and half_width")
        init = uniform_init(rng, L, n, hw)
    X = np.array(_as_estimates(init), dtype=float)
    if X.shape != (L, n):
        raise SizeMismatch(f"initial states have shape {X.shape}, network is {(L, n)}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteState("non-finite initial state")
    truth = None if x_true is None else np.asarray(x_true, dtype=float)
    if truth is not None and truth.shape != (n,):
        raise DimensionMismatch(f"x_true has shape {truth.shape}, network dimension is {n}")

    anchors = net.positions
    d = m.ranges
    ks = np.arange(1, K + 1, dtype=float)
    alphas = s.a / np.power(ks, s.tau_alpha)
    betas = s.b / np.power(ks, s.tau_beta)

    objective = np.empty(K + 1)
    err = np.full(K + 1, np.nan)
    dis = np.empty(K + 1)
    snapshots = {}

    # States are buffered and the per-iteration metrics evaluated a chunk at a time.
    buf = np.empty((min(_CHUNK, K + 1), L, n))
    first = 0  # trace index of buf[0]
    fill = 0

    def flush():
        B = buf[:fill]
        bad = ~np.isfinite(B).all(axis=(1, 2))
        if bad.any():
            raise NonFiniteState(f"non-finite estimate at iteration {first + int(np.argmax(bad)) + 1}")
        sl = slice(first, first + fill)
        objective[sl], dis[sl], e = _chunk_metrics(net, m, B, truth)
        if e is not None:
            err[sl] = e
        for j in range(fill):
            t = first + j
            if t % trace_cadence == 0 or t == K:
                snapshots[t + 1] = B[j].copy()

    buf[0] = X
    fill = 1
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(K):
            G = subgradients(X, anchors, d)
            X = X + alphas[t] * net.neighbor_differences(X) - betas[t] * G
            if fill == buf.shape[0]:
                flush()
                first += fill
                fill = 0
            buf[fill] = X
            fill += 1
        flush()

    return RunTrace(
        k=np.arange(1, K + 2),
        objective=objective,
        rmse=err,
        disagreement=dis,
        snapshots=snapshots,
        final=NodeStates(X, K + 1),
        cadence=trace_cadence,
        warnings=schedule_warnings(s, net),
    )


def steady_state_rmse(trace: RunTrace) -> float:
    return float(trace.rmse[-1])
