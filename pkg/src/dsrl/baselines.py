"""Centralized reference solvers.

Both solvers see every range at once and keep a single estimate. The L2
solver minimises the Gaussian maximum-likelihood (least-squares) objective and
is the non-robust contrast; the L1 solver runs the plain sub-gradient method on
the same robust objective the distributed algorithm targets. Sub-gradient
iterates are not monotone, so both report the best iterate seen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Schedule, _check_sizes
from .errors import DimensionMismatch, NonFiniteState
from .measurement import MeasurementSet
from .network import SensorNetwork, row_norms


@dataclass
class BaselineResult:
    estimate: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    # distance of each iterate to the true source, when it was supplied
    error_trace: np.ndarray | None = None


def l2_objective(net: SensorNetwork, m: MeasurementSet, x) -> float:
    r = row_norms(np.asarray(x, dtype=float)[None, :] - net.positions)
    return float(np.mean((r - m.ranges) ** 2))


def l2_gradient(net: SensorNetwork, m: MeasurementSet, x) -> np.ndarray:
    """Gradient of the mean squared range residual; sensors at ``x`` contribute 0."""
    diff = np.asarray(x, dtype=float) - net.positions
    r = row_norms(diff)
    nz = r > 0
    coef = np.where(nz, (2.0 / net.size) * (r - m.ranges) / np.where(nz, r, 1.0), 0.0)
    return coef @ diff


def l1_subgradient(net: SensorNetwork, m: MeasurementSet, x) -> np.ndarray:
    """Sum of the local sub-gradients at a single point ``x``."""
    diff = np.asarray(x, dtype=float) - net.positions
    r = row_norms(diff)
    nz = r > 0
    coef = np.where(nz, np.sign(r - m.ranges) / (net.size * np.where(nz, r, 1.0)), 0.0)
    return coef @ diff


def _residuals(net, m, P):
    """Range residuals ``||p - a_i|| - d_i`` for each row ``p`` of ``P``."""
    return row_norms(P[:, None, :] - net.positions[None, :, :]) - m.ranges


def _descend(net, m, K, init, x_true, direction, step, value):
    _check_sizes(net, m)
    if K < 0:
        raise ValueError("K must be nonnegative")
    x = np.array(init, dtype=float)
    if x.shape != (net.dimension,):
        raise DimensionMismatch(f"init has shape {x.shape}, network dimension is {net.dimension}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteState("non-finite initial point")

    path = np.empty((K + 1, x.size))
    path[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, K + 1):
            x = x - step(t) * direction(x)
            path[t] = x
    bad = ~np.isfinite(path).all(axis=1)
    if bad.any():
        raise NonFiniteState(f"non-finite iterate at iteration {int(np.argmax(bad)) + 1}")

    obj = np.concatenate([value(_residuals(net, m, path[i:i + 1024])) for i in range(0, K + 1, 1024)])
    err = None
    if x_true is not None:
        err = np.linalg.norm(path - np.asarray(x_true, dtype=float), axis=1)
    best = int(np.argmin(obj))
    return BaselineResult(path[best].copy(), obj, K, err)


def centralized_l2_descent(net: SensorNetwork, m: MeasurementSet, step0: float, K: int,
                           init, x_true=None) -> BaselineResult:
    """Gradient descent on the least-squares objective with step ``step0 / sqrt(k)``."""
    return _descend(
        net, m, K, init, x_true,
        direction=lambda x: l2_gradient(net, m, x),
        step=lambda k: step0 / np.sqrt(k),
        value=lambda res: np.mean(res**2, axis=1),
    )


def centralized_l1_subgradient(net: SensorNetwork, m: MeasurementSet, s: Schedule, K: int,
                               init, x_true=None) -> BaselineResult:
    """Sub-gradient descent on the L1 objective with steps ``s.step(k)``."""
    return _descend(
        net, m, K, init, x_true,
        direction=lambda x: l1_subgradient(net, m, x),
        step=lambda k: s.step(k),
        value=lambda res: np.mean(np.abs(res), axis=1),
    )
