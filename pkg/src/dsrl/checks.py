"""Self-checks of the numerical invariants, run by ``dsrl validate``.

Each check returns a :class:`CheckResult`; none of them raise on failure.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    PUBLISHED_SCHEDULE,
    Schedule,
    dsrl_run,
    lemma2_radius,
    local_objective,
    local_subgradient,
    subgradients,
)
from .measurement import UniformOutlier, measure, true_ranges
from .network import generate_network


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    return wrapper


def central_difference(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def reference_network(seed):
    return generate_network(seed, 31, 3, 3.0, 1.75, 2, 10)


@_timed
def check_subgradient(seed=0, points=100, margin=1e-3, tol=1e-5) -> CheckResult:
    """Local sub-gradient vs central differences at smooth points."""
    rng = np.random.default_rng(seed)
    worst, tested = 0.0, 0
    while tested < points:
        n = int(rng.integers(1, 4))
        L = int(rng.integers(1, 40))
        a = rng.uniform(-3, 3, n)
        x = rng.uniform(-3, 3, n)
        d = rng.uniform(-1, 6)
        r = np.linalg.norm(x - a)
        if r <= margin or abs(r - d) <= margin:
            continue
        g = local_subgradient(x, a, d, L)
        fd = central_difference(lambda z: local_objective(z, a, d, L), x)
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(g))
        tested += 1
    return CheckResult("subgradient-vs-finite-differences", worst < tol,
                       f"max relative error {worst:.2e} over {tested} points (tol {tol:g})")


def sample_outside(rng, radius, size, n):
    """Points with norm in [radius, 10 radius] and uniformly random direction."""
    u = rng.normal(size=(size, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * rng.uniform(radius, 10 * radius, size=(size, 1))


@_timed
def check_lemma2(seed=0, instances=20, samples=1000) -> CheckResult:
    """Far-field sub-gradients point outward: <g/|g|, x/|x|> >= 1/2 and |g| <= |x|."""
    rng = np.random.default_rng(seed)
    violations, checked, worst_cos = 0, 0, np.inf
    for _ in range(instances):
        net = reference_network(rng)
        x_true = rng.uniform(-3, 3, 3)
        m = measure(net, x_true, UniformOutlier(float(rng.uniform(0, 1))), rng)
        R = lemma2_radius(net, m)
        xs = sample_outside(rng, R, samples, net.dimension)
        xs[0] *= R / np.linalg.norm(xs[0])
        L = net.size
        # every (point, sensor) pair as one row; scaling by the row count gives
        # the unnormalised per-sensor direction of the local sub-gradient
        X = np.repeat(xs, L, axis=0)
        G = subgradients(X, np.tile(net.positions, (samples, 1)), np.tile(m.ranges, samples)) * X.shape[0]
        ng = np.linalg.norm(G, axis=1)
        nx = np.linalg.norm(X, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(ng > 0, np.einsum("ij,ij->i", G, X) / (ng * nx), -np.inf)
        violations += int(np.count_nonzero(~((cos >= 0.5) & (ng <= nx))))
        checked += X.shape[0]
        worst_cos = min(worst_cos, float(cos.min()))
    return CheckResult("far-field-subgradient-bound", violations == 0,
                       f"{violations} violations in {checked} (point, sensor) pairs; min cosine {worst_cos:.3f}")


def consensus_network(seed=3):
    return generate_network(seed, 10, 2, 1.0, 1.0, 2, 9)


@_timed
def check_consensus(seed=0, a=0.05, tau_alpha=0.3, K=10_000, target=1e-3) -> CheckResult:
    """With no sub-gradient forcing, disagreement shrinks monotonically to ~0."""
    net = consensus_network()
    rng = np.random.default_rng(seed)
    X0 = rng.uniform(-5, 5, size=(net.size, net.dimension))
    m = true_ranges(net, np.zeros(net.dimension))
    s = Schedule(a=a, tau_alpha=tau_alpha, b=0.0, tau_beta=1.0)
    trace = dsrl_run(net, m, s, K, X0, trace_cadence=K)
    dis = trace.disagreement
    monotone = bool(np.all(dis[1:] <= dis[:-1] * (1 + 1e-12)))
    hit = np.flatnonzero(dis <= target * dis[0])
    reached = int(trace.k[hit[0]]) if hit.size else None
    ok = monotone and reached is not None
    return CheckResult("consensus-only-dynamics", ok,
                       f"final/initial disagreement {dis[-1] / dis[0]:.2e}, "
                       f"below {target:g} at k={reached}, non-increasing={monotone}")


@_timed
def check_noiseless_fixed_point(seed=0, K=50) -> CheckResult:
    """Starting every node at the true source with exact ranges, nothing moves."""
    rng = np.random.default_rng(seed)
    net = reference_network(rng)
    x = rng.uniform(-3, 3, 3)
    m = true_ranges(net, x)
    X0 = np.tile(x, (net.size, 1))
    trace = dsrl_run(net, m, PUBLISHED_SCHEDULE, K, X0, x, trace_cadence=K)
    drift = float(np.abs(trace.final.estimates - X0).max())
    return CheckResult("noiseless-fixed-point", drift == 0.0, f"max drift {drift:.2e} after {K} iterations")


ALL_CHECKS = (check_subgradient, check_lemma2, check_consensus, check_noiseless_fixed_point)


def run_all(seed=0) -> list[CheckResult]:
    return [check(seed=seed) for check in ALL_CHECKS]
