"""Range measurements and the three noise scenarios.

All samplers are built on ``Generator.random`` draws and inverse CDFs so the
noise law is explicit and reproducible for a given stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .network import SensorNetwork, row_norms

OUTLIER_UPPER = 6.0 * math.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Observed ranges ``d_i`` with a per-sensor corruption flag.

    ``corrupted[i]`` marks a replaced range (uniform outliers), a draw from
    the wide Laplace component, or any Cauchy-perturbed range.
    """

    ranges: np.ndarray
    corrupted: np.ndarray
    scenario_tag: str = "noiseless"

    def __post_init__(self):
        r = np.array(self.ranges, dtype=float)
        c = np.array(self.corrupted, dtype=bool)
        if r.ndim != 1 or c.shape != r.shape:
            raise ValueError("ranges and corrupted must be 1-D arrays of equal length")
        if not np.all(np.isfinite(r)):
            raise ValueError("ranges must be finite")
        r.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "ranges", r)
        object.__setattr__(self, "corrupted", c)

    def __len__(self):
        return self.ranges.shape[0]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_tag,
            "ranges": self.ranges.tolist(),
            "corrupted": self.corrupted.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MeasurementSet":
        return cls(doc["ranges"], doc["corrupted"], doc.get("scenario", "noiseless"))


def true_ranges(net: SensorNetwork, x_true) -> MeasurementSet:
    """Exact sensor-to-source distances."""
    x = np.asarray(x_true, dtype=float)
    if x.shape != (net.dimension,):
        raise DimensionMismatch(f"source has shape {x.shape}, network dimension is {net.dimension}")
    d = row_norms(x[None, :] - net.positions)
    return MeasurementSet(d, np.zeros(net.size, dtype=bool), "noiseless")


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)."""
    return (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) * 2.0**-53


def sample_laplace(rate: float, size, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean Laplace draws with density ``rate/2 * exp(-rate*|v|)``."""
    u = open_uniform(rng, size) - 0.5
    return -np.sign(u) * np.log1p(-2.0 * np.abs(u)) / rate


def sample_cauchy(gamma: float, size, rng: np.random.Generator) -> np.ndarray:
    u = open_uniform(rng, size)
    return gamma * np.tan(np.pi * (u - 0.5))


def laplace_rates(sigma: float, c1: float = 0.9, c2: float = 0.1, rate_ratio: float = 0.1,
                  variance_consistent: bool = False) -> tuple[float, float]:
    """Rates ``(lambda_1, lambda_2)`` of the two-component Laplace mixture.

    The default follows the published setting ``lambda_1 = sqrt(sigma^2 / w)``
    with ``w = c1 + c2 / rate_ratio^2`` (10.9 for the standard weights). With
    ``variance_consistent`` the rate is ``sqrt(2 w / sigma^2)`` instead, which
    is the choice that makes the mixture's standard deviation equal ``sigma``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    w = c1 + c2 / rate_ratio**2
    if variance_consistent:
        lam1 = math.sqrt(2.0 * w / sigma**2)
    else:
        lam1 = math.sqrt(sigma**2 / w)
    return lam1, lam1 * rate_ratio


def sample_laplace_mixture(sigma, size, rng, c1=0.9, c2=0.1, rate_ratio=0.1,
                           variance_consistent=False):
    """Return ``(noise, wide)`` where ``wide`` flags draws from component 2."""
    lam1, lam2 = laplace_rates(sigma, c1, c2, rate_ratio, variance_consistent)
    wide = rng.random(size) >= c1
    rates = np.where(wide, lam2, lam1)
    # one Laplace(1) draw per entry, scaled by its component rate
    return sample_laplace(1.0, size, rng) / rates, wide


def apply_uniform_outliers(base: MeasurementSet, p: float, upper: float = OUTLIER_UPPER,
                           rng: np.random.Generator | None = None) -> MeasurementSet:
    """Replace each range by a Uniform(0, upper) draw with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if upper <= 0:
        raise ValueError("upper must be positive")
    rng = np.random.default_rng(rng)
    L = len(base)
    hit = rng.random(L) < p
    outliers = rng.uniform(0.0, upper, size=L)
    d = np.where(hit, outliers, base.ranges)
    return MeasurementSet(d, hit, f"outlier(p={p:g},upper={upper:g})")


def apply_laplace_mixture(base: MeasurementSet, sigma: float, rng: np.random.Generator | None = None,
                          *, c1: float = 0.9, c2: float = 0.1, rate_ratio: float = 0.1,
                          variance_consistent: bool = False) -> MeasurementSet:
    rng = np.random.default_rng(rng)
    eps, wide = sample_laplace_mixture(sigma, len(base), rng, c1, c2, rate_ratio, variance_consistent)
    tag = f"laplace(sigma={sigma:g}{',vc' if variance_consistent else ''})"
    return MeasurementSet(base.ranges + eps, wide, tag)


def apply_cauchy(base: MeasurementSet, gamma: float, rng: np.random.Generator | None = None) -> MeasurementSet:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    rng = np.random.default_rng(rng)
    eps = sample_cauchy(gamma, len(base), rng)
    return MeasurementSet(base.ranges + eps, np.ones(len(base), dtype=bool), f"cauchy(gamma={gamma:g})")


# -- scenario descriptions ---------------------------------------------------

@dataclass(frozen=True)
class Noiseless:
    kind = "noiseless"

    def apply(self, base, rng):
        return base


@dataclass(frozen=True)
class UniformOutlier:
    p: float
    upper: float = OUTLIER_UPPER
    kind = "outlier"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.upper <= 0:
            raise ValueError("upper must be positive")

    def apply(self, base, rng):
        return apply_uniform_outliers(base, self.p, self.upper, rng)


@dataclass(frozen=True)
class LaplaceMixture:
    sigma: float
    c1: float = 0.9
    c2: float = 0.1
    rate_ratio: float = 0.1
    variance_consistent: bool = False
    kind = "laplace"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if min(self.c1, self.c2) < 0 or not math.isclose(self.c1 + self.c2, 1.0):
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if self.rate_ratio <= 0:
            raise ValueError("rate_ratio must be positive")

    def apply(self, base, rng):
        return apply_laplace_mixture(base, self.sigma, rng, c1=self.c1, c2=self.c2,
                                     rate_ratio=self.rate_ratio,
                                     variance_consistent=self.variance_consistent)


@dataclass(frozen=True)
class Cauchy:
    gamma: float
    kind = "cauchy"

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def apply(self, base, rng):
        return apply_cauchy(base, self.gamma, rng)


# name of the parameter each scenario sweeps over
SWEEP_PARAM = {"noiseless": None, "outlier": "p", "laplace": "sigma", "cauchy": "gamma"}
SCENARIOS = {"noiseless": Noiseless, "outlier": UniformOutlier, "laplace": LaplaceMixture, "cauchy": Cauchy}


def make_scenario(kind: str, value: float | None = None, **params):
    """Build a scenario, setting its swept parameter to ``value`` if given."""
    cls = SCENARIOS[kind]
    key = SWEEP_PARAM[kind]
    if key is not None and value is not None:
        params[key] = value
    return cls(**params)


def measure(net: SensorNetwork, x_true, scenario, rng) -> MeasurementSet:
    return scenario.apply(true_ranges(net, x_true), rng)
