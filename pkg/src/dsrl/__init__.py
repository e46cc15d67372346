"""Distributed robust source localization over sensor networks."""

__version__ = "0.1.0"

from .baselines import BaselineResult, centralized_l1_subgradient, centralized_l2_descent
from .core import (
    COMPLIANT_SCHEDULE,
    PUBLISHED_SCHEDULE,
    NodeStates,
    RunTrace,
    Schedule,
    diffuse,
    dsrl_run,
    global_objective,
    lemma2_radius,
    local_objective,
    local_subgradient,
    step_at,
    weight_at,
)
from .errors import (
    ConfigInvalid,
    DimensionMismatch,
    GenerationExhausted,
    IndexOutOfRange,
    NonFiniteState,
    SizeMismatch,
)
from .measurement import (
    Cauchy,
    LaplaceMixture,
    MeasurementSet,
    Noiseless,
    UniformOutlier,
    apply_cauchy,
    apply_laplace_mixture,
    apply_uniform_outliers,
    true_ranges,
)
from .metrics import disagreement, mean_bias, rmse
from .network import SensorNetwork, generate_network, is_connected, neighbors
