"""Slow kill: l0-constrained estimation by iterative quantile thresholding
with cooling cardinality schedules, adaptive l2 shrinkage and line-searched
learning rates."""

from ._accel import BACKEND
from .exceptions import (
    DimensionError,
    InadmissibleModelError,
    NonFiniteError,
    NonpositiveRssError,
    ResponseDomainError,
    SlowKillError,
    TieAtQuantileError,
)
from .losses import LossSpec, bregman, loss_gradient, loss_value, majorization_gap
from .schedules import (
    ScheduleKind,
    ScheduleSpec,
    ShrinkagePlan,
    eta_bar,
    inverse_cooling,
    line_search,
    sbar,
    sigmoidal_cooling,
)
from .solver import (
    FitResult,
    Problem,
    SolverConfig,
    SolverState,
    fit,
    fixed_point_residual,
    iht_baseline,
    polish,
    refit,
    squeeze,
    step,
)
from .thresholding import ThresholdPolicy, TieMode, group_quantile_threshold, quantile_threshold

__version__ = "0.1.0"
