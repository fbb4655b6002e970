from .gradients import gradients
from .optimize import (
    IterationRecord,
    OptimizationTrace,
    OptimizerConfig,
    RestartResult,
    RestartRunner,
    initial_permutation,
    optimize,
    random_precoder,
    uniform_precoder,
    validate_layout,
)
from .structure import StructuredPrecoder, block_mask, expand, pair_subchannels, scatter

__all__ = [
    "IterationRecord",
    "OptimizationTrace",
    "OptimizerConfig",
    "RestartResult",
    "RestartRunner",
    "StructuredPrecoder",
    "block_mask",
    "expand",
    "gradients",
    "initial_permutation",
    "optimize",
    "pair_subchannels",
    "random_precoder",
    "scatter",
    "uniform_precoder",
    "validate_layout",
]
