"""Finite-alphabet MIMO precoding with statistical channel knowledge.

The transmitter knows only the Kronecker correlation matrices of the channel.
Precoders are designed by gradient ascent on a large-system surrogate of the
ergodic mutual information and checked against Monte-Carlo estimates of the
exact quantity.
"""

from .asymptotic import (
    AsymptoticMi,
    FixedPointState,
    asymptotic_mi,
    solve_fixed_point,
    solve_fixed_point_bracketed,
    solve_fixed_point_robust,
)
from .channel import ChannelStats, exp_correlation, identity_stats, load_stats, make_rng, make_stats, sample_channel
from .constellation import Constellation, Modulation, enumerate_product, make_constellation, search_space_size
from .errors import CapacityError, ConfigError, ConvergenceError, DimensionError, DomainError, FinprecError
from .evaluation import (
    BenchRecord,
    SweepConfig,
    SweepResult,
    baseline_gaussian_waterfill,
    baseline_unprecoded,
    bench_iteration,
    exact_ergodic_mi,
    run_sweep,
)
from .mi import MiEstimate, NoiseBank, make_noise_bank, mi_discrete, mmse_matrix
from .precoder import OptimizationTrace, OptimizerConfig, StructuredPrecoder, expand, optimize

__version__ = "0.1.0"
