"""Numerical tolerances and defaults, kept in one place."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    unitary: float = 1e-9
    power: float = 1e-9
    # correlation files and make_stats inputs
    unit_diagonal: float = 1e-6
    file_hermitian: float = 1e-9
    trace_rescale: float = 0.01
    psd_floor: float = -1e-10
    rank: float = 1e-12
    mmse_slack: float = 1e-9


TOL = Tolerances()

ENUMERATION_CAP = 2**20
INT64_CAP = 2**63

NOISE_BANK_OPTIMIZE = 500
NOISE_BANK_REPORT = 5000
N_CHANNELS_EXACT = 200

# elements per temporary array in the likelihood kernel
KERNEL_CHUNK = 1 << 18
