"""Finite signal alphabets and their product enumerations.

Point order is fixed and Gray mapped, so index ``i`` always carries the same
symbol:

* BPSK: ``[+1, -1]``.
* QPSK: index bits ``(b1 b0)`` map to ``((-1)^b1 + j(-1)^b0) / sqrt(2)``.
* QAM16: index bits ``(b3 b2 b1 b0)``; ``b3 b2`` pick the in-phase level and
  ``b1 b0`` the quadrature level from the Gray sequence ``-3, -1, +1, +3`` for
  codes ``00, 01, 11, 10``, scaled by ``1/sqrt(10)``.
"""

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .constants import ENUMERATION_CAP, INT64_CAP
from .errors import CapacityError, ConfigError


class Modulation(str, enum.Enum):
    BPSK = "BPSK"
    QPSK = "QPSK"
    QAM16 = "QAM16"


_ALIASES = {"16QAM": "QAM16", "16-QAM": "QAM16", "QAM-16": "QAM16"}

# 2-bit Gray code -> PAM level
_GRAY_PAM4 = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}


@dataclass(frozen=True)
class Constellation:
    name: Modulation
    points: tuple

    @property
    def M(self) -> int:
        return len(self.points)

    @property
    def bits(self) -> float:
        return float(np.log2(self.M))

    def array(self) -> np.ndarray:
        return np.array(self.points, dtype=complex)


def make_constellation(name) -> Constellation:
    """Build a unit-energy, zero-mean constellation by name.

    Raises:
        ConfigError: unsupported name.
    """
    key = str(getattr(name, "value", name)).upper()
    key = _ALIASES.get(key, key)
    try:
        mod = Modulation(key)
    except ValueError:
        raise ConfigError(
            f"unsupported modulation {name!r}; choose one of "
            + ", ".join(m.value for m in Modulation)
        ) from None
    if mod is Modulation.BPSK:
        pts = [1.0 + 0j, -1.0 + 0j]
    elif mod is Modulation.QPSK:
        s = 1.0 / np.sqrt(2.0)
        pts = [complex((-1) ** (i >> 1) * s, (-1) ** (i & 1) * s) for i in range(4)]
    else:
        s = 1.0 / np.sqrt(10.0)
        pts = [complex(_GRAY_PAM4[i >> 2] * s, _GRAY_PAM4[i & 3] * s) for i in range(16)]
    return Constellation(mod, tuple(pts))


@dataclass(frozen=True)
class ProductEnumeration:
    """All ``M**dim`` vectors over a constellation, first coordinate slowest."""

    constellation: Constellation
    dim: int

    @property
    def total(self) -> int:
        return self.constellation.M**self.dim

    def __len__(self):
        return self.total

    def __iter__(self):
        pts = self.constellation.array()
        for combo in itertools.product(range(self.constellation.M), repeat=self.dim):
            yield pts[list(combo)]

    def array(self) -> np.ndarray:
        """(M**dim, dim) array of the vectors in iteration order."""
        pts = self.constellation.array()
        idx = np.indices((self.constellation.M,) * self.dim).reshape(self.dim, -1).T
        return pts[idx]


def enumerate_product(c: Constellation, n: int, cap: int = ENUMERATION_CAP) -> ProductEnumeration:
    if n < 1:
        raise ConfigError(f"product dimension must be >= 1, got {n}")
    total = c.M**n
    if total > cap:
        raise CapacityError(
            f"{c.name.value} product of dimension {n} has M^n = {total} points, "
            f"above the enumeration cap {cap}"
        )
    return ProductEnumeration(c, n)


def search_space_size(m: int, n_s: int, s: int) -> int:
    """Per-evaluation enumeration workload ``S * M**(2 N_s)`` of the grouped design."""
    if min(m, n_s, s) < 1:
        raise ConfigError("search_space_size arguments must all be >= 1")
    size = s * m ** (2 * n_s)
    if size >= INT64_CAP:
        raise CapacityError(f"search space {s} x {m}^{2 * n_s} overflows 64-bit integers")
    return size
