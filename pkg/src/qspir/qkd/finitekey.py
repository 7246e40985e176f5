"""Extractable key length under composable finite-size security.

The length of the final identical secret pair distillable from the sifted
Z-basis data is

    l = max(0, floor( n0 + n1 (1 - h(e1)) - leak_EC
                      - log2(8/eps_cor)
                      - 2 log2(2/(eps' * eps_hat))
                      - 2 log2(1/(2 eps_PA)) ))

with n0/n1 the vacuum and single-photon-pair event counts surviving in the
key set, e1 the single-photon-pair phase-error bound, and leak_EC the bits
disclosed during reconciliation.  All logarithms are base 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import RangeError


@dataclass(frozen=True)
class EpsilonBudget:
    eps_cor: float = 1e-15
    eps_prime: float = 1e-11
    eps_hat: float = 1e-11
    eps_pa: float = 1e-11

    def __post_init__(self):
        for name in ("eps_cor", "eps_prime", "eps_hat", "eps_pa"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise RangeError(f"{name} must be in (0,1), got {v}")


@dataclass(frozen=True)
class FiniteKeyResult:
    n0_lower: float
    n1_lower: float
    e1_upper: float
    leak_ec: float
    l: int

    def __post_init__(self):
        if self.l < 0:
            raise RangeError("key length cannot be negative")


def binary_entropy(q: float) -> float:
    """Binary entropy h(q) in bits, with h(0) = h(1) = 0."""
    if not 0.0 <= q <= 1.0:
        raise RangeError(f"entropy argument must be in [0,1], got {q}")
    if q in (0.0, 1.0):
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def finite_key_length(
    n0: float,
    n1: float,
    e1: float,
    leak_ec: float,
    eps: EpsilonBudget = EpsilonBudget(),
) -> int:
    """Evaluate the length formula; floored and clamped at zero."""
    if n0 < 0 or n1 < 0:
        raise RangeError("n0 and n1 must be non-negative")
    if not 0.0 <= e1 <= 0.5:
        raise RangeError(f"e1 must be in [0, 0.5], got {e1}")
    if leak_ec < 0:
        raise RangeError("leak_ec must be non-negative")
    raw = (
        n0
        + n1 * (1.0 - binary_entropy(e1))
        - leak_ec
        - math.log2(8.0 / eps.eps_cor)
        - 2.0 * math.log2(2.0 / (eps.eps_prime * eps.eps_hat))
        - 2.0 * math.log2(1.0 / (2.0 * eps.eps_pa))
    )
    return max(0, math.floor(raw))
