"""Closed-form utility bounds and query-count selection.

With rankings drawn from a Mallows model of dispersion ``theta``, the number
of mis-signed pairwise margins is below ``6 * mu`` with probability at least
``1 - 2**(-6 * mu)``, where

    mu = 2 * C(m, 2) * exp(-g(K) * theta_star**2 * n / (m * (m - 1)))

and ``g`` depends on the local randomizer. ``mu`` is returned raw; values of
1 or more make the bound non-informative.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class Mechanism(str, enum.Enum):
    RR = "rr"
    LAP = "lap"


def _mechanism(value) -> Mechanism:
    if isinstance(value, Mechanism):
        return value
    try:
        return Mechanism(str(value).lower())
    except ValueError:
        raise ValueError(f"unknown mechanism {value!r}; expected 'rr' or 'lap'") from None


def theta_star(theta: float) -> float:
    """Pairwise agreement margin ``theta / (2 - theta)`` (equals ``p_M - q_M``)."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return theta / (2.0 - theta)


def g_rr(k: int, epsilon: float) -> float:
    return epsilon**2 * k / (epsilon + 2 * k) ** 2


def g_lap(k: int, epsilon: float) -> float:
    return (1.0 - math.exp(-epsilon / (2 * k))) ** 2 * k


def g(k: int, epsilon: float, mechanism) -> float:
    return g_rr(k, epsilon) if _mechanism(mechanism) is Mechanism.RR else g_lap(k, epsilon)


@dataclass(frozen=True)
class BoundInputs:
    n: int
    m: int
    k: int
    epsilon: float
    theta: float

    def __post_init__(self):
        if self.n < 1 or self.m < 2 or self.k < 1 or not self.epsilon > 0:
            raise ValueError(f"invalid bound inputs: {self}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.k > math.comb(self.m, 2):
            raise ValueError(f"k={self.k} exceeds C({self.m}, 2)")


def mu_bound(inputs: BoundInputs, mechanism) -> float:
    """Expected number of mis-signed pairs in the estimated comparison profile."""
    n, m = inputs.n, inputs.m
    exponent = g(inputs.k, inputs.epsilon, mechanism) * theta_star(inputs.theta) ** 2
    exponent *= n / (m * (m - 1))
    return 2 * math.comb(m, 2) * math.exp(-exponent)


def is_informative(mu: float) -> bool:
    return mu < 1.0


def choose_k(epsilon: float, m: int, mechanism) -> int:
    """Query count in ``1..C(m, 2)`` maximizing the mechanism's ``g``.

    The whole integer grid is scanned; ties go to the smaller ``K``.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if m < 2:
        raise ValueError(f"need at least two alternatives, got m={m}")
    best_k, best_g = 1, g(1, epsilon, mechanism)
    for k in range(2, math.comb(m, 2) + 1):
        value = g(k, epsilon, mechanism)
        if value > best_g:
            best_k, best_g = k, value
    return best_k
