"""Local randomizers, transformation matrices and count reconstruction.

Binary randomized response keeps the true bit with probability
``e^eps / (e^eps + 1)``. The Laplace randomizer adds ``Lap(1/eps)`` noise to
the bit (its sensitivity is 1); a curator thresholding the noisy value at 0.5
recovers the bit with probability ``1 - exp(-eps/2)/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import SingularMatrixError


def _check_positive(name: str, value: float) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class PrivacyBudget:
    """Per-agent budget ``epsilon`` split evenly across ``k_queries`` answers."""

    epsilon: float
    k_queries: int = 1

    def __post_init__(self):
        _check_positive("epsilon", self.epsilon)
        if int(self.k_queries) != self.k_queries or self.k_queries < 1:
            raise ValueError(f"k_queries must be a positive integer, got {self.k_queries}")

    @property
    def epsilon_k(self) -> float:
        return self.epsilon / self.k_queries


def p_rr(epsilon_k: float) -> float:
    """Probability that randomized response reports the true bit."""
    _check_positive("epsilon_k", epsilon_k)
    # logistic form stays finite for huge budgets
    return float(expit(epsilon_k))


def q_rr(epsilon_k: float) -> float:
    """Probability that randomized response flips the bit, ``1 - p_rr``."""
    _check_positive("epsilon_k", epsilon_k)
    return float(expit(-epsilon_k))


def p_lap(epsilon_k: float) -> float:
    """Probability that a Laplace-perturbed bit lands on its own side of 0.5."""
    _check_positive("epsilon_k", epsilon_k)
    return 1.0 - 0.5 * math.exp(-epsilon_k / 2.0)


@dataclass(frozen=True)
class TransformationMatrix:
    """Symmetric 2x2 answer-flip matrix ``[[p, 1-p], [1-p, p]]``."""

    p_diag: float

    def __post_init__(self):
        if not 0.5 <= self.p_diag <= 1.0:
            raise ValueError(f"p_diag must lie in [0.5, 1], got {self.p_diag}")

    @classmethod
    def rr(cls, epsilon_k: float) -> "TransformationMatrix":
        return cls(p_rr(epsilon_k))

    @classmethod
    def lap(cls, epsilon_k: float) -> "TransformationMatrix":
        return cls(p_lap(epsilon_k))

    @property
    def determinant(self) -> float:
        return 2.0 * self.p_diag - 1.0

    def as_array(self) -> np.ndarray:
        p = self.p_diag
        return np.array([[p, 1.0 - p], [1.0 - p, p]])

    def inverse(self) -> np.ndarray:
        det = self.determinant
        if det == 0.0:
            raise SingularMatrixError("transformation matrix with p_diag = 1/2 is singular")
        p = self.p_diag
        return np.array([[p, p - 1.0], [p - 1.0, p]]) / det

    def mix(self, x0: float, x1: float) -> tuple[float, float]:
        """Expected observed counts given true counts."""
        p = self.p_diag
        return p * x0 + (1.0 - p) * x1, (1.0 - p) * x0 + p * x1


def mle_reconstruct(y0, y1, matrix: TransformationMatrix):
    """Invert the answer-flip matrix: ``(x0_hat, x1_hat) = M^-1 (y0, y1)``.

    Estimates are left unclamped and may be negative. Accepts scalars or
    equally shaped arrays.

    Raises:
        SingularMatrixError: if ``p_diag == 1/2``.
    """
    det = matrix.determinant
    if det == 0.0:
        raise SingularMatrixError("transformation matrix with p_diag = 1/2 is singular")
    p = matrix.p_diag
    x0 = (p * y0 - (1.0 - p) * y1) / det
    x1 = (p * y1 - (1.0 - p) * y0) / det
    return x0, x1


def rr_flip(bits: np.ndarray, p_keep: float, uniforms: np.ndarray) -> np.ndarray:
    """Vectorized randomized response driven by pre-drawn uniforms."""
    bits = np.asarray(bits, dtype=np.int8)
    return np.where(np.asarray(uniforms) < p_keep, bits, 1 - bits).astype(np.int8)


def laplace_from_uniform(u, scale: float):
    """Inverse-CDF Laplace(0, scale) sample from ``u`` in ``[0, 1)``."""
    u = np.asarray(u, dtype=float)
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    lower = u < 0.5
    # the inactive branch may warn on log(0)
    with np.errstate(divide="ignore"):
        x = np.where(lower, scale * np.log(2.0 * u), -scale * np.log(2.0 * (1.0 - u)))
    return x if x.ndim else float(x)


def rr_perturb(true_bit: int, epsilon_k: float, rng: np.random.Generator) -> int:
    """Report ``true_bit`` with probability ``p_rr(epsilon_k)``, its complement otherwise."""
    if true_bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {true_bit}")
    keep = rng.random() < p_rr(epsilon_k)
    return int(true_bit) if keep else 1 - int(true_bit)


def lap_perturb(true_bit: int, epsilon_k: float, rng: np.random.Generator) -> float:
    """Return ``true_bit + Lap(1/epsilon_k)`` using one uniform draw."""
    if true_bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {true_bit}")
    _check_positive("epsilon_k", epsilon_k)
    return true_bit + laplace_from_uniform(rng.random(), 1.0 / epsilon_k)


def central_lap_noise(epsilon_prime: float, rng: np.random.Generator, size=None):
    """Laplace noise of scale ``1/epsilon_prime`` for the central-model baseline."""
    _check_positive("epsilon_prime", epsilon_prime)
    return laplace_from_uniform(rng.random(size), 1.0 / epsilon_prime)


def rr_output_ratio(epsilon_k: float) -> float:
    """Worst-case likelihood ratio of the randomized-response output distribution.

    For either output ``u``, ``P[u | bit=u] / P[u | bit=1-u] = p / (1 - p)``.
    """
    return p_rr(epsilon_k) / q_rr(epsilon_k)
