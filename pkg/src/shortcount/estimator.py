"""Fixed-probability counting registers with an additive error budget.

Given a planned total count ``n_total`` and targets ``epsilon`` (error as a
fraction of the total) and ``delta`` (failure probability), the register only
has to reach ``n_prime = ceil(2*(1 + epsilon/3) * epsilon^-2 * ln(2/delta))``:
every arriving unit is counted with probability ``p = n_prime / n_total`` and
a query scales the raw value back by ``1/p``. The estimate is then within
``epsilon * n_total`` of the true count with probability at least
``1 - delta``, and the register fits in ``ceil(log2(1 + n_prime))`` bits
regardless of how large ``n_total`` is.

This module owns the static-``n_total`` contract only. Growing the range when
the total is unknown (halving ``p`` and shrinking registers) lives in
:mod:`shortcount.scaling`; a saturated register here raises
:class:`~shortcount.errors.EstimatorOverflow` instead of silently capping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import backend
from .errors import EstimatorOverflow, ParameterError

__all__ = [
    "SamplingParams",
    "derive_params",
    "Estimator",
    "counter_variance_bound",
]


@dataclass(frozen=True)
class SamplingParams:
    """Sampling configuration shared by every register in a structure.

    ``epsilon``/``delta`` are None when the probability was fixed directly
    (benchmarks and tests do this); ``n_prime`` is the raw-register ceiling
    and ``p`` the per-unit counting probability.
    """

    epsilon: float | None
    delta: float | None
    n_total: int
    n_prime: int
    p: float

    @property
    def required_bits(self) -> int:
        """Register width that accommodates the raw ceiling: ceil(log2(1+n_prime))."""
        return max(1, math.ceil(math.log2(1 + self.n_prime)))

    @classmethod
    def from_probability(cls, p: float, n_total: int = 0) -> "SamplingParams":
        """Parameters with a directly chosen probability (no error targets)."""
        if not 0.0 < p <= 1.0:
            raise ParameterError(f"sampling probability must be in (0, 1], got {p}")
        n_prime = int(round(p * n_total)) if n_total else 0
        return cls(epsilon=None, delta=None, n_total=n_total, n_prime=n_prime, p=p)


def derive_params(epsilon: float, delta: float, n_total: int) -> SamplingParams:
    """Size the sampling probability for a planned total of ``n_total`` units.

    Raises ParameterError unless 0 < epsilon < 1, 0 < delta < 1 and
    n_total >= 1. The ceiling is evaluated in double precision; the regression
    tests pin the resulting integers for the reference configurations.
    """
    if not 0.0 < epsilon < 1.0:
        raise ParameterError(f"epsilon must be in (0, 1), got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must be in (0, 1), got {delta}")
    if n_total < 1:
        raise ParameterError(f"n_total must be >= 1, got {n_total}")
    n_prime = math.ceil(2.0 * (1.0 + epsilon / 3.0) / (epsilon * epsilon)
                        * math.log(2.0 / delta))
    p = min(1.0, n_prime / n_total)
    return SamplingParams(epsilon=epsilon, delta=delta, n_total=n_total,
                          n_prime=n_prime, p=p)


class Estimator:
    """A bounded integer register plus the generation bit used by lazy halving."""

    __slots__ = ("value", "width_bits", "generation")

    def __init__(self, width_bits: int, value: int = 0, generation: bool = False):
        if width_bits < 1:
            raise ParameterError(f"width_bits must be >= 1, got {width_bits}")
        self.width_bits = width_bits
        self.value = value
        self.generation = generation

    @property
    def cap(self) -> int:
        """Largest representable raw value, 2^width_bits - 1."""
        return (1 << self.width_bits) - 1

    def pincrement(self, params: SamplingParams, rng) -> None:
        """Count one unit: add 1 with probability ``params.p``.

        Raises EstimatorOverflow when called on a saturated register (before
        consuming any randomness).
        """
        if self.value >= self.cap:
            raise EstimatorOverflow(
                f"register saturated at {self.value} ({self.width_bits} bits)")
        if rng.bernoulli(params.p):
            self.value += 1

    def add_weighted(self, params: SamplingParams, w: int, rng) -> None:
        """Count ``w`` units: add floor(w*p) plus a coin for the residue.

        The residue probability is w*p - floor(w*p), formed as a product so
        the deterministic and random parts add up to w*p exactly. Raises
        EstimatorOverflow without mutating if the result would not fit.
        """
        if w < 0:
            raise ParameterError(f"weight must be >= 0, got {w}")
        wp = w * params.p
        w1 = int(math.floor(wp))
        if self.value + w1 > self.cap:
            raise EstimatorOverflow(
                f"adding {w1} to {self.value} exceeds {self.width_bits} bits")
        bump = 1 if rng.bernoulli(wp - w1) else 0
        if self.value + w1 + bump > self.cap:
            raise EstimatorOverflow(
                f"adding {w1}+1 to {self.value} exceeds {self.width_bits} bits")
        self.value += w1 + bump

    def query(self, params: SamplingParams) -> float:
        """Estimated total count: raw value scaled by 1/p."""
        return self.value / params.p

    def pincrement_many(self, params: SamplingParams, n: int, rng) -> int:
        """Apply ``n`` probabilistic increments through the streaming kernel.

        Equivalent to calling :meth:`pincrement` ``n`` times, but saturates at
        the cap instead of raising; returns the number of blocked increments.
        """
        if n < 0:
            raise ParameterError(f"count must be >= 0, got {n}")
        value, over = backend.kernels().pi_run(rng, n, params.p,
                                               start=self.value, cap=self.cap)
        self.value = value
        return over


def counter_variance_bound(params: SamplingParams, total_weight: int) -> float:
    """Upper bound on Var of the raw register after adds totaling ``total_weight``.

    The random part of each add is a Bernoulli with success probability at
    most p, so the variance is at most total_weight * p * (1 - p). Test
    helper; not used on any runtime path.
    """
    if total_weight < 0:
        raise ParameterError(f"total_weight must be >= 0, got {total_weight}")
    return total_weight * params.p * (1.0 - params.p)
