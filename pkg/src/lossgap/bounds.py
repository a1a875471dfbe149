"""Sample-size bounds below which the standard-vs-robust generalisation gap grows.

All bounds return real-valued ``n``; an integer training-set size satisfies a
bound ``b`` iff ``n <= floor(b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from lossgap.normal import normal_cdf


@dataclass(frozen=True)
class VectorSpec:
    """Per-coordinate class means and standard deviations."""

    mu: tuple
    sigma: tuple

    def __post_init__(self):
        mu = tuple(float(m) for m in self.mu)
        sigma = tuple(float(s) for s in self.sigma)
        if len(mu) != len(sigma) or not mu:
            raise ValueError("mu and sigma must be non-empty and of equal length")
        if not all(math.isfinite(m) for m in mu):
            raise ValueError("mu must be finite")
        if not all(math.isfinite(s) and s > 0 for s in sigma):
            raise ValueError("every sigma_j must be finite and > 0")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def kappa(x: float, delta: float) -> float:
    """``2 Phi(x) - Phi(x(1+delta)) - Phi(x(1-delta))``."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    return 2.0 * normal_cdf(x) - normal_cdf(x * (1.0 + delta)) - normal_cdf(x * (1.0 - delta))


def kappa_increase_limit(delta: float) -> float:
    """Squared ``x`` up to which kappa is certified increasing."""
    return max(math.log1p(2.0 * delta / (1.0 - delta)) / delta, -2.0 * math.log1p(-delta))


def _min_over_coordinates(
    spec: VectorSpec, eps: float, scale: float, first_term: Callable[[float], float]
) -> float:
    if not (math.isfinite(eps) and eps > 0):
        raise ValueError(f"eps must be finite and > 0, got {eps!r}")
    best = math.inf
    for j, (mu, sigma) in enumerate(zip(spec.mu, spec.sigma)):
        if mu <= 0:
            continue
        m = scale * mu
        if eps >= m:
            raise ValueError(f"eps={eps!r} must be below the effective mean {m!r} of coordinate {j}")
        value = max(first_term(m), -2.0 * math.log1p(-eps / m)) * (sigma / m) ** 2
        best = min(best, value)
    if best == math.inf:
        raise ValueError("no coordinate has mu_j > 0")
    return best


def bound_original(spec: VectorSpec, eps: float) -> float:
    return _min_over_coordinates(spec, eps, 1.0, lambda m: 1.5)


def _improved_term(eps: float) -> Callable[[float], float]:
    return lambda m: m / eps * _log_ratio(m, eps)


def _log_ratio(m: float, eps: float) -> float:
    """``log((m + eps) / (m - eps))``; log1p keeps digits as eps -> 0."""
    ratio = (m + eps) / (m - eps)
    return math.log(ratio) if ratio >= 2.0 else math.log1p(2.0 * eps / (m - eps))


def bound_improved(spec: VectorSpec, eps: float) -> float:
    return _min_over_coordinates(spec, eps, 1.0, _improved_term(eps))


def bound_label_noise(spec: VectorSpec, eps: float, zeta: float) -> float:
    """:func:`bound_improved` with every mean shrunk to ``(2*zeta - 1) * mu_j``.

    Which coordinates count is decided on the original ``mu_j > 0``; the
    shrink factor is positive, so the set is the same either way.
    """
    if not 0.5 < zeta <= 1.0:
        raise ValueError(f"zeta must lie in (1/2, 1], got {zeta!r}")
    return _min_over_coordinates(spec, eps, 2.0 * zeta - 1.0, _improved_term(eps))
