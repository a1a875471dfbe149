"""Closed-form loss gaps for sup-norm-bounded linear models on Gaussian data.

The data model is ``y ~ U{-1, +1}``, ``x_j ~ N(y*mu, sigma^2)`` independently
for ``j = 1..d``; the model is ``theta`` with ``|theta_j| <= gamma`` trained on
the linear loss ``-y <theta, x>``.  Every function here is a pure function of
its inputs.

The gap functions are evaluated in a factored form: the three exponentials
of the robust gap are rescaled by the largest of them before summing.  The
value is algebraically identical to the textbook form but the bracket never
underflows, so signs stay meaningful far into the tail.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

from lossgap.normal import normal_cdf

__all__ = [
    "GaussianSpec",
    "GapPoint",
    "Regime",
    "EpsRegime",
    "Ordering",
    "RobRoot",
    "RobMinimum",
    "TheoryViolation",
    "MinimumNotFound",
    "normal_cdf",
    "loss_gap_std",
    "loss_gap_rob",
    "loss_gap_rob_signed_log",
    "dstd_dn",
    "drob_deps",
    "regime_threshold",
    "eps_regime",
    "rob_root_bracket",
    "rob_root",
    "rob_minimum",
    "compare_rob_std",
    "bayes_accuracy",
    "gap_curve",
]

EQUAL_RTOL = 1e-12


class TheoryViolation(RuntimeError):
    """A numerical check contradicted a proven property of the closed forms."""


class MinimumNotFound(RuntimeError):
    pass


@dataclass(frozen=True)
class GaussianSpec:
    d: int
    mu: float
    sigma: float
    gamma: float = 1.0

    def __post_init__(self):
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        for name in ("mu", "sigma", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class GapPoint:
    n: float
    eps: float
    analytic_gap: float
    empirical_mean: Optional[float] = None
    empirical_stderr: Optional[float] = None
    trials: Optional[int] = None

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError(f"n must be > 0, got {self.n!r}")
        if not self.eps >= 0:
            raise ValueError(f"eps must be >= 0, got {self.eps!r}")
        if (self.empirical_mean is None) != (self.empirical_stderr is None):
            raise ValueError("empirical_mean and empirical_stderr come together")
        if self.empirical_stderr is not None and self.empirical_stderr < 0:
            raise ValueError("empirical_stderr must be >= 0")
        if self.trials is not None and self.trials < 0:
            raise ValueError("trials must be >= 0")

    @property
    def z(self) -> Optional[float]:
        """(empirical - analytic) / stderr, or None without an estimate."""
        if self.empirical_mean is None:
            return None
        diff = self.empirical_mean - self.analytic_gap
        if self.empirical_stderr == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.empirical_stderr


class Regime(enum.Enum):
    DECREASING_IN_EPS = "decreasing_in_eps"
    INCREASING_IN_EPS = "increasing_in_eps"
    ALWAYS_DECREASING = "always_decreasing"


@dataclass(frozen=True)
class EpsRegime:
    kind: Regime
    threshold: Optional[float] = None


class Ordering(enum.Enum):
    ROB_GREATER = "rob_greater"
    STD_GREATER = "std_greater"
    EQUAL = "equal"


class RobRoot(NamedTuple):
    n0: float
    bracket: tuple[float, float]


class RobMinimum(NamedTuple):
    n1: float
    value: float


def _check_n(n: float) -> None:
    if not (math.isfinite(n) and n > 0):
        raise ValueError(f"n must be finite and > 0, got {n!r}")


def _check_eps(eps: float) -> None:
    if not (math.isfinite(eps) and eps >= 0):
        raise ValueError(f"eps must be finite and >= 0, got {eps!r}")


def _prefactor(spec: GaussianSpec, n: float) -> float:
    return spec.d * spec.gamma * spec.sigma * math.sqrt(2.0 / (n * math.pi))


def _exponents(spec: GaussianSpec, n: float, eps: float) -> tuple[float, float, float]:
    two_var = 2.0 * spec.sigma**2
    a = n * (eps + spec.mu) ** 2 / two_var
    b = n * (eps - spec.mu) ** 2 / two_var
    c = n * spec.mu**2 / two_var
    return a, b, c


def loss_gap_std(spec: GaussianSpec, n: float) -> float:
    """Expected test-minus-train linear loss of standard ERM at size ``n``."""
    _check_n(n)
    c = n * spec.mu**2 / (2.0 * spec.sigma**2)
    return _prefactor(spec, n) * math.exp(-c)


def _exp_diff(m: float, b: float, c: float, c_minus_b: float) -> float:
    """``e^{m-b} - e^{m-c}`` with the cancellation handled by expm1."""
    if c_minus_b >= 0:
        return -math.exp(m - b) * math.expm1(-c_minus_b)
    return math.exp(m - c) * math.expm1(c_minus_b)


def _rob_bracket(spec: GaussianSpec, n: float, eps: float) -> tuple[float, float]:
    """``(m, B)`` with ``e^{-a} + e^{-b} - e^{-c} = e^{-m} B``."""
    a, b, c = _exponents(spec, n, eps)
    m = min(a, b, c)
    # c - b in closed form, so eps near 2*mu does not lose e^{-a} to rounding
    c_minus_b = n * eps * (2.0 * spec.mu - eps) / (2.0 * spec.sigma**2)
    return m, math.exp(m - a) + _exp_diff(m, b, c, c_minus_b)


def loss_gap_rob(spec: GaussianSpec, n: float, eps: float) -> float:
    """Expected test-minus-train loss of robust ERM with radius ``eps``.

    Reduces bit-for-bit to :func:`loss_gap_std` at ``eps == 0``.  Negative
    for ``eps > 2*mu`` beyond the root returned by :func:`rob_root`.
    """
    _check_n(n)
    _check_eps(eps)
    m, bracket = _rob_bracket(spec, n, eps)
    return _prefactor(spec, n) * math.exp(-m) * bracket


def loss_gap_rob_signed_log(spec: GaussianSpec, n: float, eps: float) -> tuple[int, float]:
    """``(sign, log|r_rob|)`` without underflow; ``(0, -inf)`` on an exact zero.

    The gap is split into ``e^{-a}`` and the pair ``e^{-b} - e^{-c}``, each
    taken to log scale on its own, so neither can underflow before the two
    are combined.
    """
    _check_n(n)
    _check_eps(eps)
    a, b, c = _exponents(spec, n, eps)
    c_minus_b = n * eps * (2.0 * spec.mu - eps) / (2.0 * spec.sigma**2)
    terms = [(1, -a)]
    if c_minus_b != 0:
        # e^{-b} - e^{-c} = sign * e^{-min(b, c)} * (1 - e^{-|c - b|})
        pair_sign = 1 if c_minus_b > 0 else -1
        terms.append((pair_sign, -min(b, c) + math.log(-math.expm1(-abs(c_minus_b)))))
    top = max(t[1] for t in terms)
    total = math.fsum(sg * math.exp(lg - top) for sg, lg in terms)
    if total == 0.0:
        return 0, -math.inf
    sign = 1 if total > 0 else -1
    return sign, math.log(_prefactor(spec, n)) + top + math.log(abs(total))


def dstd_dn(spec: GaussianSpec, n: float) -> float:
    """Analytic derivative of :func:`loss_gap_std` in ``n``; always negative."""
    _check_n(n)
    d, mu, sigma, gamma = spec.d, spec.mu, spec.sigma, spec.gamma
    decay = math.exp(-n * mu**2 / (2.0 * sigma**2))
    return (
        -d * gamma * mu**2 / (sigma * math.sqrt(2.0 * n * math.pi)) * decay
        - d * gamma * sigma / (math.sqrt(2.0 * math.pi) * n**1.5) * decay
    )


def drob_deps(spec: GaussianSpec, n: float, eps: float) -> float:
    """Analytic partial derivative of :func:`loss_gap_rob` in ``eps``."""
    _check_n(n)
    _check_eps(eps)
    d, mu, sigma, gamma = spec.d, spec.mu, spec.sigma, spec.gamma
    two_var = 2.0 * sigma**2
    lo = (mu - eps) * math.exp(-n * (mu - eps) ** 2 / two_var)
    hi = (mu + eps) * math.exp(-n * (mu + eps) ** 2 / two_var)
    return d * gamma / sigma * math.sqrt(2.0 * n / math.pi) * (lo - hi)


def regime_threshold(spec: GaussianSpec, eps: float) -> float:
    """Size ``n*`` where the robust gap turns from decreasing to increasing in eps.

    Only defined for ``0 < eps < mu``; tends to ``(sigma/mu)^2`` as eps -> 0.
    """
    if not 0 < eps < spec.mu:
        raise ValueError(f"threshold needs 0 < eps < mu, got eps={eps!r}, mu={spec.mu!r}")
    # log((mu+eps)/(mu-eps)) via log1p keeps digits for tiny eps
    log_ratio = math.log1p(2.0 * eps / (spec.mu - eps))
    return spec.sigma**2 / (2.0 * spec.mu * eps) * log_ratio


def eps_regime(spec: GaussianSpec, n: float, eps: float) -> EpsRegime:
    """Direction in which the robust gap moves as eps grows, at size ``n``.

    ``0 < eps < mu``: decreasing below ``n*``, increasing at or above it.
    ``eps >= mu`` (``eps == mu`` included): always decreasing.  For
    ``eps >= 2*mu`` there is no theorem, so the analytic derivative's sign
    decides; an underflowed zero counts as decreasing because both of its
    terms are non-positive there.
    """
    _check_n(n)
    if not (math.isfinite(eps) and eps > 0):
        raise ValueError(f"eps must be finite and > 0, got {eps!r}")
    if eps < spec.mu:
        threshold = regime_threshold(spec, eps)
        kind = Regime.DECREASING_IN_EPS if n < threshold else Regime.INCREASING_IN_EPS
        return EpsRegime(kind, threshold)
    if eps >= 2.0 * spec.mu and drob_deps(spec, n, eps) > 0:
        return EpsRegime(Regime.INCREASING_IN_EPS)
    return EpsRegime(Regime.ALWAYS_DECREASING)


def rob_root_bracket(spec: GaussianSpec, eps: float) -> tuple[float, float]:
    if not eps > 2.0 * spec.mu:
        raise ValueError("a root bracket exists only for eps > 2*mu")
    scale = 2.0 * spec.sigma**2 * math.log(2.0)
    return scale / (eps * (eps + 2.0 * spec.mu)), scale / (eps * (eps - 2.0 * spec.mu))


def _root_factor(spec: GaussianSpec, eps: float) -> Callable[[float], float]:
    # e^{-a} + e^{-b} - e^{-c} divided by e^{-c}; same sign, no underflow
    two_var = 2.0 * spec.sigma**2
    lower = eps * (eps + 2.0 * spec.mu) / two_var
    upper = eps * (eps - 2.0 * spec.mu) / two_var

    def h(n: float) -> float:
        return math.exp(-n * lower) + math.exp(-n * upper) - 1.0

    return h


def _bisect(f: Callable[[float], float], lo: float, hi: float, rtol: float, max_iter: int = 400) -> float:
    f_lo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * abs(mid):
            return mid
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rob_root(spec: GaussianSpec, eps: float, rtol: float = 1e-12) -> Optional[RobRoot]:
    """The unique finite root ``n0`` of the robust gap, or None for eps <= 2*mu."""
    _check_eps(eps)
    if eps <= 2.0 * spec.mu:
        return None
    lo, hi = rob_root_bracket(spec, eps)
    h = _root_factor(spec, eps)
    h_lo, h_hi = h(lo), h(hi)
    if not (h_lo > 0 > h_hi):
        raise TheoryViolation(
            f"root factor does not change sign on ({lo!r}, {hi!r}) for eps={eps!r}: "
            f"h(lo)={h_lo!r}, h(hi)={h_hi!r}"
        )
    return RobRoot(_bisect(h, lo, hi, rtol), (lo, hi))


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f: Callable[[float], float], a: float, b: float, atol: float) -> float:
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > atol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def rob_minimum(
    spec: GaussianSpec, eps: float, atol: float = 1e-9, n_ceiling: float = 1e6
) -> RobMinimum:
    """Local minimiser ``n1 > n0`` of the robust gap for ``eps > 2*mu``.

    The bracket grows geometrically from the root until the gap rises again,
    then golden-section search narrows it to width ``atol``.
    """
    if not eps > 2.0 * spec.mu:
        raise ValueError(f"rob_minimum needs eps > 2*mu, got eps={eps!r}")
    root = rob_root(spec, eps)
    assert root is not None

    def f(n: float) -> float:
        return loss_gap_rob(spec, n, eps)

    left, mid = root.n0, 2.0 * root.n0
    right = 2.0 * mid
    f_mid, f_right = f(mid), f(right)
    while f_right <= f_mid:
        if right > n_ceiling:
            raise MinimumNotFound(f"no bracket below n={n_ceiling!r} for eps={eps!r}")
        left, mid, f_mid = mid, right, f_right
        right = 2.0 * right
        f_right = f(right)

    n1 = _golden_section(f, left, right, atol)
    value = f(n1)
    if not value < 0:
        raise TheoryViolation(f"robust gap at its minimum n1={n1!r} is {value!r}, expected < 0")
    return RobMinimum(n1, value)


def compare_rob_std(spec: GaussianSpec, n: float, eps: float) -> Ordering:
    """Order the robust and standard gaps at ``(n, eps)``.

    Equality uses a relative tolerance on the shared-scale difference
    ``e^{-a} + e^{-b} - 2e^{-c}``, so the verdict does not collapse to
    EQUAL once both gaps are smaller than any absolute tolerance.
    """
    _check_n(n)
    _check_eps(eps)
    a, b, c = _exponents(spec, n, eps)
    m = min(a, b, c)
    two_var = 2.0 * spec.sigma**2
    c_minus_a = -n * eps * (eps + 2.0 * spec.mu) / two_var
    c_minus_b = n * eps * (2.0 * spec.mu - eps) / two_var
    ec = math.exp(m - c)
    diff = ec * math.expm1(c_minus_a) + _exp_diff(m, b, c, c_minus_b)
    scale = max(abs(diff + ec), ec)
    if abs(diff) <= EQUAL_RTOL * scale:
        return Ordering.EQUAL
    return Ordering.ROB_GREATER if diff > 0 else Ordering.STD_GREATER


def bayes_accuracy(spec: GaussianSpec) -> float:
    """Accuracy of any all-positive linear rule, which is Bayes optimal here."""
    return normal_cdf(math.sqrt(spec.d) * spec.mu / spec.sigma)


def gap_curve(spec: GaussianSpec, n_values, eps: float) -> list[GapPoint]:
    return [GapPoint(float(n), float(eps), loss_gap_rob(spec, n, eps)) for n in n_values]
