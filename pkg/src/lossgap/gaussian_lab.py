"""Sampling, exact ERM and Monte Carlo loss gaps for the Gaussian model.

Randomness is fully determined by 64-bit integer seeds.  Uniforms come from
numpy's PCG64 bit generator (its ``random()`` output is specified bit-for-bit
by numpy's stream-compatibility policy) and normals are derived from those
uniforms with Box-Muller, so a seed pins the dataset on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from lossgap.analytic import GaussianSpec

MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# stream tags for derived seeds
TRAIN_STREAM = 0
TEST_STREAM = 1


def splitmix64(z: int) -> int:
    """SplitMix64 finaliser (Steele, Lea & Flood 2014)."""
    z = (z + _GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, index: int) -> int:
    """Derive the seed of sub-stream ``index`` from ``seed``.

    Element ``index`` of the SplitMix64 sequence started at
    ``splitmix64(seed)``: distinct indices give distinct seeds, the map is
    not symmetric in its arguments, and each derived seed depends only on
    the pair, so trials can run in any order.
    """
    start = splitmix64(seed & MASK64)
    return splitmix64((start + (index & MASK64) * _GOLDEN_GAMMA) & MASK64)


def uniform_stream(seed: int, size: int) -> np.ndarray:
    return np.random.Generator(np.random.PCG64(seed & MASK64)).random(size)


def box_muller(uniforms: np.ndarray, size: int) -> np.ndarray:
    """``size`` standard normals from ``2*ceil(size/2)`` uniforms in [0, 1)."""
    half = (size + 1) // 2
    u1 = 1.0 - uniforms[:half]  # (0, 1]
    u2 = uniforms[half : 2 * half]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    return np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:size]


class LabeledSample(NamedTuple):
    x: np.ndarray
    y: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` labelled samples stored as an ``(n, d)`` matrix and a label vector."""

    X: np.ndarray
    y: np.ndarray
    spec: GaussianSpec
    seed_tag: int = 0

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("dataset must hold at least one sample as an (n, d) matrix")
        if X.shape[1] != self.spec.d:
            raise ValueError(f"samples have {X.shape[1]} coordinates, the model has d={self.spec.d}")
        if y.shape != (X.shape[0],):
            raise ValueError("need exactly one label per sample")
        if not np.all(np.abs(y) == 1):
            raise ValueError("labels must be -1 or +1")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample], spec: GaussianSpec, seed_tag: int = 0):
        X = np.array([np.asarray(s.x, dtype=float) for s in samples])
        y = np.array([s.y for s in samples], dtype=float)
        return cls(X, y, spec, seed_tag)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def samples(self) -> Iterator[LabeledSample]:
        for xi, yi in zip(self.X, self.y):
            yield LabeledSample(xi, int(yi))

    @property
    def mean_margin(self) -> np.ndarray:
        """Per-coordinate ``u_j = (1/n) sum_i y_i x_ij``."""
        return self.y @ self.X / len(self)

    def with_labels(self, y: np.ndarray) -> "Dataset":
        return Dataset(self.X, y, self.spec, self.seed_tag)


def sample_dataset(spec: GaussianSpec, n: int, seed: int, label_flip: float = 0.0) -> Dataset:
    """Draw ``n`` i.i.d. samples.

    Stream layout for one seed: ``n`` uniforms for the labels, then the
    Box-Muller uniforms for the ``n*d`` noise terms (row-major), then, only
    when ``label_flip > 0``, ``n*d`` uniforms choosing which coordinates have
    their class mean negated.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not 0.0 <= label_flip < 0.5:
        raise ValueError(f"label_flip must lie in [0, 1/2), got {label_flip!r}")
    n = int(n)
    d = spec.d
    size = n * d
    gauss_draws = 2 * ((size + 1) // 2)
    flip_draws = size if label_flip > 0 else 0
    u = uniform_stream(seed, n + gauss_draws + flip_draws)

    y = np.where(u[:n] < 0.5, 1.0, -1.0)
    noise = box_muller(u[n : n + gauss_draws], size).reshape(n, d)
    means = np.repeat((y * spec.mu)[:, None], d, axis=1)
    if flip_draws:
        flips = u[n + gauss_draws :].reshape(n, d) < label_flip
        means = np.where(flips, -means, means)
    X = means + spec.sigma * noise
    return Dataset(X, y, spec, seed & MASK64)


@dataclass(frozen=True, eq=False)
class LinearModel:
    theta: np.ndarray
    gamma: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).copy()
        if theta.ndim != 1:
            raise ValueError("theta must be a vector")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma!r}")
        if np.any(np.abs(theta) > self.gamma + 1e-12):
            raise ValueError("theta violates the sup-norm bound gamma")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)


def erm_std(data: Dataset, gamma: float) -> LinearModel:
    """``theta_j = gamma * sign(u_j)``; a zero margin gives ``theta_j = 0``."""
    return LinearModel(gamma * np.sign(data.mean_margin), gamma)


def erm_rob(data: Dataset, gamma: float, eps: float, form: str = "mean") -> LinearModel:
    """``theta_j = gamma * sign(s_j - eps * sign(s_j))``.

    ``form="mean"`` uses the mean margin ``s = u`` (default); ``form="sum"``
    uses the unnormalised ``s = n*u``, which differs whenever
    ``|u_j| < eps < n|u_j|``.
    """
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps!r}")
    if form == "mean":
        s = data.mean_margin
    elif form == "sum":
        s = data.y @ data.X
    else:
        raise ValueError(f"form must be 'mean' or 'sum', got {form!r}")
    return LinearModel(gamma * np.sign(s - eps * np.sign(s)), gamma)


def _check_dims(model: LinearModel, x: np.ndarray) -> None:
    if x.shape[-1] != model.theta.shape[0]:
        raise ValueError(f"dimension mismatch: theta has {model.theta.shape[0]}, x has {x.shape[-1]}")


def linear_loss(model: LinearModel, sample: LabeledSample) -> float:
    x = np.asarray(sample.x, dtype=float)
    _check_dims(model, x)
    return float(-sample.y * (model.theta @ x))


def adversarial_linear_loss(model: LinearModel, sample: LabeledSample, eps: float) -> float:
    """Worst-case linear loss over the sup-norm ball of radius ``eps``.

    The maximiser is ``delta = -eps * y * sign(theta)``, giving
    ``-y<theta, x> + eps * ||theta||_1``.
    """
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps!r}")
    return linear_loss(model, sample) + eps * float(np.abs(model.theta).sum())


def linear_losses(model: LinearModel, data: Dataset) -> np.ndarray:
    _check_dims(model, data.X)
    return -data.y * (data.X @ model.theta)


def mean_linear_loss(model: LinearModel, data: Dataset) -> float:
    return float(linear_losses(model, data).mean())


def fit(data: Dataset, gamma: float, eps: float, solver=None) -> LinearModel:
    """Exact ERM (``solver`` None or ``"exact"``) or gradient descent (a TrainConfig)."""
    if solver is None or solver == "exact":
        return erm_std(data, gamma) if eps == 0 else erm_rob(data, gamma, eps)
    from dataclasses import replace

    from lossgap.trainer import TrainConfig, train

    if not isinstance(solver, TrainConfig):
        raise ValueError(f"unknown solver {solver!r}")
    model, _ = train(data, gamma, replace(solver, eps=eps))
    return model


@dataclass(frozen=True)
class GapEstimate:
    mean: float
    stderr: float
    trials: int

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError("a standard error needs at least two trials")
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")


class TrialError(RuntimeError):
    def __init__(self, trial: int, cause: Exception):
        super().__init__(f"trial {trial} failed: {cause}")
        self.trial = trial


def summarize(values: Sequence[float]) -> GapEstimate:
    """Mean and ``std(ddof=1)/sqrt(k)``, summed exactly so order never matters."""
    k = len(values)
    if k < 2:
        raise ValueError("need at least two values")
    mean = math.fsum(values) / k
    var = math.fsum((v - mean) ** 2 for v in values) / (k - 1)
    return GapEstimate(mean, math.sqrt(var / k), k)


def trial_gap_samples(
    spec: GaussianSpec,
    n: int,
    eps_values: Sequence[float],
    trials: int,
    master_seed: int,
    solver=None,
) -> np.ndarray:
    """Per-trial loss gaps, shape ``(len(eps_values), trials)``.

    Trial ``t`` draws its training and test sets from
    ``mix_seed(mix_seed(master_seed, t), TRAIN_STREAM / TEST_STREAM)``, so
    every eps shares the same datasets and a column does not depend on
    which other eps values were requested.
    """
    out = np.empty((len(eps_values), trials))
    for t in range(trials):
        trial_seed = mix_seed(master_seed, t)
        train_set = sample_dataset(spec, n, mix_seed(trial_seed, TRAIN_STREAM))
        test_set = sample_dataset(spec, n, mix_seed(trial_seed, TEST_STREAM))
        for k, eps in enumerate(eps_values):
            try:
                model = fit(train_set, spec.gamma, eps, solver)
            except Exception as exc:
                raise TrialError(t, exc) from exc
            out[k, t] = mean_linear_loss(model, test_set) - mean_linear_loss(model, train_set)
    return out


def empirical_loss_gap(
    spec: GaussianSpec,
    n: int,
    eps: float,
    trials: int,
    master_seed: int,
    solver=None,
) -> GapEstimate:
    """Monte Carlo estimate of the expected test-minus-train linear loss."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps!r}")
    samples = trial_gap_samples(spec, n, [eps], trials, master_seed, solver)
    return summarize(samples[0].tolist())


def empirical_loss_gaps(
    spec: GaussianSpec,
    n: int,
    eps_values: Sequence[float],
    trials: int,
    master_seed: int,
    solver=None,
) -> list[GapEstimate]:
    """Same as :func:`empirical_loss_gap` for several eps, sharing the draws."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    samples = trial_gap_samples(spec, n, list(eps_values), trials, master_seed, solver)
    return [summarize(row.tolist()) for row in samples]


def test_accuracy(model: LinearModel, spec: GaussianSpec, n_test: int, seed: int) -> float:
    """Fraction of fresh samples with ``sign(<theta, x>) == y``; a zero score is wrong."""
    data = sample_dataset(spec, n_test, seed)
    _check_dims(model, data.X)
    return float(np.mean(np.sign(data.X @ model.theta) == data.y))


test_accuracy.__test__ = False  # not a pytest test
