"""Projected full-batch gradient descent for the linear model.

Each epoch takes one step on the mean (optionally adversarial) linear loss
and then clamps every coordinate back into ``[-gamma, gamma]``.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from lossgap.gaussian_lab import Dataset, LinearModel, uniform_stream


class Adversary(enum.Enum):
    NONE = "none"
    # FGSM on the linear loss: delta_i = eps * sign(grad_x) = -eps * y_i * sign(theta)
    GRAD_SIGN = "gradsign"
    # delta_i = -eps * y_i * sign(u); its ERM fixed point is the closed-form robust model
    MEAN_SIGN = "meansign"


@dataclass(frozen=True)
class Zeros:
    pass


@dataclass(frozen=True)
class SeededUniform:
    """Initialise each coordinate uniformly in ``[-scale, scale]``, then clamp."""

    scale: float
    seed: int = 0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 200
    eps: float = 0.0
    adversary: Adversary = Adversary.GRAD_SIGN
    init: object = field(default_factory=Zeros)

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if isinstance(self.epochs, bool) or int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs!r}")
        if not (math.isfinite(self.eps) and self.eps >= 0):
            raise ValueError(f"eps must be >= 0, got {self.eps!r}")
        object.__setattr__(self, "adversary", Adversary(self.adversary))
        if not isinstance(self.init, (Zeros, SeededUniform)):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_loss: float
    theta_hash: str
    theta: Optional[np.ndarray] = None


class TrainTrace(list):
    """Per-epoch records, in epoch order."""

    def to_csv(self) -> str:
        lines = ["epoch,mean_loss"]
        lines += [f"{r.epoch},{r.mean_loss!r}" for r in self]
        return "\n".join(lines) + "\n"


class TrainingError(RuntimeError):
    def __init__(self, epoch: int, message: str):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


def _theta_hash(theta: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(theta, dtype="<f8").tobytes()).hexdigest()[:16]


def _initial_theta(config: TrainConfig, d: int, gamma: float) -> np.ndarray:
    if isinstance(config.init, SeededUniform):
        u = uniform_stream(config.init.seed, d)
        return np.clip(config.init.scale * (2.0 * u - 1.0), -gamma, gamma)
    return np.zeros(d)


def _perturbation(data: Dataset, theta: np.ndarray, config: TrainConfig) -> np.ndarray:
    if config.adversary is Adversary.NONE or config.eps == 0:
        return np.zeros_like(data.X)
    if config.adversary is Adversary.GRAD_SIGN:
        direction = np.sign(theta)
    else:
        direction = np.sign(data.mean_margin)
    return -config.eps * data.y[:, None] * direction[None, :]


def train(
    data: Dataset, gamma: float, config: TrainConfig, keep_theta: bool = False
) -> tuple[LinearModel, TrainTrace]:
    """Fit ``theta`` by projected gradient descent.

    Each trace record holds the mean training objective (adversarial when an
    adversary is active) evaluated after that epoch's step.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma!r}")
    X, y = data.X, data.y
    theta = _initial_theta(config, X.shape[1], gamma)
    trace = TrainTrace()
    for epoch in range(1, config.epochs + 1):
        # overflow is reported below as a TrainingError, not as a warning
        with np.errstate(over="ignore", invalid="ignore"):
            X_adv = X + _perturbation(data, theta, config)
            grad = -(y @ X_adv) / len(data)
            theta = np.clip(theta - config.learning_rate * grad, -gamma, gamma)

            X_adv = X + _perturbation(data, theta, config)
            loss = float(np.mean(-y * (X_adv @ theta)))
        if not math.isfinite(loss) or not np.all(np.isfinite(theta)):
            raise TrainingError(epoch, f"non-finite loss {loss!r}")
        trace.append(
            EpochRecord(epoch, loss, _theta_hash(theta), theta.copy() if keep_theta else None)
        )
    return LinearModel(theta, gamma), trace
