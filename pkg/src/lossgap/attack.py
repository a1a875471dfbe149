"""Constant-threshold membership inference on per-example losses.

An example is predicted to be a training-set member iff its loss is strictly
below the threshold ``tau``.  ``tau`` is calibrated on a shadow model as the
midpoint between a location statistic (median or mean) of its member losses
and of its non-member losses.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import os
import re
import statistics
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

from lossgap.analytic import GaussianSpec
from lossgap.gaussian_lab import (
    TEST_STREAM,
    TRAIN_STREAM,
    fit,
    linear_losses,
    mix_seed,
    sample_dataset,
)

SHADOW_TRAIN_STREAM = 2
SHADOW_TEST_STREAM = 3

TRACE_HEADER = ("example_id", "loss", "is_member")
_DECIMAL = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


class ThresholdMethod(enum.Enum):
    MEDIAN_MIDPOINT = "median"
    MEAN_MIDPOINT = "mean"


class Calibration(NamedTuple):
    tau: float
    degenerate: bool


@dataclass(frozen=True)
class LossRecord:
    example_id: str
    loss: float
    is_member: bool

    def __post_init__(self):
        if not math.isfinite(self.loss):
            raise ValueError(f"loss of {self.example_id!r} is not finite: {self.loss!r}")


@dataclass(frozen=True)
class AttackReport:
    tau: float
    accuracy: float
    loss_gap: float
    n_members: int
    n_nonmembers: int
    method: Optional[ThresholdMethod] = None
    degenerate: bool = False


class TraceFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _location(values: Sequence[float], method: ThresholdMethod) -> float:
    if method is ThresholdMethod.MEDIAN_MIDPOINT:
        return float(statistics.median(values))
    return math.fsum(values) / len(values)


def calibrate_threshold(
    shadow_member_losses: Sequence[float],
    shadow_nonmember_losses: Sequence[float],
    method: ThresholdMethod = ThresholdMethod.MEDIAN_MIDPOINT,
) -> Calibration:
    """Midpoint of the member and non-member location statistics.

    Even-length medians are the midpoint of the two central order
    statistics.  When both statistics coincide the calibration carries no
    information and is flagged as degenerate.
    """
    method = ThresholdMethod(method)
    members = [float(v) for v in shadow_member_losses]
    nonmembers = [float(v) for v in shadow_nonmember_losses]
    if not members or not nonmembers:
        raise ValueError("calibration needs at least one member and one non-member loss")
    a = _location(members, method)
    b = _location(nonmembers, method)
    if a == b:
        return Calibration(a, True)
    return Calibration((a + b) / 2.0, False)


def score_losses(
    losses: np.ndarray,
    is_member: np.ndarray,
    tau: float,
    method: Optional[ThresholdMethod] = None,
    degenerate: bool = False,
) -> AttackReport:
    """Array form of :func:`attack_accuracy`."""
    losses = np.asarray(losses, dtype=float)
    is_member = np.asarray(is_member, dtype=bool)
    n_members = int(is_member.sum())
    n_nonmembers = int(is_member.size - n_members)
    if n_members == 0 or n_nonmembers == 0:
        raise ValueError(
            f"need members and non-members, got {n_members} members and {n_nonmembers} non-members"
        )
    predicted = losses < tau
    accuracy = float(np.mean(predicted == is_member))
    gap = math.fsum(losses[~is_member]) / n_nonmembers - math.fsum(losses[is_member]) / n_members
    return AttackReport(float(tau), accuracy, gap, n_members, n_nonmembers, method, degenerate)


def attack_accuracy(
    records: Sequence[LossRecord],
    tau: float,
    method: Optional[ThresholdMethod] = None,
    degenerate: bool = False,
) -> AttackReport:
    """Score a loss trace against ``tau``; a loss equal to ``tau`` predicts non-member."""
    check_unique_ids(records)
    losses = np.fromiter((r.loss for r in records), dtype=float, count=len(records))
    is_member = np.fromiter((r.is_member for r in records), dtype=bool, count=len(records))
    return score_losses(losses, is_member, tau, method, degenerate)


def calibrate_from_trace(records: Sequence[LossRecord], method) -> Calibration:
    members = [r.loss for r in records if r.is_member]
    nonmembers = [r.loss for r in records if not r.is_member]
    return calibrate_threshold(members, nonmembers, method)


def comparative_leakage(loss_a: float, loss_b: float) -> float:
    """How much more ``a`` leaks about membership than ``b`` under a constant threshold."""
    if not (math.isfinite(loss_a) and math.isfinite(loss_b)):
        raise ValueError("losses must be finite")
    return loss_b - loss_a


def run_membership_experiment(
    spec: GaussianSpec,
    n: int,
    eps: float,
    trials: int,
    master_seed: int,
    method: ThresholdMethod = ThresholdMethod.MEDIAN_MIDPOINT,
    solver=None,
) -> list[AttackReport]:
    """Shadow-calibrated threshold attack on freshly trained Gaussian models.

    Per trial, the shadow model is fit on its own train/test draws and
    calibrates ``tau``; the target model then has its ``n`` training
    examples (members) and ``n`` test examples (non-members) scored.  The
    target draws use the same seed streams as the loss-gap experiment, so
    target trial ``t`` is the model of loss-gap trial ``t``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    method = ThresholdMethod(method)
    reports = []
    for t in range(trials):
        trial_seed = mix_seed(master_seed, t)

        shadow_train = sample_dataset(spec, n, mix_seed(trial_seed, SHADOW_TRAIN_STREAM))
        shadow_test = sample_dataset(spec, n, mix_seed(trial_seed, SHADOW_TEST_STREAM))
        shadow = fit(shadow_train, spec.gamma, eps, solver)
        calibration = calibrate_threshold(
            linear_losses(shadow, shadow_train), linear_losses(shadow, shadow_test), method
        )

        target_train = sample_dataset(spec, n, mix_seed(trial_seed, TRAIN_STREAM))
        target_test = sample_dataset(spec, n, mix_seed(trial_seed, TEST_STREAM))
        target = fit(target_train, spec.gamma, eps, solver)
        losses = np.concatenate([linear_losses(target, target_train), linear_losses(target, target_test)])
        is_member = np.repeat([True, False], n)
        reports.append(score_losses(losses, is_member, calibration.tau, method, calibration.degenerate))
    return reports


def balanced_subsets(
    records: Sequence[LossRecord], repeats: int, seed: int
) -> Iterator[list[LossRecord]]:
    """Subsample the larger class without replacement down to the smaller one.

    Yields ``repeats`` balanced traces; the smaller class is kept whole each time.
    """
    members = [r for r in records if r.is_member]
    nonmembers = [r for r in records if not r.is_member]
    k = min(len(members), len(nonmembers))
    if k == 0:
        raise ValueError("trace needs members and non-members")
    for rep in range(repeats):
        rng = np.random.Generator(np.random.PCG64(mix_seed(seed, rep)))
        if len(members) > k:
            idx = np.sort(rng.choice(len(members), size=k, replace=False))
            yield [members[i] for i in idx] + nonmembers
        else:
            idx = np.sort(rng.choice(len(nonmembers), size=k, replace=False))
            yield members + [nonmembers[i] for i in idx]


def check_unique_ids(records: Iterable[LossRecord]) -> None:
    seen = set()
    for r in records:
        if r.example_id in seen:
            raise ValueError(f"duplicate example_id {r.example_id!r}")
        seen.add(r.example_id)


def _read_text(source) -> str:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            return fh.read()
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def parse_loss_trace(text: str) -> list[LossRecord]:
    if "\r" in text:
        raise TraceFormatError("carriage returns are not allowed; use LF line endings")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TraceFormatError("empty trace, expected header " + ",".join(TRACE_HEADER), 1)
    records: list[LossRecord] = []
    first_seen: dict[str, int] = {}
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if lineno == 1:
            if tuple(row) != TRACE_HEADER:
                raise TraceFormatError(f"header must be {','.join(TRACE_HEADER)!r}, got {lines[0]!r}", 1)
            continue
        if len(row) != 3:
            raise TraceFormatError(f"expected 3 fields, got {len(row)}", lineno)
        example_id, loss_text, member_text = row
        if not example_id:
            raise TraceFormatError("empty example_id", lineno)
        if not _DECIMAL.fullmatch(loss_text):
            raise TraceFormatError(f"loss {loss_text!r} is not a finite decimal number", lineno)
        loss = float(loss_text)
        if not math.isfinite(loss):
            raise TraceFormatError(f"loss {loss_text!r} overflows to a non-finite value", lineno)
        if member_text not in ("0", "1"):
            raise TraceFormatError(f"is_member must be 0 or 1, got {member_text!r}", lineno)
        if example_id in first_seen:
            raise TraceFormatError(
                f"duplicate example_id {example_id!r} (first seen on line {first_seen[example_id]})",
                lineno,
            )
        first_seen[example_id] = lineno
        records.append(LossRecord(example_id, loss, member_text == "1"))
    return records


def load_loss_trace(source) -> list[LossRecord]:
    """Read a ``example_id,loss,is_member`` CSV from a path or text/binary stream."""
    return parse_loss_trace(_read_text(source))


def format_loss_trace(records: Iterable[LossRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for r in records:
        writer.writerow([r.example_id, repr(float(r.loss)), "1" if r.is_member else "0"])
    return buf.getvalue()


def dump_loss_trace(records: Iterable[LossRecord], target) -> None:
    text = format_loss_trace(records)
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        target.write(text)
