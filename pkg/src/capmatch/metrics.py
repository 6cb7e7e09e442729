"""Label-quality, agreement, and distributional-robustness metrics.

Definitions used throughout:

* accuracy            = correct / (correct + incorrect)
* dataset utilization = correct / (correct + incorrect + unlabeled)
* average robustness  = simple mean of the per-shift accuracies
* E.R.R.              = average robustness / base-task accuracy
* effective robustness = shift metric minus a baseline trend's prediction
  at the model's base accuracy, on the trend's transformed axis
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .corpus import Sample, compose_caption
from .errors import MetricError
from .matcher import MatchOutcome
from .textproc import normalize

SHIFT_COLUMNS = ("in_a", "in_r", "in_s", "in_v2")
FIT_SPACES = ("linear", "logit", "log10")


# ---------------------------------------------------------------------------
# label quality


@dataclass
class ClassQuality:
    matched: int = 0
    correct: int = 0

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.matched if self.matched else None


@dataclass
class LabelQualityReport:
    total: int
    correct: int
    incorrect: int
    unlabeled: int
    per_class: dict[int, ClassQuality] = field(default_factory=dict)

    @property
    def accuracy(self) -> float | None:
        """None when nothing was labeled; accuracy over an empty set is undefined."""
        labeled = self.correct + self.incorrect
        return self.correct / labeled if labeled else None

    @property
    def ds_util(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "incorrect": self.incorrect,
            "unlabeled": self.unlabeled,
            "accuracy": self.accuracy,
            "ds_util": self.ds_util,
            "per_class": {
                str(idx): {
                    "matched": cq.matched,
                    "correct": cq.correct,
                    "accuracy": cq.accuracy,
                }
                for idx, cq in sorted(self.per_class.items())
            },
        }


def label_quality(
    outcomes: Iterable[MatchOutcome | tuple[str, int | None]],
    truth: Mapping[str, int],
) -> LabelQualityReport:
    """Score single-label outcomes against ground truth.

    Accepts MatchOutcomes or plain ``(sample_id, label_or_None)`` pairs.
    Every sample must have ground truth; outcomes must carry at most one
    label (strict or single-class output).
    """
    correct = incorrect = unlabeled = 0
    per_class: dict[int, ClassQuality] = {}
    total = 0
    for outcome in outcomes:
        if isinstance(outcome, MatchOutcome):
            sid, labels = outcome.sample_id, outcome.labels
        else:
            sid, label = outcome
            labels = [] if label is None else [label]
        if len(labels) > 1:
            raise MetricError(
                f"sample {sid!r} has {len(labels)} labels; label quality is defined "
                "for single-label outcomes"
            )
        if sid not in truth:
            raise MetricError(f"sample {sid!r} has no ground truth")
        total += 1
        if not labels:
            unlabeled += 1
            continue
        label = labels[0]
        cq = per_class.setdefault(label, ClassQuality())
        cq.matched += 1
        if label == truth[sid]:
            correct += 1
            cq.correct += 1
        else:
            incorrect += 1
    return LabelQualityReport(total, correct, incorrect, unlabeled, per_class)


def dataset_utilization(correct: int, total: int) -> float:
    """Correctly labeled samples over all samples (correct + incorrect + unlabeled)."""
    if total <= 0:
        raise MetricError("total must be positive")
    if not 0 <= correct <= total:
        raise MetricError("correct count must lie in [0, total]")
    return correct / total


def agreement(labels_a: Mapping[str, int], labels_b: Mapping[str, int]) -> float:
    """Fraction of shared ids on which two single-label assignments agree."""
    shared = labels_a.keys() & labels_b.keys()
    if not shared:
        raise MetricError("label assignments share no sample ids")
    equal = sum(1 for sid in shared if labels_a[sid] == labels_b[sid])
    return equal / len(shared)


# ---------------------------------------------------------------------------
# robustness aggregates


@dataclass
class RobustnessRecord:
    model_id: str
    base_acc: float
    shift_accs: dict[str, float]
    n_base: int | None = None
    n_shift: int | None = None

    def __post_init__(self):
        if not 0 <= self.base_acc <= 1:
            raise MetricError(f"{self.model_id}: base_acc {self.base_acc} outside [0, 1]")
        if not self.shift_accs:
            raise MetricError(f"{self.model_id}: no shift accuracies")
        for name, value in self.shift_accs.items():
            if not 0 <= value <= 1:
                raise MetricError(f"{self.model_id}: {name} accuracy {value} outside [0, 1]")


def avg_robustness(rec: RobustnessRecord) -> float:
    """Simple mean of the shift accuracies present."""
    return sum(rec.shift_accs.values()) / len(rec.shift_accs)


def err(rec: RobustnessRecord) -> float:
    """Effective Robustness Ratio: average shift accuracy over base accuracy."""
    if rec.base_acc <= 0:
        raise MetricError(f"{rec.model_id}: E.R.R. undefined at base accuracy 0")
    return avg_robustness(rec) / rec.base_acc


def binomial_halfwidth(p: float, n: int, z: float = 1.96) -> float:
    """Normal-approximation confidence half-width for a proportion."""
    if not 0 <= p <= 1:
        raise MetricError(f"proportion {p} outside [0, 1]")
    if n < 1:
        raise MetricError("n must be at least 1")
    return z * math.sqrt(p * (1 - p) / n)


# ---------------------------------------------------------------------------
# trend fits


def axis_transform(p: float, space: str) -> float:
    if space == "linear":
        return p
    if space == "logit":
        if not 0 < p < 1:
            raise MetricError(f"logit transform needs 0 < p < 1, got {p}")
        return math.log(p / (1 - p))
    if space == "log10":
        if not 0 < p < 1:
            raise MetricError(f"log10 transform needs 0 < p < 1, got {p}")
        return math.log10(p)
    raise ValueError(f"unknown fit space {space!r}")


def _axis_inverse(value: float, space: str) -> float:
    if space == "linear":
        return value
    if space == "logit":
        return 1 / (1 + math.exp(-value))
    return 10.0 ** value


@dataclass(frozen=True)
class TrendFit:
    space: str
    slope: float
    intercept: float
    r2: float
    r2_raw: float

    def predict_transformed(self, base_acc: float) -> float:
        return self.slope * axis_transform(base_acc, self.space) + self.intercept

    def predict(self, base_acc: float) -> float:
        return _axis_inverse(self.predict_transformed(base_acc), self.space)


def fit_trend(points: Sequence[tuple[float, float]], space: str) -> TrendFit:
    """Ordinary least squares on the transformed axes.

    ``r2`` scores the fit on the transformed axes; ``r2_raw`` scores the
    back-transformed predictions against the raw y values (for linear
    space the two coincide). Degenerate x-variance is an error.
    """
    if len(points) < 2:
        raise MetricError("trend fit needs at least 2 points")
    xs = np.array([axis_transform(x, space) for x, _ in points])
    ys = np.array([axis_transform(y, space) for _, y in points])
    sxx = float(np.sum((xs - xs.mean()) ** 2))
    if sxx == 0.0:
        raise MetricError("trend fit is degenerate: no variance in x")
    slope = float(np.sum((xs - xs.mean()) * (ys - ys.mean())) / sxx)
    intercept = float(ys.mean() - slope * xs.mean())

    res = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(res**2)) / ss_tot

    raw_y = np.array([y for _, y in points])
    raw_pred = np.array([_axis_inverse(v, space) for v in slope * xs + intercept])
    raw_tot = float(np.sum((raw_y - raw_y.mean()) ** 2))
    r2_raw = 1.0 if raw_tot == 0.0 else 1.0 - float(np.sum((raw_y - raw_pred) ** 2)) / raw_tot
    return TrendFit(space, slope, intercept, r2, r2_raw)


def effective_robustness(rec: RobustnessRecord, baseline: TrendFit) -> float:
    """Signed residual above/below the baseline trend, on the transformed axis."""
    observed = axis_transform(avg_robustness(rec), baseline.space)
    return observed - baseline.predict_transformed(rec.base_acc)


# ---------------------------------------------------------------------------
# caption statistics


@dataclass
class CaptionStats:
    count: int
    mean_len: float
    stddev_len: float
    unique_tokens: int

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mean_len": self.mean_len,
            "stddev_len": self.stddev_len,
            "unique_tokens": self.unique_tokens,
        }


def caption_stats(samples: Iterable[Sample], source: str) -> CaptionStats:
    """Character-length mean and population stddev plus unique-token count."""
    count = 0
    total = 0.0
    total_sq = 0.0
    vocab: set[str] = set()
    for sample in samples:
        caption = compose_caption(sample, source)
        count += 1
        n = len(caption)
        total += n
        total_sq += n * n
        vocab.update(normalize(caption))
    if count == 0:
        return CaptionStats(0, 0.0, 0.0, 0)
    mean = total / count
    variance = max(total_sq / count - mean * mean, 0.0)
    return CaptionStats(count, mean, math.sqrt(variance), len(vocab))


# ---------------------------------------------------------------------------
# robustness CSV I/O and results-table verification


def read_robustness_csv(stream: IO[str]) -> list[RobustnessRecord]:
    """Read records from CSV with header model_id,base_acc,in_a,in_r,in_s,in_v2.

    n_base and n_shift columns are optional; blank shift cells mean the
    shift was not evaluated. Extra columns are ignored here.
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or "model_id" not in reader.fieldnames:
        raise MetricError("robustness CSV needs a header with a model_id column")
    records = []
    for row in reader:
        try:
            shifts = {
                name: float(row[name])
                for name in SHIFT_COLUMNS
                if row.get(name) not in (None, "")
            }
            records.append(
                RobustnessRecord(
                    model_id=row["model_id"],
                    base_acc=float(row["base_acc"]),
                    shift_accs=shifts,
                    n_base=int(row["n_base"]) if row.get("n_base") else None,
                    n_shift=int(row["n_shift"]) if row.get("n_shift") else None,
                )
            )
        except (KeyError, ValueError) as exc:
            raise MetricError(f"bad robustness row {row.get('model_id')!r}: {exc}") from exc
    return records


def write_robustness_csv(records: Iterable[RobustnessRecord], sink: IO[str]) -> None:
    writer = csv.writer(sink)
    writer.writerow(["model_id", "base_acc", *SHIFT_COLUMNS, "n_base", "n_shift"])
    for rec in records:
        writer.writerow(
            [
                rec.model_id,
                rec.base_acc,
                *[rec.shift_accs.get(name, "") for name in SHIFT_COLUMNS],
                rec.n_base if rec.n_base is not None else "",
                rec.n_shift if rec.n_shift is not None else "",
            ]
        )


@dataclass
class TableRow:
    record: RobustnessRecord
    ref_avg_rob: float | None
    ref_err: float | None


def read_results_table(stream: IO[str]) -> list[TableRow]:
    """Read a results CSV that may also carry reference avg_rob/err columns."""
    text_rows = list(csv.DictReader(stream))
    out = []
    for row in text_rows:
        shifts = {
            name: float(row[name])
            for name in SHIFT_COLUMNS
            if row.get(name) not in (None, "")
        }
        rec = RobustnessRecord(row["model_id"], float(row["base_acc"]), shifts)
        ref_avg = float(row["avg_rob"]) if row.get("avg_rob") else None
        ref_err = float(row["err"]) if row.get("err") else None
        out.append(TableRow(rec, ref_avg, ref_err))
    return out


def verify_results_table(rows: Iterable[TableRow]) -> list[dict]:
    """Recompute each row's aggregates and report deviations from its
    reference columns.

    ``avg_rob_dev`` compares the mean of the shift columns against the
    reference average. ``err_dev`` compares the ratio of the row's own
    reference average and base columns against the reference ratio:
    tables of this shape derive the ratio from the already-rounded
    average column, so that is the reproducible recomputation.
    """
    report = []
    for row in rows:
        rec = row.record
        avg = avg_robustness(rec)
        entry: dict = {
            "model_id": rec.model_id,
            "base_acc": rec.base_acc,
            "avg_rob": avg,
            "err": err(rec),
        }
        if row.ref_avg_rob is not None:
            entry["ref_avg_rob"] = row.ref_avg_rob
            entry["avg_rob_dev"] = abs(avg - row.ref_avg_rob)
            if row.ref_err is not None:
                ref_ratio = err(
                    RobustnessRecord(rec.model_id, rec.base_acc, {"avg_rob": row.ref_avg_rob})
                )
                entry["ref_err"] = row.ref_err
                entry["err_dev"] = abs(ref_ratio - row.ref_err)
        report.append(entry)
    return report
