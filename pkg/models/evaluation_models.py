"""
Evaluation Models

Confusion counts over patch classifications (positive class: occlusion) and
the three rates derived from them.
"""

from dataclasses import dataclass
from typing import Optional

from utils.errors import DataError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise DataError(f"negative confusion count in {self}")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.fp + self.tn


@dataclass(frozen=True)
class Metrics:
    """
    Rates in [0, 1]; None marks a metric whose denominator is zero.

    Attributes:
        overall_error: (fp + fn) / total
        false_alarm: fp / (fp + tn)
        missed_detection: fn / (fn + tp)
    """
    overall_error: Optional[float]
    false_alarm: Optional[float]
    missed_detection: Optional[float]


@dataclass(frozen=True)
class EvaluationResult:
    """
    Report row for one model on one patch set.

    Attributes:
        name: Row label, e.g. 'RGB-D' or 'RGB'
        counts: Confusion counts over all patches
        metrics: Rates from counts
        appearance_counts: Counts restricted to patches centered on appearance-only edges
        appearance_false_alarm: False-alarm rate on those patches
    """
    name: str
    counts: ConfusionCounts
    metrics: Metrics
    appearance_counts: ConfusionCounts = ConfusionCounts()
    appearance_false_alarm: Optional[float] = None
