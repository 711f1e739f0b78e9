"""
Evaluator Service

Patch-level confusion counts, the overall error / false alarm / missed
detection rates, and the comparison report written by the eval command.
"""

import csv
import logging
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from models.evaluation_models import ConfusionCounts, EvaluationResult, Metrics
from models.frame_models import PatchLabel, PatchSet
from models.network_models import CnnModel
from models.training_models import EpochRecord
from services.training import predict_labels
from utils.errors import ConfigError, DataError, ShapeError
from utils.parallel import Execution

logger = logging.getLogger(__name__)

REPORT_TEXT = "report.txt"
REPORT_CSV = "report.csv"
REPORT_COLUMNS = ["input", "overall_error", "false_alarm", "missed_detection",
                  "appearance_false_alarm", "patches", "tp", "fp", "tn", "fn"]


def confusion(predicted: np.ndarray, labels: np.ndarray) -> ConfusionCounts:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.shape != labels.shape:
        raise ShapeError("predictions", labels.shape, predicted.shape, op="confusion")
    positive = predicted == PatchLabel.OCCLUSION
    actual = labels == PatchLabel.OCCLUSION
    return ConfusionCounts(
        tp=int(np.count_nonzero(positive & actual)),
        fp=int(np.count_nonzero(positive & ~actual)),
        tn=int(np.count_nonzero(~positive & ~actual)),
        fn=int(np.count_nonzero(~positive & actual)),
    )


def evaluate(model: CnnModel, patches: PatchSet, execution: Optional[Execution] = None) -> ConfusionCounts:
    """Confusion counts of argmax predictions over normalized patches."""
    if len(patches) == 0:
        raise DataError("cannot evaluate an empty patch set")
    if patches.channels != model.channels:
        raise ShapeError("channels", model.channels, patches.channels, op="evaluate")
    return confusion(predict_labels(model, patches, execution), patches.labels)


def _rate(numerator: int, denominator: int) -> Optional[float]:
    if denominator == 0:
        return None
    return float(Fraction(numerator, denominator))


def metrics(counts: ConfusionCounts) -> Metrics:
    """Rates from counts; a zero denominator leaves that rate undefined (None)."""
    result = Metrics(
        overall_error=_rate(counts.fp + counts.fn, counts.total),
        false_alarm=_rate(counts.fp, counts.fp + counts.tn),
        missed_detection=_rate(counts.fn, counts.fn + counts.tp),
    )
    undefined = [name for name, value in vars(result).items() if value is None]
    if undefined:
        logger.warning(f"Undefined metrics {undefined} for counts {counts}")
    return result


def evaluate_report(name: str, model: CnnModel, patches: PatchSet,
                    execution: Optional[Execution] = None) -> EvaluationResult:
    """All-patch metrics plus the false-alarm rate on appearance-edge patches."""
    if len(patches) == 0:
        raise DataError("cannot evaluate an empty patch set")
    if patches.channels != model.channels:
        raise ShapeError("channels", model.channels, patches.channels, op="evaluate")
    predicted = predict_labels(model, patches, execution)
    counts = confusion(predicted, patches.labels)
    on_appearance = patches.appearance & (patches.labels == PatchLabel.NO_OCCLUSION)
    appearance_counts = confusion(predicted[on_appearance], patches.labels[on_appearance])
    result = EvaluationResult(
        name=name,
        counts=counts,
        metrics=metrics(counts),
        appearance_counts=appearance_counts,
        appearance_false_alarm=_rate(appearance_counts.fp, appearance_counts.fp + appearance_counts.tn),
    )
    logger.info(f"{name}: {counts.total} patches, overall {_percent(result.metrics.overall_error)}, "
                f"false alarm {_percent(result.metrics.false_alarm)}, "
                f"missed {_percent(result.metrics.missed_detection)}")
    return result


def _percent(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{100 * value:.2f}%"


def format_report(results: Sequence[EvaluationResult]) -> str:
    """Plain-text table, one row per result."""
    header = ["Input", "Overall error", "False alarm", "Missed detection", "Appearance false alarm", "Patches"]
    rows = [[r.name, _percent(r.metrics.overall_error), _percent(r.metrics.false_alarm),
             _percent(r.metrics.missed_detection), _percent(r.appearance_false_alarm), str(r.counts.total)]
            for r in results]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
             for row in [header] + rows]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def write_report(results: Sequence[EvaluationResult], out_dir: Union[str, Path]) -> List[Path]:
    """Write report.txt and report.csv into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text_path = out_dir / REPORT_TEXT
    text_path.write_text(format_report(results), encoding="utf-8")

    csv_path = out_dir / REPORT_CSV
    with csv_path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for r in results:
            writer.writerow({
                "input": r.name,
                "overall_error": "" if r.metrics.overall_error is None else r.metrics.overall_error,
                "false_alarm": "" if r.metrics.false_alarm is None else r.metrics.false_alarm,
                "missed_detection": "" if r.metrics.missed_detection is None else r.metrics.missed_detection,
                "appearance_false_alarm": "" if r.appearance_false_alarm is None else r.appearance_false_alarm,
                "patches": r.counts.total,
                "tp": r.counts.tp, "fp": r.counts.fp, "tn": r.counts.tn, "fn": r.counts.fn,
            })
    logger.info(f"Wrote evaluation report to {text_path} and {csv_path}")
    return [text_path, csv_path]


def plot_epochs(records: Sequence[EpochRecord], path: Union[str, Path]) -> Path:
    """Train and test error over epochs as a PNG (needs the experiments extra)."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        raise ConfigError("plotting needs matplotlib; install the 'experiments' extra") from e
    if not records:
        raise DataError("no epoch records to plot")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    epochs = [r.epoch for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [100 * r.train_error for r in records], label="train error")
    ax.plot(epochs, [100 * r.test_error for r in records], label="test error")
    ax.set_xlabel("epoch")
    ax.set_ylabel("error (%)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info(f"Wrote error curves for {len(records)} epochs to {path}")
    return path
