"""Tests for confusion counts, error rates and the comparison report."""

import csv
from fractions import Fraction

import numpy as np
import pytest

from models.evaluation_models import ConfusionCounts
from models.training_models import EpochRecord
from services.evaluation import confusion, evaluate, evaluate_report, format_report, metrics, plot_epochs, write_report
from services.network import init_model
from utils.errors import DataError, ShapeError
from utils.parallel import SEQUENTIAL


@pytest.fixture
def always_negative():
    """Model whose logits are the output bias: NoOcclusion for every input."""
    model = init_model(4, filters=(2, 2, 4))
    model.params["fc.weight"][:] = 0.0
    model.params["fc.bias"][:] = [1.0, 0.0]
    return model


class TestConfusion:
    def test_counts(self):
        counts = confusion(np.array([1, 1, 0, 0, 1]), np.array([1, 0, 0, 1, 1]))
        assert counts == ConfusionCounts(tp=2, fp=1, tn=1, fn=1)
        assert counts.total == 5

    def test_perfect_predictions(self):
        labels = np.array([0, 1, 1, 0])
        counts = confusion(labels, labels)
        assert counts.fp == 0 and counts.fn == 0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            confusion(np.zeros(3), np.zeros(4))

    def test_addition(self):
        assert ConfusionCounts(1, 2, 3, 4) + ConfusionCounts(1, 1, 1, 1) == ConfusionCounts(2, 3, 4, 5)


class TestEvaluate:
    def test_always_negative_model(self, always_negative, patch_factory):
        patches = patch_factory(20, positives=2)
        counts = evaluate(always_negative, patches, SEQUENTIAL)
        assert counts.fn == 2 and counts.fp == 0
        assert counts.total == 20

    def test_empty_set(self, always_negative, patch_factory):
        with pytest.raises(DataError):
            evaluate(always_negative, patch_factory(0))

    def test_channel_mismatch(self, always_negative, patch_factory):
        with pytest.raises(ShapeError):
            evaluate(always_negative, patch_factory(4, channels=3))

    def test_appearance_false_alarm(self, patch_factory):
        model = init_model(4, filters=(2, 2, 4))
        model.params["fc.weight"][:] = 0.0
        model.params["fc.bias"][:] = [0.0, 1.0]
        patches = patch_factory(6, positives=2)
        patches.appearance[:] = [True, False, True, True, False, False]
        result = evaluate_report("RGB-D", model, patches, SEQUENTIAL)
        assert result.appearance_counts == ConfusionCounts(fp=2)
        assert result.appearance_false_alarm == 1.0
        assert result.metrics.false_alarm == 1.0


class TestMetrics:
    def test_perfect_split(self):
        m = metrics(ConfusionCounts(tp=1, fp=0, tn=1, fn=0))
        assert (m.overall_error, m.false_alarm, m.missed_detection) == (0.0, 0.0, 0.0)

    def test_definitions(self):
        m = metrics(ConfusionCounts(tp=3, fp=2, tn=8, fn=1))
        assert m.overall_error == pytest.approx(3 / 14)
        assert m.false_alarm == pytest.approx(0.2)
        assert m.missed_detection == pytest.approx(0.25)

    def test_undefined_rates_are_none(self):
        m = metrics(ConfusionCounts(tp=0, fp=1, tn=4, fn=0))
        assert m.missed_detection is None
        assert m.false_alarm == pytest.approx(0.2)
        empty = metrics(ConfusionCounts())
        assert (empty.overall_error, empty.false_alarm, empty.missed_detection) == (None, None, None)

    @pytest.mark.parametrize("counts", [ConfusionCounts(5, 7, 80, 9), ConfusionCounts(1, 0, 3, 2),
                                        ConfusionCounts(40, 13, 1000, 27)])
    def test_overall_is_prevalence_weighted(self, counts):
        total = counts.total
        overall = Fraction(counts.fp + counts.fn, total)
        false_alarm = Fraction(counts.fp, counts.negatives)
        missed = Fraction(counts.fn, counts.positives)
        assert overall == false_alarm * Fraction(counts.negatives, total) + missed * Fraction(counts.positives, total)
        m = metrics(counts)
        assert m.overall_error == float(overall)

    def test_duplication_invariance(self):
        counts = ConfusionCounts(4, 6, 70, 3)
        assert metrics(counts + counts) == metrics(counts)

    def test_false_alarm_dominates_at_low_prevalence(self):
        counts = ConfusionCounts(tp=22, fp=1538, tn=8462, fn=17)
        m = metrics(counts)
        assert m.false_alarm == pytest.approx(0.1538)
        assert m.missed_detection == pytest.approx(17 / 39)
        assert abs(m.overall_error - m.false_alarm) < 0.01


class TestReport:
    def test_text_and_csv(self, always_negative, patch_factory, tmp_path):
        patches = patch_factory(10, positives=0)
        result = evaluate_report("RGB", always_negative, patches, SEQUENTIAL)
        paths = write_report([result], tmp_path)
        assert [p.name for p in paths] == ["report.txt", "report.csv"]

        text = (tmp_path / "report.txt").read_text()
        assert text.splitlines()[0].startswith("Input")
        assert "n/a" in text
        with (tmp_path / "report.csv").open() as f:
            rows = list(csv.DictReader(f))
        assert rows[0]["input"] == "RGB"
        assert rows[0]["missed_detection"] == ""
        assert float(rows[0]["false_alarm"]) == 0.0
        assert rows[0]["tn"] == "10"

    def test_format_rows(self):
        from models.evaluation_models import EvaluationResult

        counts = ConfusionCounts(tp=1, fp=1, tn=2, fn=0)
        table = format_report([EvaluationResult("RGB-D", counts, metrics(counts))])
        assert "RGB-D" in table and "25.00%" in table and "33.33%" in table


def test_plot_epochs(tmp_path):
    pytest.importorskip("matplotlib")
    records = [EpochRecord(epoch=i, train_error=0.3 / i, test_error=0.35 / i, mean_loss=0.6 / i, wall_time=1.0)
               for i in range(1, 4)]
    path = plot_epochs(records, tmp_path / "curves.png")
    assert path.is_file() and path.stat().st_size > 0
