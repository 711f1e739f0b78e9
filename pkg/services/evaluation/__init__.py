"""
Evaluation Package

Patch-level metrics and reports.
"""

from .evaluator_service import (
    confusion,
    evaluate,
    evaluate_report,
    format_report,
    metrics,
    plot_epochs,
    write_report,
)

__all__ = [
    "confusion",
    "evaluate",
    "evaluate_report",
    "metrics",
    "format_report",
    "write_report",
    "plot_epochs",
]
