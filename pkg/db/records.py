"""
Append-only run records: the epoch CSV and the JSON-lines timing sidecar.
"""

import csv
import logging
from pathlib import Path
from typing import List, Union

from models.fusion_models import FrameTiming
from models.training_models import EpochRecord
from utils.errors import ArtifactNotFoundError, DataError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class EpochCsvWriter:
    """Writes the header on open and one row per appended record."""

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", newline="", encoding="utf-8") as f:
            csv.DictWriter(f, fieldnames=EpochRecord.columns()).writeheader()

    def append(self, record: EpochRecord) -> None:
        with self.path.open("a", newline="", encoding="utf-8") as f:
            csv.DictWriter(f, fieldnames=EpochRecord.columns()).writerow(record.to_dict())


def read_epochs(path: PathLike) -> List[EpochRecord]:
    path = Path(path)
    if not path.is_file():
        raise ArtifactNotFoundError("epoch CSV", path)
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != EpochRecord.columns():
            raise DataError(f"{path}: expected columns {EpochRecord.columns()}, got {reader.fieldnames}")
        return [EpochRecord.from_dict(row) for row in reader]


class TimingWriter:
    """JSON-lines sidecar, one FrameTiming per line."""

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")

    def append(self, entry: FrameTiming) -> None:
        with self.path.open("a", encoding="utf-8") as f:
            f.write(entry.model_dump_json() + "\n")

