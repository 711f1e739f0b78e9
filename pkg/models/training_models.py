"""
Training Models

Per-epoch records of a training run.
"""

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List

from utils.errors import DataError


@dataclass(frozen=True)
class EpochRecord:
    """
    One epoch of training.

    Attributes:
        epoch: 1-based epoch index
        train_error: Classification error on the training patches
        test_error: Classification error on the (possibly subsampled) test patches
        mean_loss: Mean cross-entropy over the epoch's batches, L2 term excluded
        wall_time: Seconds spent in the epoch
    """
    epoch: int
    train_error: float
    test_error: float
    mean_loss: float
    wall_time: float

    def __post_init__(self):
        for name in ("train_error", "test_error"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DataError(f"epoch {self.epoch}: {name} {value} outside [0, 1]")

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, row: Dict[str, Any]) -> "EpochRecord":
        try:
            return cls(
                epoch=int(row["epoch"]),
                train_error=float(row["train_error"]),
                test_error=float(row["test_error"]),
                mean_loss=float(row["mean_loss"]),
                wall_time=float(row["wall_time"]),
            )
        except (KeyError, ValueError) as e:
            raise DataError(f"malformed epoch record {row}: {e}") from e
