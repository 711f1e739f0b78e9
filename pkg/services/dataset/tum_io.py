"""
TUM RGB-D Sequence I/O

Reads and writes the TUM directory convention:

    <dir>/rgb.txt, <dir>/depth.txt    "timestamp relative/path.png" per line, '#' comments
    <dir>/rgb/*.png                   8-bit color
    <dir>/depth/*.png                 16-bit depth, raw / 5000 = meters, 0 = invalid

Each RGB frame is paired with the depth frame of nearest timestamp within
TUM_MAX_TIME_DIFF seconds; unpaired RGB frames are dropped.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import cv2
import numpy as np

from models.frame_models import RgbdFrame
from utils.constants import DEPTH_DIR, DEPTH_INDEX, RGB_DIR, RGB_INDEX, TUM_DEPTH_SCALE, TUM_MAX_TIME_DIFF
from utils.errors import ArtifactNotFoundError, DataError
from utils.parallel import Execution, resolve

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
IndexEntry = Tuple[float, str]


def read_index(path: PathLike) -> List[IndexEntry]:
    """Parse a TUM timestamp index file."""
    path = Path(path)
    if not path.is_file():
        raise ArtifactNotFoundError("index file", path)
    entries = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise DataError(f"{path}:{line_no}: expected 'timestamp filename', got {line!r}")
        try:
            entries.append((float(parts[0]), parts[1]))
        except ValueError as e:
            raise DataError(f"{path}:{line_no}: bad timestamp {parts[0]!r}") from e
    return sorted(entries)


def associate(rgb: Sequence[IndexEntry], depth: Sequence[IndexEntry],
              max_difference: float = TUM_MAX_TIME_DIFF) -> Tuple[List[Tuple[IndexEntry, IndexEntry]], int]:
    """
    Pair every RGB entry with the nearest-timestamp depth entry.

    Returns:
        (pairs in RGB order, number of RGB entries dropped)
    """
    if not depth:
        return [], len(rgb)
    depth_times = np.array([t for t, _ in depth])
    pairs = []
    for entry in rgb:
        pos = int(np.searchsorted(depth_times, entry[0]))
        candidates = [i for i in (pos - 1, pos) if 0 <= i < len(depth)]
        best = min(candidates, key=lambda i: abs(depth_times[i] - entry[0]))
        if abs(depth_times[best] - entry[0]) <= max_difference:
            pairs.append((entry, depth[best]))
    return pairs, len(rgb) - len(pairs)


def read_rgb(path: PathLike) -> np.ndarray:
    """8-bit color image in RGB order."""
    image = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if image is None:
        raise DataError(f"could not decode color image: {path}")
    return cv2.cvtColor(image, cv2.COLOR_BGR2RGB)


def read_depth(path: PathLike, scale: float = TUM_DEPTH_SCALE) -> np.ndarray:
    """16-bit depth PNG in meters; 0 stays 0 (invalid)."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataError(f"could not decode depth image: {path}")
    if raw.ndim != 2 or raw.dtype != np.uint16:
        raise DataError(f"depth image must be single-channel 16-bit: {path} ({raw.dtype}, {raw.shape})")
    return raw.astype(np.float32) / scale


def depth_to_raw(depth: np.ndarray, scale: float = TUM_DEPTH_SCALE) -> np.ndarray:
    raw = np.rint(np.asarray(depth, dtype=np.float64) * scale)
    if np.any(raw > np.iinfo(np.uint16).max):
        raise DataError(f"depth beyond {np.iinfo(np.uint16).max / scale:.3f} m cannot be stored")
    return raw.astype(np.uint16)


def _load_pair(root: Path, frame_id: int, pair: Tuple[IndexEntry, IndexEntry]) -> RgbdFrame:
    (rgb_time, rgb_file), (_, depth_file) = pair
    rgb = read_rgb(root / rgb_file)
    depth = read_depth(root / depth_file)
    if rgb.shape[:2] != depth.shape:
        raise DataError(f"{rgb_file} {rgb.shape[:2]} and {depth_file} {depth.shape} are not registered")
    return RgbdFrame.from_depth(rgb, depth, timestamp=rgb_time, frame_id=frame_id)


def load_frame(rgb_path: PathLike, depth_path: PathLike, frame_id: int = 0, timestamp: float = 0.0) -> RgbdFrame:
    """Load one registered pair from explicit image paths."""
    for kind, path in (("rgb image", rgb_path), ("depth image", depth_path)):
        if not Path(path).is_file():
            raise ArtifactNotFoundError(kind, path)
    rgb = read_rgb(rgb_path)
    depth = read_depth(depth_path)
    if rgb.shape[:2] != depth.shape:
        raise DataError(f"{rgb_path} {rgb.shape[:2]} and {depth_path} {depth.shape} are not registered")
    return RgbdFrame.from_depth(rgb, depth, timestamp=timestamp, frame_id=frame_id)


def load_sequence(dir_path: PathLike, execution: Optional[Execution] = None,
                  max_difference: float = TUM_MAX_TIME_DIFF) -> List[RgbdFrame]:
    """
    Load a TUM-layout sequence.

    Args:
        dir_path: Sequence directory
        execution: Worker settings; frames decode in parallel, order is kept
        max_difference: Association tolerance in seconds

    Returns:
        Frames in RGB timestamp order, frame_id = position in the sequence
    """
    root = Path(dir_path)
    if not root.is_dir():
        raise ArtifactNotFoundError("dataset directory", root)
    rgb_entries = read_index(root / RGB_INDEX)
    depth_entries = read_index(root / DEPTH_INDEX)
    pairs, dropped = associate(rgb_entries, depth_entries, max_difference)
    if dropped:
        logger.warning(f"{dropped} of {len(rgb_entries)} RGB frames in {root} had no depth frame "
                       f"within {max_difference}s and were dropped")
    if not pairs:
        raise DataError(f"no RGB/depth pairs within {max_difference}s in {root}")

    frames = resolve(execution).map(lambda item: _load_pair(root, item[0], item[1]), list(enumerate(pairs)))
    logger.info(f"Loaded {len(frames)} RGB-D frames from {root}")
    return frames


def frame_stem(frame: RgbdFrame) -> str:
    """File stem of a frame: its timestamp with six decimals."""
    return f"{frame.timestamp:.6f}"


def write_sequence(dir_path: PathLike, frames: Sequence[RgbdFrame]) -> List[str]:
    """
    Write frames in TUM layout.

    Returns:
        Timestamp stems used as file names, in frame order
    """
    root = Path(dir_path)
    (root / RGB_DIR).mkdir(parents=True, exist_ok=True)
    (root / DEPTH_DIR).mkdir(parents=True, exist_ok=True)
    stems = []
    rgb_lines = ["# color images", "# timestamp filename"]
    depth_lines = ["# depth maps", "# timestamp filename"]
    for frame in frames:
        stem = frame_stem(frame)
        stems.append(stem)
        rgb_rel = f"{RGB_DIR}/{stem}.png"
        depth_rel = f"{DEPTH_DIR}/{stem}.png"
        write_png(root / rgb_rel, cv2.cvtColor(frame.rgb, cv2.COLOR_RGB2BGR))
        write_png(root / depth_rel, depth_to_raw(frame.depth))
        rgb_lines.append(f"{stem} {rgb_rel}")
        depth_lines.append(f"{stem} {depth_rel}")
    (root / RGB_INDEX).write_text("\n".join(rgb_lines) + "\n")
    (root / DEPTH_INDEX).write_text("\n".join(depth_lines) + "\n")
    logger.info(f"Wrote {len(frames)} frames to {root}")
    return stems


def write_png(path: PathLike, image: np.ndarray) -> None:
    """cv2.imwrite that raises instead of returning False."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), image):
        raise DataError(f"could not write image: {path}")


def read_gray(path: PathLike) -> np.ndarray:
    image = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if image is None:
        raise DataError(f"could not decode image: {path}")
    if image.ndim == 3:
        image = cv2.cvtColor(image, cv2.COLOR_BGR2GRAY)
    return image
