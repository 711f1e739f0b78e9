"""
Synthetic RGB-D scenes with exact occlusion labels.

Scene spec file, one directive per line ('#' starts a comment):

    size    H W
    frames  N
    background DEPTH
    seed    S
    tau     TAU
    shadow  DY DX
    fps     F
    box     ROW COL H W DEPTH [VROW VCOL]
    paint   ROW COL H W [VROW VCOL]
    hole    ROW COL H W [VROW VCOL]

Boxes are occluders at their own depth. Painted rectangles change only the
color of the background, so they make strong image edges with no occlusion
label. Holes carry no depth (Invalid labels). Rectangles must stay inside
the frame and must not overlap each other at any frame.
Box and background depths must differ by more than tau after float32
rounding and after quantization to the 1/5000 m depth PNG resolution.
"""

import logging
from itertools import combinations
from typing import Dict, List, Tuple

import numpy as np

from models.frame_models import EdgeLabel, LabelFrame, RgbdFrame
from models.scene_models import RectKind, SceneRect, SceneSpec, SyntheticFrame
from services.dataset.labeling import neighbor_views
from utils.constants import TUM_DEPTH_SCALE
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

_BACKGROUND = -1
_NO_DEPTH = -2
SHADOW_FACTOR = 0.55
NOISE_AMPLITUDE = 3.0

_SCALAR_KEYS = {"size": (int, int), "frames": (int,), "background": (float,), "seed": (int,),
                "tau": (float,), "shadow": (int, int), "fps": (float,)}


def _numbers(tokens: List[str], types, line: int, directive: str):
    if len(tokens) != len(types):
        raise ConfigError(f"'{directive}' expects {len(types)} values, got {len(tokens)}", line=line)
    try:
        return [kind(token) for kind, token in zip(types, tokens)]
    except ValueError as e:
        raise ConfigError(f"'{directive}': {e}", line=line) from e


def _rect(kind: RectKind, tokens: List[str], line: int) -> SceneRect:
    fixed = 5 if kind == RectKind.BOX else 4
    if len(tokens) not in (fixed, fixed + 2):
        raise ConfigError(f"'{kind.value}' expects {fixed} or {fixed + 2} values, got {len(tokens)}", line=line)
    try:
        row, col, height, width = (int(t) for t in tokens[:4])
        depth = float(tokens[4]) if kind == RectKind.BOX else None
        velocity = tuple(float(t) for t in tokens[fixed:]) or (0.0, 0.0)
    except ValueError as e:
        raise ConfigError(f"'{kind.value}': {e}", line=line) from e
    if height < 1 or width < 1:
        raise ConfigError(f"'{kind.value}' needs positive height and width", line=line)
    if depth is not None and depth <= 0:
        raise ConfigError("box depth must be positive", line=line)
    return SceneRect(kind=kind, row=row, col=col, height=height, width=width, depth=depth,
                     velocity=velocity, line=line)


def parse_scene_spec(text: str) -> SceneSpec:
    """Parse a scene spec file; errors carry the offending line number."""
    values: Dict[str, list] = {}
    rects: List[SceneRect] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        directive, *tokens = line.split()
        directive = directive.lower()
        if directive in _SCALAR_KEYS:
            values[directive] = _numbers(tokens, _SCALAR_KEYS[directive], line_no, directive)
        elif directive in {kind.value for kind in RectKind}:
            rects.append(_rect(RectKind(directive), tokens, line_no))
        else:
            raise ConfigError(f"unknown directive '{directive}'", line=line_no)

    defaults = SceneSpec()
    height, width = values.get("size", (defaults.height, defaults.width))
    spec = SceneSpec(
        height=height,
        width=width,
        frames=values.get("frames", [defaults.frames])[0],
        background_depth=values.get("background", [defaults.background_depth])[0],
        seed=values.get("seed", [defaults.seed])[0],
        tau_depth=values.get("tau", [defaults.tau_depth])[0],
        shadow=tuple(values.get("shadow", defaults.shadow)),
        fps=values.get("fps", [defaults.fps])[0],
        rects=tuple(rects),
    )
    validate_scene(spec)
    return spec


def _overlap(a: Tuple[int, int, int, int], b: Tuple[int, int, int, int]) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def stored_depths(depth: float) -> Tuple[float, float]:
    """A depth as rendered (float32) and as read back from a 16-bit depth PNG."""
    rendered = np.float32(depth)
    raw = np.rint(np.float64(rendered) * TUM_DEPTH_SCALE)
    on_disk = (np.array([raw], dtype=np.float32) / TUM_DEPTH_SCALE)[0]
    return float(rendered), float(on_disk)


def validate_scene(spec: SceneSpec) -> None:
    """
    Bounds, overlap and depth-separation checks over every frame.

    Separation is checked on the depths as stored in memory and on disk, so
    labels recomputed from either reproduce the analytic labels.
    """
    if spec.height < 1 or spec.width < 1 or spec.frames < 1:
        raise ConfigError("scene size and frame count must be positive")
    if spec.background_depth <= 0 or spec.tau_depth <= 0 or spec.fps <= 0:
        raise ConfigError("background depth, tau and fps must be positive")
    depths = [spec.background_depth] + [r.depth for r in spec.of_kind(RectKind.BOX)]
    for a, b in combinations(depths, 2):
        if any(abs(x - y) <= spec.tau_depth for x, y in zip(stored_depths(a), stored_depths(b))):
            raise ConfigError(f"depths {a} and {b} are not separated by more than tau {spec.tau_depth}")
    for t in range(spec.frames):
        for rect in spec.rects:
            top, left, bottom, right = rect.at(t)
            if top < 0 or left < 0 or bottom > spec.height or right > spec.width:
                raise ConfigError(f"{rect.kind.value} leaves the {spec.height}x{spec.width} frame at frame {t}",
                                  line=rect.line)
        for a, b in combinations(spec.rects, 2):
            if _overlap(a.at(t), b.at(t)):
                raise ConfigError(f"{a.kind.value} and {b.kind.value} (line {a.line}) overlap at frame {t}",
                                  line=b.line)


def _surface_map(spec: SceneSpec, t: int) -> np.ndarray:
    """Per-pixel surface: box index, _BACKGROUND, or _NO_DEPTH for holes."""
    surface = np.full((spec.height, spec.width), _BACKGROUND, dtype=np.int32)
    for index, rect in enumerate(spec.rects):
        top, left, bottom, right = rect.at(t)
        if rect.kind == RectKind.BOX:
            surface[top:bottom, left:right] = index
        elif rect.kind == RectKind.HOLE:
            surface[top:bottom, left:right] = _NO_DEPTH
    return surface


def _texture(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Striped color texture of one surface, (height, width, 3) float."""
    base = rng.uniform(40, 215, size=3)
    period = rng.uniform(6, 24)
    angle = rng.uniform(0, np.pi)
    yy, xx = np.mgrid[0:height, 0:width]
    phase = (np.cos(angle) * xx + np.sin(angle) * yy) * 2 * np.pi / period
    amplitude = rng.uniform(8, 30)
    return base + amplitude * np.sin(phase)[..., np.newaxis]


def _render(spec: SceneSpec, t: int) -> SyntheticFrame:
    surface = _surface_map(spec, t)
    rng = np.random.default_rng(spec.seed)

    rgb = _texture(rng, spec.height, spec.width)
    appearance_id = np.zeros((spec.height, spec.width), dtype=np.int32)

    shadow_on = spec.shadow != (0, 0)
    if shadow_on:
        shade = np.zeros((spec.height, spec.width), dtype=bool)
        for rect in spec.of_kind(RectKind.BOX):
            top, left, bottom, right = rect.at(t)
            dy, dx = spec.shadow
            shade[max(top + dy, 0):max(bottom + dy, 0), max(left + dx, 0):max(right + dx, 0)] = True
        shade &= surface == _BACKGROUND

    for index, rect in enumerate(spec.rects):
        top, left, bottom, right = rect.at(t)
        texture = _texture(rng, rect.height, rect.width)
        if rect.kind == RectKind.HOLE:
            rgb[top:bottom, left:right] = 20.0
        else:
            rgb[top:bottom, left:right] = texture
        if rect.kind == RectKind.PAINT:
            appearance_id[top:bottom, left:right] = index + 1

    if shadow_on:
        rgb[shade] *= SHADOW_FACTOR
        appearance_id[shade] = -1

    noise = np.random.default_rng([spec.seed, t]).normal(0, NOISE_AMPLITUDE, size=rgb.shape)
    rgb = np.clip(np.rint(rgb + noise), 0, 255).astype(np.uint8)

    depth = np.full((spec.height, spec.width), spec.background_depth, dtype=np.float32)
    for index, rect in enumerate(spec.rects):
        if rect.kind == RectKind.BOX:
            depth[surface == index] = rect.depth
    depth[surface == _NO_DEPTH] = 0.0

    frame = RgbdFrame(rgb=rgb, depth=depth, valid_mask=surface != _NO_DEPTH,
                      timestamp=t / spec.fps, frame_id=t)
    labels = analytic_labels(surface, frame_id=t)
    appearance = _appearance_edges(appearance_id, surface, labels)
    return SyntheticFrame(frame=frame, labels=labels, appearance=appearance)


def analytic_labels(surface: np.ndarray, frame_id: int = 0) -> LabelFrame:
    """
    Labels from surface identity: an occlusion edge is a pixel with a valid
    8-neighbor on a different surface (surfaces are depth-separated by more
    than tau by construction).
    """
    valid = surface != _NO_DEPTH
    any_valid_neighbor = np.zeros_like(valid)
    other_surface = np.zeros_like(valid)
    for neighbor in neighbor_views(surface, _NO_DEPTH):
        neighbor_valid = neighbor != _NO_DEPTH
        any_valid_neighbor |= neighbor_valid
        other_surface |= neighbor_valid & (neighbor != surface)

    labels = np.full(surface.shape, EdgeLabel.NO_EDGE, dtype=np.uint8)
    labels[valid & other_surface] = EdgeLabel.OCCLUSION
    labels[~valid | ~any_valid_neighbor] = EdgeLabel.INVALID
    return LabelFrame(labels=labels, frame_id=frame_id)


def _appearance_edges(appearance_id: np.ndarray, surface: np.ndarray, labels: LabelFrame) -> np.ndarray:
    """Pixels next to a color change that is not a depth change."""
    changed = np.zeros(appearance_id.shape, dtype=bool)
    for neighbor_id, neighbor_surface in zip(neighbor_views(appearance_id, 0), neighbor_views(surface, _NO_DEPTH)):
        changed |= (neighbor_id != appearance_id) & (neighbor_surface == surface)
    return changed & (labels.labels == EdgeLabel.NO_EDGE)


def synth_scene(spec: SceneSpec, frame_index: int = 0) -> Tuple[RgbdFrame, LabelFrame]:
    """
    Render one frame of a scene.

    Returns:
        (frame, exact label frame)
    """
    validate_scene(spec)
    if not 0 <= frame_index < spec.frames:
        raise ConfigError(f"frame index {frame_index} outside [0, {spec.frames})")
    rendered = _render(spec, frame_index)
    return rendered.frame, rendered.labels


def synth_sequence(spec: SceneSpec) -> List[SyntheticFrame]:
    """Render every frame of a scene, appearance-edge masks included."""
    validate_scene(spec)
    rendered = [_render(spec, t) for t in range(spec.frames)]
    logger.info(f"Rendered {len(rendered)} synthetic frames of {spec.height}x{spec.width} "
                f"with {len(spec.of_kind(RectKind.BOX))} boxes, {len(spec.of_kind(RectKind.PAINT))} painted")
    return rendered


def random_scene(height: int, width: int, frames: int, boxes: int, paints: int, seed: int = 0,
                 holes: int = 0, background_depth: float = 3.0, shadow: Tuple[int, int] = (0, 0),
                 max_attempts: int = 2000) -> SceneSpec:
    """
    Scatter non-overlapping boxes, painted rectangles and holes with small
    random velocities; used to generate training scenes.
    """
    rng = np.random.default_rng(seed)
    rects: List[SceneRect] = []
    box_depths = np.linspace(0.8, background_depth - 0.6, max(boxes, 1))
    wanted = [RectKind.BOX] * boxes + [RectKind.PAINT] * paints + [RectKind.HOLE] * holes
    for number, kind in enumerate(wanted):
        for _ in range(max_attempts):
            h = int(rng.integers(height // 8, height // 3))
            w = int(rng.integers(width // 8, width // 3))
            velocity = (float(rng.integers(-2, 3)), float(rng.integers(-2, 3)))
            row = int(rng.integers(0, height - h))
            col = int(rng.integers(0, width - w))
            candidate = SceneRect(kind=kind, row=row, col=col, height=h, width=w,
                                  depth=float(box_depths[number]) if kind == RectKind.BOX else None,
                                  velocity=velocity)
            trial = SceneSpec(height=height, width=width, frames=frames, background_depth=background_depth,
                              seed=seed, shadow=shadow, rects=tuple(rects + [candidate]))
            try:
                validate_scene(trial)
            except ConfigError:
                continue
            rects.append(candidate)
            break
        else:
            raise ConfigError(f"could not place {kind.value} #{number} without overlap")
    return SceneSpec(height=height, width=width, frames=frames, background_depth=background_depth,
                     seed=seed, shadow=shadow, rects=tuple(rects))
