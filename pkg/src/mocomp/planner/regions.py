"""Background partitioning, insertion-region choice, and static compositing.

A split ratio describes a rectangular partition of the background image as
weighted rows of weighted columns. The textual form is rows separated by
``;``, where each row is either a bare weight (one full-width cell) or
``weight,(col, col, ...)``. For example ``"1,(1,1); 2"`` is a two-row
partition: the top row (weight 1) split into two equal columns, and the
bottom row (weight 2) spanning the full width — three regions indexed 0..2
in row-major order.
"""

from __future__ import annotations

import re
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import ParseError, RegionError
from .types import IntermediateComposite

__all__ = [
    "MOTION_AFFORDANCE_KEYWORDS",
    "parse_split_ratio",
    "split_regions",
    "select_region",
    "compose_intermediate",
]

Rect = Tuple[int, int, int, int]  # (x0, y0, x1, y1), half-open

# Region sub-prompt keywords that suggest room for visible motion. Regions
# tagged with these win the affordance half of the placement score.
MOTION_AFFORDANCE_KEYWORDS = frozenset(
    {
        "sky",
        "air",
        "wind",
        "water",
        "liquid",
        "sea",
        "river",
        "open",
        "empty",
        "space",
        "ground",
        "surface",
        "table",
        "grass",
        "field",
    }
)

_ROW_WITH_COLS = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*,\s*\(([^()]*)\)\s*$")
_BARE_WEIGHT = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*$")


def parse_split_ratio(text: str) -> Tuple[Tuple[float, Tuple[float, ...]], ...]:
    """Parse a split-ratio string into ((row_weight, (col_weights...)), ...)."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError(f"empty split ratio {text!r}")
    rows = []
    for row_text in text.split(";"):
        matched = _ROW_WITH_COLS.match(row_text)
        if matched:
            weight = float(matched.group(1))
            col_text = matched.group(2).strip()
            if not col_text:
                raise ParseError(f"split row {row_text.strip()!r} has an empty column list")
            try:
                cols = tuple(float(c) for c in col_text.split(","))
            except ValueError:
                raise ParseError(
                    f"split row {row_text.strip()!r} has a non-numeric column weight"
                ) from None
        else:
            matched = _BARE_WEIGHT.match(row_text)
            if not matched:
                raise ParseError(
                    f"cannot parse split row {row_text.strip()!r}: expected "
                    "'weight' or 'weight,(col, col, ...)'"
                )
            weight = float(matched.group(1))
            cols = (1.0,)
        if weight <= 0 or any(c <= 0 for c in cols):
            raise ParseError(f"split row {row_text.strip()!r} has a non-positive weight")
        rows.append((weight, cols))
    return tuple(rows)


def _edges(total: int, weights: Sequence[float]) -> list:
    """Cumulative pixel edges for proportional weights; sums exactly to total."""
    acc = float(sum(weights))
    edges = [0]
    running = 0.0
    for w in weights:
        running += w
        edges.append(int(round(total * running / acc)))
    edges[-1] = total
    return edges


def split_regions(width: int, height: int, split) -> Tuple[Rect, ...]:
    """Pixel rectangles for a split ratio, row-major order.

    ``split`` may be the textual form or an already-parsed row tuple.
    Rectangles are half-open ``(x0, y0, x1, y1)`` and tile the image exactly.
    """
    if isinstance(split, str):
        split = parse_split_ratio(split)
    if width <= 0 or height <= 0:
        raise RegionError(f"image dimensions must be positive, got {width}x{height}")
    row_edges = _edges(height, [w for w, _ in split])
    rects = []
    for r, (_, cols) in enumerate(split):
        y0, y1 = row_edges[r], row_edges[r + 1]
        col_edges = _edges(width, cols)
        for c in range(len(cols)):
            rects.append((col_edges[c], y0, col_edges[c + 1], y1))
    return tuple(rects)


def _affordance_score(tags: Sequence[str], keywords: frozenset) -> float:
    if not tags:
        return 0.0
    hits = sum(1 for t in tags if t.lower() in keywords)
    return hits / len(tags)


def select_region(
    bg: np.ndarray,
    fg_extent: Tuple[int, int],
    split,
    region_tags: Optional[Mapping[int, Sequence[str]]] = None,
    affordance_keywords: frozenset = MOTION_AFFORDANCE_KEYWORDS,
) -> Tuple[int, Rect]:
    """Choose the insertion region for a foreground of ``fg_extent`` (w, h).

    Candidate regions are those the foreground rectangle fits inside. Each
    candidate is scored ``0.5 * free-area fraction + 0.5 * affordance``,
    where the free-area fraction is the share of the region left uncovered
    by the foreground and affordance is the fraction of the region's tags
    (from ``region_tags``, e.g. sub-prompt keywords per region) found in
    ``affordance_keywords``. Ties go to the lowest region index.
    """
    height, width = bg.shape[:2]
    fg_w, fg_h = int(fg_extent[0]), int(fg_extent[1])
    if fg_w <= 0 or fg_h <= 0:
        raise RegionError(f"foreground extent must be positive, got {fg_w}x{fg_h}")
    rects = split_regions(width, height, split)
    best_index = None
    best_score = -1.0
    for index, (x0, y0, x1, y1) in enumerate(rects):
        region_w, region_h = x1 - x0, y1 - y0
        if fg_w > region_w or fg_h > region_h:
            continue
        free_fraction = 1.0 - (fg_w * fg_h) / (region_w * region_h)
        tags = () if region_tags is None else tuple(region_tags.get(index, ()))
        score = 0.5 * free_fraction + 0.5 * _affordance_score(tags, affordance_keywords)
        if score > best_score:
            best_index, best_score = index, score
    if best_index is None:
        raise RegionError(
            f"no region of split {split!r} can hold a {fg_w}x{fg_h} foreground "
            f"in a {width}x{height} background; reduce the foreground scale"
        )
    return best_index, rects[best_index]


def _overflow_message(rect: Rect, width: int, height: int) -> str:
    x0, y0, x1, y1 = rect
    parts = []
    if x0 < 0:
        parts.append(f"{-x0} px past the left edge")
    if y0 < 0:
        parts.append(f"{-y0} px past the top edge")
    if x1 > width:
        parts.append(f"{x1 - width} px past the right edge")
    if y1 > height:
        parts.append(f"{y1 - height} px past the bottom edge")
    return ", ".join(parts)


def compose_intermediate(bg: np.ndarray, fg: np.ndarray, rect: Rect) -> IntermediateComposite:
    """Alpha-composite ``fg`` into ``rect`` of ``bg`` and build the loose mask.

    ``fg`` must match the rectangle size exactly (scale it beforehand); a
    3-channel foreground is treated as fully opaque. Pixels outside the
    rectangle are copied from the background bit-exactly. The mask is 1
    outside the rectangle and 0 inside it.
    """
    bg = np.asarray(bg)
    fg = np.asarray(fg)
    if bg.ndim != 3 or bg.shape[2] != 3 or bg.dtype != np.uint8:
        raise RegionError(f"background must be uint8 (H, W, 3), got {bg.dtype} {bg.shape}")
    if fg.ndim != 3 or fg.shape[2] not in (3, 4) or fg.dtype != np.uint8:
        raise RegionError(f"foreground must be uint8 (h, w, 3|4), got {fg.dtype} {fg.shape}")
    height, width = bg.shape[:2]
    x0, y0, x1, y1 = (int(v) for v in rect)
    overflow = _overflow_message((x0, y0, x1, y1), width, height)
    if overflow:
        raise RegionError(
            f"insertion rect {(x0, y0, x1, y1)} exceeds the {width}x{height} "
            f"background: {overflow}"
        )
    if x1 <= x0 or y1 <= y0:
        raise RegionError(f"insertion rect {(x0, y0, x1, y1)} is empty")
    if fg.shape[0] != y1 - y0 or fg.shape[1] != x1 - x0:
        raise RegionError(
            f"foreground is {fg.shape[1]}x{fg.shape[0]} but the insertion rect "
            f"is {x1 - x0}x{y1 - y0}; scale the foreground to the rect first"
        )
    image = bg.copy()
    fg_rgb = fg[:, :, :3].astype(np.float64)
    if fg.shape[2] == 4:
        alpha = fg[:, :, 3:4].astype(np.float64) / 255.0
    else:
        alpha = np.ones(fg.shape[:2] + (1,))
    window = bg[y0:y1, x0:x1].astype(np.float64)
    blended = np.round(alpha * fg_rgb + (1.0 - alpha) * window)
    image[y0:y1, x0:x1] = blended.astype(np.uint8)
    mask = np.ones((height, width), dtype=np.uint8)
    mask[y0:y1, x0:x1] = 0
    return IntermediateComposite(image=image, mask=mask)
