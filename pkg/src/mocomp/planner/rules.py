"""Deterministic offline routing from scenario feature tags.

Each tag votes for one method; the higher count wins and ties go to the
inpainting branch, which degrades more gracefully when a scenario is hard
to simulate. ``simple_shape`` votes for neither side (both methods handle
simple geometry).
"""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

from ..errors import PlannerError
from .regions import select_region
from .types import Method, PlannerDecision, ScenarioRequest

__all__ = ["PHYS_TAGS", "MOTION_TAGS", "DEFAULT_SPLIT_RATIO", "rule_decide"]

PHYS_TAGS = frozenset(
    {"granular", "deformable_solid", "rigid", "mechanical_force", "simulation_easy"}
)
MOTION_TAGS = frozenset(
    {
        "fluid",
        "gas",
        "wind",
        "light_dynamics",
        "surface_tension",
        "complex_shape",
        "simulation_hard",
    }
)

# Partition used when no background analysis is available: two columns over
# a full-width lower band, favoring insertion into the upper half.
DEFAULT_SPLIT_RATIO = "1,(1,1); 2"


def _default_extent(bg_shape, fg_image) -> tuple:
    if fg_image is not None:
        return (fg_image.shape[1], fg_image.shape[0])
    height, width = bg_shape[:2]
    return (max(1, width // 4), max(1, height // 4))


def rule_decide(
    req: ScenarioRequest,
    region_tags: Optional[Mapping[int, Sequence[str]]] = None,
) -> PlannerDecision:
    """Route a request by counting method votes among its feature tags.

    The decision depends only on the tag set (never on tag order or the
    descriptions). For the simulator branch the segmentation prompts are the
    two object descriptions. For the inpainting branch the split ratio is
    ``DEFAULT_SPLIT_RATIO``; when a background image is present the region
    is chosen by :func:`select_region` (with the foreground image's size, or
    a quarter of the background if none), otherwise region 0 is used.
    """
    tags = req.feature_tags
    if not tags:
        raise PlannerError(
            "feature tags are empty; rule routing needs tags - use the chat "
            "service backend for description-only requests"
        )
    phys_votes = sorted(tags & PHYS_TAGS)
    motion_votes = sorted(tags & MOTION_TAGS)
    if len(phys_votes) > len(motion_votes):
        method = Method.PHYS
    else:
        method = Method.MOTION
    rationale = (
        f"tag votes: {len(phys_votes)} for InteractPhys {phys_votes}, "
        f"{len(motion_votes)} for InteractMotion {motion_votes}; ties favor "
        "InteractMotion"
    )[:240]

    if method is Method.PHYS:
        prompts = tuple(d for d in (req.fg_description, req.bg_description) if d)
        return PlannerDecision(
            method=method, rationale=rationale, segmentation_prompts=prompts
        )

    if req.bg_image is not None:
        extent = _default_extent(req.bg_image.shape, req.fg_image)
        index, rect = select_region(
            req.bg_image, extent, DEFAULT_SPLIT_RATIO, region_tags=region_tags
        )
        return PlannerDecision(
            method=method,
            rationale=rationale,
            split_ratio=DEFAULT_SPLIT_RATIO,
            region_index=index,
            region_rect=rect,
        )
    return PlannerDecision(
        method=method,
        rationale=rationale,
        split_ratio=DEFAULT_SPLIT_RATIO,
        region_index=0,
    )
