"""Request and decision types for routing a composition scenario.

A scenario describes a foreground object to insert into a background. The
router answers with one of two methods, named here by the wire-protocol
strings the external planning service uses:

* ``InteractPhys`` — run the particle simulator (collision, compression,
  elastic deformation);
* ``InteractMotion`` — run the masked video inpainter (flows, topology
  changes, optics).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from ..errors import PlannerError

__all__ = [
    "FEATURE_TAGS",
    "Method",
    "ScenarioRequest",
    "PlannerDecision",
    "IntermediateComposite",
]

# Vocabulary of scenario feature tags the rule engine understands.
FEATURE_TAGS = frozenset(
    {
        "granular",
        "deformable_solid",
        "fluid",
        "gas",
        "rigid",
        "wind",
        "light_dynamics",
        "mechanical_force",
        "simple_shape",
        "complex_shape",
        "surface_tension",
        "simulation_easy",
        "simulation_hard",
    }
)


class Method(str, Enum):
    """Routing target; values are the protocol names used on the wire."""

    PHYS = "InteractPhys"
    MOTION = "InteractMotion"


@dataclass(frozen=True)
class ScenarioRequest:
    """A composition scenario to route.

    At least one of the descriptions or the feature tags must be provided;
    an entirely empty request cannot be routed by either backend.
    """

    fg_description: str = ""
    bg_description: str = ""
    feature_tags: frozenset = frozenset()
    bg_image: Optional[np.ndarray] = None
    fg_image: Optional[np.ndarray] = None

    def __post_init__(self):
        tags = frozenset(self.feature_tags)
        object.__setattr__(self, "feature_tags", tags)
        unknown = sorted(tags - FEATURE_TAGS)
        if unknown:
            raise PlannerError(
                f"unknown feature tags {unknown}; known tags are {sorted(FEATURE_TAGS)}"
            )
        if not (self.fg_description or self.bg_description or tags):
            raise PlannerError(
                "scenario request is empty: provide descriptions or feature tags"
            )


@dataclass(frozen=True)
class PlannerDecision:
    """The routing verdict plus the branch-specific payload.

    Exactly one branch is populated: segmentation prompts for the simulator
    branch, or a split ratio and region index for the inpainting branch.
    ``region_rect`` is a convenience copy of the chosen region's pixel
    rectangle ``(x0, y0, x1, y1)`` when a background image was available.
    """

    method: Method
    rationale: str = ""
    segmentation_prompts: Optional[Tuple[str, ...]] = None
    split_ratio: Optional[str] = None
    region_index: Optional[int] = None
    region_rect: Optional[Tuple[int, int, int, int]] = None

    def __post_init__(self):
        method = Method(self.method)
        object.__setattr__(self, "method", method)
        if self.segmentation_prompts is not None:
            object.__setattr__(
                self, "segmentation_prompts", tuple(self.segmentation_prompts)
            )
        phys_fields = self.segmentation_prompts is not None
        motion_fields = self.split_ratio is not None or self.region_index is not None
        if method is Method.PHYS:
            if not phys_fields or motion_fields:
                raise PlannerError(
                    "InteractPhys decision must carry segmentation prompts and "
                    "no split ratio or region"
                )
        else:
            if phys_fields or self.split_ratio is None or self.region_index is None:
                raise PlannerError(
                    "InteractMotion decision must carry a split ratio and a "
                    "region index and no segmentation prompts"
                )
            if self.region_index < 0:
                raise PlannerError(f"region index must be >= 0, got {self.region_index}")


@dataclass(frozen=True)
class IntermediateComposite:
    """A statically pasted foreground plus its loose bounding-box mask.

    ``mask`` uses the in-memory convention: 1 = known background, 0 = the
    rectangle where the foreground was inserted.
    """

    image: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        image = np.asarray(self.image)
        mask = np.asarray(self.mask)
        if image.shape[:2] != mask.shape:
            raise PlannerError(
                f"composite image {image.shape[:2]} and mask {mask.shape} "
                "dimensions differ"
            )
        bad = [v.item() for v in np.unique(mask) if v not in (0, 1)]
        if bad:
            raise PlannerError(f"mask values must be 0 or 1, found {bad}")
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "mask", mask)
