"""Scenario routing: prompt rendering, rule/service decisions, placement."""

from .client import (
    ChatBackend,
    HttpChatBackend,
    ReplayBackend,
    backend_from_env,
    parse_decision,
    service_decide,
)
from .prompt import render_prompt
from .regions import (
    compose_intermediate,
    parse_split_ratio,
    select_region,
    split_regions,
)
from .rules import DEFAULT_SPLIT_RATIO, MOTION_TAGS, PHYS_TAGS, rule_decide
from .types import (
    FEATURE_TAGS,
    IntermediateComposite,
    Method,
    PlannerDecision,
    ScenarioRequest,
)

__all__ = [
    "FEATURE_TAGS",
    "PHYS_TAGS",
    "MOTION_TAGS",
    "DEFAULT_SPLIT_RATIO",
    "Method",
    "ScenarioRequest",
    "PlannerDecision",
    "IntermediateComposite",
    "render_prompt",
    "rule_decide",
    "service_decide",
    "parse_decision",
    "parse_split_ratio",
    "split_regions",
    "select_region",
    "compose_intermediate",
    "ChatBackend",
    "HttpChatBackend",
    "ReplayBackend",
    "backend_from_env",
]
