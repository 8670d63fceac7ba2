"""Prompt rendering for the routing decision.

The prompt sent to the chat backend is a fixed template — role, task,
answer format, two worked examples, and a rule digest — followed by the
scenario under evaluation. Rendering is deterministic: the same request
always produces byte-identical text.

The two worked examples are exposed as module constants
(``SCENARIO_1_RESPONSE``, ``SCENARIO_2_RESPONSE``) so tests can replay them
through a stub backend and check the response parser against the exact
answer shape the template teaches.
"""

from __future__ import annotations

from .types import ScenarioRequest

__all__ = [
    "CRITERIA_HEADERS",
    "CLOSING_LINE",
    "FORMAT_REMINDER",
    "SCENARIO_1_PROMPT",
    "SCENARIO_1_RESPONSE",
    "SCENARIO_2_PROMPT",
    "SCENARIO_2_RESPONSE",
    "SYSTEM_MESSAGE",
    "render_prompt",
]

CRITERIA_HEADERS = (
    "Simulation complexity",
    "Material properties",
    "Object shape",
    "Environmental factors",
)

CLOSING_LINE = "Now, let's think step by step to accomplish the task."

SYSTEM_MESSAGE = (
    "You are a planning assistant for image composition. Answer in the exact "
    "format requested by the user message."
)

_ROLE_TEXT = (
    "Role: an agent to evaluate the interactions between foreground objects "
    "and given background image to generate realistic compositions. Your "
    "primary goal is to analyze and determine which simulation method best "
    "suits the interaction scenario, based on the simulation complexity, "
    "object's material properties, environmental effects, and object shape."
)

_TASK_TEXT = (
    "Task description: evaluate the possible interaction between the "
    "foreground object(s) and background. Based on the physical interaction "
    "types, material properties, environmental factors, and object shapes, "
    "you must select the appropriate method for simulation, i.e., "
    "InteractPhys for collision, compression, and deformation, or "
    "InteractMotion for complex shape changes and light refraction."
)

_FORMAT_TEXT = """Format: structure your answer in the following manner:
- Expected interaction: A description of how the objects could possibly interact.
- Simulation decision based on criteria: Detailed reasoning that help you to decide which method works best.
  - Simulation complexity: Level of complexity involved in simulating the interaction.
  - Material properties: Overview of material properties (e.g., elasticity, fluid dynamics, surface tension).
  - Object shape: Consideration of the objects' geometries, whether simple or complex.
  - Environmental factors: Factors like wind, light, gravity, or other external forces.
- Overall preferred method: The method selected (InteractPhys or InteractMotion).
- If InteractPhys chosen: Evaluate if part segmentation is required for input image. If yes, suggest prompts for the segmentation: A list of prompts for segmenting relevant parts of the input image, such as "object 1", "object 2".
- If InteractMotion chosen: Evaluate the optimal split ratio of the background image and optimal insertion region of foreground object: The split ratio Sratio is (x,y); best region R* for insertion is Region Z."""

SCENARIO_1_PROMPT = "A rubber ball (foreground), and a wooden floor (background)."

SCENARIO_1_RESPONSE = """Expected interaction: The ball will compress upon impact with the wooden surface, deform slightly due to its elastic properties.
- Simulation decision based on criteria below:
  - Simulation complexity: Elastic deformation and collision dynamics. Moderate.
  - Material properties: Rubber ball is soft, highly elastic; undergoes noticeable deformation on impact. Wood floor is rigid, assumed non-deformable for simplification.
  - Object shape: Ball - geometrically simple and symmetrical; simplifies collision detection and deformation modeling.
  - Environmental factors: N.A.
- Overall preferred method: MPM-based InteractPhys.
- Requires part segmentation for input image, prompts suggested: "rubber ball", "wood surface"."""

SCENARIO_2_PROMPT = (
    "Wine pouring from glass wine (foreground), and a static glass of water "
    "(background)."
)

SCENARIO_2_RESPONSE = """Expected interaction: The wine creates ripples across the water surface and forms swirling patterns of mixed colors.
- Simulation decision based on criteria below:
  - Simulation complexity: Involves fluid transfer between two containers, surface ripple generation, color diffusion, and complex fluid-fluid interaction. Hard.
  - Material properties: Wine and water - slight density and viscosity difference, both exhibit surface tension. Total 2 liquids and 2 containers.
  - Object shape: Wine glass and water glass - two distinct container geometries.
  - Environmental factors: Gravity affects water flow; surface tension forces present.
- Overall preferred method: Particle-based InteractMotion.
- The split ratio Sratio is 1,(1,1); 2, best region R* for insertion is Region 0."""

_RULES_TEXT = """Below are a general set of rules.
- Simulation complexity: InteractPhys is for localized physical interactions such as collisions, elastic/plastic deformation, and rigid or semi-rigid body contact; typically used when it is easy to perform simulation. InteractMotion is preferred for large-scale transformations, complex topology changes, continuous flows, or phenomena involving optical or dynamic surface behavior; typically used when it is hard to perform simulation.
- Material properties: InteractPhys excels with granular or deformable materials such as sand or jelly. InteractMotion handles flow-like effects and phenomena such as surface tension, typically in fluids and gases.
- Environmental effects: InteractPhys is preferred if mechanical forces such as impact or pressure dominate. InteractMotion is preferred if factors like wind or light dynamics are present.
- Object shape and structure: Simple and uniform shapes can be handled by both modules. Complex, dynamic shapes favor InteractMotion."""

FORMAT_REMINDER = (
    "Your previous answer did not follow the required format. Answer again "
    "using the exact phrases: 'Overall preferred method: <InteractPhys or "
    "InteractMotion>'; for InteractPhys add 'prompts suggested: \"...\", "
    "\"...\"'; for InteractMotion add 'The split ratio Sratio is <ratio>, "
    "best region R* for insertion is Region <index>'."
)


def _scenario_line(req: ScenarioRequest) -> str:
    if req.fg_description and req.bg_description:
        return f"{req.fg_description} (foreground), and {req.bg_description} (background)."
    if req.fg_description:
        return f"{req.fg_description} (foreground)."
    return f"{req.bg_description} (background)."


def render_prompt(req: ScenarioRequest) -> str:
    """Render the full routing prompt for a scenario request.

    Deterministic: feature tags are emitted in sorted order and the tag line
    is omitted entirely when the request carries no tags.
    """
    parts = [
        _ROLE_TEXT,
        _TASK_TEXT,
        _FORMAT_TEXT,
        "These are some examples:",
        f"Scenario 1: {SCENARIO_1_PROMPT}",
        SCENARIO_1_RESPONSE,
        f"Scenario 2: {SCENARIO_2_PROMPT}",
        SCENARIO_2_RESPONSE,
        _RULES_TEXT,
    ]
    scenario_block = []
    if req.fg_description or req.bg_description:
        scenario_block.append(f"Scenario: {_scenario_line(req)}")
    if req.feature_tags:
        scenario_block.append(
            "Feature tags: " + ", ".join(sorted(req.feature_tags)) + "."
        )
    parts.append("\n".join(scenario_block))
    parts.append(CLOSING_LINE)
    return "\n\n".join(parts)
