"""Chat-completion client for routing decisions, plus the response parser.

The wire protocol is a single POST of ``{"model": ..., "messages": [...]}``
(messages are ``{"role", "content"}`` pairs — one system and one user
message) to a chat-completions endpoint; the reply text is read from
``choices[0].message.content``. Endpoint, model, and credential come from
the ``MOCOMP_PLANNER_URL`` / ``MOCOMP_PLANNER_MODEL`` /
``MOCOMP_PLANNER_API_KEY`` environment variables.

Tests and offline replays use :class:`ReplayBackend`, which serves scripted
responses and records each request it sees.
"""

from __future__ import annotations

import os
import re
from typing import List, Mapping, Optional, Protocol, Sequence

import httpx

from ..errors import PlannerFormatError, TransportError
from .prompt import FORMAT_REMINDER, SYSTEM_MESSAGE, render_prompt
from .regions import parse_split_ratio
from .types import Method, PlannerDecision, ScenarioRequest

__all__ = [
    "ENV_URL",
    "ENV_MODEL",
    "ENV_API_KEY",
    "ChatBackend",
    "HttpChatBackend",
    "ReplayBackend",
    "parse_decision",
    "service_decide",
    "backend_from_env",
]

ENV_URL = "MOCOMP_PLANNER_URL"
ENV_MODEL = "MOCOMP_PLANNER_MODEL"
ENV_API_KEY = "MOCOMP_PLANNER_API_KEY"

Message = Mapping[str, str]


class ChatBackend(Protocol):
    def complete(self, messages: Sequence[Message]) -> str:
        """Send one chat exchange, return the assistant's text."""
        ...


class HttpChatBackend:
    """Chat-completions POST client; raises ``TransportError`` on failure."""

    def __init__(
        self,
        url: str,
        model: str,
        api_key: Optional[str] = None,
        timeout: float = 30.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.url = url
        self.model = model
        self.api_key = api_key
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, messages: Sequence[Message]) -> str:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self._client.post(
                self.url,
                json={"model": self.model, "messages": list(messages)},
                headers=headers,
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"planner request to {self.url} failed: {exc}") from exc
        try:
            payload = response.json()
            return payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(
                f"planner response from {self.url} is not a chat completion "
                f"(expected choices[0].message.content): {exc}"
            ) from exc


class ReplayBackend:
    """Serves scripted responses in order and records every request."""

    def __init__(self, responses: Sequence[str]):
        self.responses = list(responses)
        self.requests: List[List[dict]] = []

    def complete(self, messages: Sequence[Message]) -> str:
        self.requests.append([dict(m) for m in messages])
        if len(self.requests) > len(self.responses):
            raise TransportError(
                f"replay script exhausted after {len(self.responses)} responses"
            )
        return self.responses[len(self.requests) - 1]


_METHOD_LINE = re.compile(r"Overall preferred method\s*:?(?P<rest>[^\n]*)", re.IGNORECASE)
_PROMPTS_LINE = re.compile(r"prompts suggested\s*:?(?P<rest>[^\n]*)", re.IGNORECASE)
_QUOTED = re.compile(r"[\"“]([^\"“”]+)[\"”]")
_SPLIT_AND_REGION = re.compile(
    r"split ratio\s+S_?ratio\s+is\s+(?P<split>.+?),\s*best region R\*?\s+for\s+"
    r"insertion is Region\s+(?P<region>\d+)",
    re.IGNORECASE,
)
_SPLIT_ONLY = re.compile(
    r"split ratio\s+(?:S_?ratio\s+)?is\s+(?P<split>[0-9.,;()\s]+)", re.IGNORECASE
)
_REGION_ONLY = re.compile(r"Region\s+(?P<region>\d+)")
_INTERACTION_LINE = re.compile(r"Expected interaction\s*:?\s*(?P<rest>[^\n]*)", re.IGNORECASE)


def _parse_method(text: str) -> Method:
    matched = _METHOD_LINE.search(text)
    if not matched:
        raise PlannerFormatError(
            "response has no 'Overall preferred method:' line", raw_response=text
        )
    rest = matched.group("rest")
    has_phys = Method.PHYS.value in rest
    has_motion = Method.MOTION.value in rest
    if has_phys == has_motion:
        raise PlannerFormatError(
            "the 'Overall preferred method' line must name exactly one of "
            f"{Method.PHYS.value} or {Method.MOTION.value}, got {rest.strip()!r}",
            raw_response=text,
        )
    return Method.PHYS if has_phys else Method.MOTION


def _parse_rationale(text: str) -> str:
    matched = _INTERACTION_LINE.search(text)
    if matched and matched.group("rest").strip():
        return matched.group("rest").strip()[:240]
    for line in text.splitlines():
        if line.strip():
            return line.strip()[:240]
    return ""


def parse_decision(text: str) -> PlannerDecision:
    """Parse a templated routing response into a decision.

    Raises ``PlannerFormatError`` (carrying the raw text) when the required
    phrases are missing or ambiguous.
    """
    method = _parse_method(text)
    rationale = _parse_rationale(text)
    if method is Method.PHYS:
        prompts: tuple = ()
        prompts_line = _PROMPTS_LINE.search(text)
        if prompts_line:
            prompts = tuple(m.group(1) for m in _QUOTED.finditer(prompts_line.group("rest")))
            if not prompts:
                raise PlannerFormatError(
                    "'prompts suggested:' present but no quoted prompts found",
                    raw_response=text,
                )
        return PlannerDecision(
            method=method, rationale=rationale, segmentation_prompts=prompts
        )

    matched = _SPLIT_AND_REGION.search(text)
    if matched:
        split_text = matched.group("split").strip().rstrip(",;")
        region = int(matched.group("region"))
    else:
        split_match = _SPLIT_ONLY.search(text)
        region_match = _REGION_ONLY.search(text)
        if not split_match or not region_match:
            raise PlannerFormatError(
                "InteractMotion response must state 'The split ratio Sratio is "
                "<ratio>, best region R* for insertion is Region <index>'",
                raw_response=text,
            )
        split_text = split_match.group("split").strip().rstrip(",;").strip()
        region = int(region_match.group("region"))
    try:
        parse_split_ratio(split_text)
    except Exception as exc:
        raise PlannerFormatError(
            f"split ratio {split_text!r} does not parse: {exc}", raw_response=text
        ) from exc
    return PlannerDecision(
        method=method, rationale=rationale, split_ratio=split_text, region_index=region
    )


def service_decide(req: ScenarioRequest, backend: ChatBackend) -> PlannerDecision:
    """Route a request through a chat backend.

    Sends the rendered prompt as one system+user exchange. If the response
    does not parse, retries once with a format reminder appended to the
    prompt; a second failure raises ``PlannerFormatError`` with the raw
    response. Transport failures propagate as ``TransportError``.
    """
    prompt = render_prompt(req)
    system = {"role": "system", "content": SYSTEM_MESSAGE}
    text = backend.complete([system, {"role": "user", "content": prompt}])
    try:
        return parse_decision(text)
    except PlannerFormatError:
        retry_text = backend.complete(
            [system, {"role": "user", "content": prompt + "\n\n" + FORMAT_REMINDER}]
        )
        try:
            return parse_decision(retry_text)
        except PlannerFormatError as exc:
            raise PlannerFormatError(
                f"response unparseable after a format-reminder retry: {exc}",
                raw_response=retry_text,
            ) from exc


def backend_from_env(env: Optional[Mapping[str, str]] = None) -> Optional[HttpChatBackend]:
    """Build an HTTP backend from the environment, or None when unconfigured."""
    if env is None:
        env = os.environ
    url = env.get(ENV_URL)
    if not url:
        return None
    return HttpChatBackend(
        url=url,
        model=env.get(ENV_MODEL, "planner-default"),
        api_key=env.get(ENV_API_KEY),
    )
