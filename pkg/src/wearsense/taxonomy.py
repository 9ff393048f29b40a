"""Scenario taxonomy: tag mode x interaction mode x feedback kind.

A scenario is a list of phases. Each phase declares whether the wearable shares
application information, how the environment interacts, and which kinds of
feedback it produces. A scenario's classification is the union over its phases.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable


class TagMode(Enum):
    PASSIVE = "passive"
    ACTIVE = "active"


class InteractionMode(Enum):
    INDIRECT = "indirect"
    DIRECT = "direct"
    NONE = "none"


class FeedbackKind(Enum):
    NAVIGATION = "navigation"
    CONTENT = "content"
    OBSERVATION = "observation"
    TRIGGER = "trigger"


# kinds that reach the human-wearable directly
DIRECT_KINDS = frozenset({FeedbackKind.NAVIGATION, FeedbackKind.CONTENT, FeedbackKind.TRIGGER})


def _ordered(members: Iterable[Enum], enum_type: type[Enum]) -> list[Enum]:
    rank = {m: i for i, m in enumerate(enum_type)}
    return sorted(set(members), key=rank.__getitem__)


@dataclass(frozen=True)
class ScenarioPhase:
    shares_application_info: bool
    interaction: InteractionMode
    feedback_kinds: frozenset[FeedbackKind] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "feedback_kinds", frozenset(self.feedback_kinds))

    @property
    def tag(self) -> TagMode:
        return TagMode.ACTIVE if self.shares_application_info else TagMode.PASSIVE


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    phases: tuple[ScenarioPhase, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "phases", tuple(self.phases))


@dataclass(frozen=True)
class Violation:
    phase: int | None
    rule: str
    message: str

    def __str__(self) -> str:
        where = "scenario" if self.phase is None else f"phase {self.phase}"
        return f"{self.rule} ({where}): {self.message}"


class InvalidSpec(ValueError):
    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioClassification:
    tag_modes: frozenset[TagMode]
    interaction_modes: frozenset[InteractionMode]
    feedback_kinds: frozenset[FeedbackKind] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tag_modes", frozenset(self.tag_modes))
        object.__setattr__(self, "interaction_modes", frozenset(self.interaction_modes))
        object.__setattr__(self, "feedback_kinds", frozenset(self.feedback_kinds))
        if not self.tag_modes or not self.interaction_modes:
            raise ValueError("a classification needs at least one tag mode and one interaction mode")

    @property
    def label(self) -> str:
        return render_label(self)

    def __str__(self) -> str:
        return self.label


def validate(spec: ScenarioSpec) -> list[Violation]:
    """Check every phase against the interaction/feedback consistency rules.

    R1  Direct interaction iff the phase has a kind aimed at the human-wearable.
    R2  No interaction implies exactly {observation}.
    R3  Indirect interaction allows observation only (possibly nothing).
    """
    if not spec.phases:
        return [Violation(None, "R0", "scenario has no phases")]
    out = []
    for i, phase in enumerate(spec.phases):
        kinds = phase.feedback_kinds
        direct = phase.interaction is InteractionMode.DIRECT
        if direct != bool(kinds & DIRECT_KINDS):
            if direct:
                msg = "direct interaction needs navigation, content or trigger feedback"
            else:
                msg = f"{phase.interaction.value} interaction cannot return navigation, content or trigger"
            out.append(Violation(i, "R1", msg))
        if phase.interaction is InteractionMode.NONE and kinds != {FeedbackKind.OBSERVATION}:
            out.append(Violation(i, "R2", "no interaction must declare exactly observation feedback"))
        if phase.interaction is InteractionMode.INDIRECT and not kinds <= {FeedbackKind.OBSERVATION}:
            out.append(Violation(i, "R3", "indirect interaction allows observation feedback only"))
    return out


def classify(spec: ScenarioSpec) -> ScenarioClassification:
    violations = validate(spec)
    if violations:
        raise InvalidSpec(violations)
    return ScenarioClassification(
        tag_modes=frozenset(p.tag for p in spec.phases),
        interaction_modes=frozenset(p.interaction for p in spec.phases),
        feedback_kinds=frozenset().union(*(p.feedback_kinds for p in spec.phases)),
    )


def render_label(c: ScenarioClassification) -> str:
    def part(members, enum_type):
        return "/".join(m.value for m in _ordered(members, enum_type))

    return (
        f"tag:{part(c.tag_modes, TagMode)}; "
        f"interaction:{part(c.interaction_modes, InteractionMode)}; "
        f"feedback:{part(c.feedback_kinds, FeedbackKind)}"
    )


_LABEL_RE = re.compile(r"tag:([a-z/]+); interaction:([a-z/]+); feedback:([a-z/]*)")


def parse_label(text: str) -> ScenarioClassification:
    """Exact inverse of :func:`render_label`; anything non-canonical is rejected."""
    m = _LABEL_RE.fullmatch(text)
    if m is None:
        raise ParseError(f"not a classification label: {text!r}")
    try:
        tags = [TagMode(v) for v in m.group(1).split("/")]
        modes = [InteractionMode(v) for v in m.group(2).split("/")]
        kinds = [FeedbackKind(v) for v in m.group(3).split("/")] if m.group(3) else []
    except ValueError as exc:
        raise ParseError(f"unknown member in {text!r}: {exc}") from None
    c = ScenarioClassification(frozenset(tags), frozenset(modes), frozenset(kinds))
    if render_label(c) != text:
        raise ParseError(f"label is not canonical: {text!r} (expected {render_label(c)!r})")
    return c


# ---------------------------------------------------------------------------
# structured-text form

def spec_from_dict(doc: dict) -> ScenarioSpec:
    try:
        phases = [
            ScenarioPhase(
                shares_application_info=bool(p["shares_application_info"]),
                interaction=InteractionMode(p["interaction"]),
                feedback_kinds=frozenset(FeedbackKind(k) for k in p.get("feedback_kinds", [])),
            )
            for p in doc.get("phases", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed scenario spec: {exc!r}") from None
    return ScenarioSpec(str(doc.get("name", "")), tuple(phases))


def spec_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "name": spec.name,
        "phases": [
            {
                "shares_application_info": p.shares_application_info,
                "interaction": p.interaction.value,
                "feedback_kinds": [k.value for k in _ordered(p.feedback_kinds, FeedbackKind)],
            }
            for p in spec.phases
        ],
    }


def _phase(shares: bool, interaction: InteractionMode, *kinds: FeedbackKind) -> ScenarioPhase:
    return ScenarioPhase(shares, interaction, frozenset(kinds))


_I, _F = InteractionMode, FeedbackKind

REFERENCE_SCENARIOS: dict[str, ScenarioSpec] = {
    "my-seat": ScenarioSpec("my-seat", (_phase(True, _I.DIRECT, _F.NAVIGATION),)),
    "free-seat": ScenarioSpec("free-seat", (_phase(False, _I.DIRECT, _F.NAVIGATION),)),
    # passive visitors are learned about first; an active tag skips straight to acting
    "optimized-advertisement": ScenarioSpec(
        "optimized-advertisement",
        (
            _phase(False, _I.INDIRECT),
            _phase(False, _I.DIRECT, _F.CONTENT, _F.NAVIGATION),
            _phase(True, _I.DIRECT, _F.CONTENT, _F.NAVIGATION),
        ),
    ),
    "people-flow": ScenarioSpec("people-flow", (_phase(False, _I.NONE, _F.OBSERVATION),)),
    "smart-buildings": ScenarioSpec(
        "smart-buildings",
        (_phase(False, _I.INDIRECT, _F.OBSERVATION), _phase(False, _I.DIRECT, _F.TRIGGER)),
    ),
}

REFERENCE_LABELS: dict[str, str] = {
    "my-seat": "tag:active; interaction:direct; feedback:navigation",
    "free-seat": "tag:passive; interaction:direct; feedback:navigation",
    "optimized-advertisement": "tag:passive/active; interaction:indirect/direct; feedback:navigation/content",
    "people-flow": "tag:passive; interaction:none; feedback:observation",
    "smart-buildings": "tag:passive; interaction:indirect/direct; feedback:observation/trigger",
}
