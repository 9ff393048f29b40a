"""Event-sourced decision loop of the smart environment.

Rules turn presence events into feedback actions. Every event lands in an
append-only observation log; learners replay that log to synthesize new rules,
and :func:`classify_trace` replays a finished run back into the taxonomy.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from . import analytics
from .taxonomy import (
    FeedbackKind,
    InteractionMode,
    ScenarioClassification,
    ScenarioPhase,
    ScenarioSpec,
    classify,
)
from .tracker import PresenceSession

DEFAULT_K = 5
DEFAULT_WINDOW_MICRO = 120_000_000

# action target placeholder resolved to the device of the triggering event
EVENT_DEVICE = "$device"


class EngineError(ValueError):
    pass


class TimeRegression(EngineError):
    pass


class EmptyTrace(EngineError):
    pass


class EventKind(Enum):
    ARRIVAL = "arrival"
    DEPARTURE = "departure"
    ACTIVE_INFO = "active_info"
    MANUAL_ACTUATION = "manual_actuation"


@dataclass(frozen=True)
class Event:
    ts_micro: int
    kind: EventKind
    device_id: str | None = None
    zone_id: str | None = None
    attrs: Mapping[str, str] | None = None
    actuator_id: str | None = None
    state: str | None = None

    @classmethod
    def arrival(cls, ts: int, device: str, zone: str) -> Event:
        return cls(ts, EventKind.ARRIVAL, device_id=device, zone_id=zone)

    @classmethod
    def departure(cls, ts: int, device: str, zone: str) -> Event:
        return cls(ts, EventKind.DEPARTURE, device_id=device, zone_id=zone)

    @classmethod
    def active_info(cls, ts: int, device: str, attrs: Mapping[str, str]) -> Event:
        return cls(ts, EventKind.ACTIVE_INFO, device_id=device, attrs=dict(attrs))

    @classmethod
    def manual_actuation(cls, ts: int, actuator: str, state: str) -> Event:
        return cls(ts, EventKind.MANUAL_ACTUATION, actuator_id=actuator, state=state)


class ConditionType(Enum):
    ON_ARRIVAL = "on_arrival"
    ON_ACTIVE_INFO = "on_active_info"


@dataclass(frozen=True)
class Condition:
    type: ConditionType
    zone: str | None = None
    device: str | None = None  # None matches any device
    key: str | None = None

    @classmethod
    def on_arrival(cls, zone: str, device: str | None = None) -> Condition:
        return cls(ConditionType.ON_ARRIVAL, zone=zone, device=device)

    @classmethod
    def on_active_info(cls, key: str) -> Condition:
        return cls(ConditionType.ON_ACTIVE_INFO, key=key)

    def matches(self, event: Event) -> bool:
        if self.type is ConditionType.ON_ARRIVAL:
            return (
                event.kind is EventKind.ARRIVAL
                and event.zone_id == self.zone
                and (self.device is None or event.device_id == self.device)
            )
        return event.kind is EventKind.ACTIVE_INFO and self.key in (event.attrs or {})


@dataclass(frozen=True)
class FeedbackAction:
    kind: FeedbackKind
    target: str
    payload: str

    def __post_init__(self) -> None:
        if self.kind is FeedbackKind.OBSERVATION:
            raise ValueError("observation is not an action the environment emits")


class Origin(Enum):
    CONFIGURED = "configured"
    LEARNED = "learned"


@dataclass(frozen=True)
class Rule:
    rule_id: str
    condition: Condition
    action: FeedbackAction
    origin: Origin = Origin.CONFIGURED
    support: int | None = None

    def __post_init__(self) -> None:
        if self.origin is Origin.LEARNED and self.support is None:
            raise ValueError("learned rules record their supporting observation count")

    def same_behaviour(self, other: Rule) -> bool:
        return self.condition == other.condition and self.action == other.action


class ObservationLog:
    """Append-only, time-ordered event log."""

    def __init__(self, events: Iterable[Event] = ()):
        self._events: list[Event] = []
        for e in events:
            self.append(e)

    def append(self, event: Event) -> None:
        if self._events and event.ts_micro < self._events[-1].ts_micro:
            raise TimeRegression(f"event at {event.ts_micro} precedes {self._events[-1].ts_micro}")
        self._events.append(event)

    def snapshot(self) -> tuple[Event, ...]:
        return tuple(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self):
        return iter(tuple(self._events))


@dataclass
class EngineState:
    log: ObservationLog = field(default_factory=ObservationLog)
    occupancy: dict[str, set[str]] = field(default_factory=lambda: defaultdict(set))
    actuators: dict[str, str] = field(default_factory=dict)
    last_ts: int | None = None

    def occupancy_of(self, zone: str) -> int:
        return len(self.occupancy.get(zone, ()))


_PLACEHOLDER = re.compile(r"\{(\w+)(?::([^}]*))?\}")


def render_payload(template: str, event: Event, value: str | None, state: EngineState) -> str:
    """Fill ``{device}``, ``{zone}``, ``{value}``, ``{occupancy:Z}`` and ``{emptiest:Z1,Z2}``."""

    def sub(m: re.Match) -> str:
        name, arg = m.group(1), m.group(2)
        if name == "device":
            return event.device_id or ""
        if name == "zone":
            return event.zone_id or ""
        if name == "value":
            return value or ""
        if name == "occupancy" and arg:
            return str(state.occupancy_of(arg))
        if name == "emptiest" and arg:
            zones = [z.strip() for z in arg.split(",")]
            return min(zones, key=lambda z: (state.occupancy_of(z), zones.index(z)))
        return m.group(0)

    return _PLACEHOLDER.sub(sub, template)


def _resolve(rule: Rule, event: Event, state: EngineState) -> FeedbackAction:
    value = None
    if rule.condition.type is ConditionType.ON_ACTIVE_INFO:
        value = str(event.attrs[rule.condition.key])
    target = event.device_id if rule.action.target == EVENT_DEVICE else rule.action.target
    payload = render_payload(rule.action.payload, event, value, state)
    return FeedbackAction(rule.action.kind, target or "", payload)


def step(event: Event, rules: Sequence[Rule], state: EngineState) -> list[FeedbackAction]:
    return [action for _, action in step_with_rules(event, rules, state)]


def step_with_rules(
    event: Event, rules: Sequence[Rule], state: EngineState
) -> list[tuple[Rule, FeedbackAction]]:
    """Process one event; returns each fired rule with its action, in rule_id order."""
    if state.last_ts is not None and event.ts_micro < state.last_ts:
        raise TimeRegression(f"event at {event.ts_micro} precedes {state.last_ts}")
    state.log.append(event)
    state.last_ts = event.ts_micro

    if event.kind is EventKind.ARRIVAL:
        state.occupancy[event.zone_id].add(event.device_id)
    elif event.kind is EventKind.DEPARTURE:
        state.occupancy[event.zone_id].discard(event.device_id)
    elif event.kind is EventKind.MANUAL_ACTUATION:
        state.actuators[event.actuator_id] = event.state

    fired = []
    for rule in sorted(rules, key=lambda r: r.rule_id):
        if rule.condition.matches(event):
            action = _resolve(rule, event, state)
            if action.kind is FeedbackKind.TRIGGER:
                state.actuators[action.target] = action.payload
            fired.append((rule, action))
    return fired


# ---------------------------------------------------------------------------
# learning


def learned_rule_id(zone: str, device: str | None, actuator: str, state: str) -> str:
    return f"learned:{zone}:{device or '*'}:{actuator}:{state}"


def trigger_pattern_counts(
    events: Sequence[Event], window_micro: int, any_device: bool = False
) -> dict[tuple[str, str | None, str, str], int]:
    """Distinct arrivals per (zone, device, actuator, state) followed by that actuation in the window."""
    counts: dict[tuple[str, str | None, str, str], int] = defaultdict(int)
    for i, a in enumerate(events):
        if a.kind is not EventKind.ARRIVAL:
            continue
        seen = set()
        for m in events[i + 1:]:
            if m.ts_micro - a.ts_micro > window_micro:
                break
            if m.kind is EventKind.MANUAL_ACTUATION:
                seen.add((m.actuator_id, m.state))
        device = None if any_device else a.device_id
        for actuator, state in seen:
            counts[(a.zone_id, device, actuator, state)] += 1
    return counts


def learn_trigger_rules(
    log: ObservationLog | Sequence[Event],
    k: int = DEFAULT_K,
    window_micro: int = DEFAULT_WINDOW_MICRO,
    existing: Iterable[Rule] = (),
    any_device: bool = False,
) -> list[Rule]:
    """Learn arrival -> actuation habits seen at least ``k`` times.

    Output is ordered by (zone, device, actuator, state); rules already present in
    ``existing`` are suppressed.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if window_micro <= 0:
        raise ValueError("window_micro must be positive")
    events = log.snapshot() if isinstance(log, ObservationLog) else tuple(log)
    existing = list(existing)
    rules = []
    counts = trigger_pattern_counts(events, window_micro, any_device)
    for (zone, device, actuator, state), n in sorted(counts.items(), key=lambda kv: _sort_key(kv[0])):
        if n < k:
            continue
        rule = Rule(
            rule_id=learned_rule_id(zone, device, actuator, state),
            condition=Condition.on_arrival(zone, device),
            action=FeedbackAction(FeedbackKind.TRIGGER, actuator, state),
            origin=Origin.LEARNED,
            support=n,
        )
        if not any(rule.same_behaviour(r) for r in existing):
            rules.append(rule)
    return rules


def _sort_key(key):
    zone, device, actuator, state = key
    return (zone, device or "", actuator, state)


def sessions_from_log(events: Sequence[Event]) -> list[PresenceSession]:
    """Pair arrivals with departures; unmatched arrivals stay open until the last event."""
    open_at: dict[tuple[str, str], tuple[int, int]] = {}
    out = []
    last = events[-1].ts_micro if events else 0
    for e in events:
        key = (e.device_id, e.zone_id)
        if e.kind is EventKind.ARRIVAL:
            open_at[key] = (e.ts_micro, 1)
        elif e.kind is EventKind.DEPARTURE and key in open_at:
            start, _ = open_at.pop(key)
            out.append(PresenceSession(e.device_id, e.zone_id, start, e.ts_micro, 1))
    for (device, zone), (start, _) in open_at.items():
        out.append(PresenceSession(device, zone, start, max(start, last), 1))
    return out


@dataclass(frozen=True)
class InterestLearner:
    """Learns booth interests from dwell and turns them into ad and recommendation rules.

    ``recommendations`` maps a booth to a related booth worth suggesting.
    """

    booths: tuple[str, ...]
    monitor_zone: str
    recommendations: Mapping[str, str] = field(default_factory=dict)
    dwell_threshold: int = analytics.DEFAULT_DWELL_THRESHOLD_MICRO
    # learned interests personalise content; they are not an observation product
    feedback_kinds: frozenset[FeedbackKind] = frozenset()

    def learn(self, log: ObservationLog | Sequence[Event], existing: Iterable[Rule] = ()) -> list[Rule]:
        events = log.snapshot() if isinstance(log, ObservationLog) else tuple(log)
        sessions = sessions_from_log(events)
        existing = list(existing)
        rules = []
        profiles = analytics.interest_profiles(sessions, self.booths, self.dwell_threshold)
        for device, profile in profiles.items():
            if not profile.interests:
                continue
            interests = sorted(profile.interests)
            support = len(interests)
            content = Rule(
                rule_id=f"interest:{device}:content",
                condition=Condition.on_arrival(self.monitor_zone, device),
                action=FeedbackAction(FeedbackKind.CONTENT, device, "ads: " + ", ".join(interests)),
                origin=Origin.LEARNED,
                support=support,
            )
            candidates = [content]
            suggestions = sorted(
                {self.recommendations[b] for b in interests if b in self.recommendations} - set(interests)
            )
            if suggestions:
                nav = Rule(
                    rule_id=f"interest:{device}:navigation",
                    condition=Condition.on_arrival(self.monitor_zone, device),
                    action=FeedbackAction(FeedbackKind.NAVIGATION, device, "visit " + ", ".join(suggestions)),
                    origin=Origin.LEARNED,
                    support=support,
                )
                candidates.append(nav)
            rules.extend(c for c in candidates if not any(c.same_behaviour(r) for r in existing))
        return rules


@dataclass(frozen=True)
class TriggerLearner:
    k: int = DEFAULT_K
    window_micro: int = DEFAULT_WINDOW_MICRO
    any_device: bool = False
    feedback_kinds: frozenset[FeedbackKind] = frozenset({FeedbackKind.OBSERVATION})

    def learn(self, log: ObservationLog | Sequence[Event], existing: Iterable[Rule] = ()) -> list[Rule]:
        return learn_trigger_rules(log, self.k, self.window_micro, existing, self.any_device)


# ---------------------------------------------------------------------------
# running and tracing


@dataclass(frozen=True)
class ActionRecord:
    ts_micro: int
    action: FeedbackAction
    rule_id: str


@dataclass(frozen=True)
class LearningRun:
    ts_micro: int
    learner: str
    log_size: int
    feedback_kinds: frozenset[FeedbackKind]
    rules: tuple[Rule, ...]


@dataclass(frozen=True)
class AnalyticsRun:
    ts_micro: int
    report: str
    log_size: int


@dataclass
class Trace:
    events: list[Event] = field(default_factory=list)
    actions: list[ActionRecord] = field(default_factory=list)
    learning: list[LearningRun] = field(default_factory=list)
    analytics: list[AnalyticsRun] = field(default_factory=list)


class Engine:
    """Owns rules, state and the trace of one run. Events must arrive in time order."""

    def __init__(self, rules: Iterable[Rule] = ()):
        self.rules: dict[str, Rule] = {}
        for r in rules:
            self.add_rule(r)
        self.state = EngineState()
        self.trace = Trace()

    def add_rule(self, rule: Rule) -> None:
        self.rules[rule.rule_id] = rule

    def process(self, event: Event) -> list[FeedbackAction]:
        fired = step_with_rules(event, list(self.rules.values()), self.state)
        self.trace.events.append(event)
        for rule, action in fired:
            self.trace.actions.append(ActionRecord(event.ts_micro, action, rule.rule_id))
        return [a for _, a in fired]

    def learn(self, ts_micro: int, name: str, learner) -> list[Rule]:
        snapshot = self.state.log.snapshot()
        new_rules = learner.learn(snapshot, self.rules.values())
        for r in new_rules:
            self.add_rule(r)
        self.trace.learning.append(
            LearningRun(ts_micro, name, len(snapshot), frozenset(learner.feedback_kinds), tuple(new_rules))
        )
        return new_rules

    def record_analytics(self, ts_micro: int, report: str) -> None:
        self.trace.analytics.append(AnalyticsRun(ts_micro, report, len(self.state.log)))


def trace_phases(trace: Trace) -> list[ScenarioPhase]:
    """Reconstruct the taxonomy phases a run went through."""
    if not trace.events:
        raise EmptyTrace("trace holds no events")
    announcers = {e.device_id for e in trace.events if e.kind is EventKind.ACTIVE_INFO}
    present = {e.device_id for e in trace.events if e.device_id is not None}
    shares = set()
    if announcers:
        shares.add(True)
    if present - announcers or not announcers:
        shares.add(False)

    interaction: list[tuple[InteractionMode, frozenset[FeedbackKind]]] = []
    productive = [run for run in trace.learning if run.rules]
    if productive:
        kinds = frozenset().union(*(run.feedback_kinds for run in productive))
        interaction.append((InteractionMode.INDIRECT, kinds))
    if trace.actions:
        interaction.append((InteractionMode.DIRECT, frozenset(r.action.kind for r in trace.actions)))
    elif trace.analytics and not productive:
        interaction.append((InteractionMode.NONE, frozenset({FeedbackKind.OBSERVATION})))
    return [ScenarioPhase(s, mode, kinds) for s in sorted(shares) for mode, kinds in interaction]


def classify_trace(trace: Trace) -> ScenarioClassification:
    phases = trace_phases(trace)
    if not phases:
        raise EngineError("the run neither acted, learned nor produced analytics")
    return classify(ScenarioSpec("trace", tuple(phases)))


# ---------------------------------------------------------------------------
# structured-text form


def rule_to_dict(rule: Rule) -> dict:
    cond = {"type": rule.condition.type.value}
    for name in ("zone", "device", "key"):
        value = getattr(rule.condition, name)
        if value is not None:
            cond[name] = value
    doc = {
        "rule_id": rule.rule_id,
        "condition": cond,
        "action": {"kind": rule.action.kind.value, "target": rule.action.target, "payload": rule.action.payload},
        "origin": rule.origin.value,
    }
    if rule.support is not None:
        doc["support"] = rule.support
    return doc


def rule_from_dict(doc: Mapping) -> Rule:
    cond = doc["condition"]
    action = doc["action"]
    return Rule(
        rule_id=str(doc["rule_id"]),
        condition=Condition(
            ConditionType(cond["type"]), zone=cond.get("zone"), device=cond.get("device"), key=cond.get("key")
        ),
        action=FeedbackAction(FeedbackKind(action["kind"]), action["target"], action.get("payload", "")),
        origin=Origin(doc.get("origin", Origin.CONFIGURED.value)),
        support=doc.get("support"),
    )


def event_to_dict(event: Event) -> dict:
    doc = {"ts_micro": event.ts_micro, "kind": event.kind.value}
    for name in ("device_id", "zone_id", "attrs", "actuator_id", "state"):
        value = getattr(event, name)
        if value is not None:
            doc[name] = dict(value) if name == "attrs" else value
    return doc


def event_from_dict(doc: Mapping) -> Event:
    return Event(
        ts_micro=int(doc["ts_micro"]),
        kind=EventKind(doc["kind"]),
        device_id=doc.get("device_id"),
        zone_id=doc.get("zone_id"),
        attrs=doc.get("attrs"),
        actuator_id=doc.get("actuator_id"),
        state=doc.get("state"),
    )


def action_record_to_dict(rec: ActionRecord) -> dict:
    return {
        "ts": rec.ts_micro,
        "kind": rec.action.kind.value,
        "target": rec.action.target,
        "payload": rec.action.payload,
        "rule_id": rec.rule_id,
    }


def events_from_sessions(
    sessions: Iterable[PresenceSession], extra: Iterable[Event] = ()
) -> list[Event]:
    """Arrival/departure events for sessions merged with ``extra``, stably time-sorted."""
    events: list[Event] = []
    for s in sorted(sessions, key=lambda s: (s.start_micro, s.device_id, s.zone_id)):
        events.append(Event.arrival(s.start_micro, s.device_id, s.zone_id))
        events.append(Event.departure(s.end_micro, s.device_id, s.zone_id))
    events.extend(extra)
    return sorted(events, key=lambda e: e.ts_micro)

