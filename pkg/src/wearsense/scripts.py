"""Built-in scenario scripts: the five smart-environment scenarios plus a random mall walk."""

from __future__ import annotations

import random

from .codec import MacAddress
from .engine import EVENT_DEVICE, Condition, FeedbackAction, InterestLearner, Rule, TriggerLearner
from .sim import Agent, LearningSchedule, ScenarioScript, ScriptedActuation
from .taxonomy import REFERENCE_LABELS, FeedbackKind
from .tracker import SensorMap

S = 1_000_000
MINUTE = 60 * S
HOUR = 60 * MINUTE
DAY = 24 * HOUR

MALL_ZONES = ("entrance", "food_court", "fashion", "electronics")


class UnknownScenario(KeyError):
    pass


def _mac(n: int) -> MacAddress:
    # locally administered unicast range
    return MacAddress(bytes([0x02, 0x00]) + n.to_bytes(4, "big"))


def _sensors(*zones: str) -> SensorMap:
    return SensorMap({f"s-{z}": z for z in zones})


def my_seat() -> ScenarioScript:
    rider = Agent(
        "rider",
        _mac(1),
        itinerary=((0, "platform_e"), (10 * MINUTE, "train_entrance"), (12 * MINUTE, "wagon_seats")),
        active_announcements=((10 * MINUTE + 30 * S, {"ticket_seat": "32F", "ticket": "ic-1542"}),),
    )
    seat_rule = Rule(
        "r1-seat",
        Condition.on_active_info("ticket_seat"),
        FeedbackAction(FeedbackKind.NAVIGATION, EVENT_DEVICE, "seat {value} on the left side"),
    )
    return ScenarioScript(
        name="my-seat",
        sensors=_sensors("platform_e", "train_entrance", "wagon_seats"),
        agents=(rider,),
        rules=(seat_rule,),
        expected_label=REFERENCE_LABELS["my-seat"],
        duration_micro=20 * MINUTE,
        description="an e-ticket shares the reserved seat; the entrance monitor points the way",
    )


def free_seat() -> ScenarioScript:
    newcomer = Agent(
        "newcomer",
        _mac(1),
        itinerary=((0, "platform_b"), (10 * MINUTE, "train_entrance"), (12 * MINUTE, "wagon_right")),
    )
    seated = [Agent(f"passenger-{i}", _mac(10 + i), itinerary=((0, "wagon_left"),)) for i in range(6)]
    seated.append(Agent("passenger-6", _mac(16), itinerary=((0, "wagon_right"),)))
    rules = (
        Rule(
            "r1-platform",
            Condition.on_arrival("platform_b"),
            FeedbackAction(FeedbackKind.NAVIGATION, EVENT_DEVICE, "free seats in the rear wagon, board at area B"),
        ),
        Rule(
            "r2-entrance",
            Condition.on_arrival("train_entrance"),
            FeedbackAction(
                FeedbackKind.NAVIGATION, EVENT_DEVICE, "most free seats: go to {emptiest:wagon_left,wagon_right}"
            ),
        ),
    )
    return ScenarioScript(
        name="free-seat",
        sensors=_sensors("platform_b", "train_entrance", "wagon_left", "wagon_right"),
        agents=(newcomer, *seated),
        rules=rules,
        expected_label=REFERENCE_LABELS["free-seat"],
        duration_micro=20 * MINUTE,
        description="monitors steer an unannounced passenger towards the emptier wagon half",
    )


def optimized_advertisement() -> ScenarioScript:
    booths = ("booth_robotics", "booth_cloud", "booth_security", "booth_mobility")
    lingerer = Agent(
        "lingerer",
        _mac(1),
        itinerary=(
            (0, "hall"),
            (2 * MINUTE, "booth_robotics"),
            (12 * MINUTE, "hall"),
            (15 * MINUTE, "booth_cloud"),
            (16 * MINUTE, "hall"),
            (19 * MINUTE, "booth_security"),
            (27 * MINUTE, "hall"),
        ),
    )
    announcer = Agent(
        "announcer",
        _mac(2),
        itinerary=((0, "hall"), (5 * MINUTE, "booth_mobility"), (12 * MINUTE, "hall")),
        active_announcements=((MINUTE, {"interests": "robotics"}),),
    )
    rules = (
        Rule(
            "r1-ads",
            Condition.on_active_info("interests"),
            FeedbackAction(FeedbackKind.CONTENT, EVENT_DEVICE, "ads: {value}"),
        ),
        Rule(
            "r2-recommend",
            Condition.on_active_info("interests"),
            FeedbackAction(FeedbackKind.NAVIGATION, EVENT_DEVICE, "visit booths about {value}"),
        ),
    )
    learner = InterestLearner(
        booths=booths,
        monitor_zone="hall",
        recommendations={
            "booth_robotics": "booth_mobility",
            "booth_security": "booth_cloud",
            "booth_mobility": "booth_robotics",
        },
    )
    return ScenarioScript(
        name="optimized-advertisement",
        sensors=_sensors("hall", *booths),
        agents=(lingerer, announcer),
        rules=rules,
        learning=(LearningSchedule("interests", learner, 5 * MINUTE),),
        expected_label=REFERENCE_LABELS["optimized-advertisement"],
        duration_micro=35 * MINUTE,
        description="hall monitors show ads learned from booth dwell, or from announced interests",
    )


def wander_script(
    n_agents: int,
    duration_micro: int,
    zones=MALL_ZONES,
    seed: int = 0,
    min_stay: int = 5 * MINUTE,
    max_stay: int = 15 * MINUTE,
    name: str = "wander",
    description: str = "",
) -> ScenarioScript:
    """Agents hop between distinct zones, staying ``min_stay``..``max_stay`` in each."""
    rng = random.Random(seed)
    agents = []
    for i in range(n_agents):
        zone = rng.choice(zones)
        t = 0
        itinerary = [(0, zone)]
        while True:
            t += rng.randint(min_stay // S, max_stay // S) * S
            if t + min_stay > duration_micro:
                break
            zone = rng.choice([z for z in zones if z != zone])
            itinerary.append((t, zone))
        agents.append(Agent(f"visitor-{i:02d}", _mac(100 + i), itinerary=tuple(itinerary)))
    return ScenarioScript(
        name=name,
        sensors=_sensors(*zones),
        agents=tuple(agents),
        expected_label=REFERENCE_LABELS["people-flow"],
        duration_micro=duration_micro,
        analytics_reports=("occupancy", "dwell", "flow", "unique"),
        description=description,
    )


def people_flow() -> ScenarioScript:
    return wander_script(
        10,
        HOUR,
        seed=2016,
        name="people-flow",
        description="shoppers are counted and their flows measured; nothing is returned to them",
    )


SMART_BUILDING_ARRIVAL_OFFSETS_MIN = (0, 4, -3, 2, 6, -1)


def smart_buildings() -> ScenarioScript:
    itinerary: list[tuple[int, str | None]] = [(0, None)]
    actuations = []
    for day, offset in enumerate(SMART_BUILDING_ARRIVAL_OFFSETS_MIN):
        arrive = day * DAY + 8 * HOUR + offset * MINUTE
        itinerary += [
            (arrive, "entrance"),
            (arrive + 4 * MINUTE, "corridor"),
            (arrive + 8 * MINUTE, "office"),
        ]
        # manual switch-on, skipped when the light is already on
        actuations.append(ScriptedActuation(arrive + 75 * S, "light_entrance", "on"))
        if day < len(SMART_BUILDING_ARRIVAL_OFFSETS_MIN) - 1:
            leave = day * DAY + 17 * HOUR
            itinerary += [(leave, "corridor"), (leave + 3 * MINUTE, "entrance"), (leave + 6 * MINUTE, None)]
            actuations.append(ScriptedActuation(day * DAY + 22 * HOUR, "light_entrance", "off"))
    worker = Agent("worker", _mac(1), itinerary=tuple(itinerary))
    return ScenarioScript(
        name="smart-buildings",
        sensors=_sensors("entrance", "corridor", "office"),
        agents=(worker,),
        actuations=tuple(actuations),
        learning=(LearningSchedule("habits", TriggerLearner(), DAY),),
        expected_label=REFERENCE_LABELS["smart-buildings"],
        duration_micro=5 * DAY + 12 * HOUR,
        description="five mornings of manual switching teach the building to turn the light on itself",
    )


BUILTIN_SCRIPTS = {
    "my-seat": my_seat,
    "free-seat": free_seat,
    "optimized-advertisement": optimized_advertisement,
    "people-flow": people_flow,
    "smart-buildings": smart_buildings,
}


def builtin_script(name: str) -> ScenarioScript:
    try:
        return BUILTIN_SCRIPTS[name]()
    except KeyError:
        raise UnknownScenario(name) from None
