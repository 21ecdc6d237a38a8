"""Planner protocol: what a strategy sees each tick and how it answers.

Planners run on-board knowledge only — the brief (mission envelope, fleet
roster), their own sensors, the shared belief map, and whatever teammates
told them over the radio. Ground truth stays in the engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from ..comms import BROADCAST, Message
from ..engine.types import Command, LidarScan, PeerInfo, PlannerBrief, UavState
from .belief import BeliefMap


@dataclass
class Observation:
    """Everything one agent may act on this tick."""

    tick: int
    clock_s: float
    state: UavState
    inbox: list[Message]
    scan: Optional[LidarScan]
    belief: BeliefMap
    peers: dict[str, PeerInfo]
    pending_reports: int
    last_capture_points: Optional[int] = None


class BasePlanner:
    """Subclass and implement tick(); queue radio traffic through send()."""

    strategy_name = "base"

    def __init__(self, brief: PlannerBrief) -> None:
        self.brief = brief
        self.outbox: list[Message] = []
        self.done = False

    def send(self, recipient: str, kind: str, payload: dict) -> None:
        self.outbox.append(
            Message(sender=self.brief.agent, recipient=recipient, kind=kind, payload=payload)
        )

    def broadcast(self, kind: str, payload: dict) -> None:
        self.send(BROADCAST, kind, payload)

    def tick(self, obs: Observation) -> Command:
        raise NotImplementedError


PlannerFactory = Callable[[PlannerBrief], BasePlanner]

_REGISTRY: dict[str, PlannerFactory] = {}


def register(name: str) -> Callable[[type], type]:
    def deco(cls: type) -> type:
        _REGISTRY[name] = cls
        cls.strategy_name = name
        return cls

    return deco


def make_planner(name: str, brief: PlannerBrief) -> BasePlanner:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown planner {name!r}; available: {', '.join(sorted(_REGISTRY))}"
        ) from None
    return factory(brief)


def available_planners() -> list[str]:
    return sorted(_REGISTRY)
