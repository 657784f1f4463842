"""Decision-source contract shared by scripted and LLM agents."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol, runtime_checkable

if TYPE_CHECKING:
    from ..game import Observation


@dataclass(frozen=True)
class DecisionRequest:
    observation: "Observation"
    seed: int = 0
    retry_budget: int = 2
    timeout_s: float = 60.0

    def __post_init__(self):
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be >= 0")


@dataclass(frozen=True)
class Decision:
    power_w: float
    info: dict = field(default_factory=dict)


class DecisionFailure(RuntimeError):
    """An agent could not produce a power. ``transcript`` holds any raw exchange."""

    def __init__(self, message: str, transcript=None, user=None):
        super().__init__(message)
        self.transcript = transcript or []
        self.user = user


@runtime_checkable
class Agent(Protocol):
    kind: str

    def decide(self, request: DecisionRequest) -> Decision:
        ...
