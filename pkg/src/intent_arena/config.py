"""Run configuration: JSON document to resolved network, goal and agents.

Example::

    {
      "network": {"gains": [1.21, 2.01, 0.58, 0.13], "noise_db": 1.0,
                  "bandwidth_hz": 15000, "initial_powers_w": [2, 4, 5, 6]},
      "intent": "reduce total power by 0.85 W",
      "rate_floors_kbps": [3.5, 15.8, 4.4, 1.0],
      "agents": {"kind": "best_response"},
      "rounds": 3,
      "seed": 0
    }

``agents`` is either one spec applied to every user or a list with one
spec per user. Without ``intent``, a ``goal`` object with ``absolute_w`` or
``relative`` sets the saving target.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Optional

from . import env
from .game import AbsoluteSaving, GoalSpec, RelativeSaving
from .intent import IntentError, IntentSpec, parse_intent

AGENT_KINDS = ("hold", "best_response", "random", "llm")
STOCHASTIC_KINDS = ("random",)


class ConfigError(ValueError):
    """Invalid configuration; ``where`` is a field path or ``line:col``."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass
class RunConfig:
    gains: list
    noise_linear: float
    noise_db: Optional[float]
    bandwidth_hz: float
    initial_powers_w: list
    goal: GoalSpec
    intent_text: Optional[str]
    agents: list
    stop_on_success: bool = False
    seed: Optional[int] = None
    force: bool = False
    power_ceiling_factor: float = 10.0
    out_dir: Optional[str] = None
    llm: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def num_users(self) -> int:
        return len(self.gains)

    def network(self) -> env.NetworkState:
        return env.NetworkState(self.gains, self.noise_linear, self.bandwidth_hz, self.initial_powers_w)

    def echo(self) -> dict:
        """Resolved settings as written to trace headers (no output paths, no secrets)."""
        saving = self.goal.power_saving
        return {
            "network": {
                "gains": list(self.gains),
                "noise_db": self.noise_db,
                "noise_linear": self.noise_linear,
                "bandwidth_hz": self.bandwidth_hz,
                "initial_powers_w": list(self.initial_powers_w),
            },
            "intent": self.intent_text,
            "goal": {
                "power_saving": ({"absolute_w": str(saving.watts)} if isinstance(saving, AbsoluteSaving)
                                 else {"relative": str(saving.fraction)}),
                "rate_floors_bps": list(self.goal.floors),
                "max_rounds": self.goal.max_rounds,
            },
            "agents": [dict(a) for a in self.agents],
            "stop_on_success": self.stop_on_success,
            "seed": self.seed,
            "force": self.force,
            "power_ceiling_factor": self.power_ceiling_factor,
            "llm": {k: v for k, v in self.llm.items() if k not in ("api_key",)},
        }


def _num(value: Any, where: str, *, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise ConfigError(where, "must be finite")
    if positive and x <= 0:
        raise ConfigError(where, "must be > 0")
    if nonneg and x < 0:
        raise ConfigError(where, "must be >= 0")
    return x


def _vector(value: Any, where: str, **kw) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(where, "expected a non-empty list of numbers")
    return [_num(v, f"{where}[{i}]", **kw) for i, v in enumerate(value)]


def _agent_spec(spec: Any, where: str) -> dict:
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict):
        raise ConfigError(where, "expected an agent object or kind name")
    kind = spec.get("kind")
    if kind not in AGENT_KINDS:
        raise ConfigError(f"{where}.kind", f"unknown agent kind {kind!r} (choose from {', '.join(AGENT_KINDS)})")
    if kind == "best_response" and "margin" in spec:
        _num(spec["margin"], f"{where}.margin", positive=True)
    return dict(spec)


def _goal(doc: dict, K: int, intent_text: Optional[str], max_rounds: int) -> GoalSpec:
    base = [0.0] * K
    if "rate_floors_kbps" in doc and "rate_floors_bps" in doc:
        raise ConfigError("rate_floors_kbps", "give floors in kbps or bps, not both")
    if "rate_floors_kbps" in doc:
        base = [float(Decimal(repr(v)) * 1000)
                for v in _vector(doc["rate_floors_kbps"], "rate_floors_kbps", nonneg=True)]
    elif "rate_floors_bps" in doc:
        base = _vector(doc["rate_floors_bps"], "rate_floors_bps", nonneg=True)
    if len(base) != K:
        raise ConfigError("rate_floors_kbps", f"expected {K} floors, got {len(base)}")

    if intent_text is not None:
        try:
            spec: IntentSpec = parse_intent(intent_text)
        except IntentError as exc:
            raise ConfigError("intent", str(exc)) from exc
        try:
            return spec.to_goal(K, max_rounds, base)
        except ValueError as exc:
            raise ConfigError("intent", str(exc)) from exc

    goal = doc.get("goal")
    if not isinstance(goal, dict):
        raise ConfigError("goal", "need either an 'intent' string or a 'goal' object")
    if ("absolute_w" in goal) == ("relative" in goal):
        raise ConfigError("goal", "set exactly one of 'absolute_w' and 'relative'")
    try:
        if "absolute_w" in goal:
            saving = AbsoluteSaving(Decimal(repr(_num(goal["absolute_w"], "goal.absolute_w", nonneg=True))))
        else:
            saving = RelativeSaving(Decimal(repr(_num(goal["relative"], "goal.relative", nonneg=True))))
        return GoalSpec(saving, tuple(base), max_rounds)
    except ValueError as exc:
        raise ConfigError("goal", str(exc)) from exc


def from_dict(doc: Any, overrides: Optional[dict] = None, base_dir: Optional[Path] = None) -> RunConfig:
    """Validate a config document, applying CLI ``overrides`` (None values are ignored)."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}

    net = doc.get("network")
    if not isinstance(net, dict):
        raise ConfigError("network", "missing network object")
    gains = _vector(net.get("gains"), "network.gains", positive=True)
    K = len(gains)
    has_db, has_lin = "noise_db" in net, "noise_linear" in net
    if has_db == has_lin:
        raise ConfigError("network", "set exactly one of noise_db and noise_linear")
    if has_db:
        noise_db = _num(net["noise_db"], "network.noise_db")
        noise_linear = env.db_to_linear(noise_db)
    else:
        noise_db = None
        noise_linear = _num(net["noise_linear"], "network.noise_linear", positive=True)
    bandwidth = _num(net.get("bandwidth_hz"), "network.bandwidth_hz", positive=True)
    powers = _vector(net.get("initial_powers_w"), "network.initial_powers_w", nonneg=True)
    if len(powers) != K:
        raise ConfigError("network.initial_powers_w", f"expected {K} powers, got {len(powers)}")

    rounds = ov.get("rounds", doc.get("rounds", 3))
    if isinstance(rounds, bool) or not isinstance(rounds, int) or rounds < 1:
        raise ConfigError("rounds", f"expected a positive integer, got {rounds!r}")

    intent_text = ov.get("intent", doc.get("intent"))
    if intent_text is not None and not isinstance(intent_text, str):
        raise ConfigError("intent", "expected a string")
    goal = _goal(doc, K, intent_text, rounds)

    if "agents" in ov:
        raw_agents = {"kind": ov["agents"]}
    else:
        raw_agents = doc.get("agents", {"kind": "best_response"})
    if isinstance(raw_agents, list):
        if len(raw_agents) != K:
            raise ConfigError("agents", f"expected {K} agent specs, got {len(raw_agents)}")
        agents = [_agent_spec(a, f"agents[{i}]") for i, a in enumerate(raw_agents)]
    else:
        agents = [_agent_spec(raw_agents, "agents")] * K

    seed = ov.get("seed", doc.get("seed"))
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed", f"expected a non-negative integer, got {seed!r}")
    if seed is None and any(a["kind"] in STOCHASTIC_KINDS for a in agents):
        raise ConfigError("seed", "a seed is required when random agents are configured")

    llm = doc.get("llm", {})
    if not isinstance(llm, dict):
        raise ConfigError("llm", "expected an object")
    if any(a["kind"] == "llm" for a in agents):
        backend = llm.get("backend", "http")
        if backend not in ("http", "fixture", "stub"):
            raise ConfigError("llm.backend", f"unknown backend {backend!r}")
        if backend == "http" and not llm.get("endpoint"):
            raise ConfigError("llm.endpoint", "required for the http backend")
        if backend == "fixture" and not llm.get("fixture"):
            raise ConfigError("llm.fixture", "required for the fixture backend")
        if backend == "stub" and not isinstance(llm.get("replies"), list):
            raise ConfigError("llm.replies", "stub backend needs a list of replies")

    ceiling = _num(doc.get("power_ceiling_factor", 10.0), "power_ceiling_factor", positive=True)

    return RunConfig(
        gains=gains,
        noise_linear=noise_linear,
        noise_db=noise_db,
        bandwidth_hz=bandwidth,
        initial_powers_w=powers,
        goal=goal,
        intent_text=intent_text,
        agents=agents,
        stop_on_success=bool(ov.get("stop_on_success", doc.get("stop_on_success", False))),
        seed=seed,
        force=bool(ov.get("force", doc.get("force", False))),
        power_ceiling_factor=ceiling,
        out_dir=ov.get("out", doc.get("out")),
        llm=dict(llm),
        base_dir=base_dir or Path.cwd(),
    )


def load(path, overrides: Optional[dict] = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from exc
    return from_dict(doc, overrides, base_dir=path.parent)
