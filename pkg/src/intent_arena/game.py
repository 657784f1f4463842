"""Repeated simultaneous-move power allocation game.

Each round every agent receives an :class:`Observation` built from the
previous round only, returns a power, and the engine applies all K choices
at once. Rates, margins and the goal predicate are then recorded in a
:class:`RoundRecord`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import env, oracle
from .agents.base import Agent, DecisionFailure, DecisionRequest
from .env import InvalidArgument, NetworkState

#: relative slack on rate floors and the saving threshold, absorbs float rounding
DEFAULT_GOAL_RTOL = 1e-9


def _decimal(x) -> Decimal:
    if isinstance(x, Decimal):
        return x
    if isinstance(x, float):
        return Decimal(repr(x))
    return Decimal(x)


@dataclass(frozen=True)
class AbsoluteSaving:
    """Save at least ``watts`` relative to the initial total power."""

    watts: Decimal

    def __post_init__(self):
        w = _decimal(self.watts)
        if not w.is_finite() or w < 0:
            raise InvalidArgument(f"absolute saving must be >= 0 W, got {self.watts}")
        object.__setattr__(self, "watts", w)

    def resolve(self, initial_total: float) -> float:
        return float(self.watts)


@dataclass(frozen=True)
class RelativeSaving:
    """Save at least ``fraction`` of the initial total power."""

    fraction: Decimal

    def __post_init__(self):
        f = _decimal(self.fraction)
        if not f.is_finite() or not 0 <= f <= 1:
            raise InvalidArgument(f"relative saving must lie in [0, 1], got {self.fraction}")
        object.__setattr__(self, "fraction", f)

    def resolve(self, initial_total: float) -> float:
        # decimal product so that 5% of 17 W resolves to the double nearest 0.85
        return float(self.fraction * Decimal(repr(float(initial_total))))


PowerSaving = Union[AbsoluteSaving, RelativeSaving]


@dataclass(frozen=True)
class GoalSpec:
    power_saving: PowerSaving
    rate_floors_bps: oracle.RateTargets
    max_rounds: int = 3

    def __post_init__(self):
        if not isinstance(self.rate_floors_bps, oracle.RateTargets):
            object.__setattr__(self, "rate_floors_bps", oracle.RateTargets(tuple(self.rate_floors_bps)))
        if isinstance(self.max_rounds, bool) or int(self.max_rounds) != self.max_rounds or self.max_rounds < 1:
            raise InvalidArgument(f"max_rounds must be a positive integer, got {self.max_rounds!r}")

    @property
    def floors(self) -> tuple:
        return self.rate_floors_bps.targets_bps


@dataclass(frozen=True)
class Observation:
    """What one user knows when choosing its power for ``round``."""

    round: int
    user: int
    network: NetworkState  # carries the previous round's powers
    rates_bps: tuple
    goal: GoalSpec
    initial_total_w: float
    required_saving_w: float
    initial_powers_w: tuple = ()

    @property
    def powers_w(self) -> tuple:
        return tuple(self.network.powers_w.tolist())

    @property
    def own_power_w(self) -> float:
        return float(self.network.powers_w[self.user])

    @property
    def own_rate_bps(self) -> float:
        return self.rates_bps[self.user]

    @property
    def own_floor_bps(self) -> float:
        return self.goal.floors[self.user]

    @property
    def num_users(self) -> int:
        return self.network.num_users


@dataclass(frozen=True)
class GoalEvaluation:
    satisfied: bool
    violations: tuple
    total_saving_w: float


@dataclass(frozen=True)
class RoundRecord:
    round: int
    powers_w: tuple
    rates_bps: tuple
    margins_bps: tuple
    total_power_w: float
    total_saving_w: float
    goal_satisfied: bool
    violations: tuple
    min_given_others_w: tuple
    requested_powers_w: tuple = ()
    clamped: tuple = ()
    decisions: tuple = ()

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "powers_w": list(self.powers_w),
            "requested_powers_w": list(self.requested_powers_w),
            "clamped": list(self.clamped),
            "rates_bps": list(self.rates_bps),
            "margins_bps": list(self.margins_bps),
            "total_power_w": self.total_power_w,
            "total_saving_w": self.total_saving_w,
            "goal_satisfied": self.goal_satisfied,
            "violations": list(self.violations),
            "min_given_others_w": list(self.min_given_others_w),
            "decisions": [dict(d) for d in self.decisions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        return cls(
            round=int(d["round"]),
            powers_w=tuple(float(x) for x in d["powers_w"]),
            rates_bps=tuple(float(x) for x in d["rates_bps"]),
            margins_bps=tuple(float(x) for x in d["margins_bps"]),
            total_power_w=float(d["total_power_w"]),
            total_saving_w=float(d["total_saving_w"]),
            goal_satisfied=bool(d["goal_satisfied"]),
            violations=tuple(bool(x) for x in d["violations"]),
            min_given_others_w=tuple(float(x) for x in d["min_given_others_w"]),
            requested_powers_w=tuple(float(x) for x in d.get("requested_powers_w", ())),
            clamped=tuple(bool(x) for x in d.get("clamped", ())),
            decisions=tuple(d.get("decisions", ())),
        )


# terminal statuses

@dataclass(frozen=True)
class GoalAchieved:
    round: int
    exit_code = 0
    name = "goal_achieved"


@dataclass(frozen=True)
class MaxRoundsExhausted:
    exit_code = 2
    name = "max_rounds_exhausted"


@dataclass(frozen=True)
class Infeasible:
    spectral_radius: float
    reason: str
    exit_code = 3
    name = "infeasible"


@dataclass(frozen=True)
class AgentFailure:
    user: int
    round: int
    cause: str
    exit_code = 4
    name = "agent_failure"


Status = Union[GoalAchieved, MaxRoundsExhausted, Infeasible, AgentFailure]


def status_to_dict(status: Status) -> dict:
    out = {"status": status.name}
    out.update({k: v for k, v in status.__dict__.items()})
    return out


@dataclass(frozen=True)
class GameOutcome:
    records: tuple
    status: Status
    config: dict = field(default_factory=dict)

    @property
    def final_powers_w(self) -> Optional[tuple]:
        return self.records[-1].powers_w if self.records else None


def min_given_others(state: NetworkState, floors, user: int) -> float:
    """Own power that exactly meets ``user``'s floor, others held at their current powers."""
    env._check_user(state, user)
    floors = floors.targets_bps if isinstance(floors, oracle.RateTargets) else tuple(floors)
    gamma = float(oracle.target_sinr([floors[user]], state.bandwidth_hz)[0])
    return oracle.single_user_min_power(state.gains, state.noise_linear, gamma, state.powers_w, user)


def evaluate_goal(state: NetworkState, goal: GoalSpec, initial_total: float,
                  rtol: float = DEFAULT_GOAL_RTOL) -> GoalEvaluation:
    """Check the network saving target and every user's rate floor.

    A floor counts as met when ``rate >= floor * (1 - rtol)``; the saving
    target when ``saving >= required - rtol * initial_total``.
    """
    floors = goal.floors
    if len(floors) != state.num_users:
        raise InvalidArgument(f"goal has {len(floors)} floors for {state.num_users} users")
    saving = initial_total - env.total_power(state)
    required = goal.power_saving.resolve(initial_total)
    r = env.rates(state)
    violations = tuple(bool(r[i] < floors[i] * (1.0 - rtol)) for i in range(state.num_users))
    met_saving = saving >= required - rtol * initial_total
    return GoalEvaluation(met_saving and not any(violations), violations, saving)


def make_record(state: NetworkState, goal: GoalSpec, initial_total: float, round_index: int,
                requested=(), clamped=(), decisions=(), rtol: float = DEFAULT_GOAL_RTOL) -> RoundRecord:
    ev = evaluate_goal(state, goal, initial_total, rtol=rtol)
    r = env.rates(state)
    floors = goal.floors
    return RoundRecord(
        round=round_index,
        powers_w=tuple(state.powers_w.tolist()),
        rates_bps=tuple(r.tolist()),
        margins_bps=tuple(float(r[i] - floors[i]) for i in range(state.num_users)),
        total_power_w=env.total_power(state),
        total_saving_w=ev.total_saving_w,
        goal_satisfied=ev.satisfied,
        violations=ev.violations,
        min_given_others_w=tuple(min_given_others(state, floors, u) for u in range(state.num_users)),
        requested_powers_w=tuple(requested),
        clamped=tuple(clamped),
        decisions=tuple(decisions),
    )


def power_ceilings(initial_powers, factor: float) -> np.ndarray:
    """Per-user cap: ``factor`` times the user's initial power.

    Users starting at zero get ``factor`` times the largest initial power
    (1 W if every user starts silent) so they can still enter the game.
    """
    p0 = np.asarray(initial_powers, dtype=float)
    fallback = factor * (p0.max() if p0.size and p0.max() > 0 else 1.0)
    return np.where(p0 > 0, factor * p0, fallback)


def precheck(network: NetworkState, goal: GoalSpec) -> tuple[Optional[Infeasible], oracle.OracleSolution]:
    """Oracle verdict on the intent: floors jointly achievable and saving reachable."""
    gammas = oracle.target_sinr(goal.rate_floors_bps, network.bandwidth_hz)
    sol = oracle.min_power_direct(network.gains, network.noise_linear, gammas)
    if not sol.feasible:
        return Infeasible(sol.spectral_radius, "rate floors are jointly infeasible"), sol
    initial = env.total_power(network)
    budget = initial - goal.power_saving.resolve(initial)
    if sol.total_power_w > budget + DEFAULT_GOAL_RTOL * initial:
        return Infeasible(
            sol.spectral_radius,
            f"minimum power {sol.total_power_w:.6f} W exceeds the budget {budget:.6f} W",
        ), sol
    return None, sol


def run_game(network: NetworkState, goal: GoalSpec, agents: Sequence[Agent], seed: int = 0, *,
             stop_on_success: bool = False, power_ceiling_factor: float = 10.0,
             force: bool = False, retry_budget: int = 2, timeout_s: float = 60.0,
             parallel: bool = False, rtol: float = DEFAULT_GOAL_RTOL,
             on_round: Optional[Callable[[RoundRecord], None]] = None) -> GameOutcome:
    """Play up to ``goal.max_rounds`` simultaneous rounds.

    By default every round is played (fixed horizon) and the status reports
    the first round that satisfied the goal; ``stop_on_success`` ends the
    game there instead.
    """
    K = network.num_users
    if len(agents) != K:
        raise InvalidArgument(f"need exactly {K} agents, got {len(agents)}")
    if len(goal.floors) != K:
        raise InvalidArgument(f"goal has {len(goal.floors)} floors for {K} users")

    initial_total = env.total_power(network)
    required = goal.power_saving.resolve(initial_total)
    ceilings = power_ceilings(network.powers_w, power_ceiling_factor)
    config = {
        "num_users": K,
        "max_rounds": goal.max_rounds,
        "stop_on_success": stop_on_success,
        "power_ceiling_factor": power_ceiling_factor,
        "seed": seed,
        "initial_total_w": initial_total,
        "required_saving_w": required,
    }

    verdict, _ = precheck(network, goal)
    if verdict is not None and not force:
        return GameOutcome((), verdict, config)

    state = network
    initial_powers = tuple(network.powers_w.tolist())
    prev_rates = tuple(env.rates(state).tolist())
    records: list[RoundRecord] = []
    first_success: Optional[int] = None

    def ask(user: int, obs: Observation):
        req = DecisionRequest(obs, seed=seed, retry_budget=retry_budget, timeout_s=timeout_s)
        return agents[user].decide(req)

    pool = ThreadPoolExecutor(max_workers=K) if parallel and K > 1 else None
    try:
        for t in range(1, goal.max_rounds + 1):
            observations = [
                Observation(t, u, state, prev_rates, goal, initial_total, required, initial_powers)
                for u in range(K)
            ]
            try:
                if pool is not None:
                    futures = [pool.submit(ask, u, observations[u]) for u in range(K)]
                    decisions = []
                    for u, fut in enumerate(futures):
                        try:
                            decisions.append(fut.result())
                        except DecisionFailure as exc:
                            exc.user = u
                            raise
                else:
                    decisions = []
                    for u in range(K):
                        try:
                            decisions.append(ask(u, observations[u]))
                        except DecisionFailure as exc:
                            exc.user = u
                            raise
            except DecisionFailure as exc:
                return GameOutcome(tuple(records), AgentFailure(exc.user, t, str(exc)), config)

            requested = [d.power_w for d in decisions]
            for u, p in enumerate(requested):
                if not math.isfinite(p):
                    return GameOutcome(tuple(records),
                                       AgentFailure(u, t, f"non-finite power {p!r}"), config)
            chosen = np.clip(np.array(requested, dtype=float), 0.0, ceilings)
            clamped = tuple(bool(chosen[u] != requested[u]) for u in range(K))
            state = state.with_powers(chosen)
            rec = make_record(state, goal, initial_total, t, requested=requested, clamped=clamped,
                              decisions=[d.info for d in decisions], rtol=rtol)
            records.append(rec)
            if on_round is not None:
                on_round(rec)
            prev_rates = rec.rates_bps
            if rec.goal_satisfied and first_success is None:
                first_success = t
                if stop_on_success:
                    break
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    status = GoalAchieved(first_success) if first_success is not None else MaxRoundsExhausted()
    return GameOutcome(tuple(records), status, config)
