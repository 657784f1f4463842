"""Scripted baseline strategies.

All of them are pure functions of the observation and the seed.
"""

from __future__ import annotations

import numpy as np

from .. import oracle
from .base import Decision, DecisionRequest

#: bit generator behind RandomAgent, echoed into run headers
PRNG_ALGORITHM = "PCG64"


class HoldAgent:
    """Repeat the previous round's own power."""

    kind = "hold"

    def decide(self, request: DecisionRequest) -> Decision:
        return Decision(request.observation.own_power_w, {"agent": self.kind})


class BestResponseAgent:
    """Play the single-user minimum power given the others' last powers, times ``margin``.

    A margin above 1 keeps deliberate excess rate.
    """

    kind = "best_response"

    def __init__(self, margin: float = 1.0):
        if not margin > 0:
            raise ValueError(f"margin must be > 0, got {margin}")
        self.margin = float(margin)

    def decide(self, request: DecisionRequest) -> Decision:
        obs = request.observation
        net = obs.network
        gamma = float(oracle.target_sinr([obs.own_floor_bps], net.bandwidth_hz)[0])
        p = oracle.single_user_min_power(net.gains, net.noise_linear, gamma, net.powers_w, obs.user)
        return Decision(p * self.margin, {"agent": self.kind, "margin": self.margin})


class RandomAgent:
    """Scale the previous own power by a uniform factor in ``[low, high]``.

    The generator is seeded from ``(seed, user, round)`` so the draw does not
    depend on call order or on how many times the agent was queried before.
    """

    kind = "random"

    def __init__(self, low: float = 0.5, high: float = 1.5, seed=None):
        if not 0 <= low <= high:
            raise ValueError(f"need 0 <= low <= high, got {low}, {high}")
        self.low, self.high = float(low), float(high)
        self.seed = seed

    def decide(self, request: DecisionRequest) -> Decision:
        obs = request.observation
        seed = request.seed if self.seed is None else self.seed
        rng = np.random.Generator(np.random.PCG64([seed, obs.user, obs.round]))
        factor = float(rng.uniform(self.low, self.high))
        return Decision(obs.own_power_w * factor, {"agent": self.kind, "factor": factor})
