"""Radio environment: SINR, Shannon rate and total power on a shared channel.

Every user transmits over the same band, so each link sees all other
users as Gaussian interference:

    SINR_i = g_i * p_i / (n + sum_{j != i} g_j * p_j)
    r_i    = b * log2(1 + SINR_i)

Rates are in bit/s throughout; conversion to kbps happens at the I/O edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

LN2 = math.log(2.0)


class InvalidArgument(ValueError):
    """Raised for out-of-domain inputs (non-finite values, bad indices)."""


def db_to_linear(x_db: float) -> float:
    """Convert a decibel value to a linear power ratio."""
    x = float(x_db)
    if not math.isfinite(x):
        raise InvalidArgument(f"decibel value must be finite, got {x_db!r}")
    return 10.0 ** (x / 10.0)


def _frozen(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Channel gains, noise, bandwidth and the current power vector."""

    gains: np.ndarray
    noise_linear: float
    bandwidth_hz: float
    powers_w: np.ndarray

    def __post_init__(self):
        gains = _frozen(self.gains, "gains")
        powers = _frozen(self.powers_w, "powers_w")
        if gains.size < 1:
            raise InvalidArgument("need at least one user")
        if gains.shape != powers.shape:
            raise InvalidArgument(
                f"gains and powers_w differ in length ({gains.size} vs {powers.size})"
            )
        if np.any(gains <= 0):
            raise InvalidArgument("all gains must be > 0")
        if np.any(powers < 0):
            raise InvalidArgument("all powers must be >= 0")
        noise = float(self.noise_linear)
        bw = float(self.bandwidth_hz)
        if not (math.isfinite(noise) and noise > 0):
            raise InvalidArgument(f"noise_linear must be > 0, got {self.noise_linear!r}")
        if not (math.isfinite(bw) and bw > 0):
            raise InvalidArgument(f"bandwidth_hz must be > 0, got {self.bandwidth_hz!r}")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "powers_w", powers)
        object.__setattr__(self, "noise_linear", noise)
        object.__setattr__(self, "bandwidth_hz", bw)

    @property
    def num_users(self) -> int:
        return int(self.gains.size)

    def with_powers(self, powers_w: Sequence[float]) -> "NetworkState":
        return NetworkState(self.gains, self.noise_linear, self.bandwidth_hz, powers_w)

    def __eq__(self, other):
        if not isinstance(other, NetworkState):
            return NotImplemented
        return (
            np.array_equal(self.gains, other.gains)
            and np.array_equal(self.powers_w, other.powers_w)
            and self.noise_linear == other.noise_linear
            and self.bandwidth_hz == other.bandwidth_hz
        )

    __hash__ = None


def _check_user(state: NetworkState, user: int) -> int:
    if isinstance(user, bool) or not isinstance(user, (int, np.integer)):
        raise InvalidArgument(f"user index must be an integer, got {user!r}")
    if not 0 <= user < state.num_users:
        raise InvalidArgument(f"user index {user} out of range for K={state.num_users}")
    return int(user)


def interference(state: NetworkState, user: int) -> float:
    """Received power from every other user at ``user``'s receiver (W)."""
    u = _check_user(state, user)
    rx = state.gains * state.powers_w
    # fsum keeps the result independent of summation order
    return math.fsum(float(rx[j]) for j in range(state.num_users) if j != u)


def sinr(state: NetworkState, user: int) -> float:
    u = _check_user(state, user)
    own = float(state.gains[u] * state.powers_w[u])
    if own == 0.0:
        return 0.0
    return own / (state.noise_linear + interference(state, u))


def rate_from_sinr(sinr_value: float, bandwidth_hz: float) -> float:
    """Shannon rate in bit/s; log1p keeps tiny SINRs strictly positive."""
    return bandwidth_hz * math.log1p(sinr_value) / LN2


def rate(state: NetworkState, user: int) -> float:
    """Shannon rate of ``user`` in bit/s."""
    return rate_from_sinr(sinr(state, user), state.bandwidth_hz)


def sinrs(state: NetworkState) -> np.ndarray:
    return np.array([sinr(state, u) for u in range(state.num_users)])


def rates(state: NetworkState) -> np.ndarray:
    return np.array([rate(state, u) for u in range(state.num_users)])


def total_power(state_or_powers) -> float:
    """Sum of transmit powers in W. Accepts a NetworkState or a power vector."""
    powers = state_or_powers.powers_w if isinstance(state_or_powers, NetworkState) else state_or_powers
    return math.fsum(float(p) for p in np.asarray(powers, dtype=float).reshape(-1))
