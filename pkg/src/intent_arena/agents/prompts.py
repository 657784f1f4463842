"""Prompt templates for LLM-backed players.

The preamble is sent once per conversation (game description, rules, the
base station's goal and the user's own goal); each round adds one message
with the previous round's powers and rates. Bump ``TEMPLATE_VERSION``
whenever the wording changes, since traces record it.
"""

from __future__ import annotations

from dataclasses import dataclass

TEMPLATE_VERSION = "power-game/v1"

CORRECTIVE_MESSAGE = (
    "Your reply could not be read as a power. "
    "Reply with only a number: your transmit power in W for this round."
)


@dataclass(frozen=True)
class PromptBundle:
    system_preamble: str
    round_message: str
    version: str = TEMPLATE_VERSION


def _w(x: float) -> str:
    return f"{x:.2f}"


def _kbps(bps: float) -> str:
    return f"{bps / 1000.0:.2f}"


def _vec(values, fmt) -> str:
    return "[" + ", ".join(fmt(v) for v in values) + "]"


def build_preamble(obs) -> str:
    net = obs.network
    K = net.num_users
    u = obs.user + 1
    lines = []
    if K > 1:
        lines.append(
            f"You control the transmit power of user {u} of {K} in a wireless network. "
            f"All {K} users transmit in a shared spectrum of {net.bandwidth_hz / 1000.0:.2f} kHz "
            "and interfere with each other."
        )
    else:
        lines.append(
            f"You control the transmit power of the only user of a wireless link "
            f"with {net.bandwidth_hz / 1000.0:.2f} kHz of bandwidth."
        )
    lines.append(
        f"Environment: channel gains {_vec(net.gains, lambda g: f'{g:.4g}')}; "
        f"noise power {net.noise_linear:.4g} W; "
        f"initial transmit powers {_vec(_initial_powers(obs), _w)} W "
        f"(total {_w(obs.initial_total_w)} W)."
    )
    if K > 1:
        lines.append(
            "Your rate is b*log2(1 + SINR) with SINR = g_i*p_i / (n + sum of g_j*p_j over the other users)."
        )
    else:
        lines.append("Your rate is b*log2(1 + SNR) with SNR = g*p / n.")
    lines.append(
        "Game rules: the game is played in rounds. In every round each user chooses a new "
        "transmit power in W at the same time, knowing only the powers chosen in the previous round."
    )
    budget = obs.initial_total_w - obs.required_saving_w
    lines.append(
        f"Goal of the base station: reduce total network power by at least "
        f"{_w(obs.required_saving_w)} W, to at most {_w(budget)} W in total."
    )
    lines.append(
        f"Your individual goal: keep your transmission rate at or above {_kbps(obs.own_floor_bps)} kbps "
        "while using as little power as possible."
    )
    lines.append('Answer each round with your chosen power in the form "power: <number> W".')
    return "\n".join(lines)


def _initial_powers(obs):
    return obs.initial_powers_w or obs.powers_w


def build_round_message(obs) -> str:
    K = obs.num_users
    parts = [
        f"Round {obs.round}.",
        f"previous round powers: {_vec(obs.powers_w, _w)} W (total {_w(sum(obs.powers_w))} W).",
        f"previous round rates: {_vec(obs.rates_bps, _kbps)} kbps.",
        f"Your rate was {_kbps(obs.own_rate_bps)} kbps against your floor of "
        f"{_kbps(obs.own_floor_bps)} kbps.",
    ]
    if K > 1:
        parts.append(
            "The other users' powers interfere with your link, and they choose "
            "their new powers at the same time as you."
        )
    parts.append(f"Choose your transmit power for round {obs.round}.")
    return " ".join(parts)


def build_prompts(obs, role_config=None) -> PromptBundle:
    """Render the preamble and the round message for one observation.

    ``role_config`` is accepted for template variants; v1 has no options.
    """
    return PromptBundle(build_preamble(obs), build_round_message(obs))
