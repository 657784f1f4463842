import pytest

from intent_arena import env
from intent_arena.game import AbsoluteSaving, GoalSpec

REF_GAINS = (1.21, 2.01, 0.58, 0.13)
REF_POWERS = (2.0, 4.0, 5.0, 6.0)
REF_FLOORS_BPS = (3500.0, 15800.0, 4400.0, 1000.0)
REF_BANDWIDTH = 15000.0
REF_NOISE_DB = 1.0

# 40-digit mpmath evaluation of the joint minimum-power system, frozen
REF_P_STAR = (
    1.5029579461919180125,
    3.1393037534508334851,
    3.8630694565052857728,
    4.2303084383881447765,
)
REF_RHO = 0.83890268331658033812


@pytest.fixture
def reference_state():
    return env.NetworkState(REF_GAINS, env.db_to_linear(REF_NOISE_DB), REF_BANDWIDTH, REF_POWERS)


@pytest.fixture
def reference_goal():
    return GoalSpec(AbsoluteSaving("0.85"), REF_FLOORS_BPS, max_rounds=50)


REF_CONFIG = {
    "network": {
        "gains": list(REF_GAINS),
        "noise_db": REF_NOISE_DB,
        "bandwidth_hz": REF_BANDWIDTH,
        "initial_powers_w": list(REF_POWERS),
    },
    "intent": "reduce total power by 0.85 W",
    "rate_floors_kbps": [3.5, 15.8, 4.4, 1.0],
    "agents": {"kind": "best_response"},
    "rounds": 50,
    "stop_on_success": True,
    "seed": 0,
}
