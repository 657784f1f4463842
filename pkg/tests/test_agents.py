import json
from pathlib import Path

import httpx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import REF_FLOORS_BPS, REF_P_STAR
from intent_arena import env, game
from intent_arena.agents import (
    BestResponseAgent,
    ChatExchange,
    DecisionFailure,
    DecisionRequest,
    FixtureTransport,
    HoldAgent,
    HttpTransport,
    LLMAgent,
    PowerParseError,
    ProtocolError,
    RandomAgent,
    RecordingTransport,
    StubTransport,
    TEMPLATE_VERSION,
    TransportError,
    build_prompts,
    chat_complete,
    parse_power_reply,
    request_hash,
)
from intent_arena.game import AbsoluteSaving, GoalSpec, Observation

GOLDEN = Path(__file__).parent / "golden"
no_sleep = lambda s: None


def observe(state, goal, user, round_=1, initial=(2.0, 4.0, 5.0, 6.0)):
    return Observation(round_, user, state, tuple(env.rates(state).tolist()), goal,
                       sum(initial), goal.power_saving.resolve(sum(initial)), initial)


# scripted agents

def test_hold_agent(reference_state, reference_goal):
    d = HoldAgent().decide(DecisionRequest(observe(reference_state, reference_goal, 1)))
    assert d.power_w == 4.0


def test_best_response_is_single_user_inversion(reference_state, reference_goal):
    for u in range(4):
        d = BestResponseAgent(1.0).decide(DecisionRequest(observe(reference_state, reference_goal, u)))
        assert d.power_w == game.min_given_others(reference_state, REF_FLOORS_BPS, u)
    d = BestResponseAgent(1.2).decide(DecisionRequest(observe(reference_state, reference_goal, 0)))
    assert d.power_w == pytest.approx(1.2 * game.min_given_others(reference_state, REF_FLOORS_BPS, 0))


def test_best_response_fixed_point_at_p_star(reference_state, reference_goal):
    at = reference_state.with_powers(REF_P_STAR)
    for u in range(4):
        d = BestResponseAgent().decide(DecisionRequest(observe(at, reference_goal, u)))
        assert d.power_w == pytest.approx(REF_P_STAR[u], rel=1e-9)


def test_random_agent_reproducible(reference_state, reference_goal):
    obs = observe(reference_state, reference_goal, 0)
    a = RandomAgent().decide(DecisionRequest(obs, seed=7)).power_w
    b = RandomAgent().decide(DecisionRequest(obs, seed=7)).power_w
    # same draw by hand: PCG64 seeded from (seed, user, round), uniform(0.5, 1.5) times own power
    rng = np.random.Generator(np.random.PCG64([7, 0, 1]))
    assert a == b == 2.0 * rng.uniform(0.5, 1.5)
    assert RandomAgent().decide(DecisionRequest(obs, seed=8)).power_w != a


def test_agents_never_negative(reference_state, reference_goal):
    for agent in (HoldAgent(), BestResponseAgent(), RandomAgent()):
        for u in range(4):
            p = agent.decide(DecisionRequest(observe(reference_state, reference_goal, u), seed=1)).power_w
            assert np.isfinite(p) and p >= 0


# reply parsing

@pytest.mark.parametrize("text, expected", [
    ("I choose power: 1.8 W to reduce interference", 1.8),
    ("power: 0", 0.0),
    ("My rate was 15.8 kbps so I will transmit at 3.5", 3.5),
    ("```\npower: 2.25\n```", 2.25),
    ("Power = 1e-1 W", 0.1),
    ("I'll go with 2 watts this time, since round 3 looked fine", 2.0),
    ("Set it to 1.75W.", 1.75),
    ("transmit at .5", 0.5),
    ("final answer: 4.", 4.0),
])
def test_parse_power_reply(text, expected):
    assert parse_power_reply(text) == expected


@pytest.mark.parametrize("text", [
    "", "no idea", "power: -1", "power: 1e999", "user two", "٣ W",
])
def test_parse_power_reply_failures(text):
    with pytest.raises(PowerParseError):
        parse_power_reply(text)


@settings(max_examples=300, deadline=None)
@given(st.text())
def test_parser_is_total(text):
    try:
        v = parse_power_reply(text)
    except PowerParseError:
        return
    assert np.isfinite(v) and v >= 0


# prompts

@pytest.fixture
def user2_obs(reference_state, reference_goal):
    return observe(reference_state, reference_goal, 1)


def test_round_message_names_previous_powers(user2_obs):
    b = build_prompts(user2_obs)
    assert "previous round powers: [2.00, 4.00, 5.00, 6.00] W" in b.round_message
    assert "15.80 kbps" in b.round_message
    assert b.version == TEMPLATE_VERSION


def test_preamble_states_goal(user2_obs):
    assert "reduce total network power by at least 0.85 W" in build_prompts(user2_obs).system_preamble


def test_relative_goal_rendered_in_watts(reference_state):
    goal = GoalSpec(game.RelativeSaving("0.05"), REF_FLOORS_BPS, 3)
    assert "reduce total network power by at least 0.85 W" in build_prompts(observe(reference_state, goal, 0)).system_preamble


def test_prompt_golden_files(user2_obs):
    b = build_prompts(user2_obs)
    assert b.system_preamble + "\n" == (GOLDEN / "reference_user2_round1.preamble.txt").read_text()
    assert b.round_message + "\n" == (GOLDEN / "reference_user2_round1.round.txt").read_text()


def test_single_user_prompt_omits_interference():
    s = env.NetworkState([2.0], 4.0, 15000, [3.0])
    goal = GoalSpec(AbsoluteSaving("0.5"), [15000], 3)
    b = build_prompts(observe(s, goal, 0, initial=(3.0,)))
    assert "interfere" not in b.round_message
    assert b.system_preamble + "\n" == (GOLDEN / "single_user_round1.preamble.txt").read_text()
    assert b.round_message + "\n" == (GOLDEN / "single_user_round1.round.txt").read_text()


def test_prompts_are_pure(user2_obs):
    assert build_prompts(user2_obs) == build_prompts(user2_obs)


# chat transport

def test_stub_passthrough():
    ex = ChatExchange()
    ex.add("system", "s")
    ex.add("user", "u")
    assert chat_complete(ex, StubTransport(["power: 1.50"])) == "power: 1.50"
    assert ex.messages[-1] == {"role": "assistant", "content": "power: 1.50"}
    assert ex.retries == 0


def test_retry_then_succeed():
    ex = ChatExchange()
    ex.add("user", "u")
    delays = []
    stub = StubTransport([TransportError("reset"), TransportError("timeout"), "power: 2"])
    assert chat_complete(ex, stub, sleep=delays.append) == "power: 2"
    assert ex.retries == 2
    assert delays == [1.0, 2.0]


def test_retries_exhausted():
    ex = ChatExchange()
    ex.add("user", "u")
    stub = StubTransport([TransportError("down")] * 3)
    with pytest.raises(TransportError):
        chat_complete(ex, stub, sleep=no_sleep)
    assert stub.calls == 3


def test_protocol_error_not_retried():
    ex = ChatExchange()
    ex.add("user", "u")
    stub = StubTransport([ProtocolError("bad", 400), "power: 1"])
    with pytest.raises(ProtocolError):
        chat_complete(ex, stub, sleep=no_sleep)
    assert stub.calls == 1


def test_exchange_role_order():
    ex = ChatExchange()
    ex.add("system", "s")
    with pytest.raises(ValueError):
        ex.add("system", "again")
    ex.add("user", "u")
    with pytest.raises(ValueError):
        ex.add("user", "u2")
    with pytest.raises(ValueError):
        ex.add("tool", "x")


def test_http_wire_format(monkeypatch):
    monkeypatch.setenv("INTENT_ARENA_API_KEY", "sk-test")
    seen = {}

    def handler(request: httpx.Request):
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": "power: 1.2 W"}}]})

    transport = HttpTransport("https://llm.example/v1/chat/completions",
                              client=httpx.Client(transport=httpx.MockTransport(handler)))
    ex = ChatExchange(model="gpt-4", temperature=0.0, max_tokens=64)
    ex.add("system", "rules")
    ex.add("user", "round 1")
    assert chat_complete(ex, transport) == "power: 1.2 W"
    assert seen["auth"] == "Bearer sk-test"
    assert seen["body"] == {
        "model": "gpt-4", "temperature": 0.0, "max_tokens": 64,
        "messages": [{"role": "system", "content": "rules"}, {"role": "user", "content": "round 1"}],
    }


def test_http_non_2xx_is_protocol_error():
    client = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(429, text="slow down")))
    ex = ChatExchange()
    ex.add("user", "u")
    with pytest.raises(ProtocolError) as info:
        chat_complete(ex, HttpTransport("https://x", api_key="", client=client))
    assert info.value.status == 429 and "slow down" in info.value.body


def test_http_connect_error_is_retried():
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            raise httpx.ConnectError("refused", request=request)
        return httpx.Response(200, json={"choices": [{"message": {"content": "power: 3"}}]})

    ex = ChatExchange()
    ex.add("user", "u")
    client = httpx.Client(transport=httpx.MockTransport(handler))
    assert chat_complete(ex, HttpTransport("https://x", api_key="", client=client), sleep=no_sleep) == "power: 3"
    assert ex.retries == 2


def test_fixture_record_and_replay(tmp_path):
    path = tmp_path / "fixture.jsonl"
    replies = ["power: 1.9 W", "hmm, 1.7 W", "power: 1.5"]
    rec = RecordingTransport(StubTransport(replies), path)
    ex1 = ChatExchange()
    ex1.add("system", "rules")
    got1 = []
    for i in range(3):
        ex1.add("user", f"round {i + 1}")
        got1.append(chat_complete(ex1, rec))
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert [line["reply_text"] for line in lines] == replies

    replay = FixtureTransport(path)
    ex2 = ChatExchange()
    ex2.add("system", "rules")
    got2 = []
    for i in range(3):
        ex2.add("user", f"round {i + 1}")
        got2.append(chat_complete(ex2, replay))
    assert got2 == got1
    assert [m["content"].encode() for m in ex2.messages] == [m["content"].encode() for m in ex1.messages]


def test_fixture_miss(tmp_path):
    path = tmp_path / "f.jsonl"
    path.write_text(json.dumps({"request_hash": "0" * 64, "reply_text": "x"}) + "\n")
    ex = ChatExchange()
    ex.add("user", "u")
    with pytest.raises(ProtocolError):
        chat_complete(ex, FixtureTransport(path))


def test_request_hash_is_canonical():
    a = {"model": "m", "messages": [], "temperature": 0.0, "max_tokens": 1}
    b = dict(reversed(list(a.items())))
    assert request_hash(a) == request_hash(b)


# LLM agent

def test_llm_agent_decides(user2_obs):
    stub = StubTransport(["Considering interference, power: 3.2 W"])
    d = LLMAgent(stub, sleep=no_sleep).decide(DecisionRequest(user2_obs))
    assert d.power_w == 3.2
    assert d.info["retries"] == 0 and d.info["template"] == TEMPLATE_VERSION
    sent = stub.requests[0]["messages"]
    assert [m["role"] for m in sent] == ["system", "user"]


def test_llm_agent_transport_retries_recorded(user2_obs):
    stub = StubTransport([TransportError("a"), TransportError("b"), "power: 1.1"])
    d = LLMAgent(stub, sleep=no_sleep).decide(DecisionRequest(user2_obs))
    assert d.power_w == 1.1
    assert d.info["retries"] == 2


def test_llm_agent_corrective_retry(user2_obs):
    stub = StubTransport(["I am not sure yet.", "2.5"])
    d = LLMAgent(stub, sleep=no_sleep).decide(DecisionRequest(user2_obs, retry_budget=1))
    assert d.power_w == 2.5
    assert d.info["parse_retries"] == 1
    last = stub.requests[1]["messages"]
    assert last[-1]["role"] == "user" and "only a number" in last[-1]["content"]


def test_llm_agent_gives_up(user2_obs):
    stub = StubTransport(["no", "still no", "nope"])
    with pytest.raises(DecisionFailure) as info:
        LLMAgent(stub, sleep=no_sleep).decide(DecisionRequest(user2_obs, retry_budget=2))
    assert [m["content"] for m in info.value.transcript if m["role"] == "assistant"] == ["no", "still no", "nope"]


def test_llm_agent_transport_failure(user2_obs):
    stub = StubTransport([TransportError("down")] * 3)
    with pytest.raises(DecisionFailure):
        LLMAgent(stub, sleep=no_sleep).decide(DecisionRequest(user2_obs))


def test_llm_agent_keeps_history(reference_state, reference_goal):
    stub = StubTransport(["power: 1.9"], cycle=True)
    agent = LLMAgent(stub, sleep=no_sleep)
    agents = [agent, HoldAgent(), HoldAgent(), HoldAgent()]
    game.run_game(reference_state, GoalSpec(reference_goal.power_saving, REF_FLOORS_BPS, 3), agents)
    assert [len(r["messages"]) for r in stub.requests] == [2, 4, 6]


def test_llm_agent_stateless(reference_state, reference_goal):
    stub = StubTransport(["power: 1.9"], cycle=True)
    agents = [LLMAgent(stub, stateless=True, sleep=no_sleep), HoldAgent(), HoldAgent(), HoldAgent()]
    game.run_game(reference_state, GoalSpec(reference_goal.power_saving, REF_FLOORS_BPS, 3), agents)
    assert [len(r["messages"]) for r in stub.requests] == [2, 2, 2]
    assert "Round 3." in stub.requests[2]["messages"][1]["content"]


def test_llm_prompts_never_show_current_round(reference_state, reference_goal):
    stubs = [StubTransport([f"power: {1 + u}.{r}" for r in range(1, 4)]) for u in range(4)]
    agents = [LLMAgent(s, sleep=no_sleep) for s in stubs]
    out = game.run_game(reference_state, GoalSpec(reference_goal.power_saving, REF_FLOORS_BPS, 3), agents)
    for t in range(1, 4):
        current = out.records[t - 1].powers_w
        shown = "[" + ", ".join(f"{p:.2f}" for p in current) + "]"
        for s in stubs:
            assert shown not in s.requests[t - 1]["messages"][-1]["content"]
