import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intent_arena import env
from intent_arena.env import InvalidArgument, NetworkState


def test_db_to_linear_anchors():
    assert env.db_to_linear(0) == 1.0
    assert env.db_to_linear(10) == pytest.approx(10.0, rel=1e-15)
    # 10**0.1 evaluated to 40 digits with mpmath
    assert env.db_to_linear(1) == pytest.approx(1.258925411794167210423954106395800606094, rel=1e-15)


@pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
def test_db_to_linear_rejects_non_finite(bad):
    with pytest.raises(InvalidArgument):
        env.db_to_linear(bad)


def test_single_user_has_no_interference():
    s = NetworkState([1.0], 1.0, 15000, [2.0])
    assert env.sinr(s, 0) == 2.0


def test_zero_power_gives_zero_sinr_and_rate(reference_state):
    s = reference_state.with_powers([0.0, 4.0, 5.0, 6.0])
    assert env.sinr(s, 0) == 0.0
    assert env.rate(s, 0) == 0.0


def test_unit_sinr_gives_rate_equal_to_bandwidth():
    # g p = 1, n = 1, no interferers
    s = NetworkState([1.0], 1.0, 15000, [1.0])
    assert env.sinr(s, 0) == 1.0
    assert env.rate(s, 0) == 15000.0


def test_reference_instance_sinr_and_rates(reference_state):
    # 40-digit mpmath evaluation of g_i p_i / (n + sum_{j!=i} g_j p_j) and b log2(1 + SINR)
    expected_sinr = [0.18645611429440109199, 1.0925508209546835373,
                     0.23201994607180533775, 0.053355494882730325155]
    expected_rate = [3699.8810672602042459, 15978.939920479816301,
                     4515.3841960028341035, 1124.8861629868441916]
    np.testing.assert_allclose(env.sinrs(reference_state), expected_sinr, rtol=1e-13)
    np.testing.assert_allclose(env.rates(reference_state), expected_rate, rtol=1e-13)
    assert env.sinr(reference_state, 1) == env.sinrs(reference_state)[1]


def test_total_power():
    s = NetworkState([1, 1, 1, 1], 1.0, 1.0, [2, 4, 5, 6])
    assert env.total_power(s) == 17.0
    assert env.total_power([0, 0, 0, 0]) == 0.0
    assert env.total_power([0.85]) == 0.85


@pytest.mark.parametrize("kwargs", [
    dict(gains=[1.0, 0.0], noise_linear=1.0, bandwidth_hz=1.0, powers_w=[1, 1]),
    dict(gains=[1.0], noise_linear=0.0, bandwidth_hz=1.0, powers_w=[1]),
    dict(gains=[1.0], noise_linear=1.0, bandwidth_hz=-1.0, powers_w=[1]),
    dict(gains=[1.0], noise_linear=1.0, bandwidth_hz=1.0, powers_w=[-1]),
    dict(gains=[1.0, 2.0], noise_linear=1.0, bandwidth_hz=1.0, powers_w=[1]),
    dict(gains=[], noise_linear=1.0, bandwidth_hz=1.0, powers_w=[]),
])
def test_state_invariants(kwargs):
    with pytest.raises(InvalidArgument):
        NetworkState(**kwargs)


def test_user_index_out_of_range(reference_state):
    with pytest.raises(InvalidArgument):
        env.sinr(reference_state, 4)
    with pytest.raises(InvalidArgument):
        env.rate(reference_state, -1)


def test_state_is_immutable(reference_state):
    with pytest.raises(ValueError):
        reference_state.powers_w[0] = 1.0


states = st.integers(1, 6).flatmap(lambda k: st.tuples(
    st.lists(st.floats(0.01, 10), min_size=k, max_size=k),
    st.floats(0.01, 10),
    st.floats(1e3, 1e6),
    # subnormal powers underflow g*p to zero, so keep them out
    st.lists(st.one_of(st.just(0.0), st.floats(1e-6, 10)), min_size=k, max_size=k),
))


@settings(max_examples=100, deadline=None)
@given(states, st.floats(0.001, 1000))
def test_scale_covariance(args, c):
    gains, noise, bw, powers = args
    a = NetworkState(gains, noise, bw, powers)
    b = NetworkState(gains, noise * c, bw, [p * c for p in powers])
    np.testing.assert_allclose(env.sinrs(b), env.sinrs(a), rtol=1e-12, atol=0)
    np.testing.assert_allclose(env.rates(b), env.rates(a), rtol=1e-12, atol=0)


@settings(max_examples=100, deadline=None)
@given(states, st.data())
def test_monotonicity(args, data):
    gains, noise, bw, powers = args
    K = len(gains)
    u = data.draw(st.integers(0, K - 1))
    bump = data.draw(st.floats(0.01, 5))
    a = NetworkState(gains, noise, bw, powers)
    raised = list(powers)
    raised[u] += bump
    b = a.with_powers(raised)
    assert env.sinr(b, u) > env.sinr(a, u)
    assert env.rate(b, u) > env.rate(a, u)
    for j in range(K):
        if j != u:
            assert env.sinr(b, j) <= env.sinr(a, j)
            if powers[j] > 0:
                assert env.sinr(b, j) < env.sinr(a, j)


@settings(max_examples=100, deadline=None)
@given(states)
def test_rate_zero_iff_sinr_zero(args):
    s = NetworkState(*args)
    for u in range(s.num_users):
        r = env.rate(s, u)
        assert math.isfinite(r)
        assert (r == 0.0) == (env.sinr(s, u) == 0.0)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=8), st.randoms())
def test_total_power_permutation_invariant_and_additive(powers, rnd):
    shuffled = list(powers)
    rnd.shuffle(shuffled)
    assert env.total_power(shuffled) == env.total_power(powers)
    assert env.total_power(powers) == pytest.approx(math.fsum(powers[:1]) + env.total_power(powers[1:] or [0]), rel=1e-15, abs=0)
