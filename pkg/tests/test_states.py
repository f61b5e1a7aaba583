import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nqstate import (
    BmState,
    DbmState,
    RbmState,
    bm_log_amplitude,
    convert_hidden_domain,
    dbm_log_amplitude_exact,
    rbm_log_amplitude,
    rbm_log_derivatives,
    state_from_json,
)
from nqstate.core import all_configs
from nqstate.errors import CapacityError, ConfigurationError, ShapeError, UnsupportedConventionError
from nqstate.states import log1p_exp, log_2cosh

from oracles import brute_force_amplitude, brute_force_dbm


def amp(state, v):
    return rbm_log_amplitude(state, v).amplitude()


def test_zero_rbm_is_two():
    s = RbmState.zeros(1, 1)
    for v in ([0], [1]):
        la = rbm_log_amplitude(s, v)
        assert not la.is_zero
        assert la.value == pytest.approx(math.log(2))


def test_analytic_zero_flagged():
    s = RbmState([0], [0], [[1j * math.pi]])
    la = rbm_log_amplitude(s, [1])
    assert la.is_zero
    assert la.amplitude() == 0
    assert not rbm_log_amplitude(s, [0]).is_zero


def test_shape_mismatch():
    s = RbmState.zeros(3, 2)
    with pytest.raises(ShapeError):
        rbm_log_amplitude(s, [0, 1])
    with pytest.raises(ShapeError):
        RbmState(np.zeros(2), np.zeros(2), np.zeros((3, 2)))


@pytest.mark.parametrize("domain", ["zero-one", "plus-minus-one"])
def test_rbm_matches_enumeration(rng, domain):
    for _ in range(10):
        s = RbmState.random(3, 2, rng, scale=0.7, hidden_domain=domain)
        for v in all_configs(3):
            want = brute_force_amplitude(v, s.visible_bias, s.hidden_bias, s.weights,
                                         hidden_pm=domain == "plus-minus-one")
            assert abs(amp(s, v) - want) <= 1e-12 * abs(want)


def test_log_amplitude_stable_for_large_parameters():
    s = RbmState([0.0], [400.0], [[300.0 + 1j]])
    la = rbm_log_amplitude(s, [1])
    assert np.isfinite(la.value)
    assert la.value.real == pytest.approx(700.0)


def test_log1p_exp_and_log2cosh():
    t = np.array([0.3 + 2j, -40 + 1j, 40 - 0.5j])
    lp, _ = log1p_exp(t)
    lc, _ = log_2cosh(t)
    assert np.allclose(np.exp(lp[:1]), 1 + np.exp(t[:1]))
    assert np.allclose(np.exp(lc[:1]), 2 * np.cosh(t[:1]))
    assert np.allclose(lp[2], t[2], atol=1e-15)
    assert np.allclose(lc[1], -t[1], atol=1e-15)


def test_derivatives_at_zero():
    d = rbm_log_derivatives(RbmState.zeros(3, 4), [1, 0, 1])
    assert np.allclose(d[3:7], 0.5)
    assert np.array_equal(d[:3], [1, 0, 1])


def _fd_gradient(state, v, h=1e-6):
    p = state.parameters()
    out = np.zeros(p.size, dtype=complex)
    for k in range(p.size):
        e = np.zeros(p.size)
        e[k] = h
        plus = state.with_parameters(p + e).log_amplitude(v).value
        minus = state.with_parameters(p - e).log_amplitude(v).value
        out[k] = (plus - minus) / (2 * h)
    return out


@pytest.mark.parametrize("domain", ["zero-one", "plus-minus-one"])
def test_derivatives_match_finite_differences(rng, domain):
    for _ in range(10):
        s = RbmState.random(3, 2, rng, scale=0.5, hidden_domain=domain)
        v = rng.integers(0, 2, 3)
        d = rbm_log_derivatives(s, v)
        fd = _fd_gradient(s, v)
        assert np.max(np.abs(d - fd)) <= 1e-6 * max(1.0, np.max(np.abs(d)))


def test_bm_without_intra_layer_is_rbm(rng):
    s = BmState.random(3, 2, rng)
    s = BmState(s.visible_bias, s.hidden_bias, s.weights)
    r = s.as_rbm()
    for v in all_configs(3):
        assert bm_log_amplitude(s, v).value == pytest.approx(r.log_amplitude(v).value, abs=1e-12)


def test_bm_single_hidden_visible_couplings(rng):
    a = rng.normal(size=3) + 1j * rng.normal(size=3)
    b = np.array([0.4 - 0.2j])
    w = (rng.normal(size=(3, 1)) + 1j * rng.normal(size=(3, 1))) * 0.5
    wvv = np.triu(rng.normal(size=(3, 3)) * 0.3, 1)
    s = BmState(a, b, w, visible_weights=wvv)
    for v in all_configs(3):
        vf = v.astype(float)
        theta = b[0] + vf @ w[:, 0]
        want = a @ vf + vf @ wvv @ vf + np.log(1 + np.exp(theta))
        assert bm_log_amplitude(s, v).value == pytest.approx(want, abs=1e-12)


def test_bm_matches_enumeration(rng):
    for _ in range(10):
        s = BmState.random(2, 3, rng, scale=0.5)
        for v in all_configs(2):
            want = brute_force_amplitude(v, s.visible_bias, s.hidden_bias, s.weights,
                                         s.visible_weights, s.hidden_weights)
            got = bm_log_amplitude(s, v).amplitude()
            assert abs(got - want) <= 1e-12 * abs(want)


def test_bm_guard_and_validation():
    with pytest.raises(CapacityError):
        BmState(np.zeros(1), np.zeros(23), np.zeros((1, 23))).log_amplitude([0])
    with pytest.raises(ConfigurationError):
        BmState(np.zeros(2), np.zeros(1), np.zeros((2, 1)), visible_weights=np.eye(2))


def test_dbm_matches_enumeration(rng):
    for _ in range(10):
        s = DbmState.random(2, 2, 2, rng, scale=0.6)
        for v in all_configs(2):
            want = brute_force_dbm(v, s.visible_bias, s.hidden_bias, s.deep_bias, s.weights, s.deep_weights)
            got = dbm_log_amplitude_exact(s, v).amplitude()
            assert abs(got - want) <= 1e-12 * abs(want)


def test_dbm_reductions(rng):
    r = RbmState.random(3, 2, rng, scale=0.5)
    empty = DbmState(r.visible_bias, r.hidden_bias, [], r.weights, np.zeros((2, 0)))
    decoupled = DbmState(r.visible_bias, r.hidden_bias, np.zeros(3), r.weights, np.zeros((2, 3)))
    for v in all_configs(3):
        base = r.log_amplitude(v).value
        assert dbm_log_amplitude_exact(empty, v).value == pytest.approx(base, abs=1e-12)
        assert dbm_log_amplitude_exact(decoupled, v).value == pytest.approx(base + 3 * math.log(2), abs=1e-12)


def test_dbm_guard():
    with pytest.raises(CapacityError):
        DbmState(np.zeros(1), np.zeros(12), np.zeros(11), np.zeros((1, 12)), np.zeros((12, 11))).log_amplitude([0])


def test_disjoint_union_is_product(rng):
    x = RbmState.random(2, 2, rng, scale=0.5)
    y = RbmState.random(3, 1, rng, scale=0.5)
    u = x.disjoint_union(y)
    for v in all_configs(5):
        assert amp(u, v) == pytest.approx(amp(x, v[:2]) * amp(y, v[2:]), rel=1e-12)
    with pytest.raises(UnsupportedConventionError):
        x.disjoint_union(RbmState.zeros(1, 1, "plus-minus-one"))


@pytest.mark.parametrize("source", ["zero-one", "plus-minus-one"])
def test_domain_conversion_preserves_amplitudes(rng, source):
    s = RbmState.random(4, 3, rng, scale=0.6, hidden_domain=source)
    target = "plus-minus-one" if source == "zero-one" else "zero-one"
    new, log_c = convert_hidden_domain(s, target)
    assert new.hidden_domain == target
    for v in all_configs(4):
        assert s.log_amplitude(v).value == pytest.approx(new.log_amplitude(v).value + log_c, abs=1e-12)


@pytest.mark.parametrize("family", ["rbm", "bm", "dbm"])
def test_json_roundtrip(rng, family):
    if family == "rbm":
        s = RbmState.random(3, 2, rng, mask=[[1, 0], [1, 1], [0, 1]])
    elif family == "bm":
        s = BmState.random(3, 2, rng)
    else:
        s = DbmState.random(3, 2, 2, rng)
    back = state_from_json(json.loads(json.dumps(s.to_json())))
    assert type(back) is type(s)
    for v in all_configs(3):
        assert back.log_amplitude(v).value == s.log_amplitude(v).value


def test_json_unknown_family():
    with pytest.raises(ConfigurationError):
        state_from_json({"family": "mlp", "n_visible": 1, "parameters": {}})


def test_random_local_mask():
    s = RbmState.random_local(6, 2, np.random.default_rng(0))
    assert s.n_hidden == 5
    assert s.connections() == [{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}]
    p = RbmState.random_local(5, 3, np.random.default_rng(0), periodic=True, hidden_per_window=2)
    assert p.n_hidden == 10
    assert p.connections()[-1] == {4, 0, 1}


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_batch_equals_single(n, m, seed):
    s = RbmState.random(n, m, seed, scale=1.0)
    V = all_configs(n)
    batch, zero = s.log_amplitudes(V)
    for k, v in enumerate(V):
        la = s.log_amplitude(v)
        assert la.is_zero == zero[k]
        assert la.value == pytest.approx(batch[k], abs=1e-13)
