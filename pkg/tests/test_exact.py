import math

import numpy as np
import pytest

from nqstate import (
    DbmState,
    DenseState,
    RbmState,
    build_afh,
    build_tfim,
    expectation,
    fidelity,
    ground_state_exact,
    kl_divergence,
    materialize,
    trace_distance,
)
from nqstate.core import all_configs
from nqstate.errors import CapacityError, DomainError, ShapeError
from nqstate.exact import TabulatedState


def test_materialize_uniform():
    d = materialize(RbmState.zeros(3, 2))
    assert np.allclose(d.amplitudes, 4.0)


def test_materialize_analytic_zero():
    d = materialize(RbmState([0], [0], [[1j * np.pi]]))
    assert d.amplitudes[1] == 0
    assert d.amplitudes[0] == pytest.approx(2)


def test_materialize_dbm_pointwise(rng):
    s = DbmState.random(4, 2, 2, rng)
    d = materialize(s)
    for k, v in enumerate(all_configs(4)):
        assert d.amplitudes[k] == pytest.approx(s.log_amplitude(v).amplitude(), rel=1e-13)


def test_materialize_big_endian():
    # amplitude e^{a_0 v_0}: only configurations with site 0 set pick up the factor
    s = RbmState([1.0, 0, 0], [], np.zeros((3, 0)))
    amps = materialize(s).amplitudes
    assert np.allclose(amps[:4], 1)
    assert np.allclose(amps[4:], math.e)


def test_materialize_guard():
    with pytest.raises(CapacityError):
        materialize(RbmState.zeros(15, 1))


def test_materialize_rescale_keeps_ratios(rng):
    s = RbmState.random(4, 3, rng, scale=30.0)
    d = materialize(s, rescale=True)
    assert np.max(np.abs(d.amplitudes)) == pytest.approx(1.0)


def test_ground_state_small_cases():
    assert ground_state_exact(build_tfim(2, 1, 0))[0] == pytest.approx(-1)
    assert ground_state_exact(build_afh(2, 1))[0] == pytest.approx(-0.75)


def test_lanczos_matches_dense():
    H = build_tfim(12, 1, 0.7)
    e, psi = ground_state_exact(H)
    assert expectation(H, psi) == pytest.approx(e, abs=1e-9)
    assert np.linalg.norm(H.to_sparse() @ psi.amplitudes - e * psi.amplitudes) < 1e-6


def test_variational_bound(rng):
    H = build_tfim(6, 1, 1)
    e0 = ground_state_exact(H)[0]
    for _ in range(20):
        psi = materialize(RbmState.random(6, 6, rng, scale=0.5))
        assert expectation(H, psi) >= e0 - 1e-12


def test_fidelity_cases(rng):
    a = DenseState(rng.normal(size=8) + 1j * rng.normal(size=8), 3)
    assert fidelity(a, a) == pytest.approx(1)
    assert fidelity(a, DenseState((2 - 3j) * a.amplitudes, 3)) == pytest.approx(1)
    e0 = DenseState(np.eye(8)[0], 3)
    e1 = DenseState(np.eye(8)[1], 3)
    assert fidelity(e0, e1) == 0
    with pytest.raises(ShapeError):
        fidelity(e0, DenseState(np.ones(4), 2))


def test_dense_state_validation():
    with pytest.raises(ShapeError):
        DenseState(np.ones(5), 2)
    with pytest.raises(DomainError):
        DenseState(np.array([1, np.nan, 0, 0]), 2)
    with pytest.raises(DomainError):
        DenseState(np.zeros(4), 2).normalized()


def test_dense_state_csv():
    text = DenseState(np.array([1, 1j]), 1).to_csv()
    assert text.splitlines() == ["index,re,im", "0,1,0", "1,0,1"]


def test_kl_cases(rng):
    p = rng.random(6)
    p /= p.sum()
    assert kl_divergence(p, p) == 0
    assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert kl_divergence([0.5, 0.5], [1, 0]) == math.inf
    q = rng.random(6)
    q /= q.sum()
    want = 0.0
    for pk, qk in zip(p, q):
        want += pk * math.log(pk / qk)
    assert kl_divergence(p, q) == pytest.approx(want, rel=1e-12)
    with pytest.raises(DomainError):
        kl_divergence([0.5, 0.6], [0.5, 0.5])


def test_kl_nonnegative(rng):
    for _ in range(100):
        p, q = rng.random(5), rng.random(5)
        p /= p.sum()
        q /= q.sum()
        assert kl_divergence(p, q) > 0


def test_trace_distance():
    rho = np.diag([1.0, 0.0])
    sigma = np.eye(2) / 2
    assert trace_distance(rho, sigma) == pytest.approx(0.5)
    assert trace_distance(rho, rho) == pytest.approx(0)


def test_tabulated_state_roundtrip(rng):
    amps = rng.normal(size=8) + 1j * rng.normal(size=8)
    amps[3] = 0
    t = TabulatedState(amps)
    assert np.allclose(materialize(t).amplitudes, amps)
    assert t.log_amplitude([0, 1, 1]).is_zero
