import json

import numpy as np
import pytest

from nqstate import MpsState, RbmState, materialize, mps_amplitude, rbm_to_mps, rbm_to_tensor_network
from nqstate.core import all_configs
from nqstate.errors import BondDimensionError, ShapeError, UnsupportedConventionError
from nqstate.tensor import (
    DenseTensor,
    amplitude_matrix_rank,
    contract_pair,
    copy_tensor,
    crossing_units,
)


def projective_error(a, b):
    a = np.asarray(a) / np.linalg.norm(a)
    b = np.asarray(b) / np.linalg.norm(b)
    phase = np.vdot(a, b)
    phase /= abs(phase)
    return np.max(np.abs(a * phase - b))


def test_dense_tensor_validation():
    with pytest.raises(ShapeError):
        DenseTensor([2, 2], np.zeros(3), ["a", "b"])
    with pytest.raises(ShapeError):
        DenseTensor([2, 2], np.zeros(4), ["a", "a"])
    t = DenseTensor.from_array(np.arange(6).reshape(2, 3), ["i", "j"])
    assert t.array[1, 2] == 5


def test_copy_tensor_and_pair_contraction():
    c = copy_tensor([1, 3], 3)
    assert c[0, 0, 0] == 1 and c[1, 1, 1] == 3 and c.sum() == 4
    x = DenseTensor.from_array(np.array([[1, 2], [3, 4]]), ["i", "k"])
    y = DenseTensor.from_array(np.array([[5, 6], [7, 8]]), ["k", "j"])
    out = contract_pair(x, y)
    assert out.labels == ["i", "j"]
    assert np.allclose(out.array, [[19, 22], [43, 50]])


def test_zero_rbm_network_gives_power_of_two():
    net = rbm_to_tensor_network(RbmState.zeros(3, 2))
    for v in all_configs(3):
        assert net.amplitude(v) == pytest.approx(4.0)
    # tiny non-zero weights keep every edge tensor in the network
    dense = rbm_to_tensor_network(RbmState(np.zeros(3), np.zeros(2), np.full((3, 2), 1e-300)))
    assert len(dense.tensors) == 3 + 2 + 6
    assert dense.amplitude([1, 0, 1]) == pytest.approx(4.0)


def test_single_pair_hand_contraction():
    a, b, w = 0.3 - 0.1j, -0.2 + 0.4j, 0.7 + 0.2j
    net = rbm_to_tensor_network(RbmState([a], [b], [[w]]))
    for v in (0, 1):
        assert net.amplitude([v]) == pytest.approx(np.exp(a * v) * (1 + np.exp(b + w * v)), abs=1e-14)


def test_network_matches_materialize(rng):
    for _ in range(5):
        s = RbmState.random(4, 3, rng, scale=0.6)
        net = rbm_to_tensor_network(s)
        dense = materialize(s).amplitudes
        got = np.array([net.amplitude(v) for v in all_configs(4)])
        assert np.max(np.abs(got - dense) / np.abs(dense)) <= 1e-12


def test_network_requires_zero_one_hidden():
    with pytest.raises(UnsupportedConventionError):
        rbm_to_tensor_network(RbmState.zeros(2, 1, "plus-minus-one"))
    with pytest.raises(UnsupportedConventionError):
        rbm_to_mps(RbmState.zeros(2, 1, "plus-minus-one"))


def test_product_state_has_unit_bonds(rng):
    s = RbmState(rng.normal(size=5), [], np.zeros((5, 0)))
    mps = rbm_to_mps(s)
    assert mps.bond_dims == [1, 1, 1, 1]


def test_single_unit_bond():
    w = np.zeros((4, 1), dtype=complex)
    w[1, 0], w[2, 0] = 0.5 + 0.3j, -0.7
    s = RbmState([0.1, 0.2, 0.3, 0.4], [0.2j], w)
    assert crossing_units(s) == [0, 1, 0]
    mps = rbm_to_mps(s)
    assert mps.bond_dims[0] == 1 and mps.bond_dims[2] == 1
    assert mps.bond_dims[1] <= 2


def test_local_rbm_mps_amplitudes(rng):
    for _ in range(10):
        s = RbmState.random_local(6, 2, rng, hidden_per_window=2)
        mps = rbm_to_mps(s)
        dense = materialize(s).amplitudes
        got = np.array([mps_amplitude(mps, v, include_constant=True) for v in all_configs(6)])
        assert np.max(np.abs(got - dense) / np.abs(dense)) <= 1e-10
        assert projective_error(got, dense) <= 1e-10


def test_bond_dims_respect_crossing_bound(rng):
    for _ in range(10):
        s = RbmState.random_local(8, 3, rng)
        mps = rbm_to_mps(s)
        for dim, c in zip(mps.bond_dims, crossing_units(s)):
            assert dim <= 2**c


def test_bond_cap_reports_cut(rng):
    s = RbmState.random(6, 6, rng, scale=0.8)
    with pytest.raises(BondDimensionError) as info:
        rbm_to_mps(s, max_bond=2)
    assert info.value.cut == 1


def test_disconnected_unit_is_constant(rng):
    s = RbmState.random(3, 2, rng, mask=[[1, 0], [1, 0], [0, 0]])
    mps = rbm_to_mps(s)
    dense = materialize(s).amplitudes
    got = np.array([mps_amplitude(mps, v, include_constant=True) for v in all_configs(3)])
    assert np.allclose(got, dense, rtol=1e-12)


def test_mps_amplitude_trivial_cases():
    ones = MpsState([np.ones((1, 2, 1)) for _ in range(4)])
    assert mps_amplitude(ones, [0, 1, 1, 0]) == 1
    scalars = MpsState([np.array([2.0, 3.0]).reshape(1, 2, 1), np.array([5.0, 7.0]).reshape(1, 2, 1)])
    assert mps_amplitude(scalars, [1, 0]) == 15


def test_random_mps_matches_full_contraction(rng):
    dims = [1, 3, 3, 3, 3, 1]
    ts = [rng.normal(size=(dims[k], 2, dims[k + 1])) + 1j * rng.normal(size=(dims[k], 2, dims[k + 1]))
          for k in range(5)]
    full = ts[0]
    for t in ts[1:]:
        full = np.tensordot(full, t, axes=(-1, 0))
    full = full.reshape(2**5)
    mps = MpsState(ts)
    for k, v in enumerate(all_configs(5)):
        assert mps_amplitude(mps, v) == pytest.approx(full[k], abs=1e-12)


def test_periodic_mps_trace():
    t = np.zeros((2, 2, 2))
    t[:, 0, :] = np.eye(2)
    t[:, 1, :] = [[0, 1], [1, 0]]
    mps = MpsState([t, t, t], boundary="periodic")
    assert mps_amplitude(mps, [0, 0, 0]) == 2
    assert mps_amplitude(mps, [1, 0, 0]) == 0
    assert mps_amplitude(mps, [1, 1, 0]) == 2


def test_mps_validation():
    with pytest.raises(ShapeError):
        MpsState([np.ones((1, 2, 2)), np.ones((3, 2, 1))])
    with pytest.raises(ShapeError):
        MpsState([np.ones((2, 2, 1))])
    with pytest.raises(ShapeError):
        MpsState([np.ones((2, 2))])


def test_mps_json_roundtrip(rng):
    mps = rbm_to_mps(RbmState.random_local(5, 2, rng))
    back = MpsState.from_json(json.loads(json.dumps(mps.to_json())))
    assert back.log_constant == mps.log_constant
    for a, b in zip(back.tensors, mps.tensors):
        assert np.array_equal(a, b)


def test_schmidt_rank_bound(rng):
    for _ in range(20):
        n = int(rng.integers(4, 11))
        s = RbmState.random_local(n, int(rng.integers(1, 4)), rng)
        amps = materialize(s, rescale=True).amplitudes
        for cut, c in enumerate(crossing_units(s)):
            assert amplitude_matrix_rank(amps, n, cut) <= 2**c
