"""RBM to tensor-network and MPS conversion.

A visible neuron becomes a diagonal copy tensor weighted by ``diag(1, e^a)``,
a hidden neuron a copy tensor weighted by ``diag(1, e^b)``, and every
non-zero edge the matrix ``[[1, 1], [1, e^w]]``. Edges with zero weight are
the all-ones matrix, which factorizes, so they are left out.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import as_zero_one, complex_from_json, complex_to_json
from .errors import BondDimensionError, CapacityError, ShapeError, UnsupportedConventionError
from .states import ZERO_ONE, RbmState

SVD_CUTOFF = 1e-12
RAW_BOND_GUARD = 1 << 16
OPEN = "open"
PERIODIC = "periodic"


@dataclass
class DenseTensor:
    """A rank-n tensor stored flat in row-major order with one label per index."""

    dims: list
    data: np.ndarray
    labels: list

    def __post_init__(self):
        self.dims = [int(d) for d in self.dims]
        self.data = np.asarray(self.data, dtype=complex).ravel()
        if self.data.size != math.prod(self.dims):
            raise ShapeError(f"data length {self.data.size} != product of dims {self.dims}")
        if len(self.labels) != len(self.dims) or len(set(self.labels)) != len(self.labels):
            raise ShapeError("need one distinct label per index")

    @classmethod
    def from_array(cls, arr, labels):
        arr = np.asarray(arr, dtype=complex)
        return cls(list(arr.shape), arr.ravel(), list(labels))

    @property
    def array(self) -> np.ndarray:
        return self.data.reshape(self.dims)


def copy_tensor(weights, rank: int) -> np.ndarray:
    """Diagonal tensor T[s, s, ..., s] = weights[s] of the given rank."""
    out = np.zeros((2,) * rank, dtype=complex)
    for s in (0, 1):
        out[(s,) * rank] = weights[s]
    return out


def contract_pair(x: DenseTensor, y: DenseTensor) -> DenseTensor:
    shared = [l for l in x.labels if l in y.labels]
    ax = [x.labels.index(l) for l in shared]
    ay = [y.labels.index(l) for l in shared]
    arr = np.tensordot(x.array, y.array, axes=(ax, ay))
    labels = [l for l in x.labels if l not in shared] + [l for l in y.labels if l not in shared]
    return DenseTensor.from_array(arr, labels)


@dataclass
class TensorNetwork:
    """Vertex and edge tensors; shared labels are summed over on contraction."""

    tensors: list
    physical: list  # label of the physical leg of each visible site

    def contract(self, fixed: dict | None = None) -> DenseTensor:
        """Contract all shared indices, after pinning labels in ``fixed`` to values.

        Pairs are contracted greedily, choosing the pair with the smallest
        result first.
        """
        ts = []
        for t in self.tensors:
            if fixed:
                keep = [l for l in t.labels if l not in fixed]
                idx = tuple(fixed[l] if l in fixed else slice(None) for l in t.labels)
                t = DenseTensor.from_array(t.array[idx], keep)
            ts.append(t)
        while len(ts) > 1:
            best = None
            for i, j in itertools.combinations(range(len(ts)), 2):
                shared = set(ts[i].labels) & set(ts[j].labels)
                if not shared:
                    continue
                size = ts[i].data.size * ts[j].data.size // 4 ** len(shared)
                if best is None or size < best[0]:
                    best = (size, i, j)
            if best is None:
                # no shared indices left: outer products
                i, j = 0, 1
            else:
                _, i, j = best
            merged = contract_pair(ts[i], ts[j])
            ts = [t for k, t in enumerate(ts) if k not in (i, j)] + [merged]
        return ts[0]

    def amplitude(self, v) -> complex:
        v = as_zero_one(v, len(self.physical))
        out = self.contract({p: int(s) for p, s in zip(self.physical, v)})
        if out.labels:
            raise ShapeError(f"open indices remain after contraction: {out.labels}")
        return complex(out.data[0])


def rbm_to_tensor_network(state: RbmState) -> TensorNetwork:
    """Tensor network whose contraction reproduces the unnormalized RBM amplitude."""
    if state.hidden_domain != ZERO_ONE:
        raise UnsupportedConventionError("tensor construction needs {0,1} hidden units; convert first")
    n, m = state.n_visible, state.n_hidden
    edges = [(i, j) for i in range(n) for j in range(m) if state.weights[i, j] != 0]
    tensors = []
    for i in range(n):
        legs = [f"p{i}"] + [f"v{i}-h{j}" for (k, j) in edges if k == i]
        tensors.append(DenseTensor.from_array(copy_tensor([1, np.exp(state.visible_bias[i])], len(legs)), legs))
    for j in range(m):
        legs = [f"h{j}-v{i}" for (i, k) in edges if k == j]
        weights = [1, np.exp(state.hidden_bias[j])]
        if legs:
            tensors.append(DenseTensor.from_array(copy_tensor(weights, len(legs)), legs))
        else:
            tensors.append(DenseTensor.from_array(np.array(sum(weights)), []))
    for i, j in edges:
        mat = np.array([[1, 1], [1, np.exp(state.weights[i, j])]], dtype=complex)
        tensors.append(DenseTensor.from_array(mat, [f"v{i}-h{j}", f"h{j}-v{i}"]))
    return TensorNetwork(tensors, [f"p{i}" for i in range(n)])


# ---------------------------------------------------------------------------
# MPS


@dataclass
class MpsState:
    """Rank-3 site tensors indexed (left bond, physical, right bond)."""

    tensors: list
    boundary: str = OPEN
    log_constant: complex = 0j

    def __post_init__(self):
        self.tensors = [np.asarray(t, dtype=complex) for t in self.tensors]
        if self.boundary not in (OPEN, PERIODIC):
            raise ShapeError(f"unknown boundary {self.boundary!r}")
        for k, t in enumerate(self.tensors):
            if t.ndim != 3:
                raise ShapeError(f"site {k} tensor has rank {t.ndim}, expected 3")
        for k in range(len(self.tensors) - 1):
            if self.tensors[k].shape[2] != self.tensors[k + 1].shape[0]:
                raise ShapeError(f"bond mismatch between sites {k} and {k + 1}")
        if self.boundary == OPEN and self.tensors:
            if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
                raise ShapeError("open-boundary end bonds must have dimension 1")
        elif self.tensors and self.tensors[0].shape[0] != self.tensors[-1].shape[2]:
            raise ShapeError("periodic MPS end bonds must match")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list:
        """Dimension of the bond between site k and k+1, for each k."""
        return [t.shape[2] for t in self.tensors[:-1]]

    def to_json(self) -> dict:
        return {
            "boundary": self.boundary,
            "log_constant": complex_to_json(self.log_constant),
            "sites": [{"dims": list(t.shape), "data": [complex_to_json(z) for z in t.ravel()]}
                      for t in self.tensors],
        }

    @classmethod
    def from_json(cls, obj) -> "MpsState":
        tensors = [np.array([complex_from_json(z) for z in s["data"]], dtype=complex).reshape(s["dims"])
                   for s in obj["sites"]]
        return cls(tensors, obj.get("boundary", OPEN), complex_from_json(obj.get("log_constant", [0, 0])))


def mps_amplitude(mps: MpsState, v, include_constant: bool = False) -> complex:
    """Matrix product of the physical slices selected by ``v``."""
    v = as_zero_one(v, mps.n_sites)
    mat = np.eye(mps.tensors[0].shape[0], dtype=complex)
    for t, s in zip(mps.tensors, v):
        mat = mat @ t[:, s, :]
    amp = complex(np.trace(mat))
    return amp * np.exp(mps.log_constant) if include_constant else amp


def crossing_units(state: RbmState) -> list:
    """Number of hidden units whose connections straddle each cut k | k+1."""
    spans = [(min(c), max(c)) for c in state.connections() if c]
    return [sum(lo <= k < hi for lo, hi in spans) for k in range(state.n_visible - 1)]


def _raw_site_tensors(state: RbmState):
    """Exact MPS: each hidden unit rides on the bonds its connection span covers."""
    n = state.n_visible
    conns = state.connections()
    spans = {j: (min(c), max(c)) for j, c in enumerate(conns) if c}
    # disconnected units contribute the constant 1 + e^b
    log_const = sum(complex(np.log1p(np.exp(state.hidden_bias[j])))
                    for j, c in enumerate(conns) if not c)
    crossing = [[j for j, (lo, hi) in spans.items() if lo <= k < hi] for k in range(n - 1)]
    for k, units in enumerate(crossing):
        if 2 ** len(units) > RAW_BOND_GUARD:
            raise CapacityError(f"cut {k} is crossed by {len(units)} hidden units")
    tensors = []
    for k in range(n):
        left = crossing[k - 1] if k > 0 else []
        right = crossing[k] if k < n - 1 else []
        active = sorted(j for j, (lo, hi) in spans.items() if lo <= k <= hi)
        t = np.zeros((2 ** len(left), 2, 2 ** len(right)), dtype=complex)
        for hs in itertools.product((0, 1), repeat=len(active)):
            h = dict(zip(active, hs))
            li = sum(h[j] << (len(left) - 1 - p) for p, j in enumerate(left))
            ri = sum(h[j] << (len(right) - 1 - p) for p, j in enumerate(right))
            bias = sum(state.hidden_bias[j] * h[j] for j in active if spans[j][0] == k)
            for s in (0, 1):
                expo = state.visible_bias[k] * s + bias + s * sum(state.weights[k, j] * h[j] for j in active)
                t[li, s, ri] += np.exp(expo)
        tensors.append(t)
    return tensors, log_const


def rbm_to_mps(state: RbmState, max_bond: int | None = None, cutoff: float = SVD_CUTOFF) -> MpsState:
    """Open-boundary MPS for an RBM, compressed by a left-to-right SVD sweep.

    Singular values below ``cutoff`` times the largest one are discarded.
    Site tensors are kept at unit scale; the amplitude is
    ``exp(mps.log_constant) * mps_amplitude(mps, v)``. A bond larger than
    ``max_bond`` after compression raises :class:`BondDimensionError`.
    """
    if state.hidden_domain != ZERO_ONE:
        raise UnsupportedConventionError("MPS construction needs {0,1} hidden units; convert first")
    tensors, log_const = _raw_site_tensors(state)
    n = len(tensors)
    for k in range(n - 1):
        dl, d, dr = tensors[k].shape
        u, s, vh = np.linalg.svd(tensors[k].reshape(dl * d, dr), full_matrices=False)
        keep = max(1, int(np.sum(s > cutoff * s[0]))) if s[0] > 0 else 1
        u, s, vh = u[:, :keep], s[:keep], vh[:keep]
        scale = s[0] if s[0] > 0 else 1.0
        log_const += math.log(scale)
        tensors[k] = u.reshape(dl, d, keep)
        tensors[k + 1] = np.tensordot((s / scale)[:, None] * vh, tensors[k + 1], axes=(1, 0))
    last = tensors[-1]
    nrm = np.linalg.norm(last)
    if nrm > 0:
        log_const += math.log(nrm)
        tensors[-1] = last / nrm
    mps = MpsState(tensors, OPEN, complex(log_const))
    if max_bond is not None:
        for k, dim in enumerate(mps.bond_dims):
            if dim > max_bond:
                raise BondDimensionError(k, dim, max_bond)
    return mps


def amplitude_matrix_rank(amplitudes, n: int, cut: int, tol: float = 1e-10) -> int:
    """Numerical rank of the amplitude matrix for the bipartition {0..cut} | rest."""
    mat = np.asarray(amplitudes).reshape(2 ** (cut + 1), 2 ** (n - cut - 1))
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
