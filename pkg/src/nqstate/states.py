"""Boltzmann-machine wavefunctions: RBM, fully connected BM and two-layer DBM.

All amplitudes are unnormalized: the partition function and any overall
constant are dropped. Visible units use the zero-one convention. Exact
zeros of the amplitude are reported through a boolean mask next to the log
value instead of ``-inf``.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import (
    PLUS_MINUS_ONE,
    ZERO_ONE,
    NetworkParameters,
    all_configs,
    as_zero_one,
    vertex_index,
)
from .errors import CapacityError, ConfigurationError, ShapeError, UnsupportedConventionError

ENUMERATION_GUARD = 22
ZERO_TOL = 1e-12
_CHUNK = 1 << 14


class LogAmplitude(NamedTuple):
    value: complex
    is_zero: bool

    def amplitude(self) -> complex:
        return 0j if self.is_zero else complex(np.exp(self.value))


def log1p_exp(theta):
    """log(1 + e^theta) for complex theta, with a mask of exact zeros."""
    theta = np.asarray(theta, dtype=complex)
    pos = theta.real > 0
    e = np.exp(np.where(pos, -theta, theta))
    s = 1.0 + e
    zero = np.abs(s) < ZERO_TOL
    out = np.log(np.where(zero, 1.0, s)) + np.where(pos, theta, 0)
    return out, zero


def log_2cosh(theta):
    """log(2 cosh theta) for complex theta, with a mask of exact zeros."""
    theta = np.asarray(theta, dtype=complex)
    sgn = np.where(theta.real >= 0, 1.0, -1.0)
    e = np.exp(-2.0 * sgn * theta)
    s = 1.0 + e
    zero = np.abs(s) < ZERO_TOL
    return sgn * theta + np.log(np.where(zero, 1.0, s)), zero


def logistic(theta):
    theta = np.asarray(theta, dtype=complex)
    pos = theta.real >= 0
    e = np.exp(np.where(pos, -theta, theta))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pos, 1.0 / (1.0 + e), e / (1.0 + e))


def logsumexp_complex(x, axis=-1):
    """log sum exp over ``axis`` for complex ``x``; returns (value, zero mask)."""
    x = np.asarray(x, dtype=complex)
    m = np.max(x.real, axis=axis, keepdims=True)
    terms = np.exp(x - m)
    s = terms.sum(axis=axis)
    scale = np.abs(terms).sum(axis=axis)
    zero = np.abs(s) <= ZERO_TOL * scale
    out = np.log(np.where(zero, 1.0, s)) + np.squeeze(m, axis=axis)
    return out, zero


def _check_domain(domain):
    if domain not in (ZERO_ONE, PLUS_MINUS_ONE):
        raise ConfigurationError(f"unknown hidden domain {domain!r}")


def _hidden_values(m, domain):
    h = all_configs(m).astype(float)
    return h if domain == ZERO_ONE else 1.0 - 2.0 * h


class RbmState:
    """Restricted Boltzmann machine ansatz.

    ``log psi(v) = a.v + sum_j log Gamma_j(theta_j)`` with
    ``theta_j = b_j + sum_i v_i W_ij`` and ``Gamma = 1 + e^theta`` (zero-one
    hidden units) or ``2 cosh theta`` (plus-minus-one hidden units).
    """

    family = "rbm"

    def __init__(self, visible_bias, hidden_bias, weights, hidden_domain: str = ZERO_ONE):
        _check_domain(hidden_domain)
        self.visible_bias = np.array(visible_bias, dtype=complex).reshape(-1)
        self.hidden_bias = np.array(hidden_bias, dtype=complex).reshape(-1)
        w = np.array(weights, dtype=complex)
        if w.size == 0:
            w = w.reshape(self.visible_bias.size, self.hidden_bias.size)
        self.weights = w
        if self.weights.shape != (self.n_visible, self.n_hidden):
            raise ShapeError(
                f"weights {self.weights.shape} != ({self.n_visible}, {self.n_hidden})"
            )
        self.hidden_domain = hidden_domain
        for arr in (self.visible_bias, self.hidden_bias, self.weights):
            arr.setflags(write=False)

    @property
    def n_visible(self) -> int:
        return self.visible_bias.size

    @property
    def n_hidden(self) -> int:
        return self.hidden_bias.size

    @property
    def n_params(self) -> int:
        return self.n_visible + self.n_hidden + self.n_visible * self.n_hidden

    @classmethod
    def zeros(cls, n_visible, n_hidden, hidden_domain=ZERO_ONE):
        return cls(np.zeros(n_visible), np.zeros(n_hidden), np.zeros((n_visible, n_hidden)), hidden_domain)

    @classmethod
    def random(cls, n_visible, n_hidden, rng=None, scale=0.1, hidden_domain=ZERO_ONE, mask=None):
        """Complex Gaussian parameters; ``mask`` (N, M) zeroes absent edges."""
        rng = np.random.default_rng(rng)

        def cn(*shape):
            return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

        w = cn(n_visible, n_hidden)
        if mask is not None:
            w = w * np.asarray(mask, dtype=bool)
        return cls(cn(n_visible), cn(n_hidden), w, hidden_domain)

    @classmethod
    def random_local(cls, n_visible, window, rng=None, scale=0.5, hidden_per_window=1, periodic=False):
        """RBM whose hidden units each couple to ``window`` consecutive sites.

        One group of ``hidden_per_window`` units is placed at every window
        position along the chain (wrapping around when ``periodic``).
        """
        if not 1 <= window <= n_visible:
            raise ShapeError(f"window {window} must lie in [1, {n_visible}]")
        starts = range(n_visible) if periodic else range(n_visible - window + 1)
        mask = []
        for s in starts:
            col = np.zeros(n_visible, dtype=bool)
            col[[(s + k) % n_visible for k in range(window)]] = True
            mask.extend([col] * hidden_per_window)
        mask = np.array(mask).T
        return cls.random(n_visible, mask.shape[1], rng, scale=scale, mask=mask)

    def thetas(self, V) -> np.ndarray:
        return self.hidden_bias + np.asarray(V, dtype=float) @ self.weights

    def _log_gamma(self, theta):
        return log1p_exp(theta) if self.hidden_domain == ZERO_ONE else log_2cosh(theta)

    def log_amplitudes(self, V):
        """Batch log-amplitudes for zero-one configurations ``V`` (B, N)."""
        V = np.atleast_2d(as_zero_one(V, self.n_visible))
        lg, zero = self._log_gamma(self.thetas(V))
        out = V @ self.visible_bias + lg.sum(axis=1)
        return out, zero.any(axis=1)

    def log_amplitude(self, v) -> LogAmplitude:
        out, zero = self.log_amplitudes(as_zero_one(v, self.n_visible)[None, :])
        return LogAmplitude(complex(out[0]), bool(zero[0]))

    def hidden_activations(self, V) -> np.ndarray:
        theta = self.thetas(V)
        return logistic(theta) if self.hidden_domain == ZERO_ONE else np.tanh(theta)

    def log_derivatives(self, V) -> np.ndarray:
        """d log psi / d (a, b, W) for each configuration; shape (B, n_params)."""
        V = np.atleast_2d(as_zero_one(V, self.n_visible)).astype(float)
        sig = self.hidden_activations(V)
        outer = (V[:, :, None] * sig[:, None, :]).reshape(V.shape[0], -1)
        return np.concatenate([V.astype(complex), sig, outer], axis=1)

    def parameters(self) -> np.ndarray:
        return np.concatenate([self.visible_bias, self.hidden_bias, self.weights.ravel()])

    def with_parameters(self, vec) -> "RbmState":
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (self.n_params,):
            raise ShapeError(f"parameter vector {vec.shape} != ({self.n_params},)")
        n, m = self.n_visible, self.n_hidden
        return RbmState(vec[:n], vec[n:n + m], vec[n + m:].reshape(n, m), self.hidden_domain)

    def connections(self) -> list[set]:
        """Visible sites connected (non-zero weight) to each hidden unit."""
        return [set(np.flatnonzero(self.weights[:, j] != 0).tolist()) for j in range(self.n_hidden)]

    def disjoint_union(self, other: "RbmState") -> "RbmState":
        if other.hidden_domain != self.hidden_domain:
            raise UnsupportedConventionError("hidden domains differ")
        w = np.zeros((self.n_visible + other.n_visible, self.n_hidden + other.n_hidden), dtype=complex)
        w[: self.n_visible, : self.n_hidden] = self.weights
        w[self.n_visible:, self.n_hidden:] = other.weights
        return RbmState(
            np.concatenate([self.visible_bias, other.visible_bias]),
            np.concatenate([self.hidden_bias, other.hidden_bias]),
            w,
            self.hidden_domain,
        )

    # -- serialization -----------------------------------------------------

    def to_network_parameters(self) -> NetworkParameters:
        weights = {
            (f"v{i}", f"h{j}"): complex(self.weights[i, j])
            for i, j in zip(*np.nonzero(self.weights))
        }
        return NetworkParameters(
            {f"v{i}": complex(x) for i, x in enumerate(self.visible_bias)},
            {f"h{j}": complex(x) for j, x in enumerate(self.hidden_bias)},
            weights,
        )

    @classmethod
    def from_network_parameters(cls, params: NetworkParameters, hidden_domain=ZERO_ONE) -> "RbmState":
        vec, blocks = _dense_from_params(params)
        if "vv" in blocks or "hh" in blocks:
            raise ConfigurationError("RBM parameters must be bipartite")
        n, m = len(vec.get("v", ())), len(vec.get("h", ()))
        return cls(_pad(vec.get("v"), n), _pad(vec.get("h"), m), _pad2(blocks["vh"], n, m), hidden_domain)

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "hidden_domain": self.hidden_domain,
            "n_visible": self.n_visible,
            "n_hidden": self.n_hidden,
            "parameters": self.to_network_parameters().to_json(),
        }


def _dense_from_params(params: NetworkParameters) -> tuple[dict, dict]:
    """Group named vertices by prefix and build dense bias vectors / weight blocks."""
    sizes: dict[str, int] = {}
    biases: dict[str, dict[int, complex]] = {}
    for table in (params.visible_biases, params.hidden_biases):
        for name, val in table.items():
            p, k = vertex_index(name)
            sizes[p] = max(sizes.get(p, 0), k + 1)
            biases.setdefault(p, {})[k] = val
    vec = {p: np.array([biases[p].get(k, 0) for k in range(n)], dtype=complex) for p, n in sizes.items()}
    blocks: dict[str, np.ndarray] = {}
    order = "vhge"
    for (u, w), val in params.weights.items():
        (pu, ku), (pw, kw) = vertex_index(u), vertex_index(w)
        if order.index(pu) > order.index(pw) or (pu == pw and ku > kw):
            (pu, ku), (pw, kw) = (pw, kw), (pu, ku)
        key = pu + pw
        if key not in blocks:
            blocks[key] = np.zeros((sizes[pu], sizes[pw]), dtype=complex)
        blocks[key][ku, kw] = val
    return vec, _BlockDict(blocks, sizes)


class _BlockDict(dict):
    """Weight blocks keyed by prefix pair; missing bipartite blocks are zeros."""

    def __init__(self, blocks, sizes):
        super().__init__(blocks)
        self.sizes = sizes

    def __getitem__(self, key):
        if key in self:
            return dict.__getitem__(self, key)
        return np.zeros((self.sizes.get(key[0], 0), self.sizes.get(key[1], 0)), dtype=complex)


class BmState:
    """Fully connected Boltzmann machine with intra-layer couplings.

    The energy is ``-(a.v + b.h + v W h + h Whh h + v Wvv v)`` with strictly
    upper-triangular ``Whh`` and ``Wvv``. The amplitude sums ``e^{-E}`` over
    all hidden assignments, so the hidden layer is capped at 22 units.
    """

    family = "bm"

    def __init__(self, visible_bias, hidden_bias, weights, visible_weights=None, hidden_weights=None,
                 hidden_domain: str = ZERO_ONE):
        _check_domain(hidden_domain)
        self.visible_bias = np.array(visible_bias, dtype=complex).reshape(-1)
        self.hidden_bias = np.array(hidden_bias, dtype=complex).reshape(-1)
        n, m = self.visible_bias.size, self.hidden_bias.size
        self.weights = np.array(weights, dtype=complex).reshape(n, m)
        self.visible_weights = (
            np.zeros((n, n), complex) if visible_weights is None else np.array(visible_weights, dtype=complex)
        )
        self.hidden_weights = (
            np.zeros((m, m), complex) if hidden_weights is None else np.array(hidden_weights, dtype=complex)
        )
        for name, mat in (("visible", self.visible_weights), ("hidden", self.hidden_weights)):
            if np.any(np.tril(mat) != 0):
                raise ConfigurationError(f"{name} couplings must be strictly upper triangular (no self-loops)")
        self.hidden_domain = hidden_domain

    @property
    def n_visible(self):
        return self.visible_bias.size

    @property
    def n_hidden(self):
        return self.hidden_bias.size

    @classmethod
    def random(cls, n_visible, n_hidden, rng=None, scale=0.3, hidden_domain=ZERO_ONE):
        rng = np.random.default_rng(rng)

        def cn(*shape):
            return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

        return cls(cn(n_visible), cn(n_hidden), cn(n_visible, n_hidden),
                   np.triu(cn(n_visible, n_visible), 1), np.triu(cn(n_hidden, n_hidden), 1), hidden_domain)

    def log_amplitudes(self, V):
        if self.n_hidden > ENUMERATION_GUARD:
            raise CapacityError(f"{self.n_hidden} hidden units exceed enumeration guard {ENUMERATION_GUARD}")
        V = np.atleast_2d(as_zero_one(V, self.n_visible)).astype(float)
        vis = V @ self.visible_bias + np.einsum("bi,ij,bj->b", V, self.visible_weights, V)
        H = _hidden_values(self.n_hidden, self.hidden_domain)
        VW = V @ self.weights

        def exponents(h):
            hid = h @ self.hidden_bias + np.einsum("hi,ij,hj->h", h, self.hidden_weights, h)
            return hid[None, :] + VW @ h.T

        chunks = range(0, H.shape[0], _CHUNK)
        # two passes over hidden chunks: global max, then shifted sums
        m = np.max([exponents(H[c:c + _CHUNK]).real.max(axis=1) for c in chunks], axis=0)
        s = np.zeros(V.shape[0], dtype=complex)
        scale = np.zeros(V.shape[0])
        for c in chunks:
            terms = np.exp(exponents(H[c:c + _CHUNK]) - m[:, None])
            s += terms.sum(axis=1)
            scale += np.abs(terms).sum(axis=1)
        zero = np.abs(s) <= ZERO_TOL * scale
        out = np.where(zero, 0, np.log(np.where(zero, 1.0, s)) + m)
        return vis + out, zero

    def log_amplitude(self, v) -> LogAmplitude:
        out, zero = self.log_amplitudes(as_zero_one(v, self.n_visible)[None, :])
        return LogAmplitude(complex(out[0]), bool(zero[0]))

    def as_rbm(self) -> RbmState:
        if np.any(self.visible_weights) or np.any(self.hidden_weights):
            raise ConfigurationError("machine has intra-layer couplings")
        return RbmState(self.visible_bias, self.hidden_bias, self.weights, self.hidden_domain)

    def to_json(self) -> dict:
        n, m = self.n_visible, self.n_hidden
        weights = {}
        for i, j in zip(*np.nonzero(self.weights)):
            weights[(f"v{i}", f"h{j}")] = complex(self.weights[i, j])
        for i, k in zip(*np.nonzero(self.visible_weights)):
            weights[(f"v{i}", f"v{k}")] = complex(self.visible_weights[i, k])
        for j, k in zip(*np.nonzero(self.hidden_weights)):
            weights[(f"h{j}", f"h{k}")] = complex(self.hidden_weights[j, k])
        params = NetworkParameters(
            {f"v{i}": complex(self.visible_bias[i]) for i in range(n)},
            {f"h{j}": complex(self.hidden_bias[j]) for j in range(m)},
            weights,
        )
        return {"family": self.family, "hidden_domain": self.hidden_domain,
                "n_visible": n, "n_hidden": m, "parameters": params.to_json()}


class DbmState:
    """Deep Boltzmann machine with layers v - h - g (no v-g or intra-layer edges).

    Amplitudes enumerate only the deep layer ``g``; the shallow layer is
    summed analytically in product form.
    """

    family = "dbm"

    def __init__(self, visible_bias, hidden_bias, deep_bias, weights, deep_weights):
        self.visible_bias = np.array(visible_bias, dtype=complex).reshape(-1)
        self.hidden_bias = np.array(hidden_bias, dtype=complex).reshape(-1)
        self.deep_bias = np.array(deep_bias, dtype=complex).reshape(-1)
        n, l, q = self.visible_bias.size, self.hidden_bias.size, self.deep_bias.size
        self.weights = np.array(weights, dtype=complex).reshape(n, l)
        self.deep_weights = np.array(deep_weights, dtype=complex).reshape(l, q)

    @property
    def n_visible(self):
        return self.visible_bias.size

    @property
    def n_hidden_shallow(self):
        return self.hidden_bias.size

    @property
    def n_hidden_deep(self):
        return self.deep_bias.size

    @classmethod
    def random(cls, n_visible, n_shallow, n_deep, rng=None, scale=0.3):
        rng = np.random.default_rng(rng)

        def cn(*shape):
            return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

        return cls(cn(n_visible), cn(n_shallow), cn(n_deep), cn(n_visible, n_shallow), cn(n_shallow, n_deep))

    def log_amplitudes(self, V):
        if self.n_hidden_shallow + self.n_hidden_deep > ENUMERATION_GUARD:
            raise CapacityError(
                f"{self.n_hidden_shallow + self.n_hidden_deep} hidden units exceed guard {ENUMERATION_GUARD}"
            )
        V = np.atleast_2d(as_zero_one(V, self.n_visible)).astype(float)
        G = all_configs(self.n_hidden_deep).astype(float)  # (2^q, q)
        base = self.hidden_bias + V @ self.weights  # (B, l)
        theta = base[:, None, :] + (G @ self.deep_weights.T)[None, :, :]  # (B, 2^q, l)
        lg, gzero = log1p_exp(theta)
        x = (G @ self.deep_bias)[None, :] + lg.sum(axis=2)
        # a configuration g with a vanishing factor contributes nothing
        x = np.where(gzero.any(axis=2), -np.inf + 0j, x)
        allzero = np.all(np.isinf(x.real), axis=1)
        x = np.where(allzero[:, None], 0, x)
        val, zero = logsumexp_complex(np.where(np.isinf(x.real), -1e300, x), axis=1)
        zero = zero | allzero
        return V @ self.visible_bias + np.where(zero, 0, val), zero

    def log_amplitude(self, v) -> LogAmplitude:
        out, zero = self.log_amplitudes(as_zero_one(v, self.n_visible)[None, :])
        return LogAmplitude(complex(out[0]), bool(zero[0]))

    def to_json(self) -> dict:
        n, l, q = self.n_visible, self.n_hidden_shallow, self.n_hidden_deep
        weights = {(f"v{i}", f"h{j}"): complex(self.weights[i, j]) for i, j in zip(*np.nonzero(self.weights))}
        weights.update(
            {(f"h{j}", f"g{k}"): complex(self.deep_weights[j, k]) for j, k in zip(*np.nonzero(self.deep_weights))}
        )
        hidden = {f"h{j}": complex(self.hidden_bias[j]) for j in range(l)}
        hidden.update({f"g{k}": complex(self.deep_bias[k]) for k in range(q)})
        params = NetworkParameters({f"v{i}": complex(self.visible_bias[i]) for i in range(n)}, hidden, weights)
        return {"family": self.family, "hidden_domain": ZERO_ONE, "n_visible": n,
                "n_hidden": l, "n_deep": q, "parameters": params.to_json()}


def convert_hidden_domain(state: RbmState, target: str) -> tuple[RbmState, complex]:
    """Re-express an RBM with the other hidden-unit convention.

    Returns ``(new_state, log_c)`` with ``log psi_old(v) = log psi_new(v) + log_c``.
    Uses ``2 cosh(t) = e^{-t} (1 + e^{2t})``, i.e. ``h = 2h' - 1``.
    """
    _check_domain(target)
    if target == state.hidden_domain:
        return state, 0j
    a, b, w = state.visible_bias, state.hidden_bias, state.weights
    if target == ZERO_ONE:
        new = RbmState(a - w.sum(axis=1), 2 * b, 2 * w, ZERO_ONE)
        return new, complex(-b.sum())
    new = RbmState(a + w.sum(axis=1) / 2, b / 2, w / 2, PLUS_MINUS_ONE)
    return new, complex(b.sum() / 2)


def state_from_json(obj: dict):
    """Build an RBM/BM/DBM from its JSON form."""
    family = obj.get("family")
    params = NetworkParameters.from_json(obj["parameters"])
    domain = obj.get("hidden_domain", ZERO_ONE)
    n = int(obj["n_visible"])
    m = int(obj.get("n_hidden", 0))
    vec, blocks = _dense_from_params(params)
    a = _pad(vec.get("v"), n)
    b = _pad(vec.get("h"), m)
    if family == "rbm":
        return RbmState(a, b, _pad2(blocks["vh"], n, m), domain)
    if family == "bm":
        return BmState(a, b, _pad2(blocks["vh"], n, m), _pad2(blocks["vv"], n, n),
                       _pad2(blocks["hh"], m, m), domain)
    if family == "dbm":
        q = int(obj.get("n_deep", 0))
        return DbmState(a, b, _pad(vec.get("g"), q), _pad2(blocks["vh"], n, m), _pad2(blocks["hg"], m, q))
    raise ConfigurationError(f"unknown model family {family!r}")


def _pad(vec, n):
    out = np.zeros(n, dtype=complex)
    if vec is not None:
        out[: len(vec)] = vec
    return out


def _pad2(mat, n, m):
    out = np.zeros((n, m), dtype=complex)
    out[: mat.shape[0], : mat.shape[1]] = mat
    return out


# -- functional entry points ------------------------------------------------


def rbm_log_amplitude(state: RbmState, v) -> LogAmplitude:
    return state.log_amplitude(v)


def rbm_log_derivatives(state: RbmState, v) -> np.ndarray:
    """Gradient of log psi at one configuration, ordered (a, b, W row-major)."""
    return state.log_derivatives(as_zero_one(v, state.n_visible)[None, :])[0]


def bm_log_amplitude(state: BmState, v) -> LogAmplitude:
    return state.log_amplitude(v)


def dbm_log_amplitude_exact(state: DbmState, v) -> LogAmplitude:
    return state.log_amplitude(v)
