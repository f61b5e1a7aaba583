"""Shared configuration/parameter types, complex activations and the
feed-forward network state.

Basis ordering is big-endian everywhere in the package: site 0 is the most
significant bit of a configuration's integer index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, ShapeError, SingularityError

ZERO_ONE = "zero-one"
PLUS_MINUS_ONE = "plus-minus-one"

POLE_TOL = 1e-12


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class SpinConfiguration:
    """Site values with an explicit convention (``zero-one`` or ``plus-minus-one``).

    Under the zero-one convention ``v = 0`` is the +1 eigenstate of Pauli Z,
    i.e. ``z = 1 - 2 v``.
    """

    values: tuple
    convention: str = ZERO_ONE

    def __post_init__(self):
        vals = tuple(int(x) for x in self.values)
        allowed = {0, 1} if self.convention == ZERO_ONE else {-1, 1}
        if self.convention not in (ZERO_ONE, PLUS_MINUS_ONE):
            raise ConfigurationError(f"unknown convention {self.convention!r}")
        if not set(vals) <= allowed:
            raise DomainError(f"values {vals} not in {sorted(allowed)} under {self.convention}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def to_zero_one(self) -> np.ndarray:
        v = np.asarray(self.values, dtype=np.int8)
        if self.convention == PLUS_MINUS_ONE:
            v = ((1 - v) // 2).astype(np.int8)
        return v

    def to_plus_minus_one(self) -> np.ndarray:
        v = np.asarray(self.values, dtype=np.int8)
        if self.convention == ZERO_ONE:
            v = (1 - 2 * v).astype(np.int8)
        return v

    @property
    def index(self) -> int:
        return int(config_index(self.to_zero_one()))

    @classmethod
    def from_index(cls, index: int, n: int) -> "SpinConfiguration":
        return cls(tuple(int(b) for b in index_to_config(index, n)))


def as_zero_one(v, n: int | None = None) -> np.ndarray:
    """Coerce a SpinConfiguration or 0/1 array(-like) to an int8 array.

    Accepts a single configuration (1-D) or a batch (2-D).
    """
    if isinstance(v, SpinConfiguration):
        arr = v.to_zero_one()
    else:
        arr = np.asarray(v)
        if arr.size and not np.all((arr == 0) | (arr == 1)):
            raise DomainError("configuration entries must be 0 or 1")
        arr = arr.astype(np.int8)
    if n is not None and arr.shape[-1] != n:
        raise ShapeError(f"configuration length {arr.shape[-1]} != {n}")
    return arr


def all_configs(n: int) -> np.ndarray:
    """All 2**n zero-one configurations in big-endian index order."""
    idx = np.arange(2**n, dtype=np.int64)
    shifts = n - 1 - np.arange(n)
    return ((idx[:, None] >> shifts) & 1).astype(np.int8)


def config_index(v) -> np.ndarray | int:
    v = np.asarray(v, dtype=np.int64)
    n = v.shape[-1]
    weights = 1 << (n - 1 - np.arange(n, dtype=np.int64))
    return v @ weights


def index_to_config(index: int, n: int) -> np.ndarray:
    return ((int(index) >> (n - 1 - np.arange(n))) & 1).astype(np.int8)


# ---------------------------------------------------------------------------
# JSON helpers


def complex_to_json(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def complex_from_json(pair) -> complex:
    if isinstance(pair, (int, float)):
        return complex(pair)
    re, im = pair
    return complex(float(re), float(im))


def array_to_json(arr) -> list:
    arr = np.asarray(arr, dtype=complex)
    if arr.ndim == 0:
        return complex_to_json(arr)
    return [array_to_json(x) for x in arr]


def array_from_json(obj) -> np.ndarray:
    def conv(o):
        if isinstance(o, list) and len(o) == 2 and all(isinstance(x, (int, float)) for x in o):
            return complex(o[0], o[1])
        return [conv(x) for x in o]

    return np.asarray(conv(obj), dtype=complex)


@dataclass
class NetworkParameters:
    """Complex weights and biases keyed by vertex names (``v0``, ``h3``, ``g1``, ``e0``).

    ``weights`` maps an undirected edge ``(u, w)`` to its complex weight.
    """

    visible_biases: dict = field(default_factory=dict)
    hidden_biases: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        vertices = set(self.visible_biases) | set(self.hidden_biases)
        seen = set()
        for u, w in self.weights:
            if u not in vertices or w not in vertices:
                raise ConfigurationError(f"weight ({u}, {w}) references an undeclared vertex")
            if u == w:
                raise ConfigurationError(f"self-loop on {u}")
            key = frozenset((u, w))
            if key in seen:
                raise ConfigurationError(f"duplicate undirected edge ({u}, {w})")
            seen.add(key)

    def to_json(self) -> dict:
        return {
            "visible_biases": {k: complex_to_json(x) for k, x in self.visible_biases.items()},
            "hidden_biases": {k: complex_to_json(x) for k, x in self.hidden_biases.items()},
            "weights": {f"{u}-{w}": complex_to_json(x) for (u, w), x in self.weights.items()},
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "NetworkParameters":
        weights = {}
        for key, val in obj.get("weights", {}).items():
            u, w = key.split("-")
            weights[(u, w)] = complex_from_json(val)
        return cls(
            {k: complex_from_json(x) for k, x in obj.get("visible_biases", {}).items()},
            {k: complex_from_json(x) for k, x in obj.get("hidden_biases", {}).items()},
            weights,
        )


def vertex_index(name: str) -> tuple[str, int]:
    """Split ``'h12'`` into ``('h', 12)``."""
    prefix = name.rstrip("0123456789")
    if not prefix or prefix == name:
        raise ConfigurationError(f"bad vertex name {name!r}")
    return prefix, int(name[len(prefix):])


# ---------------------------------------------------------------------------
# activations

ACTIVATIONS = ("logistic", "tanh", "cos", "relu", "softplus", "elu", "heaviside", "smoothed-step")


def parse_activation(tag: str) -> tuple[str, float | None]:
    """``'elu:0.5'`` -> ``('elu', 0.5)``; ``'tanh'`` -> ``('tanh', None)``."""
    name, _, arg = tag.partition(":")
    name = name.strip().lower()
    if name not in ACTIVATIONS:
        raise ConfigurationError(f"unknown activation {tag!r}")
    param = float(arg) if arg else None
    if name == "elu" and param is None:
        param = 1.0
    if name == "smoothed-step" and param is None:
        raise ConfigurationError("smoothed-step needs a width, e.g. 'smoothed-step:1.0'")
    return name, param


def _check_pole(denom, what):
    if np.any(np.abs(denom) < POLE_TOL):
        raise SingularityError(f"{what} evaluated at a pole")


def _logistic(z):
    z = np.asarray(z, dtype=complex)
    pos = z.real >= 0
    # e^{-z} for Re z >= 0, e^{z} otherwise: never overflows
    e = np.exp(np.where(pos, -z, z))
    denom = 1.0 + e
    _check_pole(denom, "logistic")
    out = np.where(pos, 1.0 / denom, e / denom)
    return out


def _tanh(z):
    z = np.asarray(z, dtype=complex)
    # poles only on the imaginary axis, where cosh z = cos(Im z)
    _check_pole(np.where(np.abs(z.real) < 1.0, np.cosh(np.where(np.abs(z.real) < 1.0, z, 0)), 1.0), "tanh")
    return np.tanh(z)


def _softplus(z):
    z = np.asarray(z, dtype=complex)
    pos = z.real > 0
    e = np.exp(np.where(pos, -z, z))
    _check_pole(1.0 + e, "softplus")
    return np.where(pos, z + np.log1p(e), np.log1p(e))


def activate(tag: str, z, param: float | None = None):
    """Evaluate an activation on a complex scalar or array.

    Real-valued activations are continued to complex arguments by their
    closed form. ``heaviside`` and ``relu`` act on the real part only, and
    ``smoothed-step`` only accepts real input.

    Raises:
        ConfigurationError: unknown tag.
        SingularityError: argument at a pole of logistic/tanh/softplus.
    """
    name, tag_param = parse_activation(tag)
    if param is None:
        param = tag_param
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=complex)
    if name == "logistic":
        out = _logistic(z)
    elif name == "tanh":
        out = _tanh(z)
    elif name == "cos":
        out = np.cos(z)
    elif name == "relu":
        out = np.maximum(z.real, 0.0).astype(complex)
    elif name == "softplus":
        out = _softplus(z)
    elif name == "elu":
        out = np.where(z.real >= 0, z, param * (np.exp(np.minimum(z.real, 0) + 1j * z.imag) - 1))
    elif name == "heaviside":
        out = (z.real > 0).astype(complex)
    else:  # smoothed-step
        if np.any(z.imag != 0):
            raise DomainError("smoothed-step is defined for real arguments only")
        out = np.asarray(smoothed_step(param, z.real), dtype=complex)
    return complex(out) if scalar else out


def smoothed_step(a: float, x):
    """Step function smoothed by a triangular kernel of half-width ``a/2``.

    The convolution of the unit step with the kernel is the kernel's CDF,
    piecewise quadratic: 0 below ``-a/2``, 1 above ``a/2``, C^1 in between.
    """
    if not a > 0:
        raise DomainError(f"smoothing width must be positive, got {a}")
    x = np.asarray(x, dtype=float)
    half = a / 2
    left = 2.0 * (x + half) ** 2 / a**2
    right = 1.0 - 2.0 * (half - x) ** 2 / a**2
    out = np.where(x <= -half, 0.0, np.where(x >= half, 1.0, np.where(x <= 0, left, right)))
    return float(out) if out.ndim == 0 else out


def smoothing_kernel(a: float, x):
    """Triangular kernel with support [-a/2, a/2] and unit integral."""
    if not a > 0:
        raise DomainError(f"smoothing width must be positive, got {a}")
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= a / 2, 2.0 / a - 4.0 * np.abs(x) / a**2, 0.0)
    return float(out) if out.ndim == 0 else out


NAND_WEIGHTS = (-2.0, -2.0)
NAND_BIAS = -3.0


def perceptron_nand(x1: int, x2: int) -> int:
    """A single Heaviside neuron with weights (-2, -2) and bias -3."""
    if x1 not in (0, 1) or x2 not in (0, 1):
        raise DomainError("perceptron inputs must be bits")
    s = x1 * NAND_WEIGHTS[0] + x2 * NAND_WEIGHTS[1] - NAND_BIAS
    return int(activate("heaviside", s).real)


# ---------------------------------------------------------------------------
# feed-forward network state


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (n_in, n_out)
    bias: np.ndarray  # (n_out,)
    activation: str = "logistic"

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=complex))
        b = np.atleast_1d(np.asarray(self.bias, dtype=complex))
        if w.shape[1] != b.shape[0]:
            raise ShapeError(f"weights {w.shape} incompatible with bias {b.shape}")
        parse_activation(self.activation)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)


class FeedForwardNet:
    """Fully connected complex network; each neuron computes f(sum_i w_i x_i - b)."""

    def __init__(self, layers: Sequence[Layer]):
        layers = list(layers)
        if not layers:
            raise ShapeError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.weights.shape[1] != nxt.weights.shape[0]:
                raise ShapeError(
                    f"layer output {prev.weights.shape[1]} does not feed input {nxt.weights.shape[0]}"
                )
        if layers[-1].weights.shape[1] != 1:
            raise ShapeError("final layer must have a single output neuron")
        self.layers = tuple(layers)

    @property
    def n_visible(self) -> int:
        return self.layers[0].weights.shape[0]

    def forward(self, V) -> np.ndarray:
        x = np.asarray(V, dtype=complex)
        if x.shape[-1] != self.n_visible:
            raise ShapeError(f"input dimension {x.shape[-1]} != {self.n_visible}")
        for layer in self.layers:
            x = activate(layer.activation, x @ layer.weights - layer.bias)
        return x[..., 0]

    def log_amplitudes(self, V):
        amp = self.forward(as_zero_one(V, self.n_visible))
        zero = amp == 0
        return np.log(np.where(zero, 1.0, amp)), zero

    def to_json(self) -> dict:
        return {
            "family": "ffn",
            "layers": [
                {
                    "index": k,
                    "weights": array_to_json(layer.weights),
                    "bias": array_to_json(layer.bias),
                    "activation": layer.activation,
                }
                for k, layer in enumerate(self.layers)
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "FeedForwardNet":
        layers = sorted(obj["layers"], key=lambda d: d["index"])
        return cls(
            [Layer(array_from_json(d["weights"]), array_from_json(d["bias"]), d["activation"]) for d in layers]
        )


def ffn_amplitude(net: FeedForwardNet, v) -> complex:
    """Amplitude of configuration ``v`` by forward propagation."""
    return complex(net.forward(as_zero_one(v, net.n_visible)))


def two_qubit_logistic_net(hidden_weights, hidden_bias, out_weights, out_bias) -> FeedForwardNet:
    """Two inputs, three logistic hidden neurons, one logistic output neuron."""
    return FeedForwardNet(
        [
            Layer(np.reshape(hidden_weights, (2, 3)), np.reshape(hidden_bias, (3,)), "logistic"),
            Layer(np.reshape(out_weights, (3, 1)), np.reshape(out_bias, (1,)), "logistic"),
        ]
    )


def dumps(obj: Mapping) -> str:
    """Deterministic JSON text (sorted keys, fixed separators)."""
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"
