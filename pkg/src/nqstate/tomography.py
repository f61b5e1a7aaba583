"""Neural density operators by latent-space purification, and tomography.

Each of the two networks is a real-valued RBM over visible units ``v``,
hidden units ``h`` and environment units ``e``. Environment units couple to
the visible units only. With ``P(v, e) = sum_h exp(-E(v, h, e))`` the
purified state is

    Psi(v, e) = sqrt(P_amp(v, e) / Z_amp) * exp(i log P_phase(v, e) / 2)

and tracing out ``e`` gives the density matrix. Without environment units
the model is a pure state.

Tomography fits the model to measured outcome tables in local Pauli bases by
minimizing a sum of KL divergences. Gradients are exact: they are taken
through the full probability tables.
"""
from __future__ import annotations

import io
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import all_configs
from .errors import (
    CapacityError,
    ConfigurationError,
    ConsistencyError,
    DomainError,
    ShapeError,
    TrainingError,
)
from .exact import DenseState, fidelity, trace_distance

PURIFICATION_GUARD = 14
DENSITY_GUARD = 10
NORM_TOL = 1e-9
BASES = "ZXY"

_SQ2 = 1.0 / math.sqrt(2.0)
ROTATIONS = {
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    # Hadamard times S-dagger
    "Y": np.array([[_SQ2, -1j * _SQ2], [_SQ2, 1j * _SQ2]], dtype=complex),
}


class InfiniteDivergenceError(TrainingError):
    """The model gives probability zero to an outcome seen in the data."""

    def __init__(self, basis):
        super().__init__(f"infinite divergence in basis {basis}: model probability 0 where data > 0")
        self.basis = basis


# ---------------------------------------------------------------------------
# networks


@dataclass
class LatentRbm:
    """Real RBM with hidden units and visible-coupled environment units."""

    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    weights: np.ndarray
    env_bias: np.ndarray
    env_weights: np.ndarray

    def __post_init__(self):
        self.visible_bias = np.asarray(self.visible_bias, dtype=float)
        self.hidden_bias = np.asarray(self.hidden_bias, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float).reshape(self.n_visible, self.n_hidden)
        self.env_bias = np.asarray(self.env_bias, dtype=float)
        self.env_weights = np.asarray(self.env_weights, dtype=float).reshape(self.n_visible, self.n_env)

    @property
    def n_visible(self):
        return self.visible_bias.size

    @property
    def n_hidden(self):
        return self.hidden_bias.size

    @property
    def n_env(self):
        return self.env_bias.size

    @property
    def n_params(self):
        n, m, l = self.n_visible, self.n_hidden, self.n_env
        return n + m + n * m + l + n * l

    @classmethod
    def random(cls, n_visible, n_hidden, n_env=0, rng=None, scale=0.01):
        rng = np.random.default_rng(rng)
        r = lambda *s: scale * rng.standard_normal(s)  # noqa: E731
        return cls(r(n_visible), r(n_hidden), r(n_visible, n_hidden), r(n_env), r(n_visible, n_env))

    @classmethod
    def zeros(cls, n_visible, n_hidden, n_env=0):
        return cls.random(n_visible, n_hidden, n_env, scale=0.0)

    def parameters(self) -> np.ndarray:
        return np.concatenate([self.visible_bias, self.hidden_bias, self.weights.ravel(),
                               self.env_bias, self.env_weights.ravel()])

    def with_parameters(self, vec) -> "LatentRbm":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ShapeError(f"parameter vector {vec.shape} != ({self.n_params},)")
        n, m, l = self.n_visible, self.n_hidden, self.n_env
        cuts = np.cumsum([n, m, n * m, l])
        a, b, w, d, u = np.split(vec, cuts)
        return LatentRbm(a, b, w, d, u)

    def _theta(self, V):
        return self.hidden_bias + V @ self.weights

    def log_prob(self, V, E) -> np.ndarray:
        """log P(v, e) for every pair of rows; shape (len(V), len(E))."""
        V, E = np.asarray(V, dtype=float), np.asarray(E, dtype=float)
        per_v = V @ self.visible_bias + np.logaddexp(0.0, self._theta(V)).sum(axis=1)
        return per_v[:, None] + (E @ self.env_bias)[None, :] + V @ self.env_weights @ E.T

    def log_derivatives(self, V, E) -> np.ndarray:
        """d log P / d params for every (v, e) pair; shape (len(V), len(E), n_params)."""
        V, E = np.asarray(V, dtype=float), np.asarray(E, dtype=float)
        nv, ne = V.shape[0], E.shape[0]
        sig = 1.0 / (1.0 + np.exp(-self._theta(V)))
        per_v = np.concatenate([V, sig, (V[:, :, None] * sig[:, None, :]).reshape(nv, -1)], axis=1)
        per_e = (V[:, None, :, None] * E[None, :, None, :]).reshape(nv, ne, -1)
        return np.concatenate([
            np.broadcast_to(per_v[:, None, :], (nv, ne, per_v.shape[1])),
            np.broadcast_to(E[None, :, :], (nv, ne, E.shape[1])),
            per_e,
        ], axis=2)

    def to_json(self) -> dict:
        return {"visible_bias": self.visible_bias.tolist(), "hidden_bias": self.hidden_bias.tolist(),
                "weights": self.weights.tolist(), "env_bias": self.env_bias.tolist(),
                "env_weights": self.env_weights.tolist()}

    @classmethod
    def from_json(cls, obj) -> "LatentRbm":
        n = len(obj["visible_bias"])
        return cls(obj["visible_bias"], obj["hidden_bias"], np.reshape(obj["weights"], (n, -1)),
                   obj["env_bias"], np.reshape(obj["env_weights"], (n, -1)))


@dataclass
class PurifiedRbm:
    """Amplitude and phase networks sharing visible and environment layers."""

    amp: LatentRbm
    phase: LatentRbm

    def __post_init__(self):
        if (self.amp.n_visible, self.amp.n_env) != (self.phase.n_visible, self.phase.n_env):
            raise ShapeError("amplitude and phase networks need the same visible and environment sizes")
        if self.amp.n_visible + self.amp.n_env > PURIFICATION_GUARD:
            raise CapacityError(f"visible + environment units exceed {PURIFICATION_GUARD}")

    @property
    def n_visible(self):
        return self.amp.n_visible

    @property
    def n_env(self):
        return self.amp.n_env

    @classmethod
    def random(cls, n_visible, n_hidden, n_env=0, rng=None, scale=0.01, n_hidden_phase=None):
        rng = np.random.default_rng(rng)
        mp = n_hidden if n_hidden_phase is None else n_hidden_phase
        return cls(LatentRbm.random(n_visible, n_hidden, n_env, rng, scale),
                   LatentRbm.random(n_visible, mp, n_env, rng, scale))

    def parameters(self) -> np.ndarray:
        return np.concatenate([self.amp.parameters(), self.phase.parameters()])

    def with_parameters(self, vec) -> "PurifiedRbm":
        k = self.amp.n_params
        return PurifiedRbm(self.amp.with_parameters(vec[:k]), self.phase.with_parameters(vec[k:]))

    def _tables(self):
        return all_configs(self.n_visible), all_configs(self.n_env)

    def psi_table(self) -> np.ndarray:
        """Normalized purified amplitudes, shape (2^n_visible, 2^n_env)."""
        V, E = self._tables()
        lp1 = self.amp.log_prob(V, E)
        lp2 = self.phase.log_prob(V, E)
        return np.exp(0.5 * (lp1 - logsumexp(lp1)) + 0.5j * lp2)

    def to_json(self) -> dict:
        return {"family": "purified-rbm", "amp": self.amp.to_json(), "phase": self.phase.to_json()}

    @classmethod
    def from_json(cls, obj) -> "PurifiedRbm":
        return cls(LatentRbm.from_json(obj["amp"]), LatentRbm.from_json(obj["phase"]))


def purified_amplitude(p: PurifiedRbm, v, e=()) -> complex:
    """Psi(v, e) with the amplitude network normalized exactly."""
    V, E = all_configs(p.n_visible), all_configs(p.n_env)
    lp1 = p.amp.log_prob(V, E)
    v = np.asarray(v, dtype=float)[None, :]
    e = np.asarray(e, dtype=float).reshape(1, p.n_env)
    l1 = p.amp.log_prob(v, e)[0, 0]
    l2 = p.phase.log_prob(v, e)[0, 0]
    return complex(np.exp(0.5 * (l1 - logsumexp(lp1)) + 0.5j * l2))


def check_density(rho, tol: float = 1e-10) -> np.ndarray:
    """Raise ConsistencyError unless ``rho`` is Hermitian, PSD and unit-trace."""
    rho = np.asarray(rho)
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ConsistencyError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ConsistencyError(f"density matrix trace {np.trace(rho).real:.12g} != 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ConsistencyError("density matrix has a negative eigenvalue")
    return rho


def density_matrix(p: PurifiedRbm) -> np.ndarray:
    """rho[v, v'] = sum_e Psi(v, e) conj(Psi(v', e)), trace one."""
    if p.n_visible > DENSITY_GUARD:
        raise CapacityError(f"density matrix limited to {DENSITY_GUARD} visible units")
    psi = p.psi_table()
    rho = psi @ psi.conj().T
    return check_density(rho / np.trace(rho).real)


def pure_state(p: PurifiedRbm) -> DenseState:
    if p.n_env:
        raise ShapeError("model has environment units; use density_matrix")
    return DenseState(p.psi_table()[:, 0], p.n_visible)


# ---------------------------------------------------------------------------
# measurements


def _check_basis(basis: str, n: int) -> str:
    basis = str(basis).upper()
    if len(basis) != n or any(c not in BASES for c in basis):
        raise ConfigurationError(f"basis {basis!r} must be {n} letters from {BASES}")
    return basis


def rotate(table, basis: str) -> np.ndarray:
    """Apply the per-site change-of-basis unitaries to the leading axis of ``table``.

    ``table`` has shape (2^n, ...) with the visible index first.
    """
    table = np.asarray(table, dtype=complex)
    n = len(basis)
    rest = table.shape[1:]
    x = table.reshape((2,) * n + rest)
    for k, c in enumerate(basis):
        if c != "Z":
            x = np.moveaxis(np.tensordot(ROTATIONS[c], x, axes=([1], [k])), 0, k)
    return x.reshape(table.shape)


def rotate_adjoint(table, basis: str) -> np.ndarray:
    table = np.asarray(table, dtype=complex)
    n = len(basis)
    rest = table.shape[1:]
    x = table.reshape((2,) * n + rest)
    for k, c in enumerate(basis):
        if c != "Z":
            x = np.moveaxis(np.tensordot(ROTATIONS[c].conj().T, x, axes=([1], [k])), 0, k)
    return x.reshape(table.shape)


def measurement_probabilities(state, basis: str) -> np.ndarray:
    """Outcome probabilities of a state vector or density matrix in a local Pauli basis."""
    if isinstance(state, DenseState):
        state = state.amplitudes
    arr = np.asarray(state, dtype=complex)
    n = int(round(math.log2(arr.shape[0])))
    basis = _check_basis(basis, n)
    if arr.ndim == 1:
        p = np.abs(rotate(arr, basis)) ** 2
    else:
        rotated = rotate(rotate(arr, basis).conj().T, basis).conj().T
        p = np.real(np.diagonal(rotated)).clip(min=0.0)
    return p / p.sum()


@dataclass
class MeasurementRecord:
    """Outcome table in one basis: exact probabilities or sampled counts."""

    basis: str
    probs: np.ndarray | None = None
    counts: np.ndarray | None = None
    shots: int | None = None

    def __post_init__(self):
        self.basis = str(self.basis).upper()
        if any(c not in BASES for c in self.basis):
            raise ConfigurationError(f"basis {self.basis!r} has letters outside {BASES}")
        if (self.probs is None) == (self.counts is None):
            raise ConfigurationError("give exactly one of probs or counts")
        size = 2 ** len(self.basis)
        if self.probs is not None:
            self.probs = np.asarray(self.probs, dtype=float)
            if self.probs.shape != (size,):
                raise ShapeError(f"basis {self.basis} needs {size} probabilities")
            if np.any(self.probs < 0) or abs(self.probs.sum() - 1) > NORM_TOL:
                raise DomainError(f"probabilities for basis {self.basis} are not normalized")
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (size,):
                raise ShapeError(f"basis {self.basis} needs {size} counts")
            if np.any(self.counts < 0):
                raise DomainError("counts must be non-negative")
            if self.shots is None:
                self.shots = int(self.counts.sum())
            if self.shots <= 0 or self.shots != self.counts.sum():
                raise DomainError(f"shots {self.shots} do not match the counts")

    @property
    def n_sites(self) -> int:
        return len(self.basis)

    def distribution(self) -> np.ndarray:
        return self.probs if self.probs is not None else self.counts / self.shots

    def to_json(self) -> dict:
        if self.probs is not None:
            return {"basis": self.basis, "probs": self.probs.tolist()}
        return {"basis": self.basis, "counts": self.counts.tolist(), "shots": int(self.shots)}

    @classmethod
    def from_json(cls, obj) -> "MeasurementRecord":
        extra = set(obj) - {"basis", "probs", "counts", "shots"}
        if extra:
            raise ConfigurationError(f"unknown record key {sorted(extra)[0]!r}")
        return cls(obj["basis"], obj.get("probs"), obj.get("counts"), obj.get("shots"))


def records_to_jsonl(records) -> str:
    return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in records)


def records_from_jsonl(text: str) -> list:
    out = []
    for no, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            try:
                out.append(MeasurementRecord.from_json(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"line {no}: {exc.msg}") from None
    return out


def all_bases(n: int) -> list:
    """All 3^n local Pauli settings."""
    return ["".join(t) for t in itertools.product(BASES, repeat=n)]


def records_from_state(state, bases=None, shots: int | None = None, rng=None) -> list:
    """Exact records, or multinomial counts when ``shots`` is given."""
    arr = state.amplitudes if isinstance(state, DenseState) else np.asarray(state)
    n = int(round(math.log2(arr.shape[0])))
    bases = all_bases(n) if bases is None else bases
    rng = np.random.default_rng(rng)
    out = []
    for b in bases:
        p = measurement_probabilities(arr, b)
        if shots is None:
            out.append(MeasurementRecord(b, probs=p))
        else:
            out.append(MeasurementRecord(b, counts=rng.multinomial(shots, p / p.sum()), shots=shots))
    return out


# ---------------------------------------------------------------------------
# objective


DATA_MODEL = "data_model"
MODEL_DATA = "model_data"


def _divergence_terms(q, p, direction, basis):
    """Value of one basis's KL and the coefficients c with dL = sum c dp."""
    if direction == DATA_MODEL:
        mask = q > 0
        if np.any(p[mask] <= 0):
            raise InfiniteDivergenceError(basis)
        value = float(np.sum(q[mask] * np.log(q[mask] / p[mask])))
        coef = np.where(mask, -q / np.where(mask, p, 1.0), 0.0)
    else:
        mask = p > 0
        if np.any(q[mask] <= 0):
            raise InfiniteDivergenceError(basis)
        ratio = np.log(np.where(mask, p, 1.0) / np.where(mask, q, 1.0))
        value = float(np.sum(np.where(mask, p * ratio, 0.0)))
        coef = np.where(mask, ratio, 0.0)
    return max(value, 0.0), coef


def divergence_and_gradient(model: PurifiedRbm, records, direction: str = DATA_MODEL,
                            amplitude_only: bool = False):
    """Total KL divergence over ``records`` and its exact gradient.

    Returns ``(value, gradient)`` with the gradient ordered like
    ``model.parameters()``.
    """
    if direction not in (DATA_MODEL, MODEL_DATA):
        raise ConfigurationError(f"unknown divergence direction {direction!r}")
    V, E = model._tables()
    psi = model.psi_table()
    total = 0.0
    G = np.zeros_like(psi)
    for rec in records:
        if rec.n_sites != model.n_visible:
            raise ShapeError(f"record basis {rec.basis} does not match {model.n_visible} sites")
        phi = rotate(psi, rec.basis)
        p = np.sum(np.abs(phi) ** 2, axis=1)
        value, coef = _divergence_terms(rec.distribution(), p, direction, rec.basis)
        total += value
        G += rotate_adjoint(coef[:, None] * phi, rec.basis)
    # dL = 2 Re sum conj(G) dPsi
    X = np.conj(G) * psi
    O1 = model.amp.log_derivatives(V, E)
    prob = np.abs(psi) ** 2
    O1c = O1 - np.tensordot(prob, O1, axes=([0, 1], [0, 1]))
    g_amp = np.tensordot(X.real, O1c, axes=([0, 1], [0, 1]))
    if amplitude_only:
        g_phase = np.zeros(model.phase.n_params)
    else:
        O2 = model.phase.log_derivatives(V, E)
        g_phase = -np.tensordot(X.imag, O2, axes=([0, 1], [0, 1]))
    return total, np.concatenate([g_amp, g_phase])


def total_divergence(model: PurifiedRbm, records, direction: str = DATA_MODEL) -> float:
    psi = model.psi_table()
    total = 0.0
    for rec in records:
        p = np.sum(np.abs(rotate(psi, rec.basis)) ** 2, axis=1)
        total += _divergence_terms(rec.distribution(), p, direction, rec.basis)[0]
    return total


# ---------------------------------------------------------------------------
# training


@dataclass
class TomoConfig:
    """Tomography training settings.

    ``warm_start`` epochs first fit only the amplitude network to the
    all-Z record (when present). ``optimizer='gd'`` halves the step size
    whenever an update would increase the divergence.
    """

    learning_rate: float = 0.05
    epochs: int = 2000
    optimizer: str = "adam"
    warm_start: int = 0
    direction: str = DATA_MODEL
    tol: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    min_learning_rate: float = 1e-12

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.optimizer not in ("adam", "gd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.direction not in (DATA_MODEL, MODEL_DATA):
            raise ConfigurationError(f"unknown divergence direction {self.direction!r}")
        if self.epochs < 0 or self.warm_start < 0:
            raise ConfigurationError("epochs and warm_start must be non-negative")


@dataclass
class TomoResult:
    model: PurifiedRbm
    divergence: list = field(default_factory=list)
    metric: list = field(default_factory=list)  # fidelity (pure) or trace distance (mixed)

    def trace_csv(self, metric_name: str) -> str:
        buf = io.StringIO()
        buf.write(f"epoch,divergence,{metric_name}\n")
        for k, d in enumerate(self.divergence):
            m = self.metric[k] if k < len(self.metric) else float("nan")
            buf.write(f"{k},{d:.17g},{m:.17g}\n")
        return buf.getvalue()


class _Adam:
    def __init__(self, size, lr, b1, b2, eps=1e-8):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps

    def step(self, x, g):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        mh = self.m / (1 - self.b1 ** self.t)
        vh = self.v / (1 - self.b2 ** self.t)
        return x - self.lr * mh / (np.sqrt(vh) + self.eps)


def _fit(model, records, config: TomoConfig, epochs, amplitude_only, metric_fn, result):
    x = model.parameters()
    if epochs == 0:
        return model
    adam = _Adam(x.size, config.learning_rate, config.beta1, config.beta2)
    lr = config.learning_rate
    value, grad = divergence_and_gradient(model, records, config.direction, amplitude_only)
    for _ in range(epochs):
        if not np.all(np.isfinite(grad)):
            raise TrainingError("non-finite divergence gradient")
        result.divergence.append(value)
        if metric_fn is not None:
            result.metric.append(metric_fn(model))
        if value <= config.tol:
            return model
        if config.optimizer == "adam":
            x = adam.step(x, grad)
            model = model.with_parameters(x)
            value, grad = divergence_and_gradient(model, records, config.direction, amplitude_only)
            continue
        while True:
            trial = model.with_parameters(x - lr * grad)
            try:
                t_value, t_grad = divergence_and_gradient(trial, records, config.direction, amplitude_only)
            except InfiniteDivergenceError:
                t_value = math.inf
            if t_value <= value:
                break
            lr *= 0.5
            if lr < config.min_learning_rate:
                return model
        x, model, value, grad = x - lr * grad, trial, t_value, t_grad
    result.divergence.append(value)
    if metric_fn is not None:
        result.metric.append(metric_fn(model))
    return model


def _train(records, model, config, metric_fn):
    if not records:
        raise DomainError("no measurement records given")
    result = TomoResult(model)
    z_only = [r for r in records if set(r.basis) == {"Z"}]
    if config.warm_start and z_only:
        warm = TomoResult(model)
        model = _fit(model, z_only, config, config.warm_start, True, None, warm)
    result.model = _fit(model, records, config, config.epochs, False, metric_fn, result)
    return result


def tomo_pure(records, model: PurifiedRbm, config: TomoConfig, target: DenseState | None = None) -> TomoResult:
    """Fit a pure amplitude/phase model to measurement records.

    With a ``target`` the per-epoch fidelity is recorded as the metric.
    """
    if model.n_env:
        raise ShapeError("pure-state tomography takes a model without environment units")
    fn = None if target is None else (lambda m: fidelity(pure_state(m), target))
    return _train(records, model, config, fn)


def tomo_mixed(records, model: PurifiedRbm, config: TomoConfig, target=None) -> TomoResult:
    """Fit a purified model; with a target density matrix, record trace distance."""
    fn = None if target is None else (lambda m: trace_distance(density_matrix(m), target))
    return _train(records, model, config, fn)

