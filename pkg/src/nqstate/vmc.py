"""Metropolis sampling, energy/gradient estimators and ground-state training.

Complex parameters are optimized as independent real and imaginary parts.
Gradients are returned as ``dE/dRe + i dE/dIm``, so a descent step on a
complex parameter vector is simply ``theta - eta * g``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .core import all_configs, as_zero_one, config_index, index_to_config
from .errors import ConfigurationError, DomainError, TrainingError, ZeroAmplitudeError
from .exact import MATERIALIZE_GUARD
from .hamiltonians import local_energies
from .states import ZERO_ONE, RbmState

FLIP = "flip"
EXCHANGE = "exchange"
TABLE_SAMPLER_MAX_SITES = 20


# ---------------------------------------------------------------------------
# Metropolis chain


@dataclass
class MetropolisChain:
    current: np.ndarray
    current_log_amp: complex
    rng_seed: int
    rng: np.random.Generator = field(repr=False, default=None)
    step_count: int = 0
    accept_count: int = 0
    move: str = FLIP

    @classmethod
    def start(cls, psi, seed: int, initial=None, move: str = FLIP) -> "MetropolisChain":
        rng = np.random.default_rng(seed)
        v = _initial_config(psi, rng, initial)
        la = psi.log_amplitude(v)
        return cls(v, la.value, seed, rng, move=move)

    @property
    def acceptance(self) -> float:
        return self.accept_count / self.step_count if self.step_count else 0.0


def _initial_config(psi, rng, initial=None) -> np.ndarray:
    n = psi.n_visible
    if initial is not None:
        v = as_zero_one(initial, n).copy()
        if psi.log_amplitude(v).is_zero:
            raise ZeroAmplitudeError("initial configuration has zero amplitude")
        return v
    for _ in range(100):
        v = rng.integers(0, 2, n).astype(np.int8)
        if not psi.log_amplitude(v).is_zero:
            return v
    if n <= MATERIALIZE_GUARD:
        log, zero = psi.log_amplitudes(all_configs(n))
        if not np.all(zero):
            k = int(np.argmax(np.where(zero, -np.inf, np.real(log))))
            return index_to_config(k, n)
    raise ZeroAmplitudeError("could not find a configuration with non-zero amplitude")


def metropolis_step(chain: MetropolisChain, psi) -> MetropolisChain:
    """One proposal/accept step; the chain is updated in place and returned.

    Proposals flip one uniformly chosen site, or for ``move='exchange'`` swap
    two sites holding different values. Zero-amplitude proposals are rejected.
    """
    n = chain.current.size
    prop = chain.current.copy()
    i = int(chain.rng.integers(n))
    if chain.move == EXCHANGE:
        j = int(chain.rng.integers(n))
        u = chain.rng.random()
        if prop[i] == prop[j]:
            chain.step_count += 1
            return chain
        prop[i], prop[j] = prop[j], prop[i]
    else:
        u = chain.rng.random()
        prop[i] ^= 1
    chain.step_count += 1
    la = psi.log_amplitude(prop)
    if la.is_zero:
        return chain
    if u < math.exp(min(2.0 * (la.value - chain.current_log_amp).real, 700.0)):
        chain.current = prop
        chain.current_log_amp = la.value
        chain.accept_count += 1
    return chain


def _streams(rng, n, n_steps, move):
    sites = rng.integers(0, n, n_steps, dtype=np.int64)
    partners = rng.integers(0, n, n_steps, dtype=np.int64) if move == EXCHANGE else np.zeros(n_steps, np.int64)
    uniforms = rng.random(n_steps)
    return sites, partners, uniforms


def sample_configurations(psi, n_samples: int, seed: int, *, thin: int | None = None,
                          burn_fraction: float = 0.1, move: str = FLIP, initial=None,
                          backend: str | None = None) -> tuple[np.ndarray, float]:
    """Draw ``n_samples`` configurations distributed as |psi|^2.

    A sample is kept every ``thin`` proposals (default: one per site) after
    discarding ``burn_fraction * n_samples`` samples' worth of steps.
    Returns ``(samples, acceptance_rate)``.
    """
    if move not in (FLIP, EXCHANGE):
        raise ConfigurationError(f"unknown move {move!r}")
    n = psi.n_visible
    thin = n if thin is None else int(thin)
    burn = int(math.ceil(burn_fraction * n_samples)) * thin
    n_steps = burn + n_samples * thin
    rng = np.random.default_rng(seed)
    v0 = _initial_config(psi, rng, initial)
    sites, partners, uniforms = _streams(rng, n, n_steps, move)
    kern = _backend.get_kernels(backend)
    exchange = move == EXCHANGE
    if isinstance(psi, RbmState):
        w = psi.weights
        samples, acc, _ = kern.rbm_metropolis(
            np.ascontiguousarray(psi.visible_bias.real), np.ascontiguousarray(psi.hidden_bias.real),
            np.ascontiguousarray(psi.hidden_bias.imag), np.ascontiguousarray(w.real),
            np.ascontiguousarray(w.imag), np.ascontiguousarray(v0, dtype=np.int8),
            psi.hidden_domain != ZERO_ONE, sites, partners, uniforms, exchange, burn, thin,
        )
    elif n <= TABLE_SAMPLER_MAX_SITES:
        log, zero = psi.log_amplitudes(all_configs(n))
        log_prob = np.where(zero, -np.inf, 2.0 * np.real(log))
        idx, acc, _ = kern.table_metropolis(
            np.ascontiguousarray(log_prob), n, int(config_index(v0)), sites, partners, uniforms,
            exchange, burn, thin,
        )
        samples = all_configs(n)[idx] if n <= 16 else np.array([index_to_config(k, n) for k in idx])
    else:
        chain = MetropolisChain(v0, psi.log_amplitude(v0).value, seed, rng, move=move)
        samples = np.empty((n_samples, n), dtype=np.int8)
        rec = 0
        for t in range(n_steps):
            metropolis_step(chain, psi)
            if t >= burn and (t - burn + 1) % thin == 0:
                samples[rec] = chain.current
                rec += 1
        acc = chain.accept_count
    return samples, acc / n_steps if n_steps else 0.0


# ---------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class EnergyEstimate:
    mean: complex
    stderr: float
    acceptance: float = 1.0


def binned_stderr(x, n_bins: int = 50) -> float:
    """Standard error of the mean from ``n_bins`` consecutive bins."""
    x = np.asarray(x)
    n_bins = min(n_bins, x.size)
    if n_bins < 2:
        return 0.0
    usable = (x.size // n_bins) * n_bins
    bins = x[:usable].reshape(n_bins, -1).mean(axis=1)
    return float(np.std(bins.real, ddof=1) / math.sqrt(n_bins))


def _weighted_batch(psi, H, n_samples, seed, full_sum, move=FLIP, n_chains=1, backend=None):
    """Configurations, their weights, local energies and acceptance."""
    n = psi.n_visible
    if full_sum:
        if n > MATERIALIZE_GUARD:
            raise DomainError(f"full-sum mode limited to {MATERIALIZE_GUARD} sites")
        V = all_configs(n)
        log, zero = psi.log_amplitudes(V)
        amp = np.where(zero, 0, np.exp(np.where(zero, 0, log - log.real[~zero].max())))
        # amplitudes far below the largest one underflow and carry no weight
        zero = zero | (amp == 0)
        # E_loc(v) = (H psi)(v) / psi(v) on the support of psi
        eloc = (H.to_sparse() @ amp)[~zero] / amp[~zero]
        w = np.abs(amp[~zero]) ** 2
        return V[~zero], w / w.sum(), eloc, 1.0
    seeds = np.random.SeedSequence(seed).spawn(n_chains)
    per_chain = int(math.ceil(n_samples / n_chains))
    parts, accs = [], []
    for ss in seeds:
        s, a = sample_configurations(psi, per_chain, int(ss.generate_state(1)[0]), move=move, backend=backend)
        parts.append(s)
        accs.append(a)
    V = np.concatenate(parts)[:n_samples]
    w = np.full(V.shape[0], 1.0 / V.shape[0])
    return V, w, local_energies(H, psi, V), float(np.mean(accs))


def estimate_energy(psi, H, n_samples: int = 1000, seed: int = 0, *, full_sum: bool = False,
                    move: str = FLIP, n_chains: int = 1) -> EnergyEstimate:
    """Variational energy as the |psi|^2-weighted mean of the local energy.

    ``full_sum`` replaces sampling by an exact sum over all configurations.
    """
    V, w, eloc, acc = _weighted_batch(psi, H, n_samples, seed, full_sum, move, n_chains)
    mean = complex(np.sum(w * eloc))
    return EnergyEstimate(mean, 0.0 if full_sum else binned_stderr(eloc), acc)


def _forces(psi, V, w, eloc):
    O = psi.log_derivatives(V)
    e_mean = np.sum(w * eloc)
    o_mean = w @ O
    force = (w * eloc) @ O.conj() - e_mean * o_mean.conj()
    return O, o_mean, e_mean, force


def estimate_gradient(psi, H, n_samples: int = 1000, seed: int = 0, *, full_sum: bool = False,
                      move: str = FLIP, n_chains: int = 1) -> np.ndarray:
    """Energy gradient ``2 (<E_loc O*> - <E_loc><O*>)`` with ``O = d log psi / d theta``."""
    V, w, eloc, _ = _weighted_batch(psi, H, n_samples, seed, full_sum, move, n_chains)
    return 2.0 * _forces(psi, V, w, eloc)[3]


def per_sample_gradients(psi, V, eloc) -> np.ndarray:
    """Per-sample terms ``2 (E_loc(v) - <E_loc>) O*(v)``; their mean is the gradient."""
    O = psi.log_derivatives(V)
    return 2.0 * (eloc - eloc.mean())[:, None] * O.conj()


# ---------------------------------------------------------------------------
# updates


def _clip(g, clip):
    if clip is not None:
        nrm = np.linalg.norm(g)
        if nrm > clip:
            g = g * (clip / nrm)
    return g


def gd_update(params, gradient, eta: float, clip: float | None = None):
    """theta' = theta - eta * dC/dtheta, optionally clipping the gradient norm first."""
    g = np.asarray(gradient)
    if not np.all(np.isfinite(g)):
        raise TrainingError("non-finite gradient entries")
    return np.asarray(params) - eta * _clip(g, clip)


def sgd_update(params, gradients, eta: float, clip: float | None = None):
    """theta' = theta - (eta / N') sum_i dC(X_i)/dtheta over a batch of N' gradients."""
    g = np.asarray(gradients)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape[0] == 0:
        raise DomainError("empty gradient batch")
    if not np.all(np.isfinite(g)):
        raise TrainingError("non-finite gradient entries")
    return np.asarray(params) - eta * _clip(g.sum(axis=0) / g.shape[0], clip)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    """VMC training settings.

    ``sweeps`` is the number of parameter updates, ``samples_per_step`` the
    Monte Carlo batch N' per update, and ``batch_size`` the number of
    independent Markov chains that produce it. ``optimizer='sr'`` preconditions
    the gradient with the (shifted) quantum geometric tensor before the update.
    """

    learning_rate: float = 0.05
    batch_size: int = 1
    sweeps: int = 500
    samples_per_step: int = 1000
    seed: int = 0
    gradient_clip: float | None = None
    optimizer: str = "sgd"
    sr_shift: float = 1e-3
    full_sum: bool = False
    move: str = FLIP

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.batch_size < 1 or self.samples_per_step < 1:
            raise ConfigurationError("batch_size and samples_per_step must be >= 1")
        if self.optimizer not in ("sgd", "sr"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.move not in (FLIP, EXCHANGE):
            raise ConfigurationError(f"unknown move {self.move!r}")
        if self.gradient_clip is not None and not self.gradient_clip > 0:
            raise ConfigurationError("gradient_clip must be positive")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    mean: complex
    stderr: float
    acceptance: float


@dataclass
class GroundStateResult:
    state: object
    best_energy: float
    trace: list

    def trace_csv(self) -> str:
        return trace_to_csv(self.trace)


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    buf.write("iter,mean_re,mean_im,stderr,acceptance\n")
    for row in trace:
        buf.write(f"{row.iteration},{row.mean.real:.17g},{row.mean.imag:.17g},{row.stderr:.17g},{row.acceptance:.17g}\n")
    return buf.getvalue()


def solve_ground_state(H, psi0, config: TrainConfig, callback=None) -> GroundStateResult:
    """Minimize the variational energy of ``psi0`` under ``H``.

    Each iteration estimates the energy and per-sample gradients, optionally
    applies stochastic reconfiguration, and takes an averaged SGD step.
    The best (lowest mean energy) parameters seen are returned.
    """
    psi = psi0
    trace = []
    best_state, best_energy, initial = psi0, math.inf, None
    for it in range(config.sweeps):
        seed = int(np.random.SeedSequence([config.seed, it]).generate_state(1)[0])
        V, w, eloc, acc = _weighted_batch(
            psi, H, config.samples_per_step, seed, config.full_sum, config.move, config.batch_size
        )
        mean = complex(np.sum(w * eloc))
        if not np.isfinite(mean):
            raise TrainingError(f"non-finite energy at iteration {it}")
        stderr = 0.0 if config.full_sum else binned_stderr(eloc)
        trace.append(TraceRow(it, mean, stderr, acc))
        if callback is not None:
            callback(trace[-1])
        if initial is None:
            initial = mean.real
        elif mean.real > initial + 10.0 * max(abs(initial), 1.0):
            raise TrainingError(
                f"diverged at iteration {it}: energy {mean.real:.6g} vs initial {initial:.6g}"
            )
        if mean.real < best_energy:
            best_energy, best_state = mean.real, psi
        O, o_mean, e_mean, force = _forces(psi, V, w, eloc)
        if config.optimizer == "sr":
            Oc = O - o_mean
            S = (Oc.conj().T * w) @ Oc
            S[np.diag_indices_from(S)] += config.sr_shift
            direction = np.linalg.solve(S, force)
            new = gd_update(psi.parameters(), direction, config.learning_rate, config.gradient_clip)
        else:
            # per-sample terms 2 (E_loc - <E>) O* weighted to batch-mean form
            grads = 2.0 * (w * V.shape[0])[:, None] * (eloc - e_mean)[:, None] * O.conj()
            new = sgd_update(psi.parameters(), grads, config.learning_rate, config.gradient_clip)
        psi = psi.with_parameters(new)
    return GroundStateResult(best_state, best_energy, trace)
