"""Brute-force ground truth: dense states, exact diagonalization, fidelity, KL."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .core import all_configs, as_zero_one, config_index
from .errors import CapacityError, ConsistencyError, DomainError, ShapeError
from .states import LogAmplitude

MATERIALIZE_GUARD = 14
DENSE_EIGH_MAX_SITES = 11


@dataclass
class DenseState:
    """Amplitudes over all 2**n configurations, big-endian order."""

    amplitudes: np.ndarray
    n_sites: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_sites,):
            raise ShapeError(f"expected {2**self.n_sites} amplitudes, got {self.amplitudes.shape}")
        if not np.all(np.isfinite(self.amplitudes)):
            raise DomainError("amplitudes must be finite")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "DenseState":
        nrm = self.norm
        if nrm == 0:
            raise DomainError("cannot normalize the zero vector")
        return DenseState(self.amplitudes / nrm, self.n_sites)

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("index,re,im\n")
        for k, z in enumerate(self.amplitudes):
            buf.write(f"{k},{z.real:.17g},{z.imag:.17g}\n")
        return buf.getvalue()


class TabulatedState:
    """An NqsState backed by an explicit amplitude table (e.g. an exact eigenvector)."""

    def __init__(self, amplitudes, n_sites: int | None = None):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if n_sites is None:
            n_sites = int(round(math.log2(amplitudes.size)))
        self.table = DenseState(amplitudes, n_sites).amplitudes
        self.n_visible = n_sites
        zero = self.table == 0
        self._zero = zero
        self._log = np.log(np.where(zero, 1.0, self.table))

    def log_amplitudes(self, V):
        idx = config_index(np.atleast_2d(as_zero_one(V, self.n_visible)))
        return self._log[idx], self._zero[idx]

    def log_amplitude(self, v) -> LogAmplitude:
        out, zero = self.log_amplitudes(as_zero_one(v, self.n_visible)[None, :])
        return LogAmplitude(complex(out[0]), bool(zero[0]))


def materialize(psi, n: int | None = None, rescale: bool = False) -> DenseState:
    """Evaluate ``psi`` on every basis configuration.

    With ``rescale`` the table is divided by the largest modulus first, which
    avoids overflow for large-parameter states.
    """
    n = psi.n_visible if n is None else n
    if n > MATERIALIZE_GUARD:
        raise CapacityError(f"{n} sites exceed the materialization guard {MATERIALIZE_GUARD}")
    log, zero = psi.log_amplitudes(all_configs(n))
    log = np.asarray(log, dtype=complex)
    if rescale and not np.all(zero):
        log = log - np.max(log.real[~zero])
    return DenseState(np.where(zero, 0, np.exp(np.where(zero, 0, log))), n)


def ground_state_exact(H) -> tuple[float, DenseState]:
    """Lowest eigenpair of a Pauli-string Hamiltonian.

    Dense ``eigh`` up to 11 sites; Lanczos (``eigsh``) above that, up to 14.
    """
    n = H.n_sites
    if n > MATERIALIZE_GUARD:
        raise CapacityError(f"{n} sites exceed the exact-diagonalization guard {MATERIALIZE_GUARD}")
    mat = H.to_sparse()
    herm_err = abs(mat - mat.getH()).max() if mat.nnz else 0.0
    if herm_err > 1e-10:
        raise ConsistencyError(f"assembled Hamiltonian is not Hermitian (max deviation {herm_err:.3g})")
    if n <= DENSE_EIGH_MAX_SITES:
        vals, vecs = np.linalg.eigh(mat.toarray())
        energy, vec = vals[0], vecs[:, 0]
    else:
        v0 = np.ones(2**n, dtype=complex)
        vals, vecs = spla.eigsh(mat, k=1, which="SA", v0=v0, tol=1e-12)
        energy, vec = vals[0], vecs[:, 0]
    # fix the global phase so that the largest entry is real positive
    k = int(np.argmax(np.abs(vec)))
    vec = vec * np.exp(-1j * np.angle(vec[k]))
    return float(energy), DenseState(vec, n)


def expectation(H, state: DenseState) -> float:
    """Rayleigh quotient <psi|H|psi> / <psi|psi>."""
    psi = state.amplitudes
    return float(np.real(np.vdot(psi, H.to_sparse() @ psi) / np.vdot(psi, psi)))


def fidelity(a: DenseState, b: DenseState) -> float:
    """|<a|b>|^2 / (<a|a><b|b>)."""
    x, y = np.asarray(getattr(a, "amplitudes", a)), np.asarray(getattr(b, "amplitudes", b))
    if x.shape != y.shape:
        raise ShapeError(f"state sizes differ: {x.shape} vs {y.shape}")
    val = abs(np.vdot(x, y)) ** 2 / (np.vdot(x, x).real * np.vdot(y, y).real)
    return float(min(max(val, 0.0), 1.0))


def kl_divergence(p, q, tol: float = 1e-9) -> float:
    """sum p log(p / q); returns ``math.inf`` when supp(p) is not inside supp(q)."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ShapeError(f"table sizes differ: {p.shape} vs {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise DomainError("probabilities must be non-negative")
    for name, t in (("p", p), ("q", q)):
        if abs(t.sum() - 1.0) > tol:
            raise DomainError(f"{name} is not normalized (sum {t.sum():.12g})")
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    return float(max(np.sum(p[mask] * np.log(p[mask] / q[mask])), 0.0))


def trace_distance(rho, sigma) -> float:
    ev = np.linalg.eigvalsh(np.asarray(rho) - np.asarray(sigma))
    return float(0.5 * np.abs(ev).sum())
