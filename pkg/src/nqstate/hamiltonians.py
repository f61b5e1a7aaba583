"""Spin-chain Hamiltonians as weighted Pauli strings, and local energies.

Heisenberg-type models use spin operators ``S = sigma / 2``, so each bond
contributes ``(J/4)(XX + YY + ZZ)``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .core import all_configs, as_zero_one, config_index
from .errors import ConfigurationError, ConsistencyError, DomainError, ShapeError, ZeroAmplitudeError

OPEN = "open"
PERIODIC = "periodic"


@dataclass(frozen=True)
class PauliTerm:
    coefficient: complex
    ops: tuple  # sorted ((site, "X"|"Y"|"Z"), ...)

    @classmethod
    def make(cls, coefficient, ops: Mapping[int, str]):
        for op in ops.values():
            if op not in ("X", "Y", "Z"):
                raise ConfigurationError(f"unknown Pauli operator {op!r}")
        return cls(complex(coefficient), tuple(sorted(ops.items())))


@dataclass
class PauliStringHamiltonian:
    n_sites: int
    terms: list = field(default_factory=list)
    boundary: str = OPEN

    def __post_init__(self):
        if self.boundary not in (OPEN, PERIODIC):
            raise ConfigurationError(f"unknown boundary {self.boundary!r}")
        for term in self.terms:
            for site, _ in term.ops:
                if not 0 <= site < self.n_sites:
                    raise ShapeError(f"site {site} out of range for {self.n_sites} sites")
        self.validate()
        self._groups = None
        self._sparse = None

    def validate(self):
        """Raise ConsistencyError unless the Pauli sum is Hermitian."""
        # Pauli strings are Hermitian, so the sum is iff each string's total weight is real
        totals = defaultdict(complex)
        for term in self.terms:
            totals[term.ops] += term.coefficient
        bad = [ops for ops, c in totals.items() if abs(c.imag) > 1e-12]
        if bad:
            raise ConsistencyError(f"non-Hermitian Pauli sum: complex weight on {bad[0]}")
        return self

    def add(self, coefficient, ops: Mapping[int, str]):
        self.terms.append(PauliTerm.make(coefficient, ops))
        self._groups = None
        self._sparse = None

    def _compiled(self):
        """Terms grouped by their flip pattern: [(flip_mask, [(coef, z_sites, y_sites)])]."""
        if self._groups is None:
            groups = defaultdict(list)
            for term in self.terms:
                flip = tuple(sorted(s for s, op in term.ops if op in "XY"))
                zs = [s for s, op in term.ops if op == "Z"]
                ys = [s for s, op in term.ops if op == "Y"]
                groups[flip].append((term.coefficient, zs, ys))
            self._groups = []
            for flip, items in groups.items():
                mask = np.zeros(self.n_sites, dtype=np.int8)
                mask[list(flip)] = 1
                self._groups.append((mask, items))
        return self._groups

    def matrix_elements(self, V):
        """Yield ``(flip_mask, V_flipped, <v|H|v'>)`` per flip pattern of the batch ``V``."""
        V = np.atleast_2d(np.asarray(V, dtype=np.int8))
        z = 1.0 - 2.0 * V
        for mask, items in self._compiled():
            mel = np.zeros(V.shape[0], dtype=complex)
            for coef, zs, ys in items:
                f = np.full(V.shape[0], coef, dtype=complex)
                for s in zs:
                    f = f * z[:, s]
                for s in ys:
                    # <v|Y|1-v> = -i z(v)
                    f = f * (-1j * z[:, s])
                mel += f
            yield mask, V ^ mask, mel

    def to_sparse(self) -> sp.csr_matrix:
        """Sparse matrix in the big-endian basis (cached until the next ``add``)."""
        if self._sparse is None:
            self._sparse = self._assemble()
        return self._sparse

    def _assemble(self) -> sp.csr_matrix:
        n = self.n_sites
        V = all_configs(n)
        rows = np.arange(2**n)
        data, rr, cc = [], [], []
        for _, Vp, mel in self.matrix_elements(V):
            keep = mel != 0
            rr.append(rows[keep])
            cc.append(config_index(Vp[keep]))
            data.append(mel[keep])
        if not data:
            return sp.csr_matrix((2**n, 2**n), dtype=complex)
        return sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rr), np.concatenate(cc))), shape=(2**n, 2**n)
        )

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def _bonds(n, distance, boundary):
    pairs = set()
    for i in range(n):
        j = i + distance
        if j >= n:
            if boundary != PERIODIC:
                continue
            j %= n
        if i != j:
            pairs.add((min(i, j), max(i, j)))
    return sorted(pairs)


def _check_n(n):
    if n < 2:
        raise DomainError(f"chain needs at least 2 sites, got {n}")


def build_tfim(n: int, J: float, B: float, boundary: str = OPEN) -> PauliStringHamiltonian:
    """-J sum_<ij> Z_i Z_j - B sum_i X_i on a chain."""
    _check_n(n)
    H = PauliStringHamiltonian(n, [], boundary)
    for i, j in _bonds(n, 1, boundary):
        if J:
            H.add(-J, {i: "Z", j: "Z"})
    for i in range(n):
        if B:
            H.add(-B, {i: "X"})
    return H.validate()


def _heisenberg_bond(H, i, j, J):
    for op in "XYZ":
        H.add(J / 4, {i: op, j: op})


def build_afh(n: int, J: float = 1.0, boundary: str = OPEN) -> PauliStringHamiltonian:
    """Antiferromagnetic Heisenberg chain J sum_<ij> S_i . S_j with J > 0."""
    _check_n(n)
    if not J > 0:
        raise DomainError(f"antiferromagnetic coupling must be positive, got {J}")
    H = PauliStringHamiltonian(n, [], boundary)
    for i, j in _bonds(n, 1, boundary):
        _heisenberg_bond(H, i, j, J)
    return H.validate()


def build_j1j2(n: int, J1: float, J2: float, boundary: str = OPEN) -> PauliStringHamiltonian:
    """Frustrated chain J1 sum_<ij> S_i.S_j + J2 sum_<<ij>> S_i.S_j."""
    _check_n(n)
    H = PauliStringHamiltonian(n, [], boundary)
    if J1:
        for i, j in _bonds(n, 1, boundary):
            _heisenberg_bond(H, i, j, J1)
    if J2:
        for i, j in _bonds(n, 2, boundary):
            _heisenberg_bond(H, i, j, J2)
    return H.validate()


MODEL_KEYS = {"tfim": {"J", "B"}, "afh": {"J"}, "j1j2": {"J1", "J2"}}


def hamiltonian_from_config(cfg: Mapping) -> PauliStringHamiltonian:
    """Build from ``{model, n, couplings, boundary}``."""
    allowed = {"model", "n", "couplings", "boundary"}
    extra = set(cfg) - allowed
    if extra:
        raise ConfigurationError(f"unknown hamiltonian key {sorted(extra)[0]!r}")
    model = cfg.get("model")
    if model not in MODEL_KEYS:
        raise ConfigurationError(f"unknown model {model!r}")
    couplings = dict(cfg.get("couplings", {}))
    extra = set(couplings) - MODEL_KEYS[model]
    if extra:
        raise ConfigurationError(f"unknown coupling {sorted(extra)[0]!r} for {model}")
    n = int(cfg["n"])
    boundary = cfg.get("boundary", OPEN)
    if model == "tfim":
        return build_tfim(n, float(couplings.get("J", 1.0)), float(couplings.get("B", 1.0)), boundary)
    if model == "afh":
        return build_afh(n, float(couplings.get("J", 1.0)), boundary)
    return build_j1j2(n, float(couplings.get("J1", 1.0)), float(couplings.get("J2", 0.0)), boundary)


@dataclass(frozen=True)
class LocalEnergySample:
    config: tuple
    value: complex


def local_energies(H: PauliStringHamiltonian, psi, V, log_psi=None) -> np.ndarray:
    """E_loc(v) = sum_v' <v|H|v'> psi(v') / psi(v) for a batch of configurations."""
    V = np.atleast_2d(as_zero_one(V, H.n_sites))
    if getattr(psi, "n_visible", H.n_sites) != H.n_sites:
        raise ShapeError(f"state has {psi.n_visible} sites, Hamiltonian {H.n_sites}")
    if log_psi is None:
        log_psi, zero = psi.log_amplitudes(V)
        if np.any(zero):
            raise ZeroAmplitudeError("psi(v) = 0; resample the configuration")
    out = np.zeros(V.shape[0], dtype=complex)
    for mask, Vp, mel in H.matrix_elements(V):
        if not mask.any():
            out += mel
            continue
        lp, zp = psi.log_amplitudes(Vp)
        ratio = np.where(zp, 0, np.exp(np.where(zp, 0, lp - log_psi)))
        out += mel * ratio
    return out


def local_energy(H: PauliStringHamiltonian, psi, v) -> complex:
    return complex(local_energies(H, psi, as_zero_one(v, H.n_sites)[None, :])[0])
