"""Quantum-circuit simulation by growing a deep Boltzmann machine gate by gate.

Each qubit owns a frontier vertex. A single-qubit gate retires that vertex
(it becomes hidden) and links it to a fresh frontier vertex through one new
hidden unit; a CZ adds one hidden unit joining the two frontier vertices.
Every edge carries a 2x2 table of complex log-weights ``w[x, h]``.

Summing out the hidden variables gives the circuit amplitude times a known
constant. That constant is kept in a prefactor ledger:
``raw_amplitude = prefactor * <v|U|psi_in>``.
"""
from __future__ import annotations

import cmath
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import all_configs, as_zero_one, config_index
from .errors import (
    CapacityError,
    CircuitParseError,
    ConsistencyError,
    ShapeError,
    UnsupportedConventionError,
)
from .exact import DenseState

CIRCUIT_GUARD = 12
ENUMERATION_GUARD = 22
LN2 = math.log(2.0)
GATE_NAMES = ("h", "z", "cz")


# ---------------------------------------------------------------------------
# circuits


@dataclass(frozen=True)
class Gate:
    name: str  # "h", "z" or "cz"
    qubits: tuple
    theta: float | None = None

    def __str__(self):
        parts = [self.name, *map(str, self.qubits)]
        if self.theta is not None:
            parts.append(repr(float(self.theta)))
        return " ".join(parts)


@dataclass
class Circuit:
    n_qubits: int
    gates: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ShapeError("a circuit needs at least one qubit")
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate):
        if g.name not in GATE_NAMES:
            raise ShapeError(f"unknown gate {g.name!r}")
        arity = 2 if g.name == "cz" else 1
        if len(g.qubits) != arity:
            raise ShapeError(f"gate {g.name} takes {arity} qubit(s)")
        for q in g.qubits:
            if not 0 <= q < self.n_qubits:
                raise ShapeError(f"qubit {q} out of range for {self.n_qubits} qubits")
        if arity == 2 and g.qubits[0] == g.qubits[1]:
            raise ShapeError("cz needs two distinct qubits")
        if g.name == "z" and g.theta is None:
            raise ShapeError("z gate needs an angle")

    def append(self, name, *qubits, theta=None) -> "Circuit":
        g = Gate(name, tuple(int(q) for q in qubits), None if theta is None else float(theta))
        self._check(g)
        self.gates.append(g)
        return self

    def to_text(self) -> str:
        return f"qubits {self.n_qubits}\n" + "".join(f"{g}\n" for g in self.gates)


def parse_circuit(text: str, n_qubits: int | None = None) -> Circuit:
    """Parse one gate per line: ``h 0``, ``z 0 1.5708``, ``cz 0 1``, ``cz 0 1 0.7854``.

    Blank lines and ``#`` comments are ignored. An optional ``qubits N``
    line fixes the register size; otherwise it is ``n_qubits`` or the largest
    index plus one.
    """
    gates, lines, declared = [], [], None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        name = tok[0].lower()
        try:
            if name == "qubits":
                if len(tok) != 2 or gates:
                    raise ValueError("'qubits N' must come first and take one value")
                declared = int(tok[1])
                continue
            if name == "h" and len(tok) == 2:
                gates.append(Gate("h", (int(tok[1]),)))
            elif name == "z" and len(tok) == 3:
                gates.append(Gate("z", (int(tok[1]),), float(tok[2])))
            elif name == "cz" and len(tok) in (3, 4):
                theta = float(tok[3]) if len(tok) == 4 else None
                gates.append(Gate("cz", (int(tok[1]), int(tok[2])), theta))
            else:
                raise ValueError(f"cannot parse gate {line!r}")
            lines.append(no)
            if any(q < 0 for q in gates[-1].qubits):
                raise ValueError("negative qubit index")
            if name == "cz" and gates[-1].qubits[0] == gates[-1].qubits[1]:
                raise ValueError("cz needs two distinct qubits")
        except ValueError as exc:
            raise CircuitParseError(no, str(exc)) from None
    n = declared if declared is not None else n_qubits
    if n is None:
        n = 1 + max((q for g in gates for q in g.qubits), default=0)
    circuit = Circuit(n)
    for no, gate in zip(lines, gates):
        try:
            circuit._check(gate)
        except ShapeError as exc:
            raise CircuitParseError(no, str(exc)) from None
        circuit.gates.append(gate)
    return circuit


def random_circuit(n: int, depth: int, rng=None, controlled_phase: bool = False) -> Circuit:
    """Layers of random single-qubit gates followed by CZs on random disjoint pairs."""
    rng = np.random.default_rng(rng)
    c = Circuit(n)
    for _ in range(depth):
        for q in range(n):
            if rng.random() < 0.5:
                c.append("h", q)
            else:
                c.append("z", q, theta=float(rng.uniform(-math.pi, math.pi)))
        order = rng.permutation(n)
        for k in range(0, n - 1, 2):
            if rng.random() < 0.7:
                q1, q2 = int(order[k]), int(order[k + 1])
                theta = float(rng.uniform(-math.pi, math.pi)) if controlled_phase and rng.random() < 0.5 else None
                c.append("cz", q1, q2, theta=theta)
    return c


# ---------------------------------------------------------------------------
# gate weights


def hadamard_table() -> np.ndarray:
    """w[v, h] = i pi/8 - ln2/2 - i pi v/2 - i pi h/4 + i pi v h."""
    t = np.empty((2, 2), dtype=complex)
    for v, h in itertools.product((0, 1), repeat=2):
        t[v, h] = 1j * math.pi / 8 - LN2 / 2 - 1j * math.pi * v / 2 - 1j * math.pi * h / 4 + 1j * math.pi * v * h
    return t


def zrot_table(theta: float) -> np.ndarray:
    """w[v, h] = -ln2/2 + i theta v/2 + i pi v h."""
    t = np.empty((2, 2), dtype=complex)
    for v, h in itertools.product((0, 1), repeat=2):
        t[v, h] = -LN2 / 2 + 1j * theta * v / 2 + 1j * math.pi * v * h
    return t


def controlled_phase_table(theta: float) -> np.ndarray:
    """Edge log-weights whose pair transfer is exactly diag(1, 1, 1, e^{i theta}).

    With ``w[x, h] = A + B x + D x h`` the transfer depends on ``s = x1 + x2``
    only. Matching the s = 0, 1, 2 entries gives a quadratic for
    ``y = e^D``: ``(2 - u) y^2 - 2 u y + (2 - u) = 0`` with ``u = e^{i theta}``,
    then ``e^B = 2 / (1 + y)`` and ``A = -ln2 / 2``.
    """
    u = cmath.exp(1j * theta)
    if abs(u - 1) < 1e-14:
        y = 1.0 + 0j
    else:
        roots = np.roots([2 - u, -2 * u, 2 - u])
        y = complex(max(roots, key=lambda r: abs(1 + r)))
    A, B, D = -LN2 / 2, cmath.log(2 / (1 + y)), cmath.log(y)
    t = np.array([[A, A], [A + B, A + B + D]], dtype=complex)
    got = pair_transfer(t, t)
    want = np.array([[1, 1], [1, u]])
    if np.max(np.abs(got - want)) > 1e-12:
        raise ConsistencyError(f"controlled-phase weight solve failed for theta={theta}")
    return t


def pair_transfer(t1, t2) -> np.ndarray:
    """T[x1, x2] = sum_h exp(t1[x1, h] + t2[x2, h])."""
    return np.exp(t1[:, None, :] + t2[None, :, :]).sum(axis=2)


# ---------------------------------------------------------------------------
# graph


@dataclass(frozen=True)
class Vertex:
    kind: str  # "qubit" (frontier or retired) or "gate" (gate-local hidden unit)
    qubit: int
    slice: int


@dataclass(frozen=True)
class GateRecord:
    """One hidden unit and its edges ``[(vertex, table)]``; ``(old, new)`` for single-qubit gates."""

    name: str
    qubits: tuple
    hidden: int
    edges: tuple
    old: int | None = None
    new: int | None = None


@dataclass
class DbmCircuitGraph:
    n_qubits: int
    vertices: list = field(default_factory=list)
    frontier: list = field(default_factory=list)
    records: list = field(default_factory=list)
    log_prefactor: complex = 0j
    initial: str = ""

    @property
    def prefactor(self) -> complex:
        return cmath.exp(self.log_prefactor)

    @property
    def n_hidden(self) -> int:
        return len(self.vertices) - self.n_qubits

    @property
    def edges(self) -> list:
        return [(u, r.hidden, t) for r in self.records for (u, t) in r.edges]

    def _add_vertex(self, kind, qubit, slice_) -> int:
        self.vertices.append(Vertex(kind, qubit, slice_))
        return len(self.vertices) - 1

    def _slice(self, q) -> int:
        return self.vertices[self.frontier[q]].slice


INITIAL_STATES = {
    # label: (edge table for a one-edge init unit or None, ledger factor)
    "0": (np.array([[0, 0], [0, 1j * math.pi]]), 2.0),
    "1": (np.array([[0, 1j * math.pi], [0, 0]]), 2.0),
    "+": (None, math.sqrt(2.0)),
    "-": (np.array([[-LN2, -LN2], [-LN2 + 1j * math.pi, -LN2 + 1j * math.pi]]), math.sqrt(2.0)),
}


def _initial_labels(spec, n) -> str:
    spec = str(spec)
    aliases = {"zero": "0", "one": "1", "plus": "+", "minus": "-"}
    spec = aliases.get(spec, spec)
    if len(spec) == 1:
        spec = spec * n
    if len(spec) != n or any(c not in INITIAL_STATES for c in spec):
        raise UnsupportedConventionError(
            f"initial state {spec!r} must be a product of single-qubit labels 0, 1, +, -"
        )
    return spec


def init_graph(n: int, initial="0") -> DbmCircuitGraph:
    """Frontier of ``n`` vertices encoding a product state such as ``"0+0"``.

    ``|0>`` and ``|1>`` are pinned by one hidden unit with weight ``i pi``;
    ``|+>`` needs no weights at all.
    """
    labels = _initial_labels(initial, n)
    g = DbmCircuitGraph(n, initial=labels)
    g.frontier = [g._add_vertex("qubit", q, 0) for q in range(n)]
    for q, lab in enumerate(labels):
        table, factor = INITIAL_STATES[lab]
        g.log_prefactor += math.log(factor)
        if table is not None:
            h = g._add_vertex("gate", q, 0)
            g.records.append(GateRecord("init", (q,), h, ((g.frontier[q], np.asarray(table, complex)),)))
    return g


def _single_qubit(g: DbmCircuitGraph, name, q, table, log_factor):
    old = g.frontier[q]
    s = g._slice(q)
    h = g._add_vertex("gate", q, s)
    new = g._add_vertex("qubit", q, s + 1)
    g.frontier[q] = new
    g.records.append(GateRecord(name, (q,), h, ((old, table), (new, table)), old, new))
    g.log_prefactor += log_factor
    return g


def apply_hadamard(g: DbmCircuitGraph, q: int) -> DbmCircuitGraph:
    """Hidden unit H joins the retired and new vertex; transfer (1/sqrt2)(-1)^{v v'}."""
    return _single_qubit(g, "h", q, hadamard_table(), 0j)


def apply_zrot(g: DbmCircuitGraph, q: int, theta: float) -> DbmCircuitGraph:
    """Transfer diag(1, e^{i theta}) = e^{i theta/2} Z(theta); the phase goes to the ledger."""
    return _single_qubit(g, "z", q, zrot_table(theta), 0.5j * theta)


def apply_cz(g: DbmCircuitGraph, q1: int, q2: int, theta: float | None = None) -> DbmCircuitGraph:
    """Hidden unit joining two frontier vertices.

    Plain CZ reuses the Hadamard weights (transfer CZ/sqrt2, ledger 1/sqrt2);
    a controlled phase uses solved weights with transfer exactly diag(1,1,1,e^{i theta}).
    """
    if q1 == q2:
        raise ShapeError("cz needs two distinct qubits")
    if theta is None:
        table, log_factor, name = hadamard_table(), -LN2 / 2, "cz"
    else:
        table, log_factor, name = controlled_phase_table(theta), 0j, "cphase"
    s = max(g._slice(q1), g._slice(q2))
    h = g._add_vertex("gate", q1, s)
    g.records.append(GateRecord(name, (q1, q2), h, ((g.frontier[q1], table), (g.frontier[q2], table))))
    g.log_prefactor += log_factor
    return g


def build_graph(circuit: Circuit, initial="0") -> DbmCircuitGraph:
    g = init_graph(circuit.n_qubits, initial)
    for gate in circuit.gates:
        if gate.name == "h":
            apply_hadamard(g, gate.qubits[0])
        elif gate.name == "z":
            apply_zrot(g, gate.qubits[0], gate.theta)
        else:
            apply_cz(g, *gate.qubits, theta=gate.theta)
    return g


# ---------------------------------------------------------------------------
# evaluation


def raw_amplitudes(g: DbmCircuitGraph) -> np.ndarray:
    """Sum over all hidden variables, slice by slice, for every frontier configuration.

    A vector over frontier configurations is carried through the gate
    records; each record contracts in the 2x2 transfer of its hidden unit.
    """
    n = g.n_qubits
    if n > CIRCUIT_GUARD:
        raise CapacityError(f"{n} qubits exceed the circuit evaluation guard {CIRCUIT_GUARD}")
    f = np.ones((2,) * n, dtype=complex)
    for r in g.records:
        if r.name == "init":
            (q,), ((_, t),) = r.qubits, r.edges
            shape = [1] * n
            shape[q] = 2
            f = f * np.exp(t).sum(axis=1).reshape(shape)
        elif len(r.qubits) == 1:
            q = r.qubits[0]
            T = pair_transfer(r.edges[0][1], r.edges[1][1])
            f = np.moveaxis(np.tensordot(f, T, axes=([q], [0])), -1, q)
        else:
            q1, q2 = r.qubits
            T = pair_transfer(r.edges[0][1], r.edges[1][1])
            shape = [1] * n
            shape[q1] = shape[q2] = 2
            f = f * (T if q1 < q2 else T.T).reshape(shape)
    return f.ravel()


def amplitudes(g: DbmCircuitGraph) -> np.ndarray:
    """<v|U|psi_in> for every output v, with the ledger divided out."""
    return raw_amplitudes(g) / g.prefactor


def amplitude(g: DbmCircuitGraph, v_out, raw: bool = False) -> complex:
    idx = int(config_index(as_zero_one(v_out, g.n_qubits)))
    out = complex(raw_amplitudes(g)[idx])
    return out if raw else out / g.prefactor


def enumerate_amplitude(g: DbmCircuitGraph, v_out) -> complex:
    """Raw amplitude by brute force over every hidden and retired variable.

    Independent of the slice-by-slice evaluation; only for tiny graphs.
    """
    v_out = as_zero_one(v_out, g.n_qubits)
    frontier = set(g.frontier)
    hidden = [k for k in range(len(g.vertices)) if k not in frontier]
    if len(hidden) > ENUMERATION_GUARD:
        raise CapacityError(f"{len(hidden)} hidden variables exceed the enumeration guard")
    val = np.zeros(len(g.vertices), dtype=np.int64)
    for q, k in enumerate(g.frontier):
        val[k] = v_out[q]
    edges = g.edges
    total = 0j
    for hs in itertools.product((0, 1), repeat=len(hidden)):
        val[hidden] = hs
        total += cmath.exp(sum(t[val[u], val[h]] for u, h, t in edges))
    return total


# ---------------------------------------------------------------------------
# state-vector oracle


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
_KETS = {"0": np.array([1, 0], complex), "1": np.array([0, 1], complex),
         "+": np.array([1, 1], complex) / math.sqrt(2.0), "-": np.array([1, -1], complex) / math.sqrt(2.0)}


def z_matrix(theta: float) -> np.ndarray:
    return np.diag([cmath.exp(-0.5j * theta), cmath.exp(0.5j * theta)])


def statevector_oracle(circuit: Circuit, initial="0") -> DenseState:
    """Gate-by-gate simulation of the 2^n state vector with exact unitaries."""
    n = circuit.n_qubits
    labels = _initial_labels(initial, n)
    psi = _KETS[labels[0]]
    for lab in labels[1:]:
        psi = np.kron(psi, _KETS[lab])
    psi = psi.reshape((2,) * n)
    for gate in circuit.gates:
        if gate.name in ("h", "z"):
            q = gate.qubits[0]
            U = _H if gate.name == "h" else z_matrix(gate.theta)
            psi = np.moveaxis(np.tensordot(U, psi, axes=([1], [q])), 0, q)
        else:
            q1, q2 = gate.qubits
            phase = -1.0 if gate.theta is None else cmath.exp(1j * gate.theta)
            idx = [slice(None)] * n
            idx[q1] = idx[q2] = 1
            psi = psi.copy()
            psi[tuple(idx)] *= phase
    return DenseState(psi.ravel(), n)


def max_deviation(a, b) -> float:
    """max_i |a_i/|a| - b_i/|b||: amplitude error relative to the state norm."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a / np.linalg.norm(a) - b / np.linalg.norm(b))))


def amplitudes_csv(amps, n: int) -> str:
    buf = io.StringIO()
    buf.write("index,bits,re,im\n")
    for k, (z, v) in enumerate(zip(amps, all_configs(n))):
        buf.write(f"{k},{''.join(map(str, v))},{z.real:.17g},{z.imag:.17g}\n")
    return buf.getvalue()
