"""Command-line front end: ``nqstate {gs,circuit,tomo,entropy,convert,ed}``.

Every command reads a TOML config, writes CSV/JSON outputs into ``--out`` and
finishes with ``summary.json`` holding ``command``, ``inputs_hash``,
``metrics`` and ``pass``. Exit codes: 0 all checks passed, 1 a check
failed, 2 bad config or input, 3 a run-time failure (divergence, capacity).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import circuit as circ
from . import entanglement as ent
from . import exact
from . import tensor
from . import tomography as tomo
from . import vmc
from .core import PLUS_MINUS_ONE, ZERO_ONE, all_configs, dumps
from .errors import CircuitParseError, ConfigurationError, NqsError
from .hamiltonians import hamiltonian_from_config
from .states import RbmState, state_from_json

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

HAMILTONIAN_KEYS = {"model", "n", "couplings", "boundary"}
STATE_KEYS = {"kind", "n", "hidden", "window", "hidden_per_window", "scale", "file", "periodic"}
SCHEMAS = {
    "gs": {
        "hamiltonian": HAMILTONIAN_KEYS,
        "model": {"family", "hidden", "hidden_domain", "init_scale"},
        "train": {"learning_rate", "sweeps", "samples_per_step", "batch_size", "optimizer",
                  "sr_shift", "full_sum", "move", "gradient_clip"},
        "checks": {"max_rel_error"},
    },
    "circuit": {
        "circuit": {"file", "initial", "random_qubits", "random_depth", "controlled_phase"},
        "checks": {"max_deviation"},
    },
    "tomo": {
        "target": {"state", "n", "p", "records", "bases", "shots"},
        "model": {"hidden", "hidden_phase", "env", "init_scale"},
        "train": {"learning_rate", "epochs", "optimizer", "warm_start", "direction", "tol"},
        "checks": {"min_fidelity", "max_trace_distance"},
    },
    "entropy": {
        "state": STATE_KEYS,
        "entropy": {"cuts", "alpha"},
    },
    "convert": {
        "state": STATE_KEYS,
        "mps": {"max_bond", "cutoff"},
        "checks": {"max_rel_error"},
    },
    "ed": {
        "hamiltonian": HAMILTONIAN_KEYS,
    },
}


class CliError(Exception):
    def __init__(self, message, code=EXIT_CONFIG):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# config plumbing


def load_config(path: str | None, command: str) -> tuple[dict, bytes]:
    """Parse and validate a TOML config; returns the table and the raw bytes."""
    if path is None:
        return {}, b""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}")
    try:
        cfg = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"config parse error: {exc}")
    schema = SCHEMAS[command]
    for key, value in cfg.items():
        if key == "seed":
            continue
        if key not in schema:
            raise CliError(f"unknown config key {key!r}")
        if not isinstance(value, dict):
            raise CliError(f"config key {key!r} must be a table")
        for sub in value:
            if sub not in schema[key]:
                raise CliError(f"unknown config key '{key}.{sub}'")
    return cfg, raw


def _get(cfg, section, key, default=None, kind=None):
    value = cfg.get(section, {}).get(key, default)
    if kind is not None and value is not None:
        try:
            if kind is bool and not isinstance(value, bool):
                raise TypeError
            value = kind(value)
        except (TypeError, ValueError):
            raise CliError(f"config key '{section}.{key}' has invalid value {value!r}")
    return value


def _inputs_hash(command, cfg, seed, extra: bytes = b"") -> str:
    h = hashlib.sha256()
    h.update(command.encode())
    h.update(json.dumps(cfg, sort_keys=True, default=str).encode())
    h.update(str(seed).encode())
    h.update(extra)
    return h.hexdigest()


def _write(out: Path, name: str, text: str):
    (out / name).write_text(text, encoding="utf-8")


def _finite(x):
    """JSON-safe float (inf and nan become strings)."""
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _summary(out, command, inputs_hash, metrics, passed):
    body = {"command": command, "inputs_hash": inputs_hash,
            "metrics": {k: _finite(v) for k, v in metrics.items()}, "pass": bool(passed)}
    _write(out, "summary.json", dumps(body))
    return body


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


# ---------------------------------------------------------------------------
# shared builders


def _hamiltonian(cfg):
    section = cfg.get("hamiltonian")
    if section is None:
        raise CliError("missing [hamiltonian] section")
    try:
        return hamiltonian_from_config(section)
    except KeyError as exc:
        raise CliError(f"missing config key 'hamiltonian.{exc.args[0]}'")
    except ConfigurationError as exc:
        raise CliError(f"hamiltonian: {exc}")


def _state(cfg, rng, base: Path):
    kind = _get(cfg, "state", "kind", "rbm_local")
    if kind == "file":
        path = _get(cfg, "state", "file")
        if path is None:
            raise CliError("missing config key 'state.file'")
        try:
            return state_from_json(json.loads(_resolve(base, path).read_text()))
        except OSError as exc:
            raise CliError(f"cannot read state file {path}: {exc.strerror}")
    n = _get(cfg, "state", "n", 6, int)
    scale = _get(cfg, "state", "scale", 0.5, float)
    if kind == "rbm_local":
        return RbmState.random_local(n, _get(cfg, "state", "window", 2, int), rng, scale=scale,
                                     hidden_per_window=_get(cfg, "state", "hidden_per_window", 1, int),
                                     periodic=_get(cfg, "state", "periodic", False, bool))
    if kind == "rbm_dense":
        return RbmState.random(n, _get(cfg, "state", "hidden", n, int), rng, scale=scale)
    if kind == "product":
        return RbmState.zeros(n, 0)
    raise CliError(f"config key 'state.kind' has unknown value {kind!r}")


# ---------------------------------------------------------------------------
# commands


def cmd_gs(cfg, seed, out, oracle, base):
    H = _hamiltonian(cfg)
    family = _get(cfg, "model", "family", "rbm")
    if family != "rbm":
        raise CliError(f"config key 'model.family' has unsupported value {family!r} (only 'rbm' is trainable)")
    domain = _get(cfg, "model", "hidden_domain", ZERO_ONE)
    if domain not in (ZERO_ONE, PLUS_MINUS_ONE):
        raise CliError(f"config key 'model.hidden_domain' has invalid value {domain!r}")
    n = H.n_sites
    psi0 = RbmState.random(n, _get(cfg, "model", "hidden", 2 * n, int), np.random.default_rng(seed),
                           scale=_get(cfg, "model", "init_scale", 0.01, float), hidden_domain=domain)
    t = cfg.get("train", {})
    try:
        config = vmc.TrainConfig(seed=seed, **t)
    except TypeError as exc:
        raise CliError(f"train: {exc}")
    except ConfigurationError as exc:
        raise CliError(f"train: {exc}")
    result = vmc.solve_ground_state(H, psi0, config)
    _write(out, "trace.csv", result.trace_csv())
    _write(out, "model.json", dumps(result.state.to_json()))
    final = vmc.estimate_energy(result.state, H, config.samples_per_step, seed, full_sum=n <= exact.MATERIALIZE_GUARD)
    metrics = {"energy": final.mean.real, "best_trace_energy": result.best_energy, "iterations": len(result.trace),
               "n_params": result.state.n_params}
    passed = math.isfinite(final.mean.real)
    if oracle:
        e0, _ = exact.ground_state_exact(H)
        rel = abs(final.mean.real - e0) / abs(e0)
        metrics.update(exact_energy=e0, rel_error=rel)
        passed = rel <= _get(cfg, "checks", "max_rel_error", 1e-3, float)
    return metrics, passed


def cmd_circuit(cfg, seed, out, oracle, base, circuit_path=None, initial=None):
    path = circuit_path or _get(cfg, "circuit", "file")
    initial = initial or _get(cfg, "circuit", "initial", "0")
    extra = b""
    if path is not None:
        try:
            text = _resolve(base, path).read_text() if circuit_path is None else Path(path).read_text()
        except OSError as exc:
            raise CliError(f"cannot read circuit file {path}: {exc.strerror}")
        extra = text.encode()
        try:
            c = circ.parse_circuit(text)
        except CircuitParseError as exc:
            raise CliError(f"circuit file {path}: {exc}")
    else:
        n = _get(cfg, "circuit", "random_qubits", None, int)
        if n is None:
            raise CliError("give a circuit file or 'circuit.random_qubits'")
        c = circ.random_circuit(n, _get(cfg, "circuit", "random_depth", 10, int), np.random.default_rng(seed),
                                controlled_phase=_get(cfg, "circuit", "controlled_phase", False, bool))
        _write(out, "circuit.txt", c.to_text())
    try:
        g = circ.build_graph(c, initial)
    except NqsError as exc:
        raise CliError(f"config key 'circuit.initial': {exc}")
    amps = circ.amplitudes(g)
    _write(out, "amplitudes.csv", circ.amplitudes_csv(amps, c.n_qubits))
    metrics = {"n_qubits": c.n_qubits, "n_gates": len(c.gates), "n_hidden": g.n_hidden,
               "prefactor_abs": abs(g.prefactor), "prefactor_phase": float(np.angle(g.prefactor))}
    passed = bool(np.all(np.isfinite(amps)))
    if oracle:
        dev = circ.max_deviation(amps, circ.statevector_oracle(c, initial).amplitudes)
        metrics["max_deviation"] = dev
        passed = dev <= _get(cfg, "checks", "max_deviation", 1e-10, float)
    return metrics, passed, extra


TARGETS = ("bell", "ghz", "w", "maximally_mixed", "depolarized_bell")


def _target(name, n, p):
    """Known target: (pure DenseState or None, density matrix)."""
    if name == "bell":
        v = np.zeros(4)
        v[[0, 3]] = 1 / math.sqrt(2)
        st = exact.DenseState(v, 2)
    elif name == "ghz":
        v = np.zeros(2**n)
        v[[0, -1]] = 1 / math.sqrt(2)
        st = exact.DenseState(v, n)
    elif name == "w":
        v = np.zeros(2**n)
        v[[1 << k for k in range(n)]] = 1 / math.sqrt(n)
        st = exact.DenseState(v, n)
    elif name == "maximally_mixed":
        return None, np.eye(2**n) / 2**n
    elif name == "depolarized_bell":
        phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
        return None, p * np.outer(phi, phi) + (1 - p) * np.eye(4) / 4
    else:
        raise CliError(f"config key 'target.state' has unknown value {name!r}; expected one of {TARGETS}")
    return st, np.outer(st.amplitudes, st.amplitudes.conj())


def cmd_tomo(cfg, seed, out, oracle, base):
    rng = np.random.default_rng(seed)
    records_path = _get(cfg, "target", "records")
    name = _get(cfg, "target", "state")
    pure, rho = (None, None)
    extra = b""
    if name is not None:
        pure, rho = _target(name, _get(cfg, "target", "n", 2, int), _get(cfg, "target", "p", 0.7, float))
    if records_path is not None:
        try:
            text = _resolve(base, records_path).read_text()
        except OSError as exc:
            raise CliError(f"cannot read records {records_path}: {exc.strerror}")
        extra = text.encode()
        try:
            records = tomo.records_from_jsonl(text)
        except NqsError as exc:
            raise CliError(f"records file {records_path}: {exc}")
    elif rho is not None:
        bases = _get(cfg, "target", "bases", "all")
        n = int(round(math.log2(rho.shape[0])))
        bases = tomo.all_bases(n) if bases == "all" else list(bases)
        try:
            records = tomo.records_from_state(pure if pure is not None else rho, bases,
                                              _get(cfg, "target", "shots", None, int), rng)
        except NqsError as exc:
            raise CliError(f"config key 'target.bases': {exc}")
        _write(out, "records.jsonl", tomo.records_to_jsonl(records))
    else:
        raise CliError("give 'target.state' or 'target.records'")
    if not records:
        raise CliError("no measurement records")
    n = records[0].n_sites
    env = _get(cfg, "model", "env", 0, int)
    model = tomo.PurifiedRbm.random(n, _get(cfg, "model", "hidden", 2 * n, int), env, rng,
                                    scale=_get(cfg, "model", "init_scale", 0.1, float),
                                    n_hidden_phase=_get(cfg, "model", "hidden_phase", None, int))
    try:
        config = tomo.TomoConfig(**cfg.get("train", {}))
    except (TypeError, ConfigurationError) as exc:
        raise CliError(f"train: {exc}")
    metrics = {"n_records": len(records), "n_visible": n, "n_env": env}
    if env == 0:
        target = pure if (oracle and pure is not None) else None
        result = tomo.tomo_pure(records, model, config, target)
        metric_name = "fidelity"
    else:
        target = rho if oracle else None
        result = tomo.tomo_mixed(records, model, config, target)
        metric_name = "trace_distance"
    _write(out, "trace.csv", result.trace_csv(metric_name))
    _write(out, "model.json", dumps(result.model.to_json()))
    metrics["divergence"] = result.divergence[-1]
    metrics["epochs"] = len(result.divergence)
    passed = math.isfinite(result.divergence[-1])
    if oracle and rho is not None:
        if env == 0:
            if pure is None:
                raise CliError("a mixed target needs 'model.env' >= 1")
            f = exact.fidelity(tomo.pure_state(result.model), pure)
            metrics["fidelity"] = f
            passed = f >= _get(cfg, "checks", "min_fidelity", 0.999, float)
        else:
            d = exact.trace_distance(tomo.density_matrix(result.model), rho)
            metrics["trace_distance"] = d
            passed = d <= _get(cfg, "checks", "max_trace_distance", 0.05, float)
    return metrics, passed, extra


def _cuts(cfg, n):
    cuts = _get(cfg, "entropy", "cuts")
    if cuts is None:
        return ent.contiguous_cuts(n)
    try:
        return [frozenset(int(s) for s in c) for c in cuts]
    except (TypeError, ValueError):
        raise CliError("config key 'entropy.cuts' must be a list of site lists")


def cmd_entropy(cfg, seed, out, oracle, base):
    kind = _get(cfg, "state", "kind", "rbm_local")
    alpha = _get(cfg, "entropy", "alpha", 2.0, float)
    if kind == "bell":
        st = _target("bell", 2, 0)[0]
        rows = []
        for cut in _cuts(cfg, 2):
            spec = ent.schmidt_spectrum(st, cut)
            rows.append(ent.CutReport(";".join(map(str, sorted(cut))), len(cut), 1,
                                      ent.entropy_from_spectrum(spec, 2), math.log(2),
                                      ent.entropy_from_spectrum(spec, 1)))
        s_alpha = [ent.entanglement_entropy(st, cut, alpha) for cut in _cuts(cfg, 2)]
    else:
        rbm = _state(cfg, np.random.default_rng(seed), base)
        if not isinstance(rbm, RbmState):
            raise CliError("entropy probe needs an RBM state")
        cuts = _cuts(cfg, rbm.n_visible)
        rows = ent.arealaw_probe(rbm, cuts)
        psi = exact.materialize(rbm, rescale=True)
        s_alpha = [ent.entanglement_entropy(psi, c, alpha) for c in cuts]
        _write(out, "model.json", dumps(rbm.to_json()))
    _write(out, "entropy.csv", ent.report_csv(rows))
    passed = all(r.s2 <= r.bound + ent.BOUND_SLACK for r in rows)
    metrics = {"n_cuts": len(rows), "max_S2": max(r.s2 for r in rows), "alpha": alpha,
               "S_alpha": s_alpha, "bound_holds": passed}
    return metrics, passed


def cmd_convert(cfg, seed, out, oracle, base):
    rbm = _state(cfg, np.random.default_rng(seed), base)
    if not isinstance(rbm, RbmState):
        raise CliError("conversion needs an RBM state")
    max_bond = _get(cfg, "mps", "max_bond", None, int)
    mps = tensor.rbm_to_mps(rbm, max_bond=max_bond, cutoff=_get(cfg, "mps", "cutoff", tensor.SVD_CUTOFF, float))
    _write(out, "mps.json", dumps(mps.to_json()))
    _write(out, "model.json", dumps(rbm.to_json()))
    crossings = tensor.crossing_units(rbm)
    within = all(d <= 2**c for d, c in zip(mps.bond_dims, crossings))
    metrics = {"bond_dims": mps.bond_dims, "crossings": crossings, "rank_bound_holds": within}
    passed = within
    if oracle:
        ref = exact.materialize(rbm).amplitudes
        got = np.array([tensor.mps_amplitude(mps, v, include_constant=True) for v in all_configs(rbm.n_visible)])
        rel = float(np.max(np.abs(got - ref)) / np.max(np.abs(ref)))
        metrics["max_rel_error"] = rel
        passed = passed and rel <= _get(cfg, "checks", "max_rel_error", 1e-10, float)
    return metrics, passed


def cmd_ed(cfg, seed, out, oracle, base):
    H = _hamiltonian(cfg)
    e0, st = exact.ground_state_exact(H)
    _write(out, "ground_state.csv", st.to_csv())
    return {"energy": e0, "n_sites": H.n_sites}, True


COMMANDS = {"gs": cmd_gs, "circuit": cmd_circuit, "tomo": cmd_tomo, "entropy": cmd_entropy,
            "convert": cmd_convert, "ed": cmd_ed}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nqstate", description="Neural-network quantum state experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        p.add_argument("--oracle", action=argparse.BooleanOptionalAction, default=True,
                       help="compare against brute-force oracles")
        if name == "circuit":
            p.add_argument("--circuit", help="circuit text file (overrides the config)")
            p.add_argument("--initial", help="initial product state, e.g. 0, +, 0+0")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, raw = load_config(args.config, args.command)
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is None:
            raise CliError("a seed is required: set 'seed' in the config or pass --seed")
        if not isinstance(seed, int) or seed < 0:
            raise CliError(f"config key 'seed' must be a non-negative integer, got {seed!r}")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise CliError(f"output directory {out} is not writable")
        base = Path(args.config).parent if args.config else Path(".")
        kwargs = {}
        if args.command == "circuit":
            kwargs = {"circuit_path": args.circuit, "initial": args.initial}
        res = COMMANDS[args.command](cfg, seed, out, args.oracle, base, **kwargs)
        metrics, passed = res[0], res[1]
        extra = raw + (res[2] if len(res) > 2 else b"")
        _summary(out, args.command, _inputs_hash(args.command, cfg, seed, extra), metrics, passed)
    except CliError as exc:
        print(f"nqstate {args.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigurationError as exc:
        print(f"nqstate {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NqsError as exc:
        print(f"nqstate {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    status = "PASS" if passed else "FAIL"
    print(f"nqstate {args.command}: {status} " + " ".join(
        f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in sorted(metrics.items())
        if not isinstance(v, list)))
    return EXIT_OK if passed else EXIT_FAIL


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
