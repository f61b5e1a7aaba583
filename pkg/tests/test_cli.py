import json
from pathlib import Path

import pytest

from nqstate.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_RUNTIME, run

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
FAST = ["circuit_file", "circuit_random", "convert_local", "ed_tfim8", "entropy_bell", "entropy_local",
        "tomo_bell", "tomo_mixed"]


def _run(command, config, out, *extra):
    return run([command, "--config", str(config), "--out", str(out), *extra])


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


@pytest.mark.parametrize("name", FAST)
def test_rerun_is_byte_identical(name, tmp_path):
    command = name.split("_")[0]
    config = CONFIGS / f"{name}.toml"
    assert _run(command, config, tmp_path / "a") == EXIT_OK
    assert _run(command, config, tmp_path / "b") == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "summary.json" in files
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_summary_layout(tmp_path):
    assert _run("ed", CONFIGS / "ed_tfim8.toml", tmp_path) == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary) == {"command", "inputs_hash", "metrics", "pass"}
    assert summary["command"] == "ed" and summary["pass"] is True
    assert summary["metrics"]["energy"] == pytest.approx(-10.251661790966036, abs=1e-9)
    assert len(summary["inputs_hash"]) == 64


def test_seed_changes_output(tmp_path):
    config = CONFIGS / "circuit_random.toml"
    assert _run("circuit", config, tmp_path / "a") == EXIT_OK
    assert _run("circuit", config, tmp_path / "b", "--seed", "8") == EXIT_OK
    a = json.loads((tmp_path / "a" / "summary.json").read_text())
    b = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert a["inputs_hash"] != b["inputs_hash"]
    assert (tmp_path / "a" / "circuit.txt").read_text() != (tmp_path / "b" / "circuit.txt").read_text()


def test_unknown_key_is_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, "seed = 0\n[hamiltonian]\nmodel = 'tfim'\nn = 4\ncolour = 'red'\n")
    assert _run("ed", cfg, tmp_path / "out") == EXIT_CONFIG
    assert "hamiltonian.colour" in capsys.readouterr().err
    cfg = _write(tmp_path, "seed = 0\n[extras]\nx = 1\n")
    assert _run("ed", cfg, tmp_path / "out") == EXIT_CONFIG


def test_bad_toml_is_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, "seed = 0\n[hamiltonian\n")
    assert _run("ed", cfg, tmp_path / "out") == EXIT_CONFIG
    assert "parse error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert _run("ed", tmp_path / "nope.toml", tmp_path / "out") == EXIT_CONFIG


def test_missing_seed(tmp_path, capsys):
    cfg = _write(tmp_path, "[hamiltonian]\nmodel = 'tfim'\nn = 4\n")
    assert _run("ed", cfg, tmp_path / "out") == EXIT_CONFIG
    assert "seed" in capsys.readouterr().err
    assert _run("ed", cfg, tmp_path / "out", "--seed", "4") == EXIT_OK


def test_negative_seed(tmp_path):
    cfg = _write(tmp_path, "seed = -1\n[hamiltonian]\nmodel = 'tfim'\nn = 4\n")
    assert _run("ed", cfg, tmp_path / "out") == EXIT_CONFIG


def test_bad_circuit_file(tmp_path, capsys):
    circuit = _write(tmp_path, "qubits 2\nh 0\nswap 0 1\n", "bad.txt")
    cfg = _write(tmp_path, f"seed = 0\n[circuit]\nfile = '{circuit.name}'\n")
    assert _run("circuit", cfg, tmp_path / "out") == EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err


def test_circuit_flag_overrides_config(tmp_path):
    circuit = _write(tmp_path, "h 0\nh 1\ncz 0 1\n", "c.txt")
    cfg = _write(tmp_path, "seed = 0\n")
    assert _run("circuit", cfg, tmp_path / "out", "--circuit", str(circuit), "--initial", "0") == EXIT_OK
    rows = (tmp_path / "out" / "amplitudes.csv").read_text().splitlines()
    index, bits, re, im = rows[4].split(",")
    assert (index, bits) == ("3", "11")
    assert float(re) == pytest.approx(-0.5) and float(im) == pytest.approx(0, abs=1e-15)


def test_failed_check_exit_code(tmp_path):
    text = (CONFIGS / "tomo_bell.toml").read_text().replace("epochs = 3000", "epochs = 5")
    cfg = _write(tmp_path, text)
    assert _run("tomo", cfg, tmp_path / "out") == EXIT_FAIL
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["pass"] is False


def test_runtime_error_exit_code(tmp_path):
    # a bond cap far below the crossing bound cannot be met
    text = (CONFIGS / "convert_local.toml").read_text().replace("max_bond = 16", "max_bond = 1")
    cfg = _write(tmp_path, text)
    assert _run("convert", cfg, tmp_path / "out") == EXIT_RUNTIME


def test_invalid_train_option(tmp_path):
    text = (CONFIGS / "tomo_bell.toml").read_text().replace("epochs = 3000", "epochs = 3000\noptimizer = 'lbfgs'")
    cfg = _write(tmp_path, text)
    assert _run("tomo", cfg, tmp_path / "out") == EXIT_CONFIG


def test_unknown_command_exits_with_usage():
    with pytest.raises(SystemExit) as info:
        run(["teleport"])
    assert info.value.code == 2
