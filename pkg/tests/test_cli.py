import json
from pathlib import Path

import pytest

from pvar.cli import (
    EXIT_CAPACITY, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, build_model, config_hash, main,
    validate_config,
)
from pvar.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}


def test_shipped_configs_validate():
    for path in sorted(CONFIGS.glob("*.json")):
        validate_config(json.loads(path.read_text()))


def test_unknown_key_is_config_error(tmp_path):
    bad = {"model": {"type": "cavity", "params": {"delta": 0, "p": 1, "kappa": 1}}, "solver": {"ordr": 2}}
    with pytest.raises(ConfigError):
        validate_config(bad)
    assert main(["solve", "--config", write(tmp_path, bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    assert main(["solve"]) == EXIT_CONFIG


def test_capacity_exit(tmp_path):
    cfg = json.loads((CONFIGS / "cavity.json").read_text())
    cfg["oracle"] = {"cutoff": 5000, "dim_cap": 1000}
    assert main(["oracle", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_CAPACITY


def test_strict_truncation_exit(tmp_path):
    cfg = {"model": {"type": "cavity", "params": {"delta": 0.0, "p": 3.0, "kappa": 1.0}},
           "oracle": {"cutoff": 8}}
    path = write(tmp_path, cfg)
    assert main(["oracle", "--config", path, "--out", str(tmp_path / "o"), "--strict"]) == EXIT_NUMERICAL


def test_derive_eom_listing(tmp_path, capsys):
    cfg = {"model": {"type": "jc", "params": {"g": 1.0, "kappa": 1.0, "gamma": 2.0, "p": 0.5}},
           "solver": {"order": 1}}
    assert main(["derive-eom", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == EXIT_OK
    listing = json.loads((tmp_path / "eom.json").read_text())
    assert len(listing["equations"]) == 3
    assert "d<s0->/dt" in capsys.readouterr().out


def test_cavity_solve_and_compare(tmp_path):
    out = tmp_path / "o"
    path = str(CONFIGS / "cavity.json")
    assert main(["compare", "--config", path, "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "compare.json").read_text())
    assert summary["max_relative_deviation"] < 1e-6
    rec = json.loads((out / "compare_variational.jsonl").read_text().splitlines()[0])
    assert rec["D"] < 1e-10
    assert rec["config_hash"] == config_hash(json.loads(Path(path).read_text()))


def test_repeated_runs_are_byte_identical(tmp_path):
    for run in ("a", "b"):
        for cmd, cfg in (("solve", "cavity.json"), ("oracle", "cavity.json"),
                         ("phase-space", "phase_fock1.json")):
            assert main([cmd, "--config", str(CONFIGS / cfg), "--out", str(tmp_path / run)]) == EXIT_OK
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    assert a.keys() == b.keys() and a == b


def test_phase_space_file_names(tmp_path):
    assert main(["phase-space", "--config", str(CONFIGS / "phase_fock1.json"), "--out", str(tmp_path)]) == EXIT_OK
    names = {p.name for p in tmp_path.iterdir()}
    assert {"fock1_P_na_0.5.csv", "fock1_P_na_0.5.json", "fock1_W_na_0.csv"} <= names


def test_gallery_needs_no_config(tmp_path):
    assert main(["gallery", "--out", str(tmp_path)]) == EXIT_OK
    assert len(list((tmp_path / "gallery").glob("*.csv"))) == 20


def test_output_section_does_not_change_hash():
    cfg = json.loads((CONFIGS / "cavity.json").read_text())
    other = dict(cfg, output={"directory": "elsewhere"})
    assert config_hash(cfg) == config_hash(other)


def test_build_model_polariton_default():
    cfg = json.loads((CONFIGS / "rydberg_polariton.json").read_text())
    model, lab, basis = build_model(cfg)
    assert basis is not None and model.n_modes == 3 and lab.n_modes == 3
