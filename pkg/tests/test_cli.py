import csv
import io
import json
import subprocess
import sys

import pytest

from anisopsido.cli import main
from anisopsido.experiments import validate_config


def test_pass_exit_code_and_document(data_dir, tmp_path, capsys):
    assert main(["run", "--config", str(data_dir / "rbound_small.yaml"), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "rbound_small.json").read_text())
    assert doc["status"] == "pass" and doc["experiment"] == "rbound" and doc["seed"] == 1
    assert doc["result"]["value"] == pytest.approx(2.0)
    assert capsys.readouterr().out.startswith("PASS")


def test_fail_exit_code(data_dir, tmp_path):
    assert main(["rbound", "--config", str(data_dir / "rbound_wrong_expect.yaml"), "--out", str(tmp_path)]) == 2
    assert json.loads((tmp_path / "rbound_wrong_expect.json").read_text())["status"] == "fail"


def test_error_exit_code(data_dir, tmp_path, capsys):
    assert main(["run", "--config", str(data_dir / "missing_operator.yaml"), "--out", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err
    assert not list(tmp_path.iterdir())


def test_subcommand_kind_mismatch_is_an_error(data_dir, tmp_path):
    assert main(["maxreg", "--config", str(data_dir / "rbound_small.yaml"), "--out", str(tmp_path)]) == 1


def test_seed_override(data_dir, tmp_path):
    main(["run", "--config", str(data_dir / "rbound_small.yaml"), "--out", str(tmp_path), "--seed", "9"])
    assert json.loads((tmp_path / "rbound_small.json").read_text())["seed"] == 9


def test_json_byte_identical(configs_dir, tmp_path):
    cfg = str(configs_dir / "ellipticity_heat.yaml")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a)]) == 0
    assert main(["run", "--config", cfg, "--out", str(b), "--threads", "1"]) == 0
    assert (a / "ellipticity_heat.json").read_bytes() == (b / "ellipticity_heat.json").read_bytes()


def test_designed_failure_exit_code(configs_dir, tmp_path):
    assert main(["run", "--config", str(configs_dir / "ellipticity_plus_laplacian.yaml"), "--out", str(tmp_path)]) == 2
    assert main(["run", "--config", str(configs_dir / "maxreg_plus_laplacian.yaml"), "--out", str(tmp_path)]) == 2
    doc = json.loads((tmp_path / "maxreg_plus_laplacian.json").read_text())
    assert doc["result"]["stage"] == "ellipticity"


def test_csv_report(configs_dir, tmp_path):
    main(["run", "--config", str(configs_dir / "resolvent_rbound_heat.yaml"), "--out", str(tmp_path)])
    raw = (tmp_path / "resolvent_rbound_heat.csv").read_bytes()
    assert b"\r\n" in raw
    rows = list(csv.DictReader(io.StringIO(raw.decode())))
    assert rows and {"lambda_re", "lambda_im", "resolvent_norm"} <= set(rows[0])


@pytest.mark.parametrize("name, needle", [
    ("bad_divisibility.yaml", "divisible"),
    ("odd_grid.yaml", "grid: M = 63"),
    ("no_seed.yaml", "seed: missing"),
    ("missing_operator.yaml", "does not exist"),
])
def test_validate_diagnostics(data_dir, name, needle):
    diags = validate_config(data_dir / name)
    assert any(needle in d for d in diags), diags


def test_validate_clean_configs(configs_dir):
    for path in sorted(configs_dir.glob("*.yaml")):
        assert validate_config(path) == [], path
    for path in sorted((configs_dir / "symbols").glob("*.yaml")):
        assert validate_config(path) == [], path


def test_validate_exit_codes(data_dir, capsys):
    assert main(["validate", "--config", str(data_dir / "rbound_small.yaml")]) == 0
    assert capsys.readouterr().out.strip() == "ok"
    assert main(["validate", "--config", str(data_dir / "odd_grid.yaml")]) == 2


def test_module_entry_point(data_dir, tmp_path):
    res = subprocess.run([sys.executable, "-m", "anisopsido", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.1.0"
