import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from hetdetect.cli import COMMANDS, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
CONFIG_FOR = {
    "quantile": "quantile.json",
    "test": "test.json",
    "rates": "rates.json",
    "lower-bound": "lower_bound.json",
    "concentration": "concentration.json",
    "verify-level": "level.json",
    "verify-power": "power.json",
    "separation": "separation.json",
    "scaling": "scaling.json",
}
CSV_COMMANDS = {"rates", "concentration", "verify-level", "verify-power", "separation", "scaling"}


def _run(tmp_path, command, config, *extra):
    out = tmp_path / "out.txt"
    summ = tmp_path / "summary.json"
    argv = [command, str(config), "-o", str(out), *extra]
    if command in ("verify-level", "verify-power", "separation", "scaling"):
        argv += ["--summary", str(summ)]
    code = main(argv)
    body = out.read_text() if out.exists() else ""
    summary = json.loads(summ.read_text()) if summ.exists() else None
    return code, body, summary


def _write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_every_command_has_a_config():
    assert set(CONFIG_FOR) == set(COMMANDS)


@pytest.mark.parametrize("command", sorted(CONFIG_FOR))
def test_shipped_configs_run(tmp_path, command):
    code, body, summary = _run(tmp_path, command, CONFIGS / CONFIG_FOR[command], "--workers", "2")
    assert code == 0
    if command in CSV_COMMANDS:
        rows = list(csv.reader(io.StringIO(body)))
        assert len(rows) >= 2 and all(len(r) == len(rows[0]) for r in rows)
    else:
        json.loads(body)
    if summary is not None:
        assert "pass" in summary or "note" in summary


def test_quantile_statistics(tmp_path):
    cfg = {"quantile": {"statistic": "max-chisq", "n": 2, "alpha": 0.05}}
    code, body, _ = _run(tmp_path, "quantile", _write(tmp_path, "q.json", cfg))
    assert code == 0 and json.loads(body)["value"] == pytest.approx(5.00182778165248, rel=1e-12)
    cfg = {"quantile": {"statistic": "gaussian-abs", "sigma": 2.0, "alpha": 0.05}}
    code, body, _ = _run(tmp_path, "quantile", _write(tmp_path, "q.json", cfg))
    assert json.loads(body)["value"] == pytest.approx(2 * 1.959963984540054, rel=1e-14)


def test_test_command_reads_data(tmp_path):
    data = tmp_path / "y.txt"
    data.write_text("0.1\n-0.2\n7.0\n")
    cfg = {"profile": {"kind": "constant", "sigma": 1.0, "horizon": 3}, "test": {"kind": "max", "alpha": 0.05, "n": 3}}
    code, body, _ = _run(tmp_path, "test", _write(tmp_path, "t.json", cfg), "--data", str(data))
    out = json.loads(body)
    assert code == 0 and out["reject"] and out["detail"]["argmax"] == 3


def test_failing_check_exits_one(tmp_path):
    cfg = json.loads((CONFIGS / "power.json").read_text())
    cfg["prior"]["rho"] = 0.5
    code, body, summary = _run(tmp_path, "verify-power", _write(tmp_path, "p.json", cfg))
    assert code == 1 and summary["pass"] is False
    assert body.strip().endswith("False")


def test_bad_config_exits_two(tmp_path, capsys):
    cfg = {"profile": {"kind": "constant", "sigma": 1.0, "horizon": 3}, "test": {"kind": "chisq", "alpha": 0.05, "D": 9}}
    code, _, _ = _run(tmp_path, "test", _write(tmp_path, "t.json", cfg))
    assert code == 2 and "error" in capsys.readouterr().err
    code, _, _ = _run(tmp_path, "quantile", _write(tmp_path, "q.json", {}))
    assert code == 2


def test_seed_override_changes_sampled_data(tmp_path):
    a = _run(tmp_path, "test", CONFIGS / "test.json", "--seed", "1")[1]
    b = _run(tmp_path, "test", CONFIGS / "test.json", "--seed", "2")[1]
    assert a != b


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "hetdetect", "quantile", str(CONFIGS / "quantile.json")],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(res.stdout)["method"] == "monte-carlo"
    res = subprocess.run([sys.executable, "-m", "hetdetect", "--help"], capture_output=True, text=True, check=True)
    for name in COMMANDS:
        assert name in res.stdout
