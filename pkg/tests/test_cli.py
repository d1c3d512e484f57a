import copy
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from pbcover import cli

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


def load(name):
    return json.loads((SCEN / f"{name}.json").read_text())


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def small(cfg, grid=(48, 48)):
    cfg = copy.deepcopy(cfg)
    cfg["surface"]["grid"] = list(grid)
    return cfg


@pytest.mark.parametrize("path", sorted(SCEN.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    cli.validate_config(json.loads(path.read_text()))


def test_two_band_pbeval_zero(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["pbeval", "--config", write(tmp_path, small(load("torus-2band-pbeval"))), "--out", str(out)]) == 0
    res = json.loads((out / "result.json").read_text())["pb"]
    assert res["value"] == 0.0 and res["zero_witness"] == 0.0


def test_missing_seed_is_input_error(tmp_path, capsys):
    cfg = small(load("torus-3disk-minimize"))
    del cfg["seed"]
    assert cli.main(["minimize", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "seed" in err


def test_schema_error_reports_path(tmp_path, capsys):
    cfg = small(load("torus-3disk-pbeval"))
    cfg["surface"]["grid"] = [48, "x"]
    assert cli.main(["pbeval", "--config", write(tmp_path, cfg)]) == 1
    assert "surface/grid/1" in capsys.readouterr().err


def test_kind_mismatch_and_missing_file(tmp_path):
    cfg = write(tmp_path, small(load("torus-2band-pbeval")))
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["pbeval", "--config", str(tmp_path / "nope.json")]) == 1


def test_half_area_check_passes(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["check", "--config", str(SCEN / "sphere-half-area-check.json"), "--out", str(out)]) == 0
    assert "PASS" in capsys.readouterr().out
    assert json.loads((out / "report.json").read_text())["passed"] is True


def test_two_cap_negative_control(tmp_path):
    assert cli.main(["check", "--config", str(SCEN / "sphere-two-cap-negative.json"),
                     "--out", str(tmp_path / "o")]) == 1


def test_failed_check_exit_two(tmp_path, monkeypatch):
    def failing(cfg, out, threads):
        return cli.EXIT_CHECK, {}

    monkeypatch.setitem(cli.COMMANDS, "check", failing)
    cfg = write(tmp_path, load("check-two-set"))
    assert cli.main(["check", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_reruns_byte_identical(tmp_path):
    cfg = write(tmp_path, small(load("torus-3disk-pbeval")))
    outs = []
    for k, threads in enumerate((1, 1, 3)):
        out = tmp_path / f"o{k}"
        assert cli.main(["pbeval", "--config", cfg, "--out", str(out), "--threads", str(threads)]) == 0
        outs.append(out)
    for f in ("result.json", "heatmap.csv"):
        ref = (outs[0] / f).read_bytes()
        assert all((o / f).read_bytes() == ref for o in outs[1:])


def test_manifest_hashes(tmp_path):
    out = tmp_path / "o"
    cli.main(["pbeval", "--config", write(tmp_path, small(load("torus-3disk-pbeval"))), "--out", str(out)])
    man = json.loads((out / "manifest.json").read_text())
    text = json.dumps(man)
    for f in ("result.json", "heatmap.csv"):
        digest = hashlib.sha256((out / f).read_bytes()).hexdigest()
        assert digest in text
    assert len(man["config_sha256"]) == 64


def test_heatmap_rows(tmp_path):
    out = tmp_path / "o"
    cli.main(["pbeval", "--config", write(tmp_path, small(load("torus-3disk-pbeval"), (40, 36))), "--out", str(out)])
    lines = (out / "heatmap.csv").read_text().splitlines()
    assert lines[0] == "x,y,bracket" and len(lines) == 1 + 40 * 36


def test_empty_sweep_plot_header_only(tmp_path):
    from pbcover.experiments import SweepTable

    files = cli.emit_plot_data(SweepTable([]), tmp_path)
    assert files == ["pb_curve.dat"]
    assert (tmp_path / "pb_curve.dat").read_text() == "# capacity pb\n"


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PBCOVER_OUT", str(tmp_path / "env"))
    assert cli.main(["pbeval", "--config", write(tmp_path, small(load("torus-2band-pbeval")))]) == 0
    assert (tmp_path / "env" / "result.json").exists()


def test_hilbert_command(tmp_path):
    cfg = load("hilbert-2d")
    cfg["hilbert"]["order"] = 3
    out = tmp_path / "o"
    assert cli.main(["hilbert", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    assert json.loads((out / "result.json").read_text())["measure_preserving"] is True


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "pbcover.cli", "pbeval", "--config",
                        write(tmp_path, small(load("torus-2band-pbeval"))), "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
