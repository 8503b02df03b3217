import csv
import io
import json
import subprocess
import sys

import pytest

from effcap.cli import EXIT_OK, EXIT_SOLVER, EXIT_USAGE, main
from effcap.config import RunConfig

FAST = ["--samples", "4000", "--delta-steps", "3"]


def rows(text):
    return list(csv.DictReader(io.StringIO("\n".join(l for l in text.splitlines() if not l.startswith("#")))))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sense_reports_threshold_and_fusion(capsys):
    code, out, _ = run(capsys, "sense", "--target-pf", "0.5", "0.13")
    assert code == EXIT_OK
    half, default = rows(out)
    assert float(half["threshold"]) == pytest.approx(1.0, abs=1e-12)
    assert float(default["per_su_pd"]) == pytest.approx(0.8456, abs=1e-4)
    for r in (half, default):
        for kind in ("pf", "pd"):
            assert float(r[f"or_{kind}"]) >= float(r[f"majority_{kind}"]) >= float(r[f"and_{kind}"])


def test_region_endpoints(capsys):
    code, out, _ = run(capsys, "region", "--strategy", "2", *FAST)
    assert code == EXIT_OK
    r = rows(out)
    assert [float(x["delta"]) for x in r] == [0.0, 0.5, 1.0]
    assert float(r[0]["c1"]) == 0.0 and float(r[-1]["c2"]) == 0.0
    assert float(r[0]["c2"]) > 0 and float(r[-1]["c1"]) > 0
    assert "# config_hash:" in out


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["region", "--bogus"])
    assert exc.value.code == EXIT_USAGE
    capsys.readouterr()
    assert main(["region", "--delta-steps", "1"]) == EXIT_USAGE
    assert main(["region", "--config", "/nonexistent/file.cfg"]) == EXIT_USAGE


def test_solver_failure_exit_code(capsys):
    # threshold far above any energy: fused detection is zero
    code, out, _ = run(capsys, "region", "--strategy", "2", "--threshold", "1e6", *FAST)
    assert code == EXIT_SOLVER
    assert all(r["error"] for r in rows(out))


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# comment\nbeta = 3\nsnr_db = 5  # inline\nsamples = 4000\n")
    cfg = RunConfig.from_file(cfg_file)
    assert (cfg.beta, cfg.snr_db, cfg.samples) == (3.0, 5.0, 4000)
    code, out, _ = run(capsys, "region", "--config", str(cfg_file), "--beta", "4", "--strategy", "1",
                       "--delta-steps", "3")
    assert code == EXIT_OK
    r = rows(out)
    assert {x["beta"] for x in r} == {"4.0"} and {x["snr_db"] for x in r} == {"5.0"}
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 1\n")
    assert main(["region", "--config", str(bad)]) == EXIT_USAGE


def test_json_output(capsys):
    code, out, _ = run(capsys, "region", "--strategy", "2", "--format", "json", *FAST)
    doc = json.loads(out)
    assert code == EXIT_OK and len(doc["rows"]) == 3 and "config_hash" in doc["metadata"]


def test_per_combination_files(tmp_path, capsys):
    out = tmp_path / "region.csv"
    code, _, _ = run(capsys, "region", "--strategy", "both", "--rule", "or", "--out", str(out), *FAST)
    assert code == EXIT_OK
    files = sorted(p.name for p in tmp_path.iterdir())
    assert "region.csv" in files and len(files) == 3
    merged = rows(out.read_text())
    assert len(merged) == 6


def test_sweep_axis(capsys):
    code, out, _ = run(capsys, "sweep", "--sweep", "theta", "0.001", "0.1", "--strategy", "2", *FAST)
    assert code == EXIT_OK
    r = rows(out)
    assert sorted({x["sweep_value"] for x in r}) == ["0.001", "0.1"] and len(r) == 6


def test_validate_exit_code(tmp_path, capsys):
    summary = tmp_path / "v.json"
    code, out, _ = run(capsys, "validate", "--samples", "20000", "--frames", "20000",
                       "--kkt-states", "200", "--summary", str(summary))
    assert code == EXIT_OK and "checks passed" in out
    assert json.loads(summary.read_text())["passed"] is True


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "effcap", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout


def test_experiment_script_runs(tmp_path):
    res = subprocess.run([sys.executable, "scripts/rate_strategies.py", "--out-dir", str(tmp_path),
                          "--samples", "2000", "--delta-steps", "3"], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert len(rows((tmp_path / "strategies.csv").read_text())) == 18
