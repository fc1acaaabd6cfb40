"""Command-line interface: output formats, determinism, exit codes."""

import io
import json
import math
import subprocess
import sys

import pytest

from percograph.cli import main
from percograph.fileio import read_csv


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv_text(text):
    return read_csv(io.StringIO(text))


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "percograph" in capsys.readouterr().out


def test_percolate_census_identity(capsys):
    code, out, _ = _run(capsys, "percolate", "--d", "1", "--N", "100",
                        "--p", "0.4", "--seed", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# percograph-csv/1 percolation-census")
    assert "percolate --d 1 --N 100" in lines[0]
    rows = [line.split(",") for line in lines if not line.startswith("#")][1:]
    total = sum(int(k) * int(nk) for k, nk in rows)
    assert total == 201


def test_percolate_deterministic_bytes(capsys):
    argv = ("percolate", "--d", "2", "--N", "6", "--p", "0.5", "--seed", "9")
    _, first, _ = _run(capsys, *argv)
    _, second, _ = _run(capsys, *argv)
    assert first == second


def test_merge_row_and_verify(capsys):
    code, out, _ = _run(capsys, "merge", "--d", "1", "--N", "200", "--p", "0.3",
                        "--c", "1.0", "--seed", "4", "--verify")
    assert code == 0
    comments, columns, rows = read_csv_text(out)
    row = dict(zip(columns, rows[0]))
    assert int(row["n_sites"]) == 401
    assert int(row["C1"]) >= int(row["C2"])
    assert int(row["K_N"]) <= 401
    assert row["boundary"] == "torus"


def test_theory_csv_values(capsys):
    code, out, _ = _run(capsys, "theory", "--d1-exact", "--p", "0.3",
                        "--c", "0.2", "1.0")
    assert code == 0
    _, columns, rows = read_csv_text(out)
    sub = dict(zip(columns, rows[0]))
    sup = dict(zip(columns, rows[1]))
    assert sub["phase"] == "subcritical"
    assert float(sub["alpha"]) == pytest.approx(7.774553452111182, rel=1e-9)
    assert float(sub["c_cr"]) == pytest.approx(0.7 / 1.3, rel=1e-10)
    assert sup["phase"] == "supercritical"
    assert float(sup["beta"]) == pytest.approx(0.6306946278185916, abs=1e-6)
    assert sup["alpha"] == ""


def test_theory_p0_matches_closed_form(capsys):
    code, out, _ = _run(capsys, "theory", "--p0", "--c", "0.5",
                        "--format", "json")
    assert code == 0
    payload = json.loads(out)
    row = payload["rows"][0]
    assert row["p"] == 0.0
    closed = 1.0 / (0.5 - 1.0 - math.log(0.5))
    assert row["alpha"] == pytest.approx(closed, rel=1e-9)
    assert payload["schema"] == "theory-points"


def test_theory_output_file(tmp_path, capsys):
    target = tmp_path / "points.csv"
    code, out, _ = _run(capsys, "theory", "--d1-exact", "--p", "0.5",
                        "--c", "0.1", "--output", str(target))
    assert code == 0
    assert out == ""
    assert target.read_text().startswith("# percograph-csv/1 theory-points")


def test_branch_row(capsys):
    argv = ("branch", "--p0", "--k", "1", "--c", "2.0", "--reps", "300",
            "--seed", "8", "--max-particles", "5000")
    code, out, _ = _run(capsys, *argv)
    assert code == 0
    _, columns, rows = read_csv_text(out)
    row = dict(zip(columns, rows[0]))
    rho = float(row["rho_hat"])
    assert 0.0 <= float(row["ci_lo"]) <= rho <= float(row["ci_hi"]) <= 1.0
    # survival of the pure long-range branching at c=2
    assert rho == pytest.approx(0.7968121300200199, abs=0.08)
    _, again, _ = _run(capsys, *argv)
    assert again == out


def test_experiment_runs_and_checks(tmp_path, capsys):
    config = {"d": 1, "N": 400, "p": 0.3, "c": [0.2], "replicates": 5,
              "base_seed": 7,
              "checks": [{"metric": "k_frac_mean", "target": "kappa",
                          "op": "abs", "atol": 0.02}]}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(config))
    out_dir = tmp_path / "out"
    code, out, _ = _run(capsys, "experiment", "--config", str(path),
                        "--out-dir", str(out_dir), "--check")
    assert code == 0
    assert "PASS" in out
    assert "1/1 checks passed" in out
    assert (out_dir / "summary.csv").exists()
    assert (out_dir / "per_k.csv").exists()
    assert (out_dir / "summary.json").exists()


def test_experiment_failing_check_exit_code(tmp_path, capsys):
    config = {"d": 1, "N": 200, "p": 0.3, "c": [0.2], "replicates": 3,
              "checks": [{"metric": "k_frac_mean", "target": "kappa",
                          "op": "abs", "atol": 0.0}]}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(config))
    code, out, _ = _run(capsys, "experiment", "--config", str(path), "--check")
    assert code == 1
    assert "FAIL" in out


def test_experiment_summary_to_stdout(tmp_path, capsys):
    config = {"d": 1, "N": 150, "p": 0.2, "c": [0.1], "replicates": 3}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(config))
    code, out, _ = _run(capsys, "experiment", "--config", str(path))
    assert code == 0
    assert out.startswith("# percograph-csv/1 experiment-summary")


def test_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"d": 1, "N": 50, "p": 0.3, "c": 0.2,
                                "bogus": True}))
    code, _, err = _run(capsys, "experiment", "--config", str(path))
    assert code == 2
    assert "bogus" in err
    code, _, err = _run(capsys, "experiment", "--config",
                        str(tmp_path / "missing.json"))
    assert code == 2


def test_usage_error_without_dist_choice(capsys):
    code, _, err = _run(capsys, "theory", "--d1-exact", "--c", "0.2")
    assert code == 2
    assert "--p" in err


def test_domain_error_exit_code(capsys):
    code, _, err = _run(capsys, "theory", "--d1-exact", "--p", "1.5",
                        "--c", "0.2")
    assert code == 3
    assert "domain error" in err
    code, _, err = _run(capsys, "percolate", "--d", "1", "--N", "20",
                        "--p", "-0.2")
    assert code == 3


def test_dist_csv_round_trip_through_cli(tmp_path, capsys):
    dist_path = tmp_path / "law.csv"
    code, out, _ = _run(capsys, "theory", "--d1-exact", "--p", "0.3",
                        "--c", "0.2")
    assert code == 0
    from percograph.distributions import exact_d1, to_csv
    with open(dist_path, "w") as fh:
        to_csv(exact_d1(0.3), fh)
    code2, out2, _ = _run(capsys, "theory", "--dist", str(dist_path),
                          "--c", "0.2")
    assert code2 == 0
    _, cols1, rows1 = read_csv_text(out)
    _, cols2, rows2 = read_csv_text(out2)
    a1 = float(dict(zip(cols1, rows1[0]))["alpha"])
    a2 = float(dict(zip(cols2, rows2[0]))["alpha"])
    assert a1 == pytest.approx(a2, rel=1e-12)


def test_check_subcommand_with_custom_config(tmp_path, capsys):
    config = {"d": 1, "N": 300, "p": 0.3, "c": [0.2], "replicates": 4,
              "base_seed": 5,
              "checks": [{"metric": "k_frac_mean", "target": "kappa",
                          "op": "abs", "atol": 0.05}]}
    path = tmp_path / "chk.json"
    path.write_text(json.dumps(config))
    code, out, _ = _run(capsys, "check", "--config", str(path))
    assert code == 0
    assert "1/1 checks passed" in out


def test_threads_env_fallback(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("PERCOGRAPH_THREADS", "2")
    config = {"d": 1, "N": 100, "p": 0.3, "c": [0.2], "replicates": 4}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(config))
    code, out, _ = _run(capsys, "experiment", "--config", str(path))
    assert code == 0
    # threaded and serial runs agree byte for byte
    monkeypatch.delenv("PERCOGRAPH_THREADS")
    _, serial, _ = _run(capsys, "experiment", "--config", str(path))
    assert out == serial


def test_entry_point_installed():
    proc = subprocess.run(
        [sys.executable, "-m", "percograph", "--version"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert "percograph" in proc.stdout
