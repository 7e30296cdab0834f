import csv
import json
import os
import subprocess
import sys

import pytest

from swarmctl.cli import main
from swarmctl.experiments import JOINT_HEADER, SWEEP_HEADER, TRAJECTORY_HEADER


def _cfg(tmp_path, payload, name="s.json"):
    f = tmp_path / name
    f.write_text(json.dumps(payload))
    return str(f)


def _header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def test_delay_bound_output(capsys, tmp_path):
    out = tmp_path / "b.json"
    assert main(["delay-bound", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "tau_max_ms: 34.8"
    assert "lambda_max:" in text and "lyapunov_residual:" in text
    rep = json.loads(out.read_text())
    assert rep["tau_max_ms"] == pytest.approx(34.7962246, rel=1e-8)


def test_delay_bound_printed_variant(capsys):
    assert main(["delay-bound", "--m1-variant", "printed"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "tau_max_ms: 40.2"


def test_delay_bound_ceiling(capsys, tmp_path):
    assert main(["delay-bound", "--config", _cfg(tmp_path, {"k": 2})]) == 0
    tau = float(capsys.readouterr().out.splitlines()[1].split(":")[1])
    assert tau <= 0.25


def test_unstable_positive_gains_exit_2(capsys, tmp_path):
    gains = dict(a2=0.1, b2=0.1, a_hat2=1.0, b_hat2=0.1, a3=1.0, b3=0.1, a_hat3=0.1, b_hat3=1.0)
    cfg = _cfg(tmp_path, {"gains": gains})
    assert main(["delay-bound", "--config", cfg]) == 2
    assert "undelayed system unstable" in capsys.readouterr().err
    assert main(["simulate", "--config", cfg]) == 2


def test_negated_gains_rejected(capsys, tmp_path):
    gains = {k: -v for k, v in dict(a2=1, b2=1, a_hat2=1.5, b_hat2=1.5).items()}
    assert main(["delay-bound", "--config", _cfg(tmp_path, {"gains": gains})]) == 1
    assert "must be > 0" in capsys.readouterr().err


def test_config_errors_exit_1(capsys, tmp_path):
    assert main(["delay-bound", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["simulate", "--config", _cfg(tmp_path, {"targets": {"x_bar_32": 1}})]) == 1
    assert "derived field" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--seed", "abc"])
    assert exc.value.code == 1
    assert main(["montecarlo", "--mc-trials", "100"]) == 1
    assert main(["reliability", "--spacing-min", "5", "--spacing-max", "1"]) == 1


def test_simulate_csv_and_zero_delay(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    rep = tmp_path / "r.json"
    assert main(["simulate", "--seed", "3", "--out", str(out), "--report", str(rep)]) == 0
    assert _header(out) == TRAJECTORY_HEADER
    delayed = json.loads(rep.read_text())
    assert delayed["converged"] is True
    with open(out) as fh:
        assert sum(1 for _ in fh) == 1 + 60001
    assert main(["simulate", "--seed", "3", "--delay-ms", "0", "--report", str(rep)]) == 0
    direct = json.loads(rep.read_text())
    assert direct["converged"] is True
    assert direct["settle_time_s"] < delayed["settle_time_s"]


def test_reliability_sweep(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["reliability", "--delay-ms", "18.2", "--densities", "0.05", "--spacing-min", "2",
                 "--spacing-max", "10", "--spacing-step", "2", "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == SWEEP_HEADER
    vals = {float(r["spacing_m"]): float(r["reliability_analytic"]) for r in rows}
    assert vals[4.0] == pytest.approx(0.901, abs=5e-4)
    assert vals[10.0] == pytest.approx(0.355, abs=5e-3)
    assert all(r["reliability_mc"] == "" for r in rows)
    seq = [vals[d] for d in sorted(vals)]
    assert seq == sorted(seq, reverse=True)


def test_montecarlo_to_stdout(capsys):
    assert main(["montecarlo", "--delay-ms", "18.2", "--densities", "0.05", "--spacing-min", "4",
                 "--spacing-max", "4", "--mc-trials", "20000", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    row = lines[1].split(",")
    assert abs(float(row[3]) - float(row[2])) < 0.03 and float(row[4]) > 0


def test_joint_outputs(capsys, tmp_path):
    out = tmp_path / "joint.csv"
    assert main(["joint", "--seed", "2", "--out", str(out)]) == 0
    assert _header(out) == JOINT_HEADER
    assert _header(tmp_path / "joint_trajectory.csv") == TRAJECTORY_HEADER
    assert "delay_met_fraction:" in capsys.readouterr().out


def _run(args, env_extra=None):
    env = dict(os.environ, **(env_extra or {}))
    return subprocess.run([sys.executable, "-m", "swarmctl", *args], capture_output=True, env=env)


def test_reruns_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"t{i}.csv"
        r = _run(["simulate", "--seed", "9", "--horizon-s", "5", "--out", str(out)])
        assert r.returncode in (0, 2)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_console_entry_point():
    r = subprocess.run(["swarmctl", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "delay-bound" in r.stdout
