import json
import math
import subprocess
import sys

import numpy as np
import pytest

from amslab.cli import fmt, main, write_csv
from amslab.config import ConfigError, load_config
from amslab.synthesis import SchemeSpec


def run(tmp_path, command, config="", *extra):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(config)
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def read_footer(path):
    return {line[2:].split(",")[0]: float(line.split(",")[1])
            for line in path.read_text().splitlines() if line.startswith("# ")}


def test_fmt_is_round_trip_exact():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17):
        assert float(fmt(x)) == x
    assert fmt(np.int64(7)) == "7"


def test_write_csv(tmp_path):
    text = write_csv(tmp_path / "a" / "t.csv", ["x", "y"], [(1, 0.5)], [("slope", 2.0)])
    assert text == "x,y\n1,0.5\n# slope,2\n"
    assert (tmp_path / "a" / "t.csv").read_text() == text


def test_config_layering_and_errors(tmp_path):
    cfg = load_config(text="[scheme]\norder_k = 2\n")
    assert cfg.order_k == 2 and cfg.grid().nt == 64
    with pytest.raises(ConfigError):
        load_config(text="[regions]\nN = blob 1 2\n")
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.ini"))


def test_synth_default(tmp_path, capsys):
    code, out = run(tmp_path, "synth")
    assert code == 0
    report = (out / "synth_report.txt").read_text().splitlines()[1:]
    assert len(report) == 3
    assert all(float(line.rsplit(": ", 1)[1]) <= 1e-12 for line in report)
    sc = SchemeSpec.from_json((out / "scheme.json").read_text())
    assert sc.grid.nt == 64
    assert json.loads((out / "scheme.json").read_text())


def test_synth_geometry_rejection_writes_nothing(tmp_path):
    code, out = run(tmp_path, "synth", "[regions]\nL = slab 18 40\n")
    assert code == 2
    assert not out.exists()


def test_synth_failure_exit_code(tmp_path):
    code, out = run(tmp_path, "synth", "[masses]\nprobe = 10.0\n[scheme]\ncut_width = 12\n")
    assert code == 3
    assert not out.exists()


def test_unstable_grid_rejected(tmp_path):
    assert run(tmp_path, "synth", "[masses]\nprobe = 40.0\n")[0] == 2


def test_order_scan(tmp_path):
    code, out = run(tmp_path, "order-scan")
    assert code == 0
    lines = (out / "order_scan.csv").read_text().splitlines()
    assert lines[0] == "lambda,residual_sup,eff_value"
    assert 1.9 <= read_footer(out / "order_scan.csv")["slope"] <= 2.1
    rows = np.array([[float(v) for v in l.split(",")] for l in lines[1:6]])
    assert np.allclose(rows[:, 2] * rows[:, 0], rows[0, 2] * rows[0, 0], rtol=1e-12)


def test_order_scan_two_probes(tmp_path):
    code, out = run(tmp_path, "order-scan", "[scheme]\norder_k = 2\n")
    assert code == 0
    assert 3.8 <= read_footer(out / "order_scan.csv")["slope"] <= 4.2


def test_quantum_scan(tmp_path):
    code, out = run(tmp_path, "quantum-scan")
    assert code == 0
    foot = read_footer(out / "quantum_scan.csv")
    for name in ("weyl_error", "moment1_error", "moment2_error", "moment4_error"):
        assert 1.9 <= foot[name + "_slope"] <= 2.1
    lines = (out / "quantum_scan.csv").read_text().splitlines()
    log_weyl = [float(l.split(",")[-1]) for l in lines[1:6]]
    assert np.all(np.diff(log_weyl) > 0)


def test_measure(tmp_path):
    code, out = run(tmp_path, "measure", "[statistics]\nreplications = 200\n")
    assert code == 0
    header, row = (out / "measure.csv").read_text().splitlines()[:2]
    vals = dict(zip(header.split(","), map(float, row.split(","))))
    assert vals["empirical_coverage"] >= 0.9
    assert vals["n_trials"] == int(vals["n_trials"]) > 0


def test_measure_wide_delta(tmp_path):
    code, out = run(tmp_path, "measure", "[statistics]\ndelta = 0.5\nreplications = 200\n")
    assert code == 0
    header, row = (out / "measure.csv").read_text().splitlines()[:2]
    vals = dict(zip(header.split(","), map(float, row.split(","))))
    true_value = read_footer(out / "measure.csv")["true_value"]
    # exact coverage of a Gaussian batch mean with the planned N
    s = math.sqrt(vals["analytic_variance"] / vals["n_trials"])
    bias = vals["analytic_mean"] - true_value
    eps = vals["epsilon"]
    phi = lambda z: 0.5 * math.erfc(-z / math.sqrt(2))
    exact = phi((eps - bias) / s) + phi((eps + bias) / s) - 1
    assert vals["empirical_coverage"] >= 0.5
    assert abs(vals["empirical_coverage"] - exact) <= 3 * math.sqrt(exact * (1 - exact) / 200)


def test_measure_lambda_above_threshold(tmp_path):
    code, out = run(tmp_path, "measure", "[statistics]\nlambda = 2.0\n")
    assert code == 2
    assert not out.exists()


def test_swap_demo(tmp_path):
    code, out = run(tmp_path, "swap-demo")
    assert code == 0
    lines = (out / "swap_report.txt").read_text().splitlines()[1:]
    assert len(lines) == 5
    assert all(float(l.rsplit(": ", 1)[1]) <= 1e-10 for l in lines)


def test_swap_demo_unequal_masses(tmp_path):
    assert run(tmp_path, "swap-demo", "[masses]\nprobe = 2.0\n")[0] == 2


def test_seed_override_and_determinism(tmp_path):
    texts = []
    for sub, threads in (("a", "1"), ("b", "4"), ("c", "1")):
        d = tmp_path / sub
        d.mkdir()
        code, out = run(d, "measure", "[statistics]\nreplications = 120\n", "--threads", threads,
                        "--seed", "9")
        assert code == 0
        texts.append((out / "measure.csv").read_bytes())
    assert texts[0] == texts[1] == texts[2]


def test_scan_outputs_identical_across_threads(tmp_path):
    outs = []
    for sub, threads in (("a", "1"), ("b", "3")):
        d = tmp_path / sub
        d.mkdir()
        assert run(d, "quantum-scan", "", "--threads", threads)[0] == 0
        outs.append((d / "out" / "quantum_scan.csv").read_bytes())
    assert outs[0] == outs[1]


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "amslab", "swap-demo", "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "max deviation" in proc.stdout
