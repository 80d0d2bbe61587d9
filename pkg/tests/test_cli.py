import hashlib
import json
import subprocess
import sys

import pytest

from piperetime import delay_model as dm
from piperetime.cli import main
from piperetime.ir import parse_design
from piperetime.wgraph import build_wgraph, capacity

from helpers import DESIGNS, golden_paths

IIR = str(DESIGNS / "iir.pipe")


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_optimize_iir(tmp_path, capsys):
    out, rep = tmp_path / "o.pipe", tmp_path / "r.json"
    code, _, err = run(["optimize", IIR, "--out", out, "--report", rep], capsys)
    assert code == 0
    doc = json.loads(rep.read_text())
    assert doc["after"]["capacity_bits"] < doc["before"]["capacity_bits"]
    assert doc["after"]["predicted_critical_path_ps"] <= doc["before"]["predicted_critical_path_ps"]
    assert doc["after"]["capacity_bits"] - doc["before"]["capacity_bits"] == doc["solver_objective"]
    assert "capacity" in err
    parse_design(out.read_text())


def test_optimize_ablation_on_iir(tmp_path, capsys):
    rep_c, rep_a = tmp_path / "c.json", tmp_path / "a.json"
    run(["optimize", IIR, "--out", tmp_path / "c.pipe", "--report", rep_c], capsys)
    code, _, _ = run(["optimize", IIR, "--out", tmp_path / "a.pipe", "--report", rep_a,
                      "--no-timing-constraints"], capsys)
    assert code == 0
    c, a = json.loads(rep_c.read_text()), json.loads(rep_a.read_text())
    assert a["constraint_count"] == 0 and a["ablation"]
    assert a["after"]["capacity_bits"] <= c["after"]["capacity_bits"]
    assert a["after"]["predicted_critical_path_ps"] > c["after"]["predicted_critical_path_ps"]


def test_optimize_is_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        o, r = tmp_path / f"o{k}.pipe", tmp_path / f"r{k}.json"
        assert run(["optimize", DESIGNS / "fir4.pipe", "--out", o, "--report", r, "--seed", 7], capsys)[0] == 0
        outs.append((o.read_bytes(), r.read_bytes()))
    assert outs[0] == outs[1]


def test_optimize_to_stdout(capsys):
    code, out, _ = run(["optimize", IIR], capsys)
    assert code == 0 and out.startswith("design iir {")


def test_report_matches_capacity_and_is_read_only(tmp_path, capsys):
    before = hashlib.sha256(open(IIR, "rb").read()).hexdigest()
    code, out, _ = run(["report", IIR, "--json"], capsys)
    assert code == 0
    doc = json.loads(out)
    regs, bits = capacity(build_wgraph(parse_design(open(IIR).read())))
    assert (doc["before"]["register_count"], doc["before"]["capacity_bits"]) == (regs, bits)
    assert hashlib.sha256(open(IIR, "rb").read()).hexdigest() == before


def test_report_wire_design(tmp_path, capsys):
    p = tmp_path / "w.pipe"
    p.write_text("design w {\n %a = pin : i8\n sink %a : i8\n}\n")
    code, out, _ = run(["report", p, "--json"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["before"] == {"register_count": 0, "capacity_bits": 0, "predicted_critical_path_ps": 0.0}
    assert (doc["nodes"], doc["edges"]) == (2, 1)


def _iir_reference(x):
    y, w = [], []
    for n in range(len(x)):
        w.append((3 * (y[n - 1] if n >= 1 else 0) + 3 * (y[n - 2] if n >= 2 else 0)) & 255)
        y.append(((w[n - 1] if n >= 1 else 0) + x[n]) & 255)
    return y


def test_simulate_iir_impulse(tmp_path, capsys):
    stim = tmp_path / "s.csv"
    x = [1] + [0] * 30
    stim.write_text("cycle,%x\n" + "".join(f"{t},{v}\n" for t, v in enumerate(x)))
    t1, t2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    assert run(["simulate", IIR, stim, "--out", t1], capsys)[0] == 0
    assert run(["simulate", IIR, stim, "--out", t2], capsys)[0] == 0
    assert t1.read_bytes() == t2.read_bytes()
    ys = [int(line.split(",")[1]) for line in t1.read_text().splitlines()[1:]]
    assert ys == _iir_reference(x)


def test_simulate_missing_pin(tmp_path, capsys):
    stim = tmp_path / "s.csv"
    stim.write_text("cycle,%a\n0,1\n")
    code, _, err = run(["simulate", DESIGNS / "mac_fanout.pipe", stim], capsys)
    assert code != 0
    assert "%b" in err and "%en" in err


@pytest.mark.parametrize("path", golden_paths(), ids=lambda p: p.stem)
def test_check_golden(path, tmp_path, capsys):
    out = tmp_path / "o.pipe"
    assert run(["optimize", path, "--out", out], capsys)[0] == 0
    code, msg, _ = run(["check", path, out], capsys)
    assert code == 0, msg


def test_check_corrupted(tmp_path, capsys):
    out = tmp_path / "o.pipe"
    run(["optimize", IIR, "--out", out], capsys)
    out.write_text(out.read_text().replace("%pb_r = delay %pb by 1", "%pb_r = delay %pb by 2"))
    code, msg, _ = run(["check", IIR, out], capsys)
    assert code == 5
    assert "MISMATCH" in msg and "cycle" in msg


def test_check_identical(capsys):
    assert run(["check", IIR, IIR, "--runs", 2, "--cycles", 100], capsys)[0] == 0


def test_check_interface_mismatch(capsys):
    code, _, err = run(["check", IIR, DESIGNS / "fir4.pipe"], capsys)
    assert code == 5 and "interfaces differ" in err


def test_fit_delays_then_use_model(tmp_path, capsys):
    samples = tmp_path / "s.csv"
    dm.write_samples(samples, dm.synthetic_samples(80, seed=2))
    model = tmp_path / "m.json"
    code, _, err = run(["fit-delays", samples, "--out", model, "--trees", 20], capsys)
    assert code == 0 and "MSE" in err
    assert json.loads(model.read_text())["variant"] == "fitted"
    # the synthetic set has no constants, which the IIR uses
    for cmd in ("report", "optimize"):
        code, _, err = run([cmd, IIR, "--delay-model", model], capsys)
        assert code == 4 and "const" in err
    wire_kinds = [dm.DelaySample(dm.OpFeatures(k, 1, w), 0.0)
                  for k in (dm.OpKind.CONST, dm.OpKind.CONCAT, dm.OpKind.EXTRACT) for w in (1, 8, 64)]
    dm.write_samples(samples, dm.synthetic_samples(80, seed=2) + wire_kinds)
    assert run(["fit-delays", samples, "--out", model, "--trees", 20], capsys)[0] == 0
    assert run(["optimize", IIR, "--delay-model", model, "--out", tmp_path / "o.pipe"], capsys)[0] == 0
    assert run(["check", IIR, tmp_path / "o.pipe"], capsys)[0] == 0


@pytest.mark.parametrize("text, code", [
    ("design x {\n %a = pin i8\n}\n", 1),
    ("design x {\n %a = pin : i8\n %b = add %a, %a : i4\n sink %b : i4\n}\n", 2),
])
def test_exit_codes_for_bad_input(tmp_path, capsys, text, code):
    p = tmp_path / "bad.pipe"
    p.write_text(text)
    got, _, err = run(["optimize", p], capsys)
    assert got == code and err


def test_exit_code_solver(tmp_path, capsys):
    assert run(["optimize", IIR, "--target-ps", 1], capsys)[0] == 3


def test_exit_code_io(tmp_path, capsys):
    assert run(["optimize", tmp_path / "missing.pipe"], capsys)[0] == 4
    bad = tmp_path / "m.json"
    bad.write_text("{not json")
    assert run(["optimize", IIR, "--delay-model", bad], capsys)[0] == 4


def test_exit_code_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["optimize"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 64


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "piperetime.cli", "report", IIR],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "registers" in res.stdout
