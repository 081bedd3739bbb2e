import argparse
import io
import json
import re
import subprocess
import sys

import pytest

from cfdim import cli, pressure
from cfdim.cli import RunConfig, UsageError, build_parser, dispatch, emit_curve_data, main, parse
from cfdim.errors import ConvergenceError

BASE = {
    "solve": ["--B", "2"],
    "curve": ["--grid", "2,4"],
    "partition": ["--n", "2", "--B", "2"],
    "construct": ["--B", "4", "--s", "1/2"],
    "holder": ["--B", "4", "--s", "1/2", "--level", "3"],
    "sample": ["--B", "4", "--s", "1/2", "--depth", "5"],
    "boxdim": ["--B", "4", "--s", "1/2", "--levels", "2,3,4"],
    "classify": ["--phi", "geometric:2"],
    "montecarlo": ["--phi", "power:1"],
}
SAMPLE_VALUES = {
    "B": "3", "s": "1/2", "M": "2", "L": "1", "m": "2", "n": "3", "tol": "1e-8", "degree": "16",
    "grid": "2,3", "grid_file": "grid.txt", "spec": "spec.json", "n_seq": "2,6", "count": "2",
    "gamma": "3.5", "start": "2", "epsilon0": "0.7", "level": "2", "slack": "0.1", "depth": "4",
    "seed": "3", "samples": "2", "levels": "2,3,4", "phi": "geometric:3", "N": "50",
    "digits": "[1,2,3]", "tail_fraction": "0.5", "S": "10",
}


def run(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def subparsers():
    ap = build_parser()
    action = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction))
    return action.choices


# -- parse ----------------------------------------------------------------------------


def test_parse_solve_example():
    cfg = parse(["solve", "--B", "2", "--M", "20", "--m", "2"])
    assert cfg.command == "solve" and cfg.output_format == "json"
    assert cfg.params["B"] == 2.0 and cfg.params["M"] == 20 and cfg.params["m"] == 2
    assert cfg.params["tol"] == 1e-10 and cfg.params["degree"] == 32


def test_parse_defaults():
    assert parse(["solve", "--B", "2"]).params["M"] == 50
    assert parse(["montecarlo", "--phi", "power:1"]).params["seed"] == 0


def test_b_below_one(capsys):
    with pytest.raises(UsageError, match="B must exceed 1"):
        parse(["solve", "--B", "0.5"])
    code, out, err = run(["solve", "--B", "0.5"], capsys)
    assert code == 1 and "--B: B must exceed 1" in err and out == ""


def test_empty_argv(capsys):
    code, _, err = run([], capsys)
    assert code == 1 and "usage" in err


@pytest.mark.parametrize("argv,flag", [
    (["solve", "--B", "2", "--bogus", "1"], "--bogus"),
    (["solve", "--B", "two"], "--B"),
    (["solve"], "--B"),
    (["partition", "--B", "2"], "--n"),
])
def test_usage_errors_name_flag(argv, flag):
    with pytest.raises(UsageError, match=re.escape(flag)):
        parse(argv)


def test_format_either_side():
    assert parse(["--format", "csv", "solve", "--B", "2"]).output_format == "csv"
    assert parse(["solve", "--B", "2", "--format", "csv"]).output_format == "csv"


@pytest.mark.parametrize("cmd", sorted(BASE))
def test_every_help_flag_documented_and_parseable(cmd, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    sp = subparsers()[cmd]
    text = sp.format_help()
    for action in sp._actions:
        if not action.option_strings or action.dest == "help":
            continue
        flag = action.option_strings[0]
        assert flag in text
        argv = [cmd] + BASE[cmd]
        if action.nargs == 0:
            argv.append(flag)
        else:
            value = action.choices[-1] if action.choices else SAMPLE_VALUES[action.dest]
            if action.type is float and "/" in value:
                value = "0.5"
            if flag in argv:
                i = argv.index(flag)
                argv[i + 1] = value
            else:
                argv += [flag, value]
        cfg = parse(argv)
        assert cfg.command == cmd


def test_top_level_help_lists_commands():
    text = build_parser().format_help()
    for cmd in BASE:
        assert cmd in text


def test_help_exits_zero():
    r = subprocess.run([sys.executable, "-m", "cfdim.cli", "solve", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "--no-tail" in r.stdout


# -- dispatch ---------------------------------------------------------------------------


def test_solve_json(capsys):
    code, out, _ = run(["solve", "--B", "2", "--M", "10", "--tol", "1e-8"], capsys)
    rec = json.loads(out)
    assert code == 0
    assert set(rec) >= {"problem", "value", "bracket_width", "method", "residual"}
    assert rec["value"] == pytest.approx(pressure.solve_dimension(2, 10, tol=1e-8).value)


def test_curve_csv_header(tmp_path, capsys):
    grid = tmp_path / "grid.txt"
    grid.write_text("8\n2\n4\n")
    code, out, _ = run(["curve", "--grid-file", str(grid), "--M", "10", "--format", "csv"], capsys)
    lines = out.strip().split("\n")
    assert code == 0 and lines[0] == "B,m,M,s_star,residual"
    assert [float(x.split(",")[0]) for x in lines[1:]] == [2.0, 4.0, 8.0]
    s = [float(x.split(",")[3]) for x in lines[1:]]
    assert s[0] > s[1] > s[2]


def test_joint_curve_columns(capsys):
    code, out, _ = run(["curve", "--grid", "2,8", "--M", "10", "--joint", "--format", "csv"], capsys)
    lines = out.strip().split("\n")
    assert code == 0 and lines[0] == "B,M,s_B,t_B,ordered"
    assert all(line.endswith("true") for line in lines[1:])


def test_construct_invalid_spec(capsys):
    code, out, err = run(["construct", "--B", "4", "--s", "1/2", "--n-seq", "3,4"], capsys)
    assert code == 1 and "invalid spec" in err and "leaves no room" in err and out == ""


def test_construct_spec_file(tmp_path, capsys):
    f = tmp_path / "spec.json"
    f.write_text(json.dumps({"B": "4", "s": "1/2", "M": 1, "L": 1, "n_seq": [2, 6, 14]}))
    code, out, _ = run(["construct", "--spec", str(f)], capsys)
    rec = json.loads(out)
    assert code == 0 and rec["peaks"] == {"2": 8, "6": 128, "14": 32768}
    code, out, _ = run(["construct", "--spec", str(f), "--level", "3"], capsys)
    assert out.startswith("word,length_num,length_den,mu_log,case,gap_lower\n")


def test_missing_file_exit_one(capsys):
    code, _, err = run(["construct", "--spec", "/nonexistent/spec.json"], capsys)
    assert code == 1 and "error" in err


def test_convergence_failure_exit_two(monkeypatch, capsys):
    def boom(*a, **k):
        raise ConvergenceError("did not settle")

    monkeypatch.setattr(pressure, "solve_dimension", boom)
    code, _, err = run(["solve", "--B", "2"], capsys)
    assert code == 2 and "did not settle" in err


def test_other_commands_run(capsys):
    for argv in (["holder", "--B", "4", "--s", "1/2", "--level", "6"],
                 ["sample", "--B", "4", "--s", "1/2", "--depth", "10", "--samples", "3"],
                 ["boxdim", "--B", "4", "--s", "1/2", "--levels", "2,3,4,5"],
                 ["partition", "--n", "3", "--B", "2", "--M", "3", "--s", "0.5"],
                 ["classify", "--phi", "doubly-exponential:3", "--predict"],
                 ["classify", "--phi", "geometric:2", "--digits", "[1,2,3,4,5,6]", "--set", "E1"],
                 ["classify", "--phi", "power:2"],
                 ["montecarlo", "--phi", "geometric:2", "--S", "200", "--N", "50"]):
        code, out, err = run(argv, capsys)
        assert code == 0, (argv, err)
        json.loads(out)


def test_classify_predict_quarter(capsys):
    _, out, _ = run(["classify", "--phi", "doubly-exponential:3", "--predict"], capsys)
    assert json.loads(out)["prediction"]["value"] == 0.25


def test_classify_b1_refused(capsys):
    code, _, err = run(["classify", "--phi", "power:2", "--predict"], capsys)
    assert code == 1 and "B must exceed 1" in err


def test_bad_phi(capsys):
    code, _, err = run(["classify", "--phi", "wiggly:3"], capsys)
    assert code == 1 and "--phi" in err


@pytest.mark.parametrize("argv", [
    ["montecarlo", "--phi", "power:1", "--S", "3000", "--N", "200", "--seed", "5"],
    ["sample", "--B", "4", "--s", "1/2", "--depth", "20", "--seed", "11", "--samples", "4"],
    ["curve", "--grid", "2,3", "--M", "5", "--format", "csv"],
])
def test_byte_identical_runs(argv, capsys):
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b and a


def test_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "cfdim.cli", "classify", "--phi", "doubly-exponential:3",
                        "--predict"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["prediction"]["value"] == 0.25


def test_dispatch_writes_to_stream():
    buf = io.StringIO()
    cfg = parse(["classify"] + BASE["classify"])
    assert dispatch(RunConfig(cfg.command, cfg.params), buf) == 0
    assert json.loads(buf.getvalue())["phi"]["tag"] == "geometric"


# -- emit_curve_data ---------------------------------------------------------------------


def test_emit_three_points_sorted():
    rows = [{"B": 8.0, "m": 2, "M": 20, "s_star": 0.69, "residual": 0.0},
            {"B": 2.0, "m": 2, "M": 20, "s_star": 0.83, "residual": 0.0},
            {"B": 4.0, "m": 2, "M": 20, "s_star": 0.75, "residual": 0.0}]
    text = emit_curve_data(rows)
    assert text.split("\n")[0] == "B,m,M,s_star,residual"
    assert [line.split(",")[0] for line in text.strip().split("\n")[1:]] == ["2.0", "4.0", "8.0"]
    assert emit_curve_data(list(reversed(rows))) == text


def test_emit_duplicates_last_wins():
    rows = [{"B": 2.0, "s_star": 0.1}, {"B": 2.0, "s_star": 0.2}]
    with pytest.warns(UserWarning, match="duplicate"):
        text = emit_curve_data(rows)
    assert text.strip().split("\n")[1].split(",")[3] == "0.2"


def test_emit_empty():
    with pytest.raises(cli.DomainError):
        emit_curve_data([])
