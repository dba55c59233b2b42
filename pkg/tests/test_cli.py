"""Exit codes and output of the command-line client."""

import json

import pytest
from click.testing import CliRunner

from epcalc.cli import main

P = "rec X { X = a.X + b.Y, Y = a.Y }"
Q = "rec Z { Z = a.Z } | b.0"


@pytest.fixture()
def run():
    runner = CliRunner()

    def go(*args):
        return runner.invoke(main, list(args), catch_exceptions=False)

    return go


def test_lts_text(run):
    res = run("lts", "--lang", "ccs", "rec X { X = a.X }")
    assert res.exit_code == 0
    assert "states: 1" in res.output
    assert "recAct(X,{X = a.X},act(a) rec X {X = a.X})" in res.output


def test_lts_deterministic(run):
    a = run("lts", "--lang", "ccs", "a.0 | b.0", "--format", "json")
    b = run("lts", "--lang", "ccs", "a.0 | b.0", "--format", "json")
    assert a.output == b.output


def test_lts_dot(run):
    res = run("lts", "--lang", "ccs", "a.0", "--format", "dot")
    assert res.output.startswith("digraph")


def test_lts_abcde_discard(run):
    res = run("lts", "--lang", "abcde", "0")
    assert "-b:->" in res.output


def test_lts_parse_error_exit_2(run):
    res = run("lts", "--lang", "ccs", "a.0 +")
    assert res.exit_code == 2


def test_epbisim_exit_codes(run):
    assert run("epbisim", "--lang", "ccs", "a.0", "a.0").exit_code == 0
    assert run("epbisim", "--lang", "ccs", P, Q).exit_code == 1
    assert run("strongbisim", "--lang", "ccs", P, Q).exit_code == 0


def test_epbisim_witness_output(run):
    res = run("epbisim", "--lang", "ccs", "a.0 + b.0", "b.0 + a.0", "--witness")
    assert res.exit_code == 0
    payload = res.output.split("\n", 1)[1]
    witness = json.loads(payload)
    assert witness["triples"]


def test_epbisim_explain_output(run):
    res = run("epbisim", "--lang", "ccs", P, Q, "--explain")
    assert res.exit_code == 1
    payload = res.output.split("\n", 1)[1]
    refutation = json.loads(payload)
    assert refutation["candidates"][0]["violated"] == "2b"


def test_succ_json_lines(run):
    res = run("succ", "--lang", "ccs", "a.0 | b.0")
    lines = [json.loads(l) for l in res.output.splitlines() if l]
    assert len(lines) == 2
    assert set(lines[0]) == {"state", "t", "u", "v"}


def test_check_format_builtin(run):
    res = run("check-format", "abcde")
    assert res.exit_code == 0
    assert "ok:" in res.output


def test_check_format_mutation(run, tmp_path):
    bad = tmp_path / "bad.lang"
    bad.write_text(
        "language broken\nchannels: a\ntransition rules:\n"
        "  bad :: x -a-> x' => x | y -a-> x' | x'\n"
    )
    res = run("check-format", str(bad))
    assert res.exit_code == 1
    assert "univariate-target" in res.output


def test_lang_path_env(run, tmp_path, monkeypatch):
    lang = tmp_path / "mini.lang"
    lang.write_text(
        "language mini\nchannels: a\ntransition rules:\n"
        "  act(?a) [?a in Act] :: => ?a.x -?a-> x\n"
    )
    monkeypatch.setenv("EPCALC_LANG_PATH", str(tmp_path))
    res = run("lts", "--lang", "mini.lang", "a.0")
    assert res.exit_code == 0, res.output


def test_epbisim_lts_file(run, tmp_path):
    data = {
        "states": ["A", "B"],
        "transitions": [
            {"id": "t1", "src": "A", "label": "y", "tgt": "A"},
            {"id": "u", "src": "A", "label": "x", "tgt": "B"},
            {"id": "t2", "src": "B", "label": "y", "tgt": "B"},
        ],
        "successors": [["t1", "u", "t2"], ["u", "t1", "u"]],
        "actions": ["x", "y"],
    }
    f = tmp_path / "model.json"
    f.write_text(json.dumps(data))
    assert run("epbisim-lts", str(f), "A", "A").exit_code == 0


def test_witness_verify_command(run, tmp_path):
    res = run("epbisim", "--lang", "ccs", "a.0", "a.0", "--witness")
    witness = json.loads(res.output.split("\n", 1)[1])
    f = tmp_path / "w.json"
    f.write_text(json.dumps(witness))
    res = run("witness-verify", str(f), "--lang", "ccs")
    assert res.exit_code == 0
    witness["triples"][0]["R"] = []
    f.write_text(json.dumps(witness))
    res = run("witness-verify", str(f), "--lang", "ccs")
    assert res.exit_code == 1


def test_channel_override(run):
    res = run("lts", "--lang", "ccs", "--channels", "p,q", "p.0")
    assert res.exit_code == 0
    res = run("lts", "--lang", "ccs", "--channels", "p,q", "a.0")
    assert res.exit_code == 2


def test_broadcast_and_signal_override(run):
    res = run(
        "lts", "--lang", "abcde",
        "--channels", "c", "--broadcasts", "m,n", "--signals", "u",
        "m!.0 | 0 ^ u",
    )
    assert res.exit_code == 0
    assert "-m!->" in res.output and "-n:->" in res.output
