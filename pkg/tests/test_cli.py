import io
import json
import subprocess
import sys

import pytest

from speckernel import fixtures
from speckernel.cli import run_cli
from speckernel.report import KEYS, VERSION, loads, stable_view
from speckernel.scenarios import SCENARIOS


def cli(*argv):
    out = io.StringIO()
    code = run_cli(list(argv), out)
    return code, out.getvalue()


def cli_json(*argv):
    code, text = cli("--format", "json", *argv)
    return code, json.loads(text)


@pytest.mark.parametrize("argv, code", [
    (["run", "--system", "s_scope", "--attacker", fixtures.SCOPE_ATTACK], 1),
    (["run", "--system", "s_probe", "--syscall", "probe", "--args", "8"], 0),
    (["run", "--system", "s_tiny", "--attacker", "syscall calc(1);", "--fuel", "1"], 2),
    (["check-ni", "--system", "s_retf", "--syscall", "leakf"], 1),
    (["check-ni", "--system", "s_retf", "--syscall", "zero"], 0),
    (["check-slni", "--system", "s_ff", "--depth", "4"], 1),
    (["check-slni", "--system", "s_tiny", "--depth", "4"], 0),
    (["search", "--system", "s_msg_vuln", "--depth", "8"], 1),
    (["search", "--system", "s_msg_vuln", "--depth", "8", "--transform", "fence"], 0),
    (["estimate-delta", "--system", "s_probe", "--trials", "500"], 0),
    (["experiment", "--system", "s_probe", "--trials", "500"], 0),
])
def test_exit_codes(argv, code):
    assert cli(*argv)[0] == code


@pytest.mark.parametrize("argv", [
    [],
    ["nope"],
    ["run", "--system", "s_probe"],
    ["run", "--system", "no_such_fixture", "--syscall", "probe"],
    ["run", "--system", "s_probe", "--attacker", "syscall probe(;"],
    ["run", "--system", "s_probe", "--attacker", "x := tbl;"],
    ["check-ni", "--system", "s_retf", "--syscall", "missing"],
    ["scenario", "no-such-scenario"],
])
def test_usage_and_parse_errors_exit_3(argv, capsys):
    assert cli(*argv)[0] == 3
    assert "speckernel: error:" in capsys.readouterr().err


def test_report_shape():
    code, rep = cli_json("run", "--system", "s_probe", "--syscall", "probe", "--args", "6",
                         "--trace")
    assert list(rep) == list(KEYS)
    assert rep["version"] == VERSION and rep["exit_code"] == code == 1
    assert rep["outcome"]["kind"] == "Unsafe"
    assert rep["details"]["last_rule"] == "Call-Unsafe"
    assert rep["system"]["name"] == "s_probe"


def test_json_is_byte_identical_except_runtime():
    argv = ["check-slni", "--system", "s_ff", "--depth", "4", "--seed", "5"]
    _, a = cli("--format", "json", *argv)
    _, b = cli("--format", "json", *argv)
    ra, rb = json.loads(a), json.loads(b)
    ra["runtime_seconds"] = rb["runtime_seconds"] = 0
    assert json.dumps(ra) == json.dumps(rb)
    assert stable_view(ra) == stable_view(rb)


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("SPECKERNEL_SEED", "11")
    _, rep = cli_json("experiment", "--system", "s_probe", "--trials", "50")
    assert rep["seed"] == 11


def test_experiment_report():
    code, rep = cli_json("experiment", "--system", "s_probe", "--trials", "2000", "--seed", "7",
                         "--attacker", fixtures.probe_attack(4))
    exp = rep["experiment"]
    assert code == 0 and exp["bound"] == 0.25 and exp["within_bound"]
    assert exp["unsafe"] + exp["err"] + exp["done"] == 2000


def test_replay_round_trip(tmp_path):
    path = tmp_path / "r.json"
    code, _ = cli("--report", str(path), "search", "--system", "s_msg_vuln", "--depth", "8")
    assert code == 1
    rcode, text = cli("--format", "json", "replay", str(path))
    r = json.loads(text)
    assert rcode == 0 and r["reproduced"] and r["witness_reexecuted"]
    assert r["exit_code"] == r["original_exit_code"] == 1


def test_replay_detects_tampering(tmp_path):
    path = tmp_path / "r.json"
    cli("--report", str(path), "check-ni", "--system", "s_retf", "--syscall", "leakf")
    rep = loads(path.read_text())
    rep["verdict"]["status"] = "holds"
    path.write_text(json.dumps(rep))
    assert cli("replay", str(path))[0] == 1


def test_transform_then_search(tmp_path):
    out = tmp_path / "fenced.sys"
    assert cli("transform", "--system", "s_msg_vuln", "--out", str(out))[0] == 0
    assert "fence;" in out.read_text()
    assert cli("search", "--system", str(out), "--depth", "8")[0] == 0


def test_transform_prints_system_by_default():
    code, text = cli("transform", "--system", "s_ff")
    assert code == 0 and "fence;" in text and text.lstrip().startswith("system")


def test_pipeline():
    code, rep = cli_json("pipeline", "--system", "s_msg", "--trials", "200",
                         "--attacker", fixtures.speculative_probe(0))
    assert code == 0 and rep["verdict"]["status"] == "holds"


def test_scenario_list():
    code, text = cli("scenario", "--list")
    assert code == 0
    for name in SCENARIOS:
        assert name in text


def test_scenario_run_matches_expectation():
    code, rep = cli_json("scenario", "ff-slni")
    assert code == SCENARIOS["ff-slni"].expected_exit
    assert rep["details"]["scenario"]["as_expected"]


def test_figures(tmp_path):
    code, _ = cli("--figures", str(tmp_path), "check-slni", "--system", "s_ff", "--depth", "4")
    assert code == 1
    assert sorted(p.name for p in tmp_path.iterdir()) == ["check-slni-slni.png"]
    cli("--figures", str(tmp_path), "experiment", "--system", "s_probe", "--trials", "200")
    assert (tmp_path / "experiment-rate.png").stat().st_size > 0


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "speckernel.cli", "scenario", "--list"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "ff-slni" in r.stdout
