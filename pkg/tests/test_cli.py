import json

import pytest

from src.io import load_instance
from src.run_matching import EXIT_CHECKS_FAILED, EXIT_ERROR, EXIT_OK, cli_dispatch


@pytest.fixture(autouse=True)
def fixed_seed(monkeypatch):
    monkeypatch.delenv("HRES_SEED", raising=False)


def test_match_writes_outcome_and_log(tmp_path, data_dir, capsys):
    out = tmp_path / "outcome.json"
    code = cli_dispatch(["match", str(data_dir / "two_obc.json"), "--log", "--out", str(out)])
    assert code == EXIT_OK
    assert "[MATCH] Wrote outcome to:" in capsys.readouterr().out
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["matching"] == [["i", "s", "o", "o"], ["j", "s", "OBC", "OBC"]]
    assert doc["run"]["variant"] == "plain"
    assert doc["run"]["order"] == "id"
    assert len(doc["log"]["steps"]) == 3

    assert cli_dispatch(["verify", str(data_dir / "two_obc.json"), str(out)]) == EXIT_OK


def test_verify_flags_hand_edited_outcome(tmp_path, data_dir, capsys):
    out = tmp_path / "edited.json"
    out.write_text(json.dumps({"matching": [["j", "s", "o", "o"], ["i", "s", "OBC", "OBC"]]}), encoding="utf-8")
    report = tmp_path / "audits.json"
    code = cli_dispatch(["verify", str(data_dir / "two_obc.json"), str(out), "--out", str(report)])
    assert code == EXIT_CHECKS_FAILED
    audits = {a["property"]: a for a in json.loads(report.read_text(encoding="utf-8"))["audits"]}
    assert not audits["stability"]["passed"]
    assert not audits["justified-envy"]["passed"]
    assert audits["category-caps"]["passed"]


def test_transfer_match(tmp_path, data_dir):
    out = tmp_path / "outcome.json"
    assert cli_dispatch(["match", str(data_dir / "transfer.json"), "--transfer", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert ["g", "s", "o", "D"] in doc["matching"]
    assert cli_dispatch(["verify", str(data_dir / "transfer.json"), str(out)]) == EXIT_OK


def test_validate(tmp_path, data_dir, capsys):
    assert cli_dispatch(["validate", str(data_dir / "over_and_above.json")]) == EXIT_OK
    assert "[VALIDATE]" in capsys.readouterr().out

    broken = tmp_path / "broken.json"
    broken.write_text("{\n", encoding="utf-8")
    assert cli_dispatch(["validate", str(broken)]) == EXIT_ERROR
    assert "PARSE_ERROR" in capsys.readouterr().err

    overflow = json.loads((data_dir / "over_and_above.json").read_text(encoding="utf-8"))
    overflow["institutions"][0]["vertical_capacities"] = {"OBC": 5}
    bad = tmp_path / "overflow.json"
    bad.write_text(json.dumps(overflow), encoding="utf-8")
    assert cli_dispatch(["validate", str(bad)]) == EXIT_ERROR
    assert "CAPACITY_OVERFLOW" in capsys.readouterr().err

    listed = json.loads((data_dir / "over_and_above.json").read_text(encoding="utf-8"))
    listed["institutions"][0]["vertical_capacities"] = ["OBC", 1]
    bad = tmp_path / "listed.json"
    bad.write_text(json.dumps(listed), encoding="utf-8")
    assert cli_dispatch(["validate", str(bad)]) == EXIT_ERROR
    assert "BAD_SCHEMA" in capsys.readouterr().err


def test_choose_writes_trace(tmp_path, data_dir):
    out = tmp_path / "choice.json"
    code = cli_dispatch(["choose", str(data_dir / "over_and_above.json"), "--institution", "s", "--out", str(out)])
    assert code == EXIT_OK
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["chosen"] == [["a", "s", "o"], ["b", "s", "OBC"]]
    assert doc["run"]["command"] == "choose"
    assert cli_dispatch(["choose", str(data_dir / "over_and_above.json"), "--institution", "nowhere"]) == EXIT_ERROR


def test_gen_then_validate(tmp_path, capsys):
    out = tmp_path / "gen.json"
    assert cli_dispatch(["gen", "--seed", "3", "--individuals", "5", "--out", str(out)]) == EXIT_OK
    assert "[GEN] seed=3" in capsys.readouterr().out
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["run"]["seed"] == 3
    assert doc["run"]["params"]["individuals"] == 5
    assert len(load_instance(out).individuals) == 5
    assert cli_dispatch(["validate", str(out)]) == EXIT_OK


def test_probe_small(tmp_path, data_dir):
    out = tmp_path / "probe.json"
    code = cli_dispatch(["probe", str(data_dir / "two_obc.json"), "--trials", "20", "--out", str(out)])
    assert code == EXIT_OK
    names = [a["property"] for a in json.loads(out.read_text(encoding="utf-8"))["audits"]]
    assert names == ["choice-properties", "aggregate-properties", "strategy-proofness", "order-invariance"]


@pytest.mark.parametrize("argv", [[], ["match"], ["frobnicate"], ["gen", "--out", "x.json", "--forest-shape", "blob"]])
def test_bad_arguments(argv):
    assert cli_dispatch(argv) == EXIT_ERROR


def test_help_exits_cleanly():
    assert cli_dispatch(["--help"]) == EXIT_OK
