import json

import pytest

from src.cop import monitor_offer_process, run_cop
from src.errors import ConfigError, ErrorCode, ParseError, ReservationError
from src.io import (
    SEED_ENV,
    expand_rol,
    instance_to_dict,
    load_config,
    load_instance,
    load_outcome,
    save_instance,
    save_outcome,
)
from src.model import Contract


def test_instance_round_trip(tmp_path, over_and_above):
    path = save_instance(tmp_path / "inst.json", over_and_above)
    again = load_instance(path)
    assert instance_to_dict(again) == instance_to_dict(over_and_above)
    # canonical form is stable
    first = path.read_text(encoding="utf-8")
    save_instance(path, again)
    assert path.read_text(encoding="utf-8") == first


def test_bad_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "schema_version": 1,\n  oops\n}\n', encoding="utf-8")
    with pytest.raises(ParseError) as e:
        load_instance(path)
    assert e.value.code == ErrorCode.PARSE_ERROR
    assert e.value.line == 3
    assert e.value.column is not None


def test_missing_instance_file(tmp_path):
    with pytest.raises(ParseError):
        load_instance(tmp_path / "absent.json")


def test_default_config(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    cfg = load_config()
    assert cfg["seed"] == 0
    assert cfg["dereserve_source"] == "any"
    assert cfg["audit"]["enumeration_cap"] == 20000
    assert cfg["fuzz"]["trials"] == 1000
    assert cfg["generator"]["forest_shape"] == "chain"


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "17")
    assert load_config()["seed"] == 17
    monkeypatch.setenv(SEED_ENV, "seventeen")
    with pytest.raises(ConfigError):
        load_config()


def test_config_errors(tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    with pytest.raises(ConfigError) as e:
        load_config(str(tmp_path / "missing.yaml"))
    assert e.value.code == ErrorCode.BAD_CONFIG

    bad_yaml = tmp_path / "bad.yaml"
    bad_yaml.write_text("seed: 1\nfuzz: a: b\n", encoding="utf-8")
    with pytest.raises(ParseError) as e:
        load_config(str(bad_yaml))
    assert e.value.line == 2

    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(listing))

    source = tmp_path / "source.yaml"
    source.write_text("dereserve_source: nope\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(source))


def test_partial_config_keeps_defaults(tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    path = tmp_path / "cfg.yaml"
    path.write_text("fuzz:\n  trials: 5\n", encoding="utf-8")
    cfg = load_config(str(path))
    assert cfg["fuzz"]["trials"] == 5
    assert cfg["fuzz"]["max_pool"] == 8
    assert cfg["tiebreak"] is None


def test_outcome_round_trip(tmp_path, transfer_instance):
    out = run_cop(transfer_instance, "transfer")
    path = save_outcome(tmp_path / "out.json", out, run={"variant": "transfer"}, with_log=True)
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc["matching"] == [["g", "s", "o", "D"], ["p", "s", "OBC", "OBC"]]
    assert doc["unmatched"] == []

    loaded = load_outcome(path, transfer_instance)
    assert loaded.matching == out.matching
    assert loaded.seat_pools[Contract("g", "s", "o")] == "D"
    assert loaded.run == {"variant": "transfer"}
    assert loaded.fill_report == out.fill_report()
    assert monitor_offer_process(loaded.log) == []


def test_outcome_without_log(tmp_path, two_obc):
    path = save_outcome(tmp_path / "out.json", run_cop(two_obc))
    loaded = load_outcome(path)
    assert loaded.log is None
    assert "log" not in json.loads(path.read_text(encoding="utf-8"))


def test_bad_outcome_files(tmp_path, two_obc):
    cases = {"no_matching.json": {"run": {}}, "short_row.json": {"matching": [["i", "s"]]}}
    for name, doc in cases.items():
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(ReservationError) as e:
            load_outcome(path)
        assert e.value.code == ErrorCode.BAD_SCHEMA

    path = tmp_path / "stranger.json"
    path.write_text(json.dumps({"matching": [["zed", "s", "o"]]}), encoding="utf-8")
    with pytest.raises(ReservationError) as e:
        load_outcome(path, two_obc)
    assert e.value.code == ErrorCode.UNKNOWN_INDIVIDUAL


@pytest.mark.parametrize(
    "membership, disclose, expected",
    [
        ("OBC", True, [("a", "o"), ("a", "OBC"), ("b", "o"), ("b", "OBC")]),
        ("OBC", False, [("a", "o"), ("b", "o")]),
        ("g", True, [("a", "o"), ("b", "o")]),
    ],
)
def test_expand_rol(membership, disclose, expected):
    assert expand_rol(["a", "b"], membership, disclose) == expected
