import pytest

from src.aggregate import (
    TRANSFER_PRECEDENCE,
    AggregateConfig,
    category_choice,
    choose_aggregate,
    choose_aggregate_transfer,
    dereserved_choice,
    institution_choice,
    sequential_choice,
)
from src.errors import ChoiceError, ConfigError, ErrorCode
from src.model import Contract
from src.oracles import check_fairness
from tests.conftest import make_instance


def offered(instance, s="s"):
    return [x for ind in instance.individuals.values() for x in ind.contracts() if x.institution == s]


def test_over_and_above(over_and_above):
    config = AggregateConfig.for_institution(over_and_above, "s")
    out = choose_aggregate(over_and_above, offered(over_and_above), config)
    assert out.chosen == {Contract("a", "s", "o"), Contract("b", "s", "OBC")}
    obc = out.category("OBC")
    assert obc.unavailable == (Contract("a", "s", "OBC"),)
    assert obc.rejected == ()
    assert out.category("o").rejected == (Contract("c", "s", "o"),)
    assert check_fairness(over_and_above, offered(over_and_above), out, "s").passed


def test_fill_report_is_stable(over_and_above):
    config = AggregateConfig.for_institution(over_and_above, "s")
    first = institution_choice(over_and_above, offered(over_and_above), config).fill_report()
    second = institution_choice(over_and_above, offered(over_and_above), config).fill_report()
    assert first == second
    assert [r["category"] for r in first] == ["o", "SC", "ST", "OBC", "EWS"]
    assert first[0] == {
        "institution": "s",
        "category": "o",
        "capacity": 1,
        "filled": 1,
        "available": 2,
        "unavailable": 0,
        "rejected": 1,
    }


def test_empty_offer_reports_vacancies(over_and_above):
    config = AggregateConfig.for_institution(over_and_above, "s")
    out = choose_aggregate(over_and_above, [], config)
    assert out.chosen == frozenset()
    assert out.obc_vacancies == 1


def test_hard_reserve_keeps_obc_vacant(transfer_instance):
    config = AggregateConfig.for_institution(transfer_instance, "s")
    out = choose_aggregate(transfer_instance, [Contract("g", "s", "o")], config)
    assert out.chosen == frozenset()
    assert out.obc_vacancies == 2


def test_transfer_moves_vacancy_to_d(transfer_instance):
    config = AggregateConfig.for_institution(transfer_instance, "s", transfer=True)
    out = choose_aggregate_transfer(transfer_instance, offered(transfer_instance), config)
    assert out.chosen == {Contract("p", "s", "OBC"), Contract("g", "s", "o")}
    assert out.obc_vacancies == 1
    assert out.dereserved_capacity == 1
    assert out.seat_pools[Contract("g", "s", "o")] == "D"
    assert [f.category for f in out.categories] == list(TRANSFER_PRECEDENCE)


def test_full_obc_means_no_transfer(over_and_above):
    plain = AggregateConfig.for_institution(over_and_above, "s")
    transfer = AggregateConfig.for_institution(over_and_above, "s", transfer=True)
    a = choose_aggregate(over_and_above, offered(over_and_above), plain)
    b = choose_aggregate_transfer(over_and_above, offered(over_and_above), transfer)
    assert b.dereserved_capacity == 0
    assert a.chosen == b.chosen


def test_d_admits_generals_in_merit_order():
    inst = make_instance(
        [(g, "g", [], [["s", "o"]]) for g in ("g1", "g2", "g3")],
        [("s", 3, {"OBC": 3}, {}, {"g1": 70, "g2": 90, "g3": 80})],
    )
    config = AggregateConfig.for_institution(inst, "s", transfer=True)
    out = institution_choice(inst, offered(inst), config)
    assert out.dereserved_capacity == 3
    assert out.category("D").chosen == tuple(sorted(offered(inst)))
    assert dereserved_choice(inst, "s", offered(inst), 2) == (Contract("g2", "s", "o"), Contract("g3", "s", "o"))


def test_d_binds_preferred_contract_or_open_only():
    inst = make_instance(
        [("r", "SC", [], [["s", "SC"], ["s", "o"]]), ("p", "OBC", [], [["s", "OBC"]])],
        [("s", 2, {"SC": 0, "OBC": 2}, {}, {"r": 90, "p": 10})],
    )
    # SC has no seats, so r reaches D with both contracts
    any_cfg = AggregateConfig.for_institution(inst, "s", transfer=True)
    out = institution_choice(inst, offered(inst), any_cfg)
    assert Contract("r", "s", "SC") in out.chosen
    open_cfg = AggregateConfig.for_institution(inst, "s", transfer=True, dereserve_source="open")
    out = institution_choice(inst, offered(inst), open_cfg)
    assert Contract("r", "s", "o") in out.chosen


def test_category_choice_on_arbitrary_sets(over_and_above):
    chosen, trace = category_choice(
        over_and_above, "s", "o", [Contract("c", "s", "o"), Contract("a", "s", "o")], 1, {}
    )
    assert chosen == {Contract("a", "s", "o")}
    assert trace.merit_phase == ("a",)
    chosen, trace = category_choice(over_and_above, "s", "D", [Contract("c", "s", "o")], 1)
    assert chosen == {Contract("c", "s", "o")} and trace is None


def test_config_validation(over_and_above):
    with pytest.raises(ConfigError):
        AggregateConfig("s", ("SC", "o"), {}, {})
    with pytest.raises(ConfigError):
        AggregateConfig("s", TRANSFER_PRECEDENCE, {}, {"D": {"PwD": 1}}, transfer=True)
    with pytest.raises(ConfigError):
        AggregateConfig.for_institution(over_and_above, "s", transfer=True, dereserve_source="nope")
    plain = AggregateConfig.for_institution(over_and_above, "s")
    with pytest.raises(ConfigError):
        choose_aggregate_transfer(over_and_above, [], plain)


def test_foreign_and_ineligible_contracts(over_and_above):
    config = AggregateConfig.for_institution(over_and_above, "s")
    with pytest.raises(ChoiceError) as e:
        institution_choice(over_and_above, [Contract("a", "t", "o")], config)
    assert e.value.code == ErrorCode.FOREIGN_CONTRACT
    with pytest.raises(ChoiceError) as e:
        institution_choice(over_and_above, [Contract("c", "s", "OBC")], config)
    assert e.value.code == ErrorCode.INELIGIBLE_PREFERENCE


def test_horizontal_quotas_inside_open():
    inst = make_instance(
        [("top", "g", [], [["s", "o"]]), ("mid", "g", [], [["s", "o"]]), ("pwd", "SC", ["PwD"], [["s", "o"]])],
        [("s", 2, {}, {"o": {"PwD": 1}}, {"top": 90, "mid": 80, "pwd": 10})],
        types=[("PwD", None)],
    )
    config = AggregateConfig.for_institution(inst, "s")
    out = institution_choice(inst, offered(inst), config)
    assert out.chosen_individuals() == {"top", "pwd"}
    assert out.category("o").type_fill == {"PwD": 1}


def test_sequential_choice_custom_order(over_and_above):
    # OBC first: a takes the OBC seat, c wins open
    out = sequential_choice(
        over_and_above,
        offered(over_and_above),
        "s",
        ("OBC", "o"),
        {"o": 1, "OBC": 1},
        {},
    )
    assert out.chosen == {Contract("a", "s", "OBC"), Contract("c", "s", "o")}
