from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from src.errors import ErrorCode, OracleError
from src.scoring import MeritOrder, category_ranking, format_score, merit_compare, merit_ranking, parse_score
from tests.conftest import make_instance


@pytest.mark.parametrize(
    "value, expected",
    [(90, Decimal(90)), ("87.25", Decimal("87.25")), (" 12 ", Decimal(12)), (True, None), (1.5, None), ("NaN", None), ("x", None)],
)
def test_parse_score(value, expected):
    assert parse_score(value) == expected


def test_format_score():
    assert format_score(Decimal("90.00")) == 90
    assert format_score(Decimal("87.250")) == "87.25"


def test_ranking_descending():
    ranking, issues = merit_ranking({"a": Decimal(1), "b": Decimal(3), "c": Decimal(2)})
    assert ranking == ("b", "c", "a")
    assert issues == []


def test_ties_error_or_warning():
    scores = {"b": Decimal(5), "a": Decimal(5), "c": Decimal(9)}
    ranking, issues = merit_ranking(scores)
    assert [i.code for i in issues] == [ErrorCode.SCORE_TIE]
    ranking, issues = merit_ranking(scores, tiebreak="id")
    assert ranking == ("c", "a", "b")
    assert len(issues) == 1


def test_merit_compare_and_category_view():
    inst = make_instance(
        [("a", "OBC", [], [["s", "o"]]), ("b", "g", [], [["s", "o"]]), ("c", "OBC", [], [["s", "OBC"]])],
        [("s", 3, {"OBC": 1}, {}, {"a": 70, "b": 90, "c": 80})],
    )
    s = inst.institution("s")
    assert merit_compare(s, "b", "a") is MeritOrder.A_FIRST
    assert merit_compare(s, "a", "c") is MeritOrder.B_FIRST
    with pytest.raises(OracleError):
        merit_compare(s, "a", "a")
    with pytest.raises(OracleError) as e:
        merit_compare(s, "a", "zz")
    assert e.value.code == ErrorCode.UNKNOWN_INDIVIDUAL
    assert category_ranking(inst, "s", "o") == ("b", "c", "a")
    assert category_ranking(inst, "s", "OBC") == ("c", "a")
    assert category_ranking(inst, "s", "SC") == ()


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=20), min_size=3, max_size=8), st.data())
def test_merit_compare_is_a_strict_order(scores, data):
    ids = [f"i{n}" for n in range(len(scores))]
    inst = make_instance(
        [(i, "g", [], []) for i in ids],
        [("s", 1, {}, {}, dict(zip(ids, scores)))],
        tiebreak="id",
    )
    s = inst.institution("s")
    a, b, c = data.draw(st.permutations(ids))[:3]
    assert merit_compare(s, a, b) is not merit_compare(s, b, a)
    if merit_compare(s, a, b) is MeritOrder.A_FIRST and merit_compare(s, b, c) is MeritOrder.A_FIRST:
        assert merit_compare(s, a, c) is MeritOrder.A_FIRST
    # higher score always wins
    if scores[ids.index(a)] > scores[ids.index(b)]:
        assert merit_compare(s, a, b) is MeritOrder.A_FIRST
