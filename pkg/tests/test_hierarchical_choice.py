import pytest
from hypothesis import given, settings, strategies as st

from src.errors import ChoiceError, ErrorCode
from src.hierarchical_choice import choose_hierarchical, shortfall
from src.hierarchy import build_forest


def test_pwd_example(pwd_problem):
    chosen, trace = choose_hierarchical(**pwd_problem)
    assert chosen == {"i1", "i2", "i3", "i4"}
    first, second = trace.steps
    assert first.selected == ("i3",)
    assert first.quotas_after == {"PwD": 1}
    assert second.selected == ("i2",)
    assert trace.merit_phase == ("i1", "i4")
    assert trace.capacity_profile == [4, 3, 2, 0]
    assert set(trace.chosen) == chosen
    assert trace.type_fill() == {"blind": 1, "PwD": 1}
    assert trace.clamp_events() == []


def test_no_types_is_top_by_merit(pwd_forest):
    chosen, trace = choose_hierarchical(
        ["a", "b", "c"], {"PwD": 2}, 2, ["c", "a", "b"], pwd_forest, {}
    )
    assert chosen == {"c", "a"}
    assert trace.steps == ()


def test_empty_pool_and_zero_capacity(pwd_problem):
    chosen, trace = choose_hierarchical(**{**pwd_problem, "pool": []})
    assert chosen == frozenset()
    assert trace.steps == () and trace.merit_phase == ()
    chosen, _ = choose_hierarchical(**{**pwd_problem, "capacity": 0})
    assert chosen == frozenset()


def test_small_pool_taken_whole(pwd_problem):
    chosen, _ = choose_hierarchical(**{**pwd_problem, "pool": ["i4", "i5"], "capacity": 4})
    assert chosen == {"i4", "i5"}


def test_leaf_rejects_stay_for_parent(pwd_forest):
    rho = {"b1": frozenset({"PwD", "blind"}), "b2": frozenset({"PwD", "blind"}), "g": frozenset()}
    chosen, trace = choose_hierarchical(
        ["g", "b1", "b2"], {"PwD": 2, "blind": 1}, 2, ["g", "b1", "b2"], pwd_forest, rho
    )
    # blind takes b1, PwD's residual quota of 1 takes b2
    assert chosen == {"b1", "b2"}
    assert trace.steps[1].selections[0].selected == ("b2",)


def test_clamp_is_traced(pwd_forest):
    rho = {i: frozenset({"PwD"}) for i in ("a", "b", "c")}
    chosen, trace = choose_hierarchical(["a", "b", "c"], {"PwD": 3}, 2, ["a", "b", "c"], pwd_forest, rho)
    assert chosen == {"a", "b"}
    assert [s.type for s in trace.clamp_events()] == ["PwD"]
    assert trace.ended == "capacity"


def test_quota_index_mismatch(pwd_problem):
    with pytest.raises(ChoiceError) as e:
        choose_hierarchical(**{**pwd_problem, "quotas": {"ghost": 1}})
    assert e.value.code == ErrorCode.QUOTA_INDEX_MISMATCH


def test_shortfall_counts_every_type_held():
    rho = {"x": {"PwD", "blind"}, "y": {"PwD"}}
    assert shortfall(["x"], {"PwD": 2, "blind": 1}, rho) == 1
    assert shortfall(["x", "y"], {"PwD": 2, "blind": 2}, rho) == 1
    assert shortfall([], {"PwD": 0}, rho) == 0


CHAIN = build_forest([("p", None), ("c", "p")])


@st.composite
def chain_problems(draw):
    n = draw(st.integers(min_value=0, max_value=7))
    ids = [f"i{k}" for k in range(n)]
    kinds = draw(st.lists(st.sampled_from([(), ("p",), ("p", "c")]), min_size=n, max_size=n))
    ranking = draw(st.permutations(ids))
    capacity = draw(st.integers(0, 5))
    kp = draw(st.integers(0, capacity))
    return {
        "pool": ids,
        "quotas": {"p": kp, "c": draw(st.integers(0, kp))},
        "capacity": capacity,
        "ranking": list(ranking),
        "forest": CHAIN,
        "rho": {i: frozenset(k) for i, k in zip(ids, kinds)},
    }


@settings(max_examples=200, deadline=None)
@given(chain_problems())
def test_acceptant_and_trace_consistent(problem):
    chosen, trace = choose_hierarchical(**problem)
    assert len(chosen) == min(len(problem["pool"]), problem["capacity"])
    assert set(trace.chosen) == chosen
    profile = trace.capacity_profile
    assert all(a >= b >= 0 for a, b in zip(profile, profile[1:]))


@settings(max_examples=200, deadline=None)
@given(chain_problems(), st.data())
def test_substitutes_and_size_monotone(problem, data):
    if len(problem["pool"]) < 2:
        return
    x, y = data.draw(st.lists(st.sampled_from(problem["pool"]), min_size=2, max_size=2, unique=True))
    z = [i for i in problem["pool"] if i not in (x, y) and data.draw(st.booleans())]

    def choose(pool):
        return choose_hierarchical(**{**problem, "pool": pool})[0]

    if y not in choose(z + [y]):
        assert y not in choose(z + [x, y])
    assert len(choose(z)) <= len(choose(z + [x]))
