from pathlib import Path

import pytest

from src.hierarchy import build_forest
from src.io import load_instance
from src.model import validate_instance

DATA = Path(__file__).parent / "data"


def make_raw(individuals, institutions, types=()):
    """
    Compact instance builder.

    individuals: (id, membership, [types], [[s, v], ...])
    institutions: (id, total, {r: q}, {v: {h: k}}, {i: score})
    """
    return {
        "schema_version": 1,
        "horizontal_types": [{"id": h, "parent": p} for h, p in types],
        "institutions": [
            {
                "id": s,
                "total_capacity": total,
                "vertical_capacities": vertical,
                "horizontal_reservations": horizontal,
                "merit_scores": scores,
            }
            for s, total, vertical, horizontal, scores in institutions
        ],
        "individuals": [
            {"id": i, "membership": m, "horizontal_types": list(t), "preferences": [list(p) for p in prefs]}
            for i, m, t, prefs in individuals
        ],
    }


def make_instance(individuals, institutions, types=(), tiebreak=None):
    return validate_instance(make_raw(individuals, institutions, types), tiebreak=tiebreak)


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def two_obc():
    return load_instance(DATA / "two_obc.json")


@pytest.fixture
def two_obc_reserved_first():
    return load_instance(DATA / "two_obc_reserved_first.json")


@pytest.fixture
def over_and_above():
    return load_instance(DATA / "over_and_above.json")


@pytest.fixture
def transfer_instance():
    return load_instance(DATA / "transfer.json")


@pytest.fixture
def ia_instance():
    return load_instance(DATA / "immediate_acceptance.json")


@pytest.fixture
def pwd_forest():
    return build_forest([{"id": "PwD", "parent": None}, {"id": "blind", "parent": "PwD"}])


@pytest.fixture
def pwd_problem(pwd_forest):
    """Capacity 4, κ_PwD = 2, κ_blind = 1; i1 > i2 > ... > i5."""
    return {
        "pool": ["i1", "i2", "i3", "i4", "i5"],
        "quotas": {"PwD": 2, "blind": 1},
        "capacity": 4,
        "ranking": ["i1", "i2", "i3", "i4", "i5"],
        "forest": pwd_forest,
        "rho": {
            "i1": frozenset(),
            "i2": frozenset({"PwD"}),
            "i3": frozenset({"PwD", "blind"}),
            "i4": frozenset(),
            "i5": frozenset({"PwD"}),
        },
    }
