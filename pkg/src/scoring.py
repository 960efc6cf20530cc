# src/scoring.py
# Merit scores and the rankings they induce.
#
# - parse_score: integers or exact decimal strings -> Decimal (no floats,
#   so equal scores are equal and distinct scores stay distinct)
# - merit_ranking: strict order over individuals, best first; ties are an
#   error unless converted by ascending id
# - merit_compare: pairwise comparison at one institution
# - category_ranking: the category-restricted view (non-members rank below
#   the outside option, i.e. are absent)

from __future__ import annotations

import logging
from decimal import Decimal, InvalidOperation
from enum import Enum
from itertools import groupby

from src.errors import ErrorCode, OracleError, ValidationIssue

logger = logging.getLogger(__name__)

TIEBREAK_ID = "id"


class MeritOrder(str, Enum):
    A_FIRST = "a-first"
    B_FIRST = "b-first"


def parse_score(value):
    """Return a Decimal, or None when the value is not an exact score."""
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return Decimal(value)
    if isinstance(value, Decimal):
        return value if value.is_finite() else None
    if isinstance(value, str):
        try:
            d = Decimal(value.strip())
        except InvalidOperation:
            return None
        return d if d.is_finite() else None
    return None


def format_score(score):
    """Canonical serialization: int when integral, decimal string otherwise."""
    if score == score.to_integral_value():
        return int(score)
    return str(score.normalize())


def merit_ranking(scores, tiebreak=None, where=""):
    """
    Order individual ids by descending score.

    Args:
        scores: mapping id -> Decimal.
        tiebreak: None (ties are errors) or "id" (ties ordered by ascending id).
        where: context string used in issue paths.

    Returns:
        (ranking tuple best-first, issues list). With tiebreak="id" the issues
        are warnings recording each conversion; without it they are errors.
    """
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    issues = []
    for score, group in groupby(ordered, key=lambda kv: kv[1]):
        ids = [i for i, _ in group]
        if len(ids) < 2:
            continue
        if tiebreak == TIEBREAK_ID:
            msg = f"score {format_score(score)} shared by {ids}; ordered by id"
            logger.warning("[LOAD] %s: %s", where, msg)
        else:
            msg = f"score {format_score(score)} shared by {ids}"
        issues.append(ValidationIssue(ErrorCode.SCORE_TIE, msg, where))
    return tuple(i for i, _ in ordered), issues


def merit_compare(institution, a, b):
    """
    Strict comparison of two distinct individuals at `institution`.

    Raises OracleError(UNKNOWN_INDIVIDUAL) for an unscored id and for a == b
    (the order is irreflexive).
    """
    rank = institution.rank_of
    for who in (a, b):
        if who not in rank:
            raise OracleError(
                ErrorCode.UNKNOWN_INDIVIDUAL,
                f"{who!r} has no score at {institution.id!r}",
                institution.id,
            )
    if a == b:
        raise OracleError(
            ErrorCode.UNKNOWN_INDIVIDUAL,
            f"cannot compare {a!r} with itself",
            institution.id,
        )
    return MeritOrder.A_FIRST if rank[a] < rank[b] else MeritOrder.B_FIRST


def category_ranking(instance, institution_id, category):
    """
    The ranking an institution applies inside one vertical category.
    Open: everyone. Reserved category r: members of r only.
    """
    institution = instance.institution(institution_id)
    if category == "o":
        return institution.ranking
    return tuple(
        i for i in institution.ranking if instance.individuals[i].membership == category
    )
