# src/model.py
# Problem instance: individuals, institutions, vertical categories,
# preferences over (institution, category) pairs, and the contract universe.
#
# validate_instance is the single gate from raw (JSON-like) data to an
# Instance. It is all-or-nothing: every violated constraint is collected and
# raised together as InstanceValidationError.
#
# Matching feasibility here is deliberately weak (one contract per
# individual, total capacity, eligibility). Per-category caps are an audit,
# see audit_category_caps.

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from functools import cached_property

from src.errors import (
    ErrorCode,
    HierarchyError,
    InstanceValidationError,
    ReservationError,
    ValidationIssue,
)
from src.hierarchy import build_forest
from src.scoring import TIEBREAK_ID, merit_ranking, parse_score

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

OPEN = "o"
GENERAL = "g"
DERESERVED = "D"
RESERVED = ("SC", "ST", "OBC", "EWS")
CATEGORIES = (OPEN,) + RESERVED
MEMBERSHIPS = (GENERAL,) + RESERVED


def eligible_categories(membership):
    """Categories an individual may hold a contract under."""
    if membership == GENERAL:
        return (OPEN,)
    return (OPEN, membership)


@dataclass(frozen=True, order=True)
class Contract:
    individual: str
    institution: str
    category: str

    @property
    def pair(self):
        return (self.institution, self.category)

    def to_list(self):
        return [self.individual, self.institution, self.category]

    def __str__(self):
        return f"({self.individual},{self.institution},{self.category})"


@dataclass(frozen=True)
class Individual:
    id: str
    membership: str
    horizontal_types: frozenset = frozenset()
    preferences: tuple = ()

    @cached_property
    def _pair_rank(self):
        return {pair: k for k, pair in enumerate(self.preferences)}

    def rank_of(self, pair):
        """Position of an (institution, category) pair; None if unacceptable."""
        return self._pair_rank.get(tuple(pair))

    def prefers(self, a, b):
        """
        Strict preference a P_i b over pairs, where None is the outside option.
        Listed pairs beat None; None beats unlisted pairs.
        """
        ra = len(self.preferences) if a is None else self.rank_of(a)
        rb = len(self.preferences) if b is None else self.rank_of(b)
        if ra is None:
            return False
        if rb is None:
            return True
        return ra < rb

    def contracts(self):
        return tuple(Contract(self.id, s, v) for s, v in self.preferences)


@dataclass(frozen=True)
class Institution:
    id: str
    total_capacity: int
    vertical_capacities: dict = field(default_factory=dict)
    horizontal_reservations: dict = field(default_factory=dict)
    merit_scores: dict = field(default_factory=dict)
    ranking: tuple = ()

    @cached_property
    def rank_of(self):
        return {i: k for k, i in enumerate(self.ranking)}

    @property
    def open_capacity(self):
        return self.total_capacity - sum(self.vertical_capacities.get(r, 0) for r in RESERVED)

    def capacity(self, category):
        if category == OPEN:
            return self.open_capacity
        if category in RESERVED:
            return self.vertical_capacities.get(category, 0)
        raise ReservationError(
            ErrorCode.UNKNOWN_CATEGORY, f"no static capacity for category {category!r}", self.id
        )

    def quotas(self, category, forest):
        """κ_v^s as a dict over every forest type (missing entries are 0)."""
        declared = self.horizontal_reservations.get(category, {})
        return {h: int(declared.get(h, 0)) for h in forest.types}


@dataclass(frozen=True)
class Instance:
    institutions: dict
    individuals: dict
    forest: object
    warnings: tuple = ()
    schema_version: int = SCHEMA_VERSION

    def institution(self, s):
        try:
            return self.institutions[s]
        except KeyError:
            raise ReservationError(ErrorCode.UNKNOWN_INSTITUTION, f"unknown institution {s!r}") from None

    def individual(self, i):
        try:
            return self.individuals[i]
        except KeyError:
            raise ReservationError(ErrorCode.UNKNOWN_INDIVIDUAL, f"unknown individual {i!r}") from None

    def rho(self, i):
        return self.individuals[i].horizontal_types

    @cached_property
    def rho_map(self):
        return {i: ind.horizontal_types for i, ind in self.individuals.items()}

    def with_preferences(self, individual_id, preferences):
        """Copy of the instance with one individual's list replaced."""
        ind = self.individual(individual_id)
        individuals = dict(self.individuals)
        individuals[individual_id] = dataclasses.replace(ind, preferences=tuple(map(tuple, preferences)))
        return dataclasses.replace(self, individuals=individuals)


def build_contract_universe(instance, acceptable_only=False):
    """
    X: every eligibility-consistent (individual, institution, category) triple.
    With acceptable_only, only the pairs each individual actually ranks.
    """
    if acceptable_only:
        return frozenset(c for ind in instance.individuals.values() for c in ind.contracts())
    return frozenset(
        Contract(i, s, v)
        for i, ind in instance.individuals.items()
        for s in instance.institutions
        for v in eligible_categories(ind.membership)
    )


@dataclass(frozen=True)
class Matching:
    contracts: frozenset = frozenset()

    def __iter__(self):
        return iter(sorted(self.contracts))

    def __len__(self):
        return len(self.contracts)

    def __contains__(self, x):
        return x in self.contracts

    def for_individual(self, i):
        return frozenset(x for x in self.contracts if x.individual == i)

    def for_institution(self, s):
        return frozenset(x for x in self.contracts if x.institution == s)

    def assignment(self, i):
        """The single contract of i, or None."""
        held = self.for_individual(i)
        return next(iter(held)) if len(held) == 1 else None

    def check_weak_feasibility(self, instance):
        issues = []
        for i in sorted({x.individual for x in self.contracts}):
            if i not in instance.individuals:
                issues.append(ValidationIssue(ErrorCode.UNKNOWN_INDIVIDUAL, f"{i!r} is not in the instance"))
                continue
            held = self.for_individual(i)
            if len(held) > 1:
                issues.append(
                    ValidationIssue(
                        ErrorCode.MIXED_INDIVIDUAL_STATE,
                        f"{i!r} holds {len(held)} contracts: {sorted(map(str, held))}",
                    )
                )
            membership = instance.individuals[i].membership
            for x in held:
                if x.category not in eligible_categories(membership):
                    issues.append(
                        ValidationIssue(ErrorCode.INELIGIBLE_PREFERENCE, f"{x} is not eligible for {membership}")
                    )
        for s in sorted({x.institution for x in self.contracts}):
            if s not in instance.institutions:
                issues.append(ValidationIssue(ErrorCode.UNKNOWN_INSTITUTION, f"{s!r} is not in the instance"))
                continue
            n = len(self.for_institution(s))
            cap = instance.institutions[s].total_capacity
            if n > cap:
                issues.append(
                    ValidationIssue(ErrorCode.CAPACITY_OVERFLOW, f"{s!r} holds {n} contracts, capacity {cap}")
                )
        return issues


# ----------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------

def _is_count(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _check_count(value, path, issues):
    if not _is_count(value):
        issues.append(ValidationIssue(ErrorCode.BAD_SCHEMA, f"expected an integer, got {value!r}", path))
        return None
    if value < 0:
        issues.append(ValidationIssue(ErrorCode.NEGATIVE_VALUE, f"negative value {value}", path))
        return None
    return value


def _check_mapping(value, path, issues, what):
    if value is None:
        return {}
    if not isinstance(value, dict):
        issues.append(ValidationIssue(ErrorCode.BAD_SCHEMA, f"{what}, got {type(value).__name__}", path))
        return {}
    return value


def horizontal_feasibility_warnings(institutions, forest):
    """
    Quota vectors under which capacity could run out in the middle of a peel
    level: roots asking for more than the category capacity, or children
    asking for more than their parent.
    """
    warnings = []
    for s, inst in sorted(institutions.items()):
        for v in CATEGORIES:
            kappa = inst.quotas(v, forest)
            cap = inst.capacity(v)
            path = f"institutions.{s}.horizontal_reservations.{v}"
            roots = sum(kappa[h] for h in forest.roots)
            if roots > cap:
                warnings.append(
                    ValidationIssue(
                        ErrorCode.QUOTA_EXCEEDS_CAPACITY,
                        f"root quotas sum to {roots} > capacity {cap}; quotas will be clamped",
                        path,
                    )
                )
            for h in forest.types:
                below = sum(kappa[c] for c in forest.children(h))
                if below > kappa[h]:
                    warnings.append(
                        ValidationIssue(
                            ErrorCode.QUOTA_EXCEEDS_CAPACITY,
                            f"quotas inside {h!r} sum to {below} > its own quota {kappa[h]}",
                            path,
                        )
                    )
    return warnings


def validate_instance(raw, tiebreak=None):
    """
    Validate a raw instance description.

    Args:
        raw (dict): InstanceFile content (see README for the schema).
        tiebreak (str or None): "id" converts score ties into ascending-id
            order (each conversion becomes a warning); None makes ties errors.

    Returns:
        Instance

    Raises:
        InstanceValidationError with every issue found.
    """
    issues = []
    if not isinstance(raw, dict):
        raise InstanceValidationError([ValidationIssue(ErrorCode.BAD_SCHEMA, "instance must be a mapping")])
    if tiebreak not in (None, TIEBREAK_ID):
        raise InstanceValidationError(
            [ValidationIssue(ErrorCode.BAD_CONFIG, f"unknown tiebreak {tiebreak!r}")]
        )

    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        issues.append(
            ValidationIssue(ErrorCode.BAD_SCHEMA, f"unsupported schema_version {version!r}", "schema_version")
        )

    raw_types = raw.get("horizontal_types") or []
    raw_insts = raw.get("institutions") or []
    raw_inds = raw.get("individuals") or []
    for key, val in (("horizontal_types", raw_types), ("institutions", raw_insts), ("individuals", raw_inds)):
        if not isinstance(val, list):
            issues.append(ValidationIssue(ErrorCode.BAD_SCHEMA, f"{key} must be a list", key))
    if issues:
        raise InstanceValidationError(issues)

    # ---------------- institutions (ids first; preferences refer to them) ----
    inst_ids = []
    for n, ri in enumerate(raw_insts):
        sid = ri.get("id") if isinstance(ri, dict) else None
        if not isinstance(sid, str) or not sid:
            issues.append(ValidationIssue(ErrorCode.BAD_SCHEMA, "institution id must be a non-empty string", f"institutions[{n}]"))
            continue
        if sid in inst_ids:
            issues.append(ValidationIssue(ErrorCode.DUPLICATE_ID, f"institution {sid!r} declared twice", f"institutions[{n}]"))
            continue
        inst_ids.append(sid)

    # ---------------- individuals ----------------
    ind_fields = {}
    for n, rd in enumerate(raw_inds):
        path = f"individuals[{n}]"
        iid = rd.get("id") if isinstance(rd, dict) else None
        if not isinstance(iid, str) or not iid:
            issues.append(ValidationIssue(ErrorCode.BAD_SCHEMA, "individual id must be a non-empty string", path))
            continue
        path = f"individuals.{iid}"
        if iid in ind_fields:
            issues.append(ValidationIssue(ErrorCode.DUPLICATE_ID, f"individual {iid!r} declared twice", path))
            continue

        membership = rd.get("membership", GENERAL)
        if membership not in MEMBERSHIPS:
            issues.append(ValidationIssue(ErrorCode.UNKNOWN_CATEGORY, f"unknown membership {membership!r}", path))
            membership = GENERAL

        types = rd.get("horizontal_types") or []
        if not isinstance(types, list) or not all(isinstance(h, str) for h in types):
            issues.append(ValidationIssue(ErrorCode.BAD_SCHEMA, "horizontal_types must be a list of ids", path))
            types = []

        raw_prefs = rd.get("preferences") or []
        if not isinstance(raw_prefs, list):
            issues.append(ValidationIssue(ErrorCode.BAD_SCHEMA, "preferences must be a list of [institution, category]", path))
            raw_prefs = []
        prefs = []
        seen = set()
        for k, entry in enumerate(raw_prefs):
            ppath = f"{path}.preferences[{k}]"
            if not isinstance(entry, (list, tuple)) or len(entry) != 2:
                issues.append(ValidationIssue(ErrorCode.BAD_SCHEMA, f"expected [institution, category], got {entry!r}", ppath))
                continue
            s, v = entry
            if s not in inst_ids:
                issues.append(ValidationIssue(ErrorCode.UNKNOWN_INSTITUTION, f"unknown institution {s!r}", ppath))
                continue
            if v not in CATEGORIES:
                issues.append(ValidationIssue(ErrorCode.UNKNOWN_CATEGORY, f"{v!r} is not a rankable category", ppath))
                continue
            if v not in eligible_categories(membership):
                issues.append(
                    ValidationIssue(
                        ErrorCode.INELIGIBLE_PREFERENCE,
                        f"membership {membership!r} cannot rank ({s}, {v})",
                        ppath,
                    )
                )
                continue
            if (s, v) in seen:
                issues.append(ValidationIssue(ErrorCode.DUPLICATE_PREFERENCE, f"({s}, {v}) listed twice", ppath))
                continue
            seen.add((s, v))
            prefs.append((s, v))
        ind_fields[iid] = (membership, frozenset(types), tuple(prefs))

    # ---------------- hierarchy ----------------
    forest = None
    try:
        forest = build_forest(raw_types, {i: f[1] for i, f in ind_fields.items()})
    except HierarchyError as e:
        issues += e.issues
        try:
            forest = build_forest(raw_types)
        except HierarchyError:
            forest = None

    individuals = {
        i: Individual(id=i, membership=m, horizontal_types=t, preferences=p)
        for i, (m, t, p) in sorted(ind_fields.items())
    }

    # ---------------- institutions ----------------
    institutions = {}
    warnings = []
    for n, ri in enumerate(raw_insts):
        sid = ri.get("id") if isinstance(ri, dict) else None
        if sid not in inst_ids or sid in institutions:
            continue
        path = f"institutions.{sid}"
        total = _check_count(ri.get("total_capacity", 0), f"{path}.total_capacity", issues)

        raw_vertical = _check_mapping(
            ri.get("vertical_capacities"), f"{path}.vertical_capacities", issues, "vertical_capacities must map category -> seats"
        )
        vertical = {}
        for v, q in sorted(raw_vertical.items()):
            if v == OPEN:
                # q^o is derived; an explicit value must agree with it
                continue
            if v not in RESERVED:
                issues.append(ValidationIssue(ErrorCode.UNKNOWN_CATEGORY, f"unknown reserved category {v!r}", f"{path}.vertical_capacities"))
                continue
            q = _check_count(q, f"{path}.vertical_capacities.{v}", issues)
            if q is not None:
                vertical[v] = q
        if total is not None:
            reserved_sum = sum(vertical.values())
            if reserved_sum > total:
                issues.append(
                    ValidationIssue(
                        ErrorCode.CAPACITY_OVERFLOW,
                        f"reserved capacities sum to {reserved_sum} > total capacity {total}",
                        path,
                    )
                )
            explicit_open = raw_vertical.get(OPEN)
            if explicit_open is not None and explicit_open != total - reserved_sum:
                issues.append(
                    ValidationIssue(
                        ErrorCode.CAPACITY_OVERFLOW,
                        f"open capacity {explicit_open!r} != residual {total - reserved_sum}",
                        f"{path}.vertical_capacities.o",
                    )
                )

        horizontal = {}
        raw_horizontal = _check_mapping(
            ri.get("horizontal_reservations"),
            f"{path}.horizontal_reservations",
            issues,
            "horizontal_reservations must map category -> quota vector",
        )
        for v, vec in sorted(raw_horizontal.items()):
            hpath = f"{path}.horizontal_reservations.{v}"
            if v not in CATEGORIES:
                issues.append(ValidationIssue(ErrorCode.UNKNOWN_CATEGORY, f"no horizontal quotas for {v!r}", hpath))
                continue
            if not isinstance(vec, dict):
                issues.append(ValidationIssue(ErrorCode.BAD_SCHEMA, "quota vector must map type -> count", hpath))
                continue
            clean = {}
            for h, k in sorted(vec.items()):
                if forest is not None and h not in forest:
                    issues.append(ValidationIssue(ErrorCode.UNKNOWN_TYPE, f"quota for unknown type {h!r}", hpath))
                    continue
                k = _check_count(k, f"{hpath}.{h}", issues)
                if k is not None:
                    clean[h] = k
            horizontal[v] = clean

        scores = {}
        raw_scores = _check_mapping(ri.get("merit_scores"), path, issues, "merit_scores must map individual -> score")
        for i, val in sorted(raw_scores.items()):
            if i not in individuals:
                issues.append(ValidationIssue(ErrorCode.UNKNOWN_INDIVIDUAL, f"score for unknown individual {i!r}", f"{path}.merit_scores"))
                continue
            score = parse_score(val)
            if score is None:
                issues.append(
                    ValidationIssue(ErrorCode.BAD_SCHEMA, f"score {val!r} is not an integer or exact decimal string", f"{path}.merit_scores.{i}")
                )
                continue
            scores[i] = score
        for i in individuals:
            if i not in raw_scores:
                issues.append(ValidationIssue(ErrorCode.MISSING_SCORE, f"no score for {i!r}", f"{path}.merit_scores"))

        ranking, tie_issues = merit_ranking(scores, tiebreak=tiebreak, where=f"{path}.merit_scores")
        if tiebreak == TIEBREAK_ID:
            warnings += tie_issues
        else:
            issues += tie_issues

        institutions[sid] = Institution(
            id=sid,
            total_capacity=total if total is not None else 0,
            vertical_capacities=vertical,
            horizontal_reservations=horizontal,
            merit_scores=scores,
            ranking=ranking,
        )

    if issues:
        raise InstanceValidationError(issues)

    institutions = dict(sorted(institutions.items()))
    warnings += horizontal_feasibility_warnings(institutions, forest)
    for w in warnings:
        logger.debug("[LOAD] warning %s", w)
    return Instance(
        institutions=institutions,
        individuals=individuals,
        forest=forest,
        warnings=tuple(warnings),
        schema_version=SCHEMA_VERSION,
    )
