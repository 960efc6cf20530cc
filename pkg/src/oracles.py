# src/oracles.py
# Brute-force reference checks used to certify the engine.
#
#   merit_dominates          sorted pointwise comparison of equal-size sets
#   min_shortfall            least unfilled quota over all same-size subsets
#                            (exhaustive for small pools, laminar DP above)
#   assert_merit_undominated no minimum-shortfall subset dominates the choice
#   check_fairness           every rejection explained by score, category or type
#   check_stability          individual rationality, fixed point, no blocking set
#   check_justified_envy     no higher-scored envier covering the holder's types
#   audit_category_caps      per seat pool counts within category capacities
#
# Oracles never call the hierarchical rule itself; they share only the data
# model and the aggregate rule C_s (stability is defined in terms of it).

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations

from src.aggregate import DERESERVE_ANY, institution_choice
from src.cop import PLAIN, institution_configs
from src.errors import ErrorCode, OracleError
from src.hierarchical_choice import shortfall
from src.model import CATEGORIES, DERESERVED, build_contract_universe

logger = logging.getLogger(__name__)

EXHAUSTIVE_POOL = 12
EXHAUSTIVE_INDIVIDUALS = 6
MAX_BLOCK_SIZE = 3


@dataclass(frozen=True)
class DominationVerdict:
    dominates: bool
    pairs: tuple = ()
    strict_at: int = None

    def __bool__(self):
        return self.dominates


@dataclass
class AuditReport:
    """Outcome of one property check; it fails iff it holds counterexamples."""

    name: str
    counterexamples: list = field(default_factory=list)
    checked: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.counterexamples

    def add(self, **counterexample):
        self.counterexamples.append(counterexample)

    def absorb(self, other):
        self.counterexamples += other.counterexamples
        self.checked += other.checked
        return self

    def to_dict(self):
        return {
            "property": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "counterexamples": self.counterexamples,
            **({"notes": self.notes} if self.notes else {}),
        }


def _ranks(ranking):
    if isinstance(ranking, dict):
        return ranking
    return {i: k for k, i in enumerate(ranking)}


def _sorted_by_merit(ids, rank):
    missing = sorted(i for i in ids if i not in rank)
    if missing:
        raise OracleError(ErrorCode.UNKNOWN_INDIVIDUAL, f"unranked individuals {missing}")
    return sorted(ids, key=rank.__getitem__)


# ----------------------------------------------------------------------
# Domination and shortfall
# ----------------------------------------------------------------------

def merit_dominates(a, b, ranking):
    """
    True when set `a` merit-dominates set `b`: sorted best-first, each
    member of `a` is ranked at least as high as the member of `b` at the
    same position, strictly so at one position at least.

    Raises OracleError(SIZE_MISMATCH) when |a| != |b|.
    """
    a, b = set(a), set(b)
    if len(a) != len(b):
        raise OracleError(ErrorCode.SIZE_MISMATCH, f"cannot compare sets of sizes {len(a)} and {len(b)}")
    rank = _ranks(ranking)
    sa, sb = _sorted_by_merit(a, rank), _sorted_by_merit(b, rank)
    strict_at = None
    for pos, (x, y) in enumerate(zip(sa, sb), start=1):
        if rank[x] > rank[y]:
            return DominationVerdict(False)
        if rank[x] < rank[y] and strict_at is None:
            strict_at = pos
    if strict_at is None:
        return DominationVerdict(False)
    return DominationVerdict(True, pairs=tuple(zip(sa, sb)), strict_at=strict_at)


def _min_plus(a, b):
    out = [math.inf] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == math.inf:
            continue
        for j, y in enumerate(b):
            if x + y < out[i + j]:
                out[i + j] = x + y
    return out


def shortfall_lower_bound(pool, quotas, size, forest, rho):
    """
    Minimum shortfall over size-`size` subsets, by dynamic programming over
    the forest. Under laminar types an individual's contribution depends only
    on their deepest type, so each subtree is summarized by the best
    shortfall for every count of members taken from it.
    """
    groups = Counter(forest.deepest(rho.get(i, ())) for i in pool)

    def solve(h):
        table = [0] * (groups.get(h, 0) + 1)
        for c in forest.children(h):
            table = _min_plus(table, solve(c))
        k = max(0, int(quotas.get(h, 0)))
        return [v + max(0, k - n) for n, v in enumerate(table)]

    table = [0] * (groups.get(None, 0) + 1)
    for r in forest.roots:
        table = _min_plus(table, solve(r))
    return int(table[size])


def _check_size(pool, size):
    if size < 0 or size > len(pool):
        raise OracleError(ErrorCode.SIZE_TOO_LARGE, f"size {size} outside 0..{len(pool)}")


def min_shortfall(pool, quotas, size, forest, rho, exhaustive_cap=EXHAUSTIVE_POOL):
    pool = sorted(set(pool))
    _check_size(pool, size)
    if len(pool) > exhaustive_cap:
        return shortfall_lower_bound(pool, quotas, size, forest, rho)
    return min(shortfall(b, quotas, rho) for b in combinations(pool, size))


def check_min_shortfall(pool, quotas, size, forest, rho, chosen, exhaustive_cap=EXHAUSTIVE_POOL):
    report = AuditReport("min-shortfall", checked=1)
    size = min(size, len(set(pool)))
    best = min_shortfall(pool, quotas, size, forest, rho, exhaustive_cap)
    got = shortfall(chosen, quotas, rho)
    if got != best:
        report.add(chosen=sorted(chosen), shortfall=got, minimum=best)
    return report


def assert_merit_undominated(pool, quotas, size, forest, rho, ranking, chosen, exhaustive_cap=EXHAUSTIVE_POOL):
    """
    Pass iff no subset of `pool` with |chosen| members and minimum shortfall
    merit-dominates `chosen`.

    Raises:
        OracleError(SIZE_MISMATCH) when |chosen| != min(|pool|, size);
        OracleError(INSTANCE_TOO_LARGE_FOR_EXHAUSTIVE) above `exhaustive_cap`.
    """
    pool = sorted(set(pool))
    chosen = set(chosen)
    report = AuditReport("merit-undominated", checked=1)
    if len(chosen) != min(len(pool), size):
        raise OracleError(
            ErrorCode.SIZE_MISMATCH, f"|chosen| = {len(chosen)}, expected {min(len(pool), size)}"
        )
    if not chosen <= set(pool):
        raise OracleError(ErrorCode.UNKNOWN_INDIVIDUAL, f"chosen outside the pool: {sorted(chosen - set(pool))}")
    if len(pool) > exhaustive_cap:
        raise OracleError(
            ErrorCode.INSTANCE_TOO_LARGE_FOR_EXHAUSTIVE, f"pool of {len(pool)} > exhaustive cap {exhaustive_cap}"
        )
    n = len(chosen)
    best = min_shortfall(pool, quotas, n, forest, rho, exhaustive_cap)
    for b in combinations(pool, n):
        if shortfall(b, quotas, rho) != best:
            continue
        verdict = merit_dominates(b, chosen, ranking)
        if verdict:
            report.add(chosen=sorted(chosen), dominated_by=sorted(b), strict_at=verdict.strict_at)
            break
    return report


# ----------------------------------------------------------------------
# Fairness, stability, envy
# ----------------------------------------------------------------------

def check_fairness(instance, contracts, chosen, institution_id):
    """
    For every individual with no chosen contract, each of their contracts x
    and each chosen contract y: i(y) ranks above i(x), or t(x) != t(y), or
    i(y) holds a type i(x) lacks.
    """
    contracts = set(contracts)
    chosen = set(getattr(chosen, "chosen", chosen))
    report = AuditReport("fairness")
    if not chosen <= contracts:
        raise OracleError(ErrorCode.FOREIGN_CONTRACT, "chosen contracts are not a subset of the offered set", institution_id)
    rank = instance.institution(institution_id).rank_of
    winners = {y.individual for y in chosen}
    losers = sorted(x for x in contracts if x.individual not in winners)
    for x in losers:
        for y in sorted(chosen):
            report.checked += 1
            higher = rank[y.individual] < rank[x.individual]
            other_category = x.category != y.category
            extra_type = bool(instance.rho(y.individual) - instance.rho(x.individual))
            if not (higher or other_category or extra_type):
                report.add(
                    institution=institution_id,
                    rejected=x.to_list(),
                    chosen=y.to_list(),
                    failed_clauses=["higher-score", "different-category", "extra-type"],
                )
    return report


def _current_pair(matching, i):
    x = matching.assignment(i)
    return x.pair if x is not None else None


def _blocks(instance, matching, block, configs):
    offered = matching.contracts | set(block)
    for s in sorted({z.institution for z in block}):
        at_s = {x for x in offered if x.institution == s}
        chosen = institution_choice(instance, at_s, configs[s]).chosen
        if not {z for z in block if z.institution == s} <= chosen:
            return False
    return True


def check_stability(
    instance,
    matching,
    variant=PLAIN,
    dereserve_source=DERESERVE_ANY,
    exhaustive=None,
    max_block_size=MAX_BLOCK_SIZE,
    exhaustive_individuals=EXHAUSTIVE_INDIVIDUALS,
):
    """
    Stability with respect to the aggregate rules of `variant`.

    Args:
        exhaustive: None searches every blocking set up to `max_block_size`
            when the instance has at most `exhaustive_individuals`
            individuals and singletons otherwise; True demands the full
            search; False restricts to singletons.

    Raises:
        OracleError(INSTANCE_TOO_LARGE_FOR_EXHAUSTIVE) when exhaustive=True
        on a larger instance.
    """
    n = len(instance.individuals)
    if exhaustive and n > exhaustive_individuals:
        raise OracleError(
            ErrorCode.INSTANCE_TOO_LARGE_FOR_EXHAUSTIVE,
            f"{n} individuals > {exhaustive_individuals} for blocking-set enumeration",
        )
    full = n <= exhaustive_individuals if exhaustive is None else bool(exhaustive)
    configs = institution_configs(instance, variant, dereserve_source)
    report = AuditReport("stability", notes={"block_search": "exhaustive" if full else "singleton"})

    for issue in matching.check_weak_feasibility(instance):
        report.add(condition="weak-feasibility", issue=issue.to_dict())
    if not report.passed:
        return report

    for x in matching:
        report.checked += 1
        if instance.individuals[x.individual].rank_of(x.pair) is None:
            report.add(condition="individual-rationality", contract=x.to_list())

    for s in instance.institutions:
        report.checked += 1
        held = matching.for_institution(s)
        chosen = institution_choice(instance, held, configs[s]).chosen
        if chosen != held:
            report.add(
                condition="choice-fixed-point",
                institution=s,
                held=[x.to_list() for x in sorted(held)],
                chosen=[x.to_list() for x in sorted(chosen)],
            )

    candidates = sorted(
        x
        for x in build_contract_universe(instance, acceptable_only=True)
        if x not in matching
        and instance.individuals[x.individual].prefers(x.pair, _current_pair(matching, x.individual))
    )
    sizes = range(1, max_block_size + 1) if full else (1,)
    for k in sizes:
        for block in combinations(candidates, k):
            if len({z.individual for z in block}) < k:
                continue
            report.checked += 1
            if _blocks(instance, matching, block, configs):
                report.add(condition="blocking", block=[z.to_list() for z in block])
    if not report.passed:
        logger.info("[AUDIT] stability: %d counterexample(s)", len(report.counterexamples))
    return report


def check_justified_envy(instance, matching):
    """
    j envies the holder of x when j prefers (s(x), t(x)) to their own
    assignment. The envy is justified when j ranks above i(x) at s(x) and
    j holds every type i(x) holds.
    """
    report = AuditReport("justified-envy")
    for j in sorted(instance.individuals):
        mine = _current_pair(matching, j)
        envier = instance.individuals[j]
        for x in matching:
            if x.individual == j or not envier.prefers(x.pair, mine):
                continue
            report.checked += 1
            rank = instance.institutions[x.institution].rank_of
            if rank[j] < rank[x.individual] and instance.rho(x.individual) <= instance.rho(j):
                report.add(envier=j, envied=x.to_list(), envier_holds=list(mine) if mine else None)
    return report


def audit_category_caps(instance, matching, seat_pools=None):
    """
    Held count per institution and seat pool against the category capacity;
    pool D may use at most the OBC seats left unfilled.
    """
    report = AuditReport("category-caps")
    pools = seat_pools or {}
    for s, inst in instance.institutions.items():
        counts = Counter(pools.get(x, x.category) for x in matching.for_institution(s))
        for v in CATEGORIES:
            report.checked += 1
            if counts[v] > inst.capacity(v):
                report.add(institution=s, pool=v, held=counts[v], capacity=inst.capacity(v))
        vacant = max(0, inst.capacity("OBC") - counts["OBC"])
        if counts[DERESERVED] > vacant:
            report.add(institution=s, pool=DERESERVED, held=counts[DERESERVED], capacity=vacant)
    return report
