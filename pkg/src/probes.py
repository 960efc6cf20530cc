# src/probes.py
# Randomized and exhaustive campaigns built on the oracles.
#
#   choice problems      enumerate_chain_problems (every small chain instance)
#                        sample_choice_problem (seeded random forests)
#   audit_merit_undomination   min shortfall + undomination per problem
#   fuzz_choice_properties     substitutes, size monotonicity, IRC and
#                              quota monotonicity of a within-category rule
#   fuzz_domination_order      merit_dominates is a strict partial order
#   fuzz_aggregate_properties  fairness, caps, observable substitutes and
#                              size monotonicity of an aggregate rule
#   probe_strategyproofness    every misreport of every individual
#   probe_order_invariance     same matching under random proposal orders
#   verify_outcome             all oracles on one matching (CLI `verify`)
#
# Random trials draw from numpy default_rng([seed, trial]), so a trial is
# reproducible on its own and shards can run in any order.

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass
from itertools import permutations, product

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from src.aggregate import DERESERVE_ANY, institution_choice
from src.cop import PLAIN, institution_configs, monitor_offer_process, run_cop
from src.errors import ErrorCode, OracleError
from src.generate import GeneratorParams, forest_declarations, generate_instance, nested_quotas, root_path
from src.hierarchy import build_forest
from src.model import Contract, build_contract_universe, eligible_categories
from src.oracles import (
    EXHAUSTIVE_POOL,
    AuditReport,
    assert_merit_undominated,
    audit_category_caps,
    check_fairness,
    check_justified_envy,
    check_min_shortfall,
    check_stability,
    merit_dominates,
)

logger = logging.getLogger(__name__)

CHAIN_DECLARATIONS = ({"id": "p", "parent": None}, {"id": "c", "parent": "p"})


# ----------------------------------------------------------------------
# Choice problems
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ChoiceProblem:
    pool: tuple
    quotas: dict
    capacity: int
    ranking: tuple
    forest: object
    rho: dict

    def choose(self, rule, pool=None, capacity=None):
        chosen, _ = rule(
            self.pool if pool is None else tuple(pool),
            self.quotas,
            self.capacity if capacity is None else capacity,
            self.ranking,
            self.forest,
            self.rho,
        )
        return frozenset(chosen)

    def to_dict(self):
        return {
            "pool": list(self.pool),
            "quotas": dict(sorted(self.quotas.items())),
            "capacity": self.capacity,
            "ranking": list(self.ranking),
            "forest": self.forest.declarations(),
            "rho": {i: sorted(t) for i, t in sorted(self.rho.items()) if t},
        }


@dataclass(frozen=True)
class ProblemParams:
    max_pool: int = 8
    max_types: int = 3
    max_capacity: int = 4
    max_quota: int = 2
    nested: bool = True

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in (d or {}).items() if k in cls.__dataclass_fields__}
        return cls(**known).validated()

    def validated(self):
        for name, v in asdict(self).items():
            if name != "nested" and (not isinstance(v, int) or v < 0):
                raise OracleError(ErrorCode.BAD_PARAMS, f"{name} must be a nonnegative integer", name)
        return self


def sample_choice_problem(rng, params=None):
    """
    One random within-category problem: random forest (up to max_types),
    root-path type sets, a random merit order and random quotas. With
    params.nested, roots ask for at most the capacity and children for at
    most their parent.
    """
    params = params or ProblemParams()
    n_types = int(rng.integers(0, params.max_types + 1))
    decls = forest_declarations(rng, n_types, "random")
    forest = build_forest(decls)
    n = int(rng.integers(0, params.max_pool + 1))
    ids = [f"i{k}" for k in range(1, n + 1)]
    rho = {}
    for i in ids:
        pick = int(rng.integers(-1, n_types))
        rho[i] = frozenset(root_path(decls, decls[pick]["id"])) if pick >= 0 else frozenset()
    ranking = tuple(ids[j] for j in rng.permutation(n))
    capacity = int(rng.integers(0, params.max_capacity + 1))
    if params.nested:
        quotas = nested_quotas(rng, decls, capacity, params.max_quota)
    else:
        quotas = {h: int(rng.integers(0, params.max_quota + 1)) for h in forest.types}
    return ChoiceProblem(tuple(ids), quotas, capacity, ranking, forest, rho)


def enumerate_chain_problems(max_individuals=6, max_capacity=3, quota_levels=(0, 1, 2)):
    """
    Every problem over the two-type chain c ⊂ p: up to `max_individuals`
    individuals (each untyped, p only, or c and p), merit order by id,
    capacity 0..max_capacity, each quota from `quota_levels`.
    """
    forest = build_forest(CHAIN_DECLARATIONS)
    type_sets = (frozenset(), frozenset({"p"}), frozenset({"p", "c"}))
    for n in range(max_individuals + 1):
        ids = tuple(f"i{k}" for k in range(1, n + 1))
        for assignment in product(type_sets, repeat=n):
            rho = dict(zip(ids, assignment))
            for capacity in range(max_capacity + 1):
                for kp, kc in product(quota_levels, repeat=2):
                    yield ChoiceProblem(ids, {"p": kp, "c": kc}, capacity, ids, forest, rho)


def audit_merit_undomination(rule, problems, exhaustive_cap=EXHAUSTIVE_POOL, progress=False):
    """Min shortfall and merit-undomination of `rule` on every problem."""
    report = AuditReport("merit-undomination")
    for problem in tqdm(problems, desc="[AUDIT] undomination", disable=not progress):
        chosen = problem.choose(rule)
        size = min(problem.capacity, len(problem.pool))
        args = (problem.pool, problem.quotas, size, problem.forest, problem.rho)
        found = check_min_shortfall(*args, chosen, exhaustive_cap=exhaustive_cap)
        found.absorb(assert_merit_undominated(*args, problem.ranking, chosen, exhaustive_cap=exhaustive_cap))
        report.checked += 1
        for ce in found.counterexamples:
            report.add(problem=problem.to_dict(), **ce)
    if not report.passed:
        logger.info("[AUDIT] merit-undomination: %d counterexample(s)", len(report.counterexamples))
    return report


# ----------------------------------------------------------------------
# Choice-rule properties
# ----------------------------------------------------------------------

def check_choice_triple(rule, problem, z, x, y):
    """
    The four choice properties on one (Z, x, y) draw. Returns the names of
    the violated properties.
    """
    z = list(z)
    c_z = problem.choose(rule, z)
    c_zx = problem.choose(rule, z + [x])
    c_zy = problem.choose(rule, z + [y])
    c_zxy = problem.choose(rule, z + [x, y])
    found = []
    if y not in c_zy and y in c_zxy:
        found.append("substitutes")
    if len(c_z) > len(c_zx):
        found.append("size-monotonicity")
    if x not in c_zx and c_z != c_zx:
        found.append("irrelevance-of-rejected")
    bigger = problem.choose(rule, z + [x, y], problem.capacity + 1)
    # one more seat keeps everyone chosen and adds at most one
    if not (0 <= len(bigger) - len(c_zxy) <= 1 and c_zxy <= bigger):
        found.append("quota-monotonicity")
    return found


def _fuzz_trial(rule, params, seed, trial):
    rng = np.random.default_rng([seed, trial])
    problem = sample_choice_problem(rng, params)
    if len(problem.pool) < 2:
        return []
    order = rng.permutation(len(problem.pool))
    x, y = problem.pool[order[0]], problem.pool[order[1]]
    z = [problem.pool[j] for j in order[2:] if rng.random() < 0.5]
    return [
        {"trial": trial, "property": name, "Z": sorted(z), "x": x, "y": y, "problem": problem.to_dict()}
        for name in check_choice_triple(rule, problem, z, x, y)
    ]


def _fuzz_shard(rule, params, seed, trials):
    out = []
    for t in trials:
        out += _fuzz_trial(rule, params, seed, int(t))
    return out


def fuzz_choice_properties(rule, params=None, trials=1000, seed=0, n_jobs=1, progress=False):
    """
    Seeded fuzz of a within-category rule.

    Args:
        rule: callable with choose_hierarchical's signature (module-level,
            so joblib can ship it to workers).
        params (ProblemParams): sampler bounds.
        trials (int): number of (problem, Z, x, y) draws.
        seed (int): campaign seed; trial t uses default_rng([seed, t]).
        n_jobs (int): joblib workers.

    Returns:
        AuditReport; counterexamples ordered by trial.
    """
    params = params or ProblemParams()
    n_shards = max(1, min(trials, 4 * max(1, n_jobs)))
    shards = np.array_split(np.arange(trials), n_shards)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_fuzz_shard)(rule, params, seed, shard)
        for shard in tqdm(shards, desc="[FUZZ] choice", disable=not progress)
    )
    report = AuditReport("choice-properties", checked=trials, notes={"seed": seed})
    for found in results:
        report.counterexamples += found
    report.counterexamples.sort(key=lambda c: (c["trial"], c["property"]))
    logger.info("[FUZZ] %d trials, %d violation(s)", trials, len(report.counterexamples))
    return report


def fuzz_domination_order(trials=1000, seed=0, max_size=4, population=8):
    """Irreflexivity, antisymmetry and transitivity of merit_dominates on random triples."""
    report = AuditReport("domination-order", checked=trials)
    ids = [f"i{k}" for k in range(1, population + 1)]
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        ranking = [ids[j] for j in rng.permutation(population)]
        k = int(rng.integers(0, max_size + 1))
        a, b, c = (frozenset(ids[j] for j in rng.choice(population, size=k, replace=False)) for _ in range(3))
        if merit_dominates(a, a, ranking):
            report.add(trial=t, property="irreflexive", A=sorted(a))
        if merit_dominates(a, b, ranking) and merit_dominates(b, a, ranking):
            report.add(trial=t, property="antisymmetric", A=sorted(a), B=sorted(b))
        if merit_dominates(a, b, ranking) and merit_dominates(b, c, ranking) and not merit_dominates(a, c, ranking):
            report.add(trial=t, property="transitive", A=sorted(a), B=sorted(b), C=sorted(c))
    return report


# ----------------------------------------------------------------------
# Aggregate-rule properties
# ----------------------------------------------------------------------

def _aggregate_checks(instance, rule, config, offered, x, y):
    found = []
    s = config.institution
    base = rule(instance, offered, config)
    chosen = base.chosen

    fairness = check_fairness(instance, offered, chosen, s)
    for ce in fairness.counterexamples:
        found.append({"property": "fairness", **ce})
    held = Counter(c.individual for c in chosen)
    if any(n > 1 for n in held.values()):
        found.append({"property": "one-contract-per-individual"})
    for fill in base.categories:
        if len(fill.chosen) > fill.capacity:
            found.append({"property": "category-cap", "category": fill.category})
    if len(chosen) > instance.institutions[s].total_capacity:
        found.append({"property": "total-capacity"})
    obc = base.category("OBC")
    if base.category("D") is not None and base.dereserved_capacity != obc.capacity - len(obc.chosen):
        found.append({"property": "transfer-capacity"})

    # observable forms: the added contract's individual is not chosen
    with_y = rule(instance, offered | {y}, config)
    winners_y = with_y.chosen_individuals()
    if y not in with_y.chosen and y.individual not in winners_y and x.individual not in winners_y:
        if y in rule(instance, offered | {x, y}, config).chosen:
            found.append({"property": "observable-substitutes", "x": x.to_list(), "y": y.to_list()})
    if x.individual not in base.chosen_individuals():
        with_x = rule(instance, offered | {x}, config)
        if len(with_x.chosen) < len(chosen):
            found.append({"property": "observable-size-monotonicity", "x": x.to_list()})
        if x.category == "OBC" and with_x.dereserved_capacity > base.dereserved_capacity:
            found.append({"property": "monotone-transfer", "x": x.to_list()})
    return found


def fuzz_aggregate_properties(
    rule=None,
    trials=1000,
    seed=0,
    variant=PLAIN,
    dereserve_source=DERESERVE_ANY,
    params=None,
    progress=False,
):
    """
    Seeded fuzz of an aggregate rule (default: the engine's own rule for
    `variant`). Each trial generates a one-institution instance, a random
    offered set Y and two extra contracts x, y.
    """
    rule = rule or institution_choice
    params = params or GeneratorParams(individuals=8, institutions=1, min_capacity=1, max_capacity=5, max_quota=2)
    report = AuditReport("aggregate-properties", checked=trials, notes={"seed": seed, "variant": variant})
    for t in tqdm(range(trials), desc="[FUZZ] aggregate", disable=not progress):
        rng = np.random.default_rng([seed, t])
        instance = generate_instance(int(rng.integers(2**31)), params)
        if not instance.institutions:
            continue
        s = next(iter(instance.institutions))
        config = institution_configs(instance, variant, dereserve_source)[s]
        universe = sorted(c for c in build_contract_universe(instance) if c.institution == s)
        if len(universe) < 2:
            continue
        picks = rng.permutation(len(universe))
        x, y = universe[picks[0]], universe[picks[1]]
        offered = frozenset(universe[j] for j in picks[2:] if rng.random() < 0.6)
        for ce in _aggregate_checks(instance, rule, config, offered, x, y):
            rows = [c.to_list() for c in sorted(offered)]
            # fairness rows already name the institution
            report.add(**{"trial": t, "offered": rows, **ce, "institution": s})
    logger.info("[FUZZ] aggregate %s: %d trials, %d violation(s)", variant, trials, len(report.counterexamples))
    return report


# ----------------------------------------------------------------------
# Mechanism probes
# ----------------------------------------------------------------------

def misreport_count(instance, individual_id):
    ind = instance.individual(individual_id)
    n = len(instance.institutions) * len(eligible_categories(ind.membership))
    return sum(math.perm(n, k) for k in range(n + 1))


def probe_strategyproofness(
    instance,
    mechanism=None,
    variant=PLAIN,
    dereserve_source=DERESERVE_ANY,
    enumeration_cap=20000,
    progress=False,
):
    """
    Enumerate, for every individual, every ordering of every subset of their
    eligible pairs, rerun the mechanism, and report any report that gets the
    individual something they truly prefer.

    Raises:
        OracleError(ENUMERATION_CAP_EXCEEDED) before running anything when the
        total number of reports exceeds `enumeration_cap`.
    """
    if mechanism is None:
        def mechanism(inst):
            return run_cop(inst, variant, dereserve_source=dereserve_source, record_log=False)

    total = sum(misreport_count(instance, i) for i in instance.individuals)
    if total > enumeration_cap:
        raise OracleError(
            ErrorCode.ENUMERATION_CAP_EXCEEDED, f"{total} preference reports > cap {enumeration_cap}"
        )
    report = AuditReport("strategy-proofness", notes={"reports": total})
    truthful = mechanism(instance).statuses
    for i in tqdm(sorted(instance.individuals), desc="[AUDIT] misreports", disable=not progress):
        ind = instance.individuals[i]
        truth = truthful[i].pair if truthful[i] is not None else None
        pairs = [(s, v) for s in sorted(instance.institutions) for v in eligible_categories(ind.membership)]
        for k in range(len(pairs) + 1):
            for lie in permutations(pairs, k):
                if lie == ind.preferences:
                    continue
                report.checked += 1
                got = mechanism(instance.with_preferences(i, lie)).statuses[i]
                gained = got.pair if got is not None else None
                if ind.prefers(gained, truth):
                    report.add(
                        individual=i,
                        truthful=[list(p) for p in ind.preferences],
                        report=[list(p) for p in lie],
                        truthful_outcome=list(truth) if truth else None,
                        manipulated_outcome=list(gained),
                    )
    return report


def probe_order_invariance(instance, variant=PLAIN, orders=20, seed=0, dereserve_source=DERESERVE_ANY):
    """The matching under `orders` seeded-random proposal orders equals the id-order one."""
    report = AuditReport("order-invariance")
    reference = run_cop(instance, variant, dereserve_source=dereserve_source, record_log=False).matching
    seeds = np.random.default_rng(seed).integers(0, 2**31, size=orders)
    for k in seeds:
        report.checked += 1
        policy = f"random:{int(k)}"
        got = run_cop(instance, variant, proposal_policy=policy, dereserve_source=dereserve_source, record_log=False)
        if got.matching != reference:
            report.add(
                order=policy,
                expected=[x.to_list() for x in reference],
                got=[x.to_list() for x in got.matching],
            )
    return report


def proposed_contracts(instance, matching):
    """
    The cumulative offers each institution saw: under the cumulative offer
    process an individual has proposed exactly the pairs ranked at or above
    their final contract (their whole list when unmatched).
    """
    by_institution = {s: set() for s in instance.institutions}
    for i, ind in instance.individuals.items():
        x = matching.assignment(i)
        last = ind.rank_of(x.pair) if x is not None else None
        upto = ind.preferences if last is None else ind.preferences[: last + 1]
        for s, v in upto:
            by_institution[s].add(Contract(i, s, v))
    return by_institution


def verify_outcome(
    instance,
    matching,
    seat_pools=None,
    variant=PLAIN,
    dereserve_source=DERESERVE_ANY,
    log=None,
    exhaustive=None,
    max_block_size=3,
    exhaustive_individuals=6,
):
    """Every oracle on one matching. Returns a list of AuditReports."""
    reports = [audit_category_caps(instance, matching, seat_pools)]
    reports.append(
        check_stability(
            instance,
            matching,
            variant,
            dereserve_source,
            exhaustive=exhaustive,
            max_block_size=max_block_size,
            exhaustive_individuals=exhaustive_individuals,
        )
    )
    reports.append(check_justified_envy(instance, matching))
    fairness = AuditReport("fairness")
    for s, offered in sorted(proposed_contracts(instance, matching).items()):
        fairness.absorb(check_fairness(instance, offered | matching.for_institution(s), matching.for_institution(s), s))
    reports.append(fairness)
    if log is not None:
        monitor = AuditReport("offer-process")
        violations = monitor_offer_process(log)
        monitor.checked = len(log.get("steps", [])) if isinstance(log, dict) else len(log)
        for v in violations:
            monitor.add(**v.to_dict())
        reports.append(monitor)
    return reports
