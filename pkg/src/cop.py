# src/cop.py
# Cumulative offer mechanism over a full instance.
#
# Loop:
#   1) Among individuals with no held contract and an unproposed pair left,
#      pick the proposer (lowest id, or seeded-random).
#   2) The proposer offers their next pair (s, v) as contract x; x joins the
#      cumulative set A_s (contracts never leave A_s).
#   3) Institution s re-chooses from A_s with its aggregate rule; its held set
#      is the result. Individuals dropped from it may propose again.
#   4) Stop when nobody can propose. The matching is the union of held sets.
#
# Every evaluation also records, per category, the available set H_k, the
# cumulative availability F_k, the capacity q_k and the choices C_k(H_k),
# C_k(F_k), so the offer process can be checked afterwards without a rerun.

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from src.aggregate import DERESERVE_ANY, AggregateConfig, category_choice, institution_choice, sequential_choice
from src.errors import ConfigError, EngineError, ErrorCode
from src.model import CATEGORIES, DERESERVED, Contract, Matching

logger = logging.getLogger(__name__)

PLAIN = "plain"
TRANSFER = "transfer"
VARIANTS = (PLAIN, TRANSFER)

ORDER_ID = "id"
ORDER_RANDOM = "random"


def parse_proposal_policy(policy):
    """'id' -> ("id", None); 'random:<seed>' -> ("random", seed)."""
    if policy in (None, ORDER_ID):
        return ORDER_ID, None
    if isinstance(policy, str) and policy.startswith(ORDER_RANDOM + ":"):
        seed = policy.split(":", 1)[1]
        if seed.lstrip("-").isdigit():
            return ORDER_RANDOM, int(seed)
    raise ConfigError(ErrorCode.BAD_CONFIG, f"proposal order must be 'id' or 'random:<seed>', got {policy!r}", "order")


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ConfigError(ErrorCode.BAD_CONFIG, f"variant must be one of {VARIANTS}, got {variant!r}", "variant")


def institution_configs(instance, variant=PLAIN, dereserve_source=DERESERVE_ANY):
    _check_variant(variant)
    return {
        s: AggregateConfig.for_institution(
            instance, s, transfer=(variant == TRANSFER), dereserve_source=dereserve_source
        )
        for s in instance.institutions
    }


# ----------------------------------------------------------------------
# Offer-process log
# ----------------------------------------------------------------------

def _contracts(rows, where):
    try:
        return tuple(Contract(str(a), str(b), str(c)) for a, b, c in rows)
    except (TypeError, ValueError):
        raise EngineError(ErrorCode.MALFORMED_LOG, "expected [individual, institution, category] rows", where) from None


@dataclass(frozen=True)
class CategorySnapshot:
    category: str
    capacity: int
    available: tuple = ()
    cumulative: tuple = ()
    chosen_available: tuple = ()
    chosen_cumulative: tuple = ()

    @property
    def rejected_cumulative(self):
        chosen = set(self.chosen_cumulative)
        return tuple(x for x in self.cumulative if x not in chosen)

    def to_dict(self):
        return {
            "category": self.category,
            "capacity": self.capacity,
            "available": [x.to_list() for x in self.available],
            "cumulative": [x.to_list() for x in self.cumulative],
            "chosen_available": [x.to_list() for x in self.chosen_available],
            "chosen_cumulative": [x.to_list() for x in self.chosen_cumulative],
        }

    @classmethod
    def from_dict(cls, d, where=""):
        try:
            return cls(
                category=str(d["category"]),
                capacity=int(d["capacity"]),
                available=_contracts(d["available"], where),
                cumulative=_contracts(d["cumulative"], where),
                chosen_available=_contracts(d["chosen_available"], where),
                chosen_cumulative=_contracts(d["chosen_cumulative"], where),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise EngineError(ErrorCode.MALFORMED_LOG, f"bad category snapshot: {e}", where) from None


@dataclass(frozen=True)
class OfferStep:
    index: int
    proposer: str
    contract: Contract
    rank: int
    cumulative: tuple
    held_before: tuple
    held_after: tuple
    snapshots: tuple = ()

    @property
    def institution(self):
        return self.contract.institution

    def to_dict(self):
        return {
            "step": self.index,
            "proposer": self.proposer,
            "contract": self.contract.to_list(),
            "rank": self.rank,
            "cumulative": [x.to_list() for x in self.cumulative],
            "held_before": [x.to_list() for x in self.held_before],
            "held_after": [x.to_list() for x in self.held_after],
            "snapshots": [s.to_dict() for s in self.snapshots],
        }

    @classmethod
    def from_dict(cls, d, where=""):
        try:
            contract = _contracts([d["contract"]], where)[0]
            return cls(
                index=int(d["step"]),
                proposer=str(d["proposer"]),
                contract=contract,
                rank=int(d["rank"]),
                cumulative=_contracts(d["cumulative"], where),
                held_before=_contracts(d["held_before"], where),
                held_after=_contracts(d["held_after"], where),
                snapshots=tuple(
                    CategorySnapshot.from_dict(s, f"{where}.snapshots[{n}]")
                    for n, s in enumerate(d.get("snapshots", []))
                ),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise EngineError(ErrorCode.MALFORMED_LOG, f"bad step record: {e}", where) from None


@dataclass
class OfferProcessLog:
    variant: str = PLAIN
    policy: str = ORDER_ID
    steps: list = field(default_factory=list)
    final_held: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.steps)

    def to_dict(self):
        return {
            "variant": self.variant,
            "policy": self.policy,
            "steps": [s.to_dict() for s in self.steps],
            "final_held": {s: [x.to_list() for x in held] for s, held in sorted(self.final_held.items())},
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or not isinstance(d.get("steps", []), list):
            raise EngineError(ErrorCode.MALFORMED_LOG, "log must be a mapping with a list of steps")
        final = d.get("final_held") or {}
        if not isinstance(final, dict):
            raise EngineError(ErrorCode.MALFORMED_LOG, "final_held must map institution -> contracts")
        return cls(
            variant=d.get("variant", PLAIN),
            policy=d.get("policy", ORDER_ID),
            steps=[OfferStep.from_dict(s, f"steps[{n}]") for n, s in enumerate(d.get("steps", []))],
            final_held={s: _contracts(rows, f"final_held.{s}") for s, rows in final.items()},
        )


@dataclass(frozen=True)
class MechanismOutcome:
    matching: Matching
    statuses: dict
    seat_pools: dict
    fills: dict
    variant: str = PLAIN
    policy: str = ORDER_ID
    log: OfferProcessLog = None

    def fill_report(self):
        rows = []
        for s in sorted(self.fills):
            rows += self.fills[s].fill_report()
        return rows

    def matched_count(self):
        return sum(1 for x in self.statuses.values() if x is not None)


def assignment(outcome):
    """individual id -> held Contract, or None when unmatched."""
    return dict(outcome.statuses)


# ----------------------------------------------------------------------
# Mechanism
# ----------------------------------------------------------------------

def _snapshots(instance, s, evaluation, cumulative_by_category, config):
    out = []
    for fill in evaluation.categories:
        k = fill.category
        seen = cumulative_by_category.setdefault(k, set())
        seen.update(fill.available)
        quotas = config.quotas.get(k, {}) if k != DERESERVED else None
        chosen_f, _ = category_choice(instance, s, k, seen, fill.capacity, quotas)
        out.append(
            CategorySnapshot(
                category=k,
                capacity=fill.capacity,
                available=tuple(sorted(fill.available)),
                cumulative=tuple(sorted(seen)),
                chosen_available=tuple(sorted(fill.chosen)),
                chosen_cumulative=tuple(sorted(chosen_f)),
            )
        )
    return tuple(out)


def run_cop(instance, variant=PLAIN, proposal_policy=ORDER_ID, dereserve_source=DERESERVE_ANY, record_log=True):
    """
    Run the cumulative offer mechanism.

    Args:
        instance: validated Instance.
        variant: "plain" (hard reserves) or "transfer" (vacant OBC seats
            re-offered through category D).
        proposal_policy: "id" or "random:<seed>".
        dereserve_source: which remaining contracts category D may bind.
        record_log: keep per-step snapshots (needed for monitoring).

    Returns:
        MechanismOutcome
    """
    order, seed = parse_proposal_policy(proposal_policy)
    configs = institution_configs(instance, variant, dereserve_source)
    rng = np.random.default_rng(seed) if order == ORDER_RANDOM else None

    prefs = {i: ind.preferences for i, ind in instance.individuals.items()}
    pointer = {i: 0 for i in prefs}
    cumulative = {s: set() for s in instance.institutions}
    held = {s: frozenset() for s in instance.institutions}
    holder = {}
    f_sets = {s: {} for s in instance.institutions}
    log = OfferProcessLog(variant=variant, policy=proposal_policy or ORDER_ID)
    guard = sum(len(p) for p in prefs.values())
    step = 0

    while True:
        proposable = [i for i in sorted(prefs) if i not in holder and pointer[i] < len(prefs[i])]
        if not proposable:
            break
        step += 1
        if step > guard:
            raise EngineError(
                ErrorCode.NONTERMINATION_GUARD, f"step {step} exceeds the {guard} proposable contracts"
            )
        i = proposable[0] if rng is None else proposable[int(rng.integers(len(proposable)))]
        rank = pointer[i]
        s, v = prefs[i][rank]
        pointer[i] += 1
        x = Contract(i, s, v)

        before = held[s]
        cumulative[s].add(x)
        evaluation = institution_choice(instance, cumulative[s], configs[s])
        after = evaluation.chosen

        for y in before - after:
            holder.pop(y.individual, None)
        for y in after:
            current = holder.get(y.individual)
            if current is not None and current.institution != s:
                raise EngineError(
                    ErrorCode.MIXED_INDIVIDUAL_STATE,
                    f"{y.individual!r} held at {current.institution!r} and {s!r}",
                    f"step {step}",
                )
            holder[y.individual] = y
        held[s] = after

        logger.debug("[COP] step %d: %s proposes %s; %s holds %d", step, i, x, s, len(after))
        if record_log:
            log.steps.append(
                OfferStep(
                    index=step,
                    proposer=i,
                    contract=x,
                    rank=rank,
                    cumulative=tuple(sorted(cumulative[s])),
                    held_before=tuple(sorted(before)),
                    held_after=tuple(sorted(after)),
                    snapshots=_snapshots(instance, s, evaluation, f_sets[s], configs[s]),
                )
            )

    fills = {s: institution_choice(instance, cumulative[s], configs[s]) for s in instance.institutions}
    matching = Matching(frozenset(y for h in held.values() for y in h))
    seat_pools = {}
    for s, fill in fills.items():
        seat_pools.update(fill.seat_pools)
    statuses = {i: holder.get(i) for i in sorted(instance.individuals)}
    log.final_held = {s: tuple(sorted(h)) for s, h in held.items()}

    logger.info(
        "[COP] %s/%s: %d steps, %d of %d individuals matched",
        variant,
        proposal_policy or ORDER_ID,
        step,
        len(matching),
        len(statuses),
    )
    return MechanismOutcome(
        matching=matching,
        statuses=statuses,
        seat_pools=seat_pools,
        fills=fills,
        variant=variant,
        policy=proposal_policy or ORDER_ID,
        log=log if record_log else None,
    )


def run_immediate_acceptance(instance, variant=PLAIN, dereserve_source=DERESERVE_ANY):
    """
    Immediate acceptance: in round r every unassigned individual applies to
    the r-th pair on their list, and institutions admit permanently from
    that round's applicants against residual capacities and quotas.
    Manipulable; kept as the contrast case for the strategy-proofness probe.
    """
    configs = institution_configs(instance, variant, dereserve_source)
    residual = {s: dict(c.capacities) for s, c in configs.items()}
    admitted = {s: {} for s in instance.institutions}
    statuses = {i: None for i in sorted(instance.individuals)}
    seat_pools = {}
    rho = instance.rho_map
    r = 0

    while True:
        applications = {}
        for i in statuses:
            prefs = instance.individuals[i].preferences
            if statuses[i] is None and r < len(prefs):
                s, v = prefs[r]
                applications.setdefault(s, []).append(Contract(i, s, v))
        if not applications:
            break
        for s, apps in sorted(applications.items()):
            config = configs[s]
            quotas = {}
            for k in CATEGORIES:
                taken = admitted[s].get(k, [])
                quotas[k] = {
                    h: max(0, q - sum(1 for i in taken if h in rho[i])) for h, q in config.quotas[k].items()
                }
            outcome = sequential_choice(
                instance,
                apps,
                s,
                config.precedence,
                residual[s],
                quotas,
                dereserve_source=config.dereserve_source,
            )
            for x, pool in outcome.seat_pools.items():
                statuses[x.individual] = x
                seat_pools[x] = pool
                charged = "OBC" if pool == DERESERVED else pool
                residual[s][charged] -= 1
                admitted[s].setdefault(pool, []).append(x.individual)
        r += 1

    matching = Matching(frozenset(x for x in statuses.values() if x is not None))
    logger.debug("[COP] immediate acceptance: %d rounds, %d matched", r, len(matching))
    return MechanismOutcome(
        matching=matching,
        statuses=statuses,
        seat_pools=seat_pools,
        fills={},
        variant=variant,
        policy="immediate-acceptance",
    )


# ----------------------------------------------------------------------
# Monitor
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MonitorViolation:
    condition: str
    step: int
    institution: str = ""
    category: str = ""
    detail: str = ""

    def to_dict(self):
        return {
            "condition": self.condition,
            "step": self.step,
            "institution": self.institution,
            "category": self.category,
            "detail": self.detail,
        }


def _fmt(xs):
    return "{" + ", ".join(str(x) for x in sorted(xs)) + "}"


def monitor_offer_process(log):
    """
    Check a complete offer-process log.

    Conditions, for every institution's successive evaluations m-1, m and
    every category k:
      (1) C_k(H_k^{m-1}) ⊆ H_k^m
      (2) C_k(F_k^m) ⊆ C_k(H_k^{m-1}) ∪ (H_k^m minus H_k^{m-1})
      (3) C_k(H_k^m) = C_k(F_k^m)
      (4) q_k^{m-1} ≥ q_k^m
      (5) F_k^{m-1} minus C_k(F_k^{m-1}) ⊆ F_k^m minus C_k(F_k^m)
    plus the process invariants: cumulative sets grow by exactly the proposed
    contract, proposers hold nothing anywhere, and each proposer walks their
    list in order.

    Returns:
        list of MonitorViolation (empty means clean).

    Raises:
        EngineError(MALFORMED_LOG) for logs that cannot be read.
    """
    if isinstance(log, dict):
        log = OfferProcessLog.from_dict(log)
    if not isinstance(log, OfferProcessLog):
        raise EngineError(ErrorCode.MALFORMED_LOG, f"expected an offer-process log, got {type(log).__name__}")

    violations = []
    where = {}
    cumulative = {}
    previous = {}
    proposals = {}
    last_held = {}

    for n, step in enumerate(log.steps, start=1):
        if step.index != n:
            raise EngineError(ErrorCode.MALFORMED_LOG, f"step {step.index} found at position {n}", f"steps[{n - 1}]")
        if step.contract.individual != step.proposer:
            raise EngineError(ErrorCode.MALFORMED_LOG, f"step {n} contract does not belong to its proposer")
        s = step.institution

        if step.proposer in where:
            violations.append(
                MonitorViolation("idle-proposer", n, s, detail=f"{step.proposer} is held at {where[step.proposer]}")
            )
        if any(x.individual == step.proposer for x in step.held_before):
            violations.append(MonitorViolation("observability", n, s, detail=f"{step.proposer} already chosen"))
        expected = proposals.get(step.proposer, 0)
        if step.rank != expected:
            violations.append(
                MonitorViolation("proposal-order", n, s, detail=f"rank {step.rank}, expected {expected}")
            )
        proposals[step.proposer] = expected + 1

        before = cumulative.get(s, frozenset())
        now = frozenset(step.cumulative)
        if step.contract in before or now != before | {step.contract}:
            violations.append(
                MonitorViolation("cumulative-growth", n, s, detail=f"{_fmt(before)} + {step.contract} != {_fmt(now)}")
            )
        cumulative[s] = now

        for x in step.held_before:
            if where.get(x.individual) == s:
                del where[x.individual]
        for x in step.held_after:
            where[x.individual] = s

        snaps = {snap.category: snap for snap in step.snapshots}
        old_snaps = previous.get(s, {})
        for k, cur in snaps.items():
            if set(cur.chosen_available) != set(cur.chosen_cumulative):
                violations.append(
                    MonitorViolation(
                        "3", n, s, k, f"C(H)={_fmt(cur.chosen_available)} C(F)={_fmt(cur.chosen_cumulative)}"
                    )
                )
            old = old_snaps.get(k)
            if old is None:
                continue
            lost = set(old.chosen_available) - set(cur.available)
            if lost:
                violations.append(MonitorViolation("1", n, s, k, f"previously chosen no longer available: {_fmt(lost)}"))
            allowed = set(old.chosen_available) | (set(cur.available) - set(old.available))
            extra = set(cur.chosen_cumulative) - allowed
            if extra:
                violations.append(MonitorViolation("2", n, s, k, f"chosen from F outside the allowed set: {_fmt(extra)}"))
            if cur.capacity > old.capacity:
                violations.append(MonitorViolation("4", n, s, k, f"capacity rose {old.capacity} -> {cur.capacity}"))
            unrejected = set(old.rejected_cumulative) - set(cur.rejected_cumulative)
            if unrejected:
                violations.append(MonitorViolation("5", n, s, k, f"rejections withdrawn: {_fmt(unrejected)}"))
        previous[s] = snaps

        last_held[s] = step.held_after

    for s, held in log.final_held.items():
        if s in last_held and set(last_held[s]) != set(held):
            violations.append(
                MonitorViolation("final-held", len(log.steps), s, detail="final held set differs from last step")
            )

    if violations:
        logger.warning("[COP] offer-process monitor: %d violation(s)", len(violations))
    return violations
