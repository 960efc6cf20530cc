# src/aggregate.py
# Institution-level choice: vertical categories in a fixed precedence, each
# choosing with the hierarchical rule.
#
#   plain:     o - SC - ST - OBC - EWS           (hard reserves)
#   transfer:  o - SC - ST - OBC - EWS - D       (vacant OBC seats re-offered)
#
# Category k sees the contracts of category k whose individual was not chosen
# by an earlier category (its availability set). A contract whose individual
# is already chosen is "unavailable", which is reported apart from "rejected".
#
# Category D has capacity equal to the OBC vacancies. It takes the
# highest-ranked remaining individuals and binds, per individual, the
# remaining contract that individual ranks higher (dereserve_source="any"),
# or only open contracts (dereserve_source="open").

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from src.errors import ChoiceError, ConfigError, ErrorCode
from src.hierarchical_choice import choose_hierarchical
from src.model import CATEGORIES, DERESERVED, OPEN, eligible_categories
from src.scoring import category_ranking

logger = logging.getLogger(__name__)

PLAIN_PRECEDENCE = CATEGORIES
TRANSFER_PRECEDENCE = CATEGORIES + (DERESERVED,)
TRANSFER_SOURCE = "OBC"

DERESERVE_ANY = "any"
DERESERVE_OPEN = "open"


@dataclass(frozen=True)
class AggregateConfig:
    institution: str
    precedence: tuple
    capacities: dict
    quotas: dict
    transfer: bool = False
    dereserve_source: str = DERESERVE_ANY

    def __post_init__(self):
        expected = TRANSFER_PRECEDENCE if self.transfer else PLAIN_PRECEDENCE
        if tuple(self.precedence) != expected:
            raise ConfigError(
                ErrorCode.BAD_CONFIG,
                f"precedence {'-'.join(self.precedence)} must be {'-'.join(expected)}",
                self.institution,
            )
        if DERESERVED in self.quotas and any(self.quotas[DERESERVED].values()):
            raise ConfigError(ErrorCode.BAD_CONFIG, "category D carries no horizontal quotas", self.institution)
        if self.dereserve_source not in (DERESERVE_ANY, DERESERVE_OPEN):
            raise ConfigError(
                ErrorCode.BAD_CONFIG, f"unknown dereserve_source {self.dereserve_source!r}", self.institution
            )

    @classmethod
    def for_institution(cls, instance, institution_id, transfer=False, dereserve_source=DERESERVE_ANY):
        inst = instance.institution(institution_id)
        return cls(
            institution=institution_id,
            precedence=TRANSFER_PRECEDENCE if transfer else PLAIN_PRECEDENCE,
            capacities={v: inst.capacity(v) for v in CATEGORIES},
            quotas={v: inst.quotas(v, instance.forest) for v in CATEGORIES},
            transfer=transfer,
            dereserve_source=dereserve_source,
        )


@dataclass(frozen=True)
class CategoryFill:
    category: str
    capacity: int
    available: tuple = ()
    unavailable: tuple = ()
    chosen: tuple = ()
    rejected: tuple = ()
    type_fill: dict = field(default_factory=dict)
    trace: object = None

    def to_dict(self, with_trace=False):
        out = {
            "category": self.category,
            "capacity": self.capacity,
            "filled": len(self.chosen),
            "available": [x.to_list() for x in self.available],
            "unavailable": [x.to_list() for x in self.unavailable],
            "chosen": [x.to_list() for x in self.chosen],
            "rejected": [x.to_list() for x in self.rejected],
            "type_fill": dict(sorted(self.type_fill.items())),
        }
        if with_trace and self.trace is not None:
            out["trace"] = self.trace.to_dict()
        return out


@dataclass(frozen=True)
class AggregateOutcome:
    institution: str
    chosen: frozenset
    categories: tuple
    obc_vacancies: int = 0
    dereserved_capacity: int = 0
    seat_pools: dict = field(default_factory=dict)

    def category(self, k):
        for fill in self.categories:
            if fill.category == k:
                return fill
        return None

    def chosen_individuals(self):
        return frozenset(x.individual for x in self.chosen)

    def fill_report(self):
        """One row per category, stable column order."""
        rows = []
        for fill in self.categories:
            row = {
                "institution": self.institution,
                "category": fill.category,
                "capacity": fill.capacity,
                "filled": len(fill.chosen),
                "available": len(fill.available),
                "unavailable": len(fill.unavailable),
                "rejected": len(fill.rejected),
            }
            for h, n in sorted(fill.type_fill.items()):
                row[f"type:{h}"] = n
            rows.append(row)
        return rows

    def to_dict(self, with_trace=False):
        return {
            "institution": self.institution,
            "chosen": [x.to_list() for x in sorted(self.chosen)],
            "seat_pools": [[*x.to_list(), pool] for x, pool in sorted(self.seat_pools.items())],
            "obc_vacancies": self.obc_vacancies,
            "dereserved_capacity": self.dereserved_capacity,
            "categories": [c.to_dict(with_trace=with_trace) for c in self.categories],
        }


def _check_contracts(instance, institution_id, contracts):
    for x in contracts:
        if x.institution != institution_id:
            raise ChoiceError(
                ErrorCode.FOREIGN_CONTRACT, f"{x} is not a contract with {institution_id!r}", institution_id
            )
        ind = instance.individual(x.individual)
        if x.category not in eligible_categories(ind.membership):
            raise ChoiceError(
                ErrorCode.INELIGIBLE_PREFERENCE, f"{x} is not eligible for {ind.membership}", institution_id
            )


def dereserved_choice(instance, institution_id, contracts, capacity, ranking=None):
    """
    Responsive merit choice for category D: top `capacity` individuals among
    those holding a contract in `contracts`; each binds the contract the
    individual ranks higher.
    """
    if capacity <= 0 or not contracts:
        return ()
    by_individual = {}
    for x in contracts:
        by_individual.setdefault(x.individual, []).append(x)
    if ranking is None:
        ranking = instance.institution(institution_id).ranking
    picked = [i for i in ranking if i in by_individual][:capacity]
    chosen = []
    for i in picked:
        ind = instance.individuals[i]
        options = by_individual[i]

        def key(x, ind=ind):
            r = ind.rank_of(x.pair)
            return (r is None, r if r is not None else 0, CATEGORIES.index(x.category))

        chosen.append(min(options, key=key))
    return tuple(chosen)


def category_choice(instance, institution_id, category, contracts, capacity, quotas=None, ranking=None):
    """
    A single category's rule C_k applied to any set of its contracts.
    Returns the chosen contracts (and the trace for hierarchical categories).
    """
    contracts = frozenset(contracts)
    if category == DERESERVED:
        return frozenset(dereserved_choice(instance, institution_id, contracts, capacity, ranking)), None
    by_individual = {x.individual: x for x in contracts}
    picked, trace = choose_hierarchical(
        pool=by_individual,
        quotas=quotas if quotas is not None else {},
        capacity=capacity,
        ranking=ranking if ranking is not None else category_ranking(instance, institution_id, category),
        forest=instance.forest,
        rho=instance.rho_map,
    )
    return frozenset(by_individual[i] for i in picked), trace


def sequential_choice(
    instance,
    contracts,
    institution_id,
    precedence,
    capacities,
    quotas,
    dereserve_source=DERESERVE_ANY,
    transfer_source=TRANSFER_SOURCE,
    rankings=None,
):
    """
    Generic precedence engine behind both aggregate rules.

    Args:
        instance: validated Instance.
        contracts: contracts with `institution_id`.
        precedence: category order; D (if present) takes the vacancies of
            `transfer_source` left at the time it runs.
        capacities: category -> capacity (D excluded).
        quotas: category -> {type: κ}.
        rankings: optional category -> ranking overriding the merit views.

    Returns:
        AggregateOutcome
    """
    contracts = frozenset(contracts)
    _check_contracts(instance, institution_id, contracts)

    chosen_ids = set()
    chosen = []
    fills = []
    seat_pools = {}
    vacancies = 0
    d_capacity = 0

    for k in precedence:
        if k == DERESERVED:
            src = next((f for f in fills if f.category == transfer_source), None)
            cap = max(0, src.capacity - len(src.chosen)) if src is not None else 0
            d_capacity = cap
            pool = [
                x for x in contracts if dereserve_source == DERESERVE_ANY or x.category == OPEN
            ]
        else:
            cap = capacities.get(k, 0)
            pool = [x for x in contracts if x.category == k]
        available = sorted(x for x in pool if x.individual not in chosen_ids)
        unavailable = sorted(x for x in pool if x.individual in chosen_ids)

        picked, trace = category_choice(
            instance,
            institution_id,
            k,
            available,
            cap,
            quotas.get(k, {}) if k != DERESERVED else None,
            ranking=(rankings or {}).get(k),
        )
        picked = sorted(picked)
        for x in picked:
            if x.individual in chosen_ids:
                raise ChoiceError(
                    ErrorCode.MIXED_INDIVIDUAL_STATE,
                    f"{x.individual!r} chosen twice at {institution_id!r}",
                    institution_id,
                )
            chosen_ids.add(x.individual)
            chosen.append(x)
            seat_pools[x] = k
        fills.append(
            CategoryFill(
                category=k,
                capacity=cap,
                available=tuple(available),
                unavailable=tuple(unavailable),
                chosen=tuple(picked),
                rejected=tuple(x for x in available if x not in set(picked)),
                type_fill=trace.type_fill() if trace is not None else {},
                trace=trace,
            )
        )
        if k == transfer_source:
            vacancies = max(0, cap - len(picked))

    outcome = AggregateOutcome(
        institution=institution_id,
        chosen=frozenset(chosen),
        categories=tuple(fills),
        obc_vacancies=vacancies,
        dereserved_capacity=d_capacity,
        seat_pools=seat_pools,
    )
    logger.debug(
        "[CHOICE] %s: %d of %d contracts chosen", institution_id, len(outcome.chosen), len(contracts)
    )
    return outcome


def choose_aggregate(instance, contracts, config):
    """Hard-reserve aggregate rule (precedence o-SC-ST-OBC-EWS)."""
    if config.transfer:
        raise ConfigError(ErrorCode.BAD_CONFIG, "choose_aggregate takes a config without transfer", config.institution)
    return sequential_choice(
        instance, contracts, config.institution, config.precedence, config.capacities, config.quotas
    )


def choose_aggregate_transfer(instance, contracts, config):
    """Aggregate rule with forward transfer of vacant OBC seats to category D."""
    if not config.transfer:
        raise ConfigError(ErrorCode.BAD_CONFIG, "choose_aggregate_transfer needs a transfer config", config.institution)
    return sequential_choice(
        instance,
        contracts,
        config.institution,
        config.precedence,
        config.capacities,
        config.quotas,
        dereserve_source=config.dereserve_source,
    )


def institution_choice(instance, contracts, config):
    if config.transfer:
        return choose_aggregate_transfer(instance, contracts, config)
    return choose_aggregate(instance, contracts, config)
