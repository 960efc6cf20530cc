# src/mutants.py
# Deliberately broken choice rules. The probes must catch every one of them
# (except `responsive`, which satisfies the choice properties by itself).
#
# Within-category rules share choose_hierarchical's signature:
#   rule(pool, quotas, capacity, ranking, forest, rho) -> (chosen, trace)
# and return trace=None.
#
#   responsive / merit_first  top-`capacity` by merit, quotas ignored
#   reversed_peel             roots first instead of leaves first
#   lowest_score_quota        quota seats go to the lowest-ranked holders
#   overfill_leaf             a crowded leaf type takes every seat it can
#
# Aggregate mutant: ScrambledPrecedence, a seeded shuffle of the category
# order and (by default) of the applicant order inside each category.

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.aggregate import TRANSFER_PRECEDENCE, sequential_choice
from src.model import DERESERVED
from src.scoring import category_ranking


def responsive(pool, quotas, capacity, ranking, forest, rho):
    pool = set(pool)
    return frozenset([i for i in ranking if i in pool][:capacity]), None


# ignores quotas entirely
merit_first = responsive


def _peel(pool, quotas, capacity, ranking, forest, rho, levels, lowest_first=False, overfill=False):
    pool = set(pool)
    remaining = [i for i in ranking if i in pool]
    kappa = {h: int(quotas.get(h, 0)) for h in forest.types}
    cap = capacity
    chosen = []
    for level in levels:
        for h in level:
            if cap == 0:
                break
            typed = [i for i in remaining if h in rho.get(i, ())]
            if lowest_first:
                typed.reverse()
            left = max(0, kappa[h])
            n = min(left, cap)
            if overfill and not forest.children(h) and len(typed) >= left + 2:
                n = cap
            picked = typed[:n]
            chosen += picked
            cap -= len(picked)
            remaining = [i for i in remaining if i not in picked]
            for a in forest.ancestors(h):
                kappa[a] -= len(picked)
    chosen += remaining[:cap]
    return frozenset(chosen), None


def reversed_peel(pool, quotas, capacity, ranking, forest, rho):
    return _peel(pool, quotas, capacity, ranking, forest, rho, tuple(reversed(forest.levels)))


def lowest_score_quota(pool, quotas, capacity, ranking, forest, rho):
    return _peel(pool, quotas, capacity, ranking, forest, rho, forest.levels, lowest_first=True)


def overfill_leaf(pool, quotas, capacity, ranking, forest, rho):
    """A leaf type with at least κ+2 applicants is filled up to the capacity."""
    return _peel(pool, quotas, capacity, ranking, forest, rho, forest.levels, overfill=True)


CHOICE_MUTANTS = {
    "merit_first": merit_first,
    "reversed_peel": reversed_peel,
    "lowest_score_quota": lowest_score_quota,
    "overfill_leaf": overfill_leaf,
}


@dataclass(frozen=True)
class ScrambledPrecedence:
    """Aggregate rule with a seeded category order and applicant order."""

    seed: int = 0
    scramble_applicants: bool = True

    def __call__(self, instance, contracts, config):
        rng = np.random.default_rng(self.seed)
        order = [k for k in config.precedence if k != DERESERVED]
        order = [order[j] for j in rng.permutation(len(order))]
        if config.precedence == TRANSFER_PRECEDENCE:
            order.append(DERESERVED)
        rankings = None
        if self.scramble_applicants:
            rankings = {}
            for k in config.precedence:
                base = category_ranking(instance, config.institution, "o" if k == DERESERVED else k)
                rankings[k] = tuple(base[j] for j in rng.permutation(len(base)))
        return sequential_choice(
            instance,
            contracts,
            config.institution,
            tuple(order),
            config.capacities,
            config.quotas,
            dereserve_source=config.dereserve_source,
            rankings=rankings,
        )
