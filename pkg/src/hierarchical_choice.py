# src/hierarchical_choice.py
# Within-category hierarchical choice rule with one-to-all counting.
#
# Procedure (one vertical category, pool A, quotas κ, capacity q):
#   1) Walk the peel levels of the type forest, leaves first. Within a level,
#      types go in ascending id order (same-level pools are disjoint).
#   2) For type h: take the highest-ranked not-yet-chosen holders of h, up to
#      min(remaining κ_h, remaining capacity). Subtract the count from the
#      capacity and from κ of every type containing h.
#   3) Stop when capacity or pool runs out. Whatever capacity is left after
#      all levels is filled by pure merit from the rest of the pool.
#
# Individuals passed over at a leaf stay in the pool for containing types and
# for the merit phase. The rule is acceptant: |chosen| = min(|A|, q).

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from src.errors import ChoiceError, ErrorCode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TypeSelection:
    type: str
    considered: tuple
    selected: tuple
    quota_remaining: int
    quota_used: int
    capacity_before: int
    capacity_after: int
    clamped: bool = False

    def to_dict(self):
        return {
            "type": self.type,
            "considered": list(self.considered),
            "selected": list(self.selected),
            "quota_remaining": self.quota_remaining,
            "quota_used": self.quota_used,
            "capacity_before": self.capacity_before,
            "capacity_after": self.capacity_after,
            "clamped": self.clamped,
        }


@dataclass(frozen=True)
class ChoiceStep:
    index: int
    level: tuple
    selections: tuple
    quotas_after: dict = field(default_factory=dict)

    @property
    def selected(self):
        return tuple(i for sel in self.selections for i in sel.selected)

    def to_dict(self):
        return {
            "step": self.index,
            "level": list(self.level),
            "selections": [s.to_dict() for s in self.selections],
            "quotas_after": dict(sorted(self.quotas_after.items())),
        }


@dataclass(frozen=True)
class ChoiceTrace:
    """Per-step audit of one hierarchical choice."""

    capacity: int
    steps: tuple = ()
    merit_phase: tuple = ()
    ended: str = "empty"

    @property
    def chosen(self):
        return tuple(i for step in self.steps for i in step.selected) + self.merit_phase

    @property
    def capacity_profile(self):
        """Remaining capacity after each type selection, then after the merit phase."""
        out = [self.capacity]
        for step in self.steps:
            out += [sel.capacity_after for sel in step.selections]
        out.append(out[-1] - len(self.merit_phase))
        return out

    def clamp_events(self):
        return [sel for step in self.steps for sel in step.selections if sel.clamped]

    def type_fill(self):
        return {sel.type: len(sel.selected) for step in self.steps for sel in step.selections}

    def to_dict(self):
        return {
            "capacity": self.capacity,
            "steps": [s.to_dict() for s in self.steps],
            "merit_phase": list(self.merit_phase),
            "ended": self.ended,
            "clamp_events": [sel.type for sel in self.clamp_events()],
        }


def shortfall(chosen, quotas, rho):
    """Σ_h max(0, κ_h − #chosen holding h), counting each person for every type held."""
    total = 0
    for h, k in quotas.items():
        if k <= 0:
            continue
        have = sum(1 for i in chosen if h in rho.get(i, ()))
        total += max(0, k - have)
    return total


def _ranked_pool(pool, ranking):
    pool = set(pool)
    order = [i for i in ranking if i in pool]
    if len(order) != len(pool):
        missing = sorted(pool - set(order))
        raise ChoiceError(ErrorCode.UNKNOWN_INDIVIDUAL, f"unranked individuals in pool: {missing}")
    return order


def _check_quotas(quotas, forest):
    unknown = sorted(set(quotas) - set(forest.types))
    if unknown:
        raise ChoiceError(
            ErrorCode.QUOTA_INDEX_MISMATCH,
            f"quota vector names types outside the forest: {unknown}",
        )
    bad = sorted(h for h, k in quotas.items() if int(k) < 0)
    if bad:
        raise ChoiceError(ErrorCode.NEGATIVE_VALUE, f"negative quotas for {bad}")


def choose_hierarchical(pool, quotas, capacity, ranking, forest, rho):
    """
    Hierarchical choice from a pool of individuals.

    Args:
        pool: iterable of individual ids (all eligible for this category).
        quotas: mapping type -> κ (missing types count as 0).
        capacity (int): positions in the category.
        ranking: sequence of ids, best first, covering the pool.
        forest: HierarchyForest.
        rho: mapping id -> set of horizontal types.

    Returns:
        (frozenset of chosen ids, ChoiceTrace)
    """
    _check_quotas(quotas, forest)
    if capacity < 0:
        raise ChoiceError(ErrorCode.NEGATIVE_VALUE, f"negative capacity {capacity}")
    remaining = _ranked_pool(pool, ranking)
    if not remaining or capacity == 0:
        return frozenset(), ChoiceTrace(capacity=capacity)

    kappa = {h: int(quotas.get(h, 0)) for h in forest.types}
    cap = capacity
    steps = []
    ended = "merit"
    considered_types = set()

    if any(rho.get(i) for i in remaining):
        for n, level in enumerate(forest.levels, start=1):
            selections = []
            for h in level:
                if cap == 0 or not remaining:
                    break
                typed = tuple(i for i in remaining if h in rho.get(i, ()))
                left = max(0, kappa[h])
                used = min(left, cap)
                picked = typed[:used]
                clamped = used < left and len(typed) > used
                if clamped:
                    logger.debug("[CHOICE] quota %d for %r clamped to capacity %d", left, h, cap)
                before = cap
                cap -= len(picked)
                if picked:
                    taken = set(picked)
                    remaining = [i for i in remaining if i not in taken]
                    for a in forest.ancestors(h):
                        kappa[a] -= len(picked)
                considered_types.add(h)
                selections.append(
                    TypeSelection(
                        type=h,
                        considered=typed,
                        selected=picked,
                        quota_remaining=left,
                        quota_used=used,
                        capacity_before=before,
                        capacity_after=cap,
                        clamped=clamped,
                    )
                )
            steps.append(
                ChoiceStep(
                    index=n,
                    level=level,
                    selections=tuple(selections),
                    quotas_after={h: max(0, k) for h, k in kappa.items() if h not in considered_types},
                )
            )
            if cap == 0 or not remaining:
                ended = "capacity" if cap == 0 else "pool"
                break

    merit = tuple(remaining[:cap])
    if ended == "merit" and not merit and cap > 0:
        ended = "pool"
    trace = ChoiceTrace(capacity=capacity, steps=tuple(steps), merit_phase=merit, ended=ended)
    return frozenset(trace.chosen), trace
