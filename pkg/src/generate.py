# src/generate.py
# Seeded random instances.
#
# One numpy Generator per call, default_rng(seed): the same seed and params
# always give the same instance. Every generated instance passes
# validate_instance (distinct scores, root-path type sets, capacities that
# add up).

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from src.errors import ConfigError, ErrorCode
from src.io import expand_rol
from src.model import GENERAL, OPEN, RESERVED, validate_instance

logger = logging.getLogger(__name__)

FOREST_SHAPES = ("chain", "flat", "random")


def _default_shares():
    return {"SC": 0.15, "ST": 0.075, "OBC": 0.27, "EWS": 0.1}


@dataclass(frozen=True)
class GeneratorParams:
    individuals: int = 12
    institutions: int = 2
    min_capacity: int = 2
    max_capacity: int = 6
    membership_shares: dict = field(default_factory=_default_shares)
    seat_shares: dict = field(default_factory=_default_shares)
    types: int = 2
    forest_shape: str = "chain"
    type_rate: float = 0.3
    max_quota: int = 1
    nested_quotas: bool = True
    list_length: int = 2
    disclose_rate: float = 0.8
    reserved_first_rate: float = 0.3

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d or {}) - known)
        if unknown:
            raise ConfigError(ErrorCode.BAD_PARAMS, f"unknown generator params {unknown}", "generator")
        return cls(**(d or {})).validated()

    def to_dict(self):
        return asdict(self)

    def validated(self):
        problems = []
        for name in ("individuals", "institutions", "min_capacity", "max_capacity", "types", "max_quota", "list_length"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                problems.append(f"{name} must be a nonnegative integer")
        if not problems and self.min_capacity > self.max_capacity:
            problems.append("min_capacity > max_capacity")
        for name in ("membership_shares", "seat_shares"):
            shares = getattr(self, name)
            if set(shares) - set(RESERVED):
                problems.append(f"{name} keys must be among {RESERVED}")
            elif any(not 0 <= float(p) <= 1 for p in shares.values()) or sum(shares.values()) > 1 + 1e-9:
                problems.append(f"{name} must be in [0, 1] and sum to at most 1")
        for name in ("type_rate", "disclose_rate", "reserved_first_rate"):
            if not 0 <= getattr(self, name) <= 1:
                problems.append(f"{name} must be in [0, 1]")
        if self.forest_shape not in FOREST_SHAPES:
            problems.append(f"forest_shape must be one of {FOREST_SHAPES}")
        if problems:
            raise ConfigError(ErrorCode.BAD_PARAMS, "; ".join(problems), "generator")
        return self


def forest_declarations(rng, n_types, shape):
    decls = []
    for k in range(1, n_types + 1):
        if shape == "chain":
            parent = f"h{k - 1}" if k > 1 else None
        elif shape == "flat":
            parent = None
        else:
            parent = f"h{int(rng.integers(1, k))}" if k > 1 and rng.random() < 0.6 else None
        decls.append({"id": f"h{k}", "parent": parent})
    return decls


def root_path(decls, h):
    parents = {d["id"]: d["parent"] for d in decls}
    out = []
    while h is not None:
        out.append(h)
        h = parents[h]
    return out


def nested_quotas(rng, decls, capacity, max_quota):
    """
    Random quotas where the roots ask for at most `capacity` in total and
    the children of a type ask for at most that type's quota.
    """
    children = {}
    for d in decls:
        children.setdefault(d["parent"], []).append(d["id"])
    quotas = {}

    def fill(parent, budget):
        for h in children.get(parent, []):
            k = int(rng.integers(0, min(max_quota, budget) + 1))
            quotas[h] = k
            budget -= k
            fill(h, k)

    fill(None, capacity)
    return quotas


def generate_raw(seed, params=None):
    """Raw instance dict (the InstanceFile shape) for `seed`."""
    params = (params or GeneratorParams()).validated()
    rng = np.random.default_rng(seed)
    decls = forest_declarations(rng, params.types, params.forest_shape)
    type_ids = [d["id"] for d in decls]

    member_cats = [GENERAL, *RESERVED]
    member_p = [params.membership_shares.get(r, 0.0) for r in RESERVED]
    member_p = np.array([max(0.0, 1.0 - sum(member_p)), *member_p])
    member_p = member_p / member_p.sum()
    width = len(str(max(params.individuals, 1)))
    ind_ids = [f"i{k:0{width}d}" for k in range(1, params.individuals + 1)]
    inst_ids = [f"s{k}" for k in range(1, params.institutions + 1)]

    ability = rng.permutation(params.individuals)
    institutions = []
    for s in inst_ids:
        total = int(rng.integers(params.min_capacity, params.max_capacity + 1))
        seat_p = [params.seat_shares.get(r, 0.0) for r in RESERVED]
        seat_p = np.array([max(0.0, 1.0 - sum(seat_p)), *seat_p])
        seats = rng.multinomial(total, seat_p / seat_p.sum())
        vertical = {r: int(q) for r, q in zip(RESERVED, seats[1:])}
        caps = {OPEN: int(seats[0]), **vertical}
        horizontal = {}
        for v in (OPEN, *RESERVED):
            if params.nested_quotas:
                quotas = nested_quotas(rng, decls, caps[v], params.max_quota)
            else:
                quotas = {h: int(rng.integers(0, params.max_quota + 1)) for h in type_ids}
            if any(quotas.values()):
                horizontal[v] = quotas
        # distinct by construction: 10 * rank + noise below 10
        scores = {i: int(10 * a + rng.integers(0, 10)) for i, a in zip(ind_ids, ability)}
        institutions.append(
            {
                "id": s,
                "total_capacity": total,
                "vertical_capacities": vertical,
                "horizontal_reservations": horizontal,
                "merit_scores": scores,
            }
        )

    individuals = []
    for i in ind_ids:
        membership = member_cats[int(rng.choice(len(member_cats), p=member_p))]
        types = []
        if type_ids and rng.random() < params.type_rate:
            types = root_path(decls, type_ids[int(rng.integers(len(type_ids)))])
        k = int(rng.integers(0, min(params.list_length, len(inst_ids)) + 1))
        listed = [inst_ids[j] for j in rng.permutation(len(inst_ids))[:k]]
        prefs = expand_rol(listed, membership, disclose=rng.random() < params.disclose_rate)
        if membership != GENERAL:
            # some members rank the reserved seat first
            for n in range(len(prefs) - 1):
                a, b = prefs[n], prefs[n + 1]
                if a[0] == b[0] and a[1] == OPEN and rng.random() < params.reserved_first_rate:
                    prefs[n], prefs[n + 1] = b, a
        individuals.append(
            {
                "id": i,
                "membership": membership,
                "horizontal_types": sorted(types),
                "preferences": [list(p) for p in prefs],
            }
        )

    return {
        "schema_version": 1,
        "horizontal_types": decls,
        "institutions": institutions,
        "individuals": individuals,
    }


def generate_instance(seed, params=None):
    """
    Deterministic random instance.

    Args:
        seed (int): numpy seed.
        params (GeneratorParams): counts, shares, forest shape, quota levels.

    Returns:
        Instance

    Raises:
        ConfigError(BAD_PARAMS) for inconsistent params.
    """
    raw = generate_raw(seed, params)
    instance = validate_instance(raw)
    logger.debug("[GEN] seed=%s: %d individuals, %d institutions", seed, len(instance.individuals), len(instance.institutions))
    return instance
