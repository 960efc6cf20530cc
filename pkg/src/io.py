# src/io.py
# Files in and out.
#
#   load_config      YAML defaults (configs/reservations.yaml), HRES_SEED override
#   load_instance    JSON instance file -> validated Instance
#   save_instance    Instance -> canonical JSON (load/save/load is identity)
#   save_outcome     matching + fill report (+ log, audits, run flags) -> JSON
#   load_outcome     outcome JSON -> Matching and seat pools for `verify`
#   expand_rol       institutions-only rank order list -> pair preferences
#
# JSON is written with sorted keys and indent=2 so fixtures diff cleanly.
# Scores are written as integers or exact decimal strings, never floats.

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from src.errors import ConfigError, ErrorCode, ParseError, ReservationError
from src.model import GENERAL, OPEN, SCHEMA_VERSION, Contract, Matching, validate_instance
from src.scoring import format_score

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = "configs/reservations.yaml"
SEED_ENV = "HRES_SEED"

DEFAULTS = {
    "seed": 0,
    "tiebreak": None,
    "dereserve_source": "any",
    "proposal_order": "id",
    "audit": {
        "exhaustive_individuals": 6,
        "max_block_size": 3,
        "exhaustive_pool": 12,
        "enumeration_cap": 20000,
        "random_orders": 20,
    },
    "fuzz": {
        "trials": 1000,
        "n_jobs": 1,
        "max_pool": 8,
        "max_types": 3,
        "max_capacity": 4,
        "max_quota": 2,
    },
    "generator": {},
}


def resolve_path(path_str):
    """Path as given if it exists, else relative to the project root."""
    p = Path(path_str)
    if not p.exists() and not p.is_absolute():
        candidate = PROJECT_ROOT / path_str
        if candidate.exists():
            return candidate
    return p


def _merge(base, override):
    out = dict(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=DEFAULT_CONFIG):
    """
    Load the YAML config over the built-in defaults.
    A missing default config is not an error; a missing explicit one is.
    The environment variable HRES_SEED overrides `seed`.
    """
    cfg_path = resolve_path(path) if path else None
    raw = {}
    if cfg_path is not None and cfg_path.exists():
        try:
            with open(cfg_path, "r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ParseError(
                f"invalid YAML: {getattr(e, 'problem', e)}",
                str(cfg_path),
                line=mark.line + 1 if mark else None,
                column=mark.column + 1 if mark else None,
            ) from None
        if not isinstance(raw, dict):
            raise ConfigError(ErrorCode.BAD_CONFIG, "config must be a mapping", str(cfg_path))
    elif path not in (None, DEFAULT_CONFIG):
        raise ConfigError(ErrorCode.BAD_CONFIG, f"config not found: {path}", str(path))

    cfg = _merge(DEFAULTS, raw)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(ErrorCode.BAD_CONFIG, f"{SEED_ENV}={env_seed!r} is not an integer", SEED_ENV) from None
    if cfg["dereserve_source"] not in ("any", "open"):
        raise ConfigError(ErrorCode.BAD_CONFIG, "dereserve_source must be any|open", "dereserve_source")
    return cfg


# ----------------------------------------------------------------------
# JSON documents
# ----------------------------------------------------------------------

def read_json(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read file: {e.strerror or e}", str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, str(path), line=e.lineno, column=e.colno) from None


def write_json(path, obj):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def load_instance(path, tiebreak=None):
    """Read and validate an instance file. Raises ParseError or InstanceValidationError."""
    raw = read_json(path)
    instance = validate_instance(raw, tiebreak=tiebreak)
    logger.info(
        "[LOAD] %s: %d institutions, %d individuals, %d types",
        path,
        len(instance.institutions),
        len(instance.individuals),
        len(instance.forest),
    )
    return instance


def instance_to_dict(instance):
    institutions = []
    for s, inst in sorted(instance.institutions.items()):
        institutions.append(
            {
                "id": s,
                "total_capacity": inst.total_capacity,
                "vertical_capacities": dict(sorted(inst.vertical_capacities.items())),
                "horizontal_reservations": {
                    v: dict(sorted(vec.items())) for v, vec in sorted(inst.horizontal_reservations.items())
                },
                "merit_scores": {i: format_score(sc) for i, sc in sorted(inst.merit_scores.items())},
            }
        )
    individuals = [
        {
            "id": i,
            "membership": ind.membership,
            "horizontal_types": sorted(ind.horizontal_types),
            "preferences": [list(p) for p in ind.preferences],
        }
        for i, ind in sorted(instance.individuals.items())
    ]
    return {
        "schema_version": instance.schema_version,
        "horizontal_types": instance.forest.declarations(),
        "institutions": institutions,
        "individuals": individuals,
    }


def save_instance(path, instance, run=None):
    doc = instance_to_dict(instance)
    # validate_instance ignores "run"
    if run:
        doc["run"] = run
    return write_json(path, doc)


# ----------------------------------------------------------------------
# Outcomes
# ----------------------------------------------------------------------

@dataclass
class LoadedOutcome:
    matching: Matching
    seat_pools: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    log: dict = None
    fill_report: list = field(default_factory=list)


def outcome_to_dict(outcome, run=None, audits=None, with_log=False):
    rows = [[*x.to_list(), outcome.seat_pools.get(x, x.category)] for x in sorted(outcome.matching)]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "run": dict(run or {}),
        "matching": rows,
        "unmatched": sorted(i for i, x in outcome.statuses.items() if x is None),
        "fill_report": outcome.fill_report(),
    }
    if with_log and outcome.log is not None:
        doc["log"] = outcome.log.to_dict()
    if audits:
        doc["audits"] = [a.to_dict() for a in audits]
    return doc


def save_outcome(path, outcome, run=None, audits=None, with_log=False):
    return write_json(path, outcome_to_dict(outcome, run=run, audits=audits, with_log=with_log))


def load_outcome(path, instance=None):
    """
    Read an outcome file. With `instance`, ids are checked against it.
    Raises ParseError or ReservationError(BAD_SCHEMA / UNKNOWN_*).
    """
    doc = read_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("matching"), list):
        raise ReservationError(ErrorCode.BAD_SCHEMA, "outcome must hold a 'matching' list", str(path))
    contracts = set()
    pools = {}
    for n, row in enumerate(doc["matching"]):
        where = f"matching[{n}]"
        if not isinstance(row, list) or len(row) not in (3, 4) or not all(isinstance(v, str) for v in row):
            raise ReservationError(ErrorCode.BAD_SCHEMA, f"expected [individual, institution, category, pool], got {row!r}", where)
        x = Contract(*row[:3])
        if instance is not None:
            instance.individual(x.individual)
            instance.institution(x.institution)
        contracts.add(x)
        pools[x] = row[3] if len(row) == 4 else x.category
    return LoadedOutcome(
        matching=Matching(frozenset(contracts)),
        seat_pools=pools,
        run=doc.get("run") or {},
        log=doc.get("log"),
        fill_report=doc.get("fill_report") or [],
    )


# ----------------------------------------------------------------------
# Preference utilities
# ----------------------------------------------------------------------

def expand_rol(institutions, membership, disclose):
    """
    Expand an institutions-only list into (institution, category) pairs.
    A reserved-category member who discloses gets (s, o) then (s, r) per
    institution; everyone else gets (s, o) only.
    """
    out = []
    for s in institutions:
        out.append((s, OPEN))
        if disclose and membership != GENERAL:
            out.append((s, membership))
    return out
