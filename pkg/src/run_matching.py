# src/run_matching.py
#
# Command-line front end.
#
#   validate <instance>                         load + report warnings
#   choose   <instance> --institution s         one institution's aggregate
#                                               choice over every contract
#                                               ranked with s (with trace)
#   match    <instance> --out outcome.json      cumulative offer mechanism
#   verify   <instance> <outcome>               every oracle on a matching
#   probe    <instance>                         fuzz + strategy-proofness +
#                                               order invariance
#   gen      --seed K --out instance.json       seeded random instance
#
# Exit codes: 0 success / all checks pass, 1 check failures (counterexamples
# written), 2 usage, IO or validation errors.
#
# CLI usage example:
#   python -m src.run_matching match tests/data/two_obc.json \
#       --log --out outputs/two_obc.json

import argparse
import logging
import sys

import pandas as pd

from src.aggregate import AggregateConfig, institution_choice
from src.cop import PLAIN, TRANSFER, run_cop
from src.errors import ErrorCode, OracleError, ReservationError
from src.generate import GeneratorParams, generate_instance
from src.hierarchical_choice import choose_hierarchical
from src.io import (
    DEFAULT_CONFIG,
    load_config,
    load_instance,
    load_outcome,
    save_instance,
    save_outcome,
    write_json,
)
from src.oracles import AuditReport
from src.probes import (
    ProblemParams,
    fuzz_aggregate_properties,
    fuzz_choice_properties,
    probe_order_invariance,
    probe_strategyproofness,
    verify_outcome,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_ERROR = 2


def _variant(args):
    return TRANSFER if getattr(args, "transfer", False) else PLAIN


def _run_info(args, argv, cfg, **extra):
    info = {
        "command": args.command,
        "argv": list(argv),
        "seed": cfg["seed"],
        "tiebreak": cfg["tiebreak"],
        "dereserve_source": cfg["dereserve_source"],
    }
    info.update(extra)
    return info


def _print_table(rows, title):
    if not rows:
        print(f"{title}: (empty)")
        return
    df = pd.DataFrame(rows).fillna(0)
    type_cols = [c for c in df.columns if c.startswith("type:")]
    if type_cols:
        df[type_cols] = df[type_cols].astype(int)
    print(f"{title}:")
    print(df.to_string(index=False))


def _print_reports(reports):
    failed = 0
    for r in reports:
        status = "ok" if r.passed else f"{len(r.counterexamples)} counterexample(s)"
        print(f"[AUDIT] {r.name:<22} checked={r.checked:<6} {status}")
        failed += not r.passed
    return failed


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

def cmd_validate(args, cfg, argv):
    instance = load_instance(args.instance, tiebreak=cfg["tiebreak"])
    print(
        f"[VALIDATE] {args.instance}: {len(instance.institutions)} institutions, "
        f"{len(instance.individuals)} individuals, {len(instance.forest)} horizontal types"
    )
    for w in instance.warnings:
        print(f"[VALIDATE] warning {w}")
    return EXIT_OK


def cmd_choose(args, cfg, argv):
    instance = load_instance(args.instance, tiebreak=cfg["tiebreak"])
    s = args.institution
    instance.institution(s)
    contracts = [
        x for ind in instance.individuals.values() for x in ind.contracts() if x.institution == s
    ]
    config = AggregateConfig.for_institution(
        instance, s, transfer=args.transfer, dereserve_source=cfg["dereserve_source"]
    )
    outcome = institution_choice(instance, contracts, config)
    print(f"[CHOOSE] {s}: {len(outcome.chosen)} of {len(contracts)} contracts chosen")
    for x in sorted(outcome.chosen):
        print(f"  {x}  seat pool {outcome.seat_pools[x]}")
    _print_table(outcome.fill_report(), "[CHOOSE] fill report")
    if args.out:
        doc = outcome.to_dict(with_trace=True)
        doc["run"] = _run_info(args, argv, cfg, variant=_variant(args))
        write_json(args.out, doc)
        print(f"[CHOOSE] Wrote choice trace to: {args.out}")
    return EXIT_OK


def cmd_match(args, cfg, argv):
    instance = load_instance(args.instance, tiebreak=cfg["tiebreak"])
    order = args.order or cfg["proposal_order"]
    variant = _variant(args)
    outcome = run_cop(
        instance,
        variant,
        proposal_policy=order,
        dereserve_source=cfg["dereserve_source"],
        record_log=args.log,
    )
    run = _run_info(args, argv, cfg, variant=variant, order=order)
    print(f"[MATCH] {variant}/{order}: {outcome.matched_count()} of {len(outcome.statuses)} individuals matched")
    _print_table(outcome.fill_report(), "[MATCH] fill report")
    save_outcome(args.out, outcome, run=run, with_log=args.log)
    print(f"[MATCH] Wrote outcome to: {args.out}")
    return EXIT_OK


def cmd_verify(args, cfg, argv):
    instance = load_instance(args.instance, tiebreak=cfg["tiebreak"])
    loaded = load_outcome(args.outcome, instance)
    variant = TRANSFER if args.transfer else loaded.run.get("variant", PLAIN)
    dereserve_source = args.dereserve_source or loaded.run.get("dereserve_source", cfg["dereserve_source"])
    audit = cfg["audit"]
    reports = verify_outcome(
        instance,
        loaded.matching,
        loaded.seat_pools,
        variant=variant,
        dereserve_source=dereserve_source,
        log=loaded.log,
        exhaustive=True if args.exhaustive else None,
        max_block_size=audit["max_block_size"],
        exhaustive_individuals=audit["exhaustive_individuals"],
    )
    failed = _print_reports(reports)
    if args.out:
        write_json(
            args.out,
            {
                "run": _run_info(args, argv, cfg, variant=variant),
                "audits": [r.to_dict() for r in reports],
            },
        )
        print(f"[VERIFY] Wrote audit reports to: {args.out}")
    elif failed:
        for r in reports:
            for ce in r.counterexamples[:5]:
                print(f"  {r.name}: {ce}")
    return EXIT_CHECKS_FAILED if failed else EXIT_OK


def cmd_probe(args, cfg, argv):
    instance = load_instance(args.instance, tiebreak=cfg["tiebreak"])
    fuzz = cfg["fuzz"]
    audit = cfg["audit"]
    trials = args.trials if args.trials is not None else fuzz["trials"]
    seed = args.seed if args.seed is not None else cfg["seed"]
    variant = _variant(args)
    params = ProblemParams.from_dict(fuzz)

    reports = [
        fuzz_choice_properties(
            choose_hierarchical, params, trials=trials, seed=seed, n_jobs=fuzz["n_jobs"], progress=args.progress
        ),
        fuzz_aggregate_properties(
            trials=trials,
            seed=seed,
            variant=variant,
            dereserve_source=cfg["dereserve_source"],
            progress=args.progress,
        ),
    ]
    try:
        reports.append(
            probe_strategyproofness(
                instance,
                variant=variant,
                dereserve_source=cfg["dereserve_source"],
                enumeration_cap=audit["enumeration_cap"],
                progress=args.progress,
            )
        )
    except OracleError as e:
        if e.code != ErrorCode.ENUMERATION_CAP_EXCEEDED:
            raise
        print(f"[PROBE] strategy-proofness skipped: {e}")
        reports.append(AuditReport("strategy-proofness", notes={"skipped": str(e)}))
    reports.append(
        probe_order_invariance(
            instance,
            variant,
            orders=audit["random_orders"],
            seed=seed,
            dereserve_source=cfg["dereserve_source"],
        )
    )
    failed = _print_reports(reports)
    if args.out:
        write_json(
            args.out,
            {
                "run": _run_info(args, argv, cfg, variant=variant, trials=trials, probe_seed=seed),
                "audits": [r.to_dict() for r in reports],
            },
        )
        print(f"[PROBE] Wrote audit reports to: {args.out}")
    return EXIT_CHECKS_FAILED if failed else EXIT_OK


def cmd_gen(args, cfg, argv):
    overrides = dict(cfg["generator"])
    for name in ("individuals", "institutions", "types", "max_quota"):
        v = getattr(args, name)
        if v is not None:
            overrides[name] = v
    if args.forest_shape is not None:
        overrides["forest_shape"] = args.forest_shape
    params = GeneratorParams.from_dict(overrides)
    seed = args.seed if args.seed is not None else cfg["seed"]
    instance = generate_instance(seed, params)
    save_instance(args.out, instance, run=_run_info(args, argv, cfg, seed=seed, params=params.to_dict()))
    print(
        f"[GEN] seed={seed}: {len(instance.individuals)} individuals, "
        f"{len(instance.institutions)} institutions -> {args.out}"
    )
    print(f"[GEN] params: {params.to_dict()}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "choose": cmd_choose,
    "match": cmd_match,
    "verify": cmd_verify,
    "probe": cmd_probe,
    "gen": cmd_gen,
}


# ----------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------

def _parse_args(argv):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_CONFIG, help=f"YAML config path (default: {DEFAULT_CONFIG}).")
    common.add_argument("--tiebreak", choices=["id"], default=None, help="Break score ties by ascending id.")
    common.add_argument(
        "--dereserve-source",
        choices=["any", "open"],
        default=None,
        help="Contracts category D may bind (default from config).",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="DEBUG logging.")

    p = argparse.ArgumentParser(
        prog="python -m src.run_matching",
        description="Vertical and hierarchical horizontal reservations: choice, matching and audits.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", parents=[common], help="Validate an instance file.")
    sp.add_argument("instance")

    sp = sub.add_parser("choose", parents=[common], help="Single-institution aggregate choice with trace.")
    sp.add_argument("instance")
    sp.add_argument("--institution", required=True)
    sp.add_argument("--transfer", action="store_true", help="Re-offer vacant OBC seats through category D.")
    sp.add_argument("--out", default=None, help="Optional JSON path for the choice and trace.")

    sp = sub.add_parser("match", parents=[common], help="Run the cumulative offer mechanism.")
    sp.add_argument("instance")
    sp.add_argument("--transfer", action="store_true")
    sp.add_argument("--order", default=None, help="'id' or 'random:<seed>' (default from config).")
    sp.add_argument("--log", action="store_true", help="Store the full offer-process log.")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("verify", parents=[common], help="Run every oracle on an outcome file.")
    sp.add_argument("instance")
    sp.add_argument("outcome")
    sp.add_argument("--transfer", action="store_true", help="Audit against the transfer rules.")
    sp.add_argument("--exhaustive", action="store_true", help="Enumerate blocking sets up to the max block size.")
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("probe", parents=[common], help="Fuzz the rules and probe the mechanism on an instance.")
    sp.add_argument("instance")
    sp.add_argument("--transfer", action="store_true")
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--progress", action="store_true")
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("gen", parents=[common], help="Write a seeded random instance.")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--individuals", type=int, default=None)
    sp.add_argument("--institutions", type=int, default=None)
    sp.add_argument("--types", type=int, default=None)
    sp.add_argument("--max-quota", dest="max_quota", type=int, default=None)
    sp.add_argument("--forest-shape", dest="forest_shape", choices=["chain", "flat", "random"], default=None)

    return p.parse_args(argv)


def cli_dispatch(argv=None):
    """Parse `argv`, run one subcommand, and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_ERROR

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        if args.tiebreak is not None:
            cfg["tiebreak"] = args.tiebreak
        if args.dereserve_source is not None:
            cfg["dereserve_source"] = args.dereserve_source
        return COMMANDS[args.command](args, cfg, argv)
    except ReservationError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
