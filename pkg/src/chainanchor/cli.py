"""Operator/investigator command line.

Subcommands, one verb per responsibility:

* ``run``    - simulate a full horizon and populate a store (chains saved
  alongside for later verification);
* ``sync``   - re-run the daily sync for one day against a saved store
  (idempotent for already-anchored days);
* ``verify`` - investigator check of one event; exit 0 intact, 2 tampered,
  3 incomplete, 4 unknown event;
* ``tamper`` - mutate a stored row (test hook);
* ``attack`` - run a threat scenario script;
* ``cost``   - deployment cost comparison;
* ``export`` - dump one chain's saved state as plain JSON.

Usage errors (unknown flags, bad values) exit with code 64.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import os
import sys
from pathlib import Path

from .attacks import ScenarioError, ThreatScenario, run_scenario
from .chainsim import ChainError
from .costmodel import (
    CostModelError,
    CostScenario,
    UnitCostTable,
    cost_report,
    default_scenario,
    format_report_table,
    report_json_obj,
)
from .datacenter import NotFoundError, Store, StoreError, daily_sync
from .edge import SignificancePolicy
from .simulation import (
    DEFAULT_ORIGIN,
    RunConfig,
    World,
    date_to_day,
    load_chains,
)
from .verifier import VERDICT_INTACT, VERDICT_TAMPERED, full_verify

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_TAMPERED = 2
EXIT_INCOMPLETE = 3
EXIT_NOT_FOUND = 4
EXIT_USAGE = 64

STORE_ENV_VAR = "CHAINANCHOR_STORE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _store_default() -> str:
    return os.environ.get(STORE_ENV_VAR, "store")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chainanchor", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="simulate a full horizon into a store")
    p_run.add_argument("--seed", type=int, default=42)
    p_run.add_argument("--boats", type=int, default=10)
    p_run.add_argument("--events-per-day", type=int, default=10, dest="events_per_day")
    p_run.add_argument("--days", type=int, default=3)
    p_run.add_argument("--store", default=None, help=f"store directory (or ${STORE_ENV_VAR})")
    p_run.add_argument("--policy", default=None, help="significance policy JSON file")
    p_run.add_argument("--origin", default=None, help="logical clock origin, ISO-8601 UTC")
    p_run.add_argument("--json", action="store_true", help="emit day reports as JSON")

    p_sync = sub.add_parser("sync", help="run the daily sync for one day")
    p_sync.add_argument("--store", default=None)
    p_sync.add_argument("--day", required=True, help="UTC date (ISO) or day index")
    p_sync.add_argument("--json", action="store_true")

    p_verify = sub.add_parser("verify", help="verify one event end to end")
    p_verify.add_argument("--store", default=None)
    p_verify.add_argument("event_id")
    p_verify.add_argument("--json", action="store_true")

    p_tamper = sub.add_parser("tamper", help="mutate a stored row (test hook)")
    p_tamper.add_argument("--store", default=None)
    p_tamper.add_argument("event_id")
    p_tamper.add_argument("--field", required=True, help="payload | digest | path | root | none")

    p_attack = sub.add_parser("attack", help="run a threat scenario")
    p_attack.add_argument("scenario", help="scenario JSON file, or a threat id (T1..T4, null)")
    p_attack.add_argument("--seed", type=int, default=42)
    p_attack.add_argument("--store", default=None, help="scratch store directory")
    p_attack.add_argument("--json", action="store_true")

    p_cost = sub.add_parser("cost", help="deployment cost comparison")
    p_cost.add_argument("--scenario", default=None, help="scenario JSON file")
    p_cost.add_argument("--boats", type=int, default=None)
    p_cost.add_argument("--events-per-day", type=int, default=None, dest="events_per_day")
    p_cost.add_argument("--days", type=int, default=None)
    p_cost.add_argument("--costs", default=None, help="unit-cost table JSON file")
    p_cost.add_argument("--json", action="store_true")

    p_export = sub.add_parser("export", help="dump one chain's saved state as JSON")
    p_export.add_argument("--store", default=None)
    p_export.add_argument("--chain", required=True)
    p_export.add_argument("--out", default="-", help="output file, '-' for stdout")

    return parser


def _resolve_store(value) -> str:
    return value if value else _store_default()


def cmd_run(args) -> int:
    policy = SignificancePolicy.load(args.policy) if args.policy else None
    origin = (
        dt.datetime.fromisoformat(args.origin.replace("Z", "+00:00"))
        if args.origin
        else DEFAULT_ORIGIN
    )
    store_dir = _resolve_store(args.store)
    try:
        config = RunConfig(
            seed=args.seed,
            boats=args.boats,
            events_per_boat_per_day=args.events_per_day,
            days=args.days,
            store_dir=store_dir,
            policy=policy,
            origin=origin,
        )
    except ChainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        world = World(config)
    except OSError as exc:
        print(f"error: cannot open store {store_dir}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    reports = world.run()
    world.save_chains()
    for report in reports:
        if args.json:
            print(json.dumps(report, separators=(",", ":")))
        else:
            chains = ", ".join(
                f"{cid}: {c['leaf_count']} leaves"
                + (f", {len(c['missing'])} missing" if c["missing"] else "")
                for cid, c in report["chains"].items()
            )
            print(f"{report['date']}  {chains}")
    if not args.json:
        print(f"store written to {store_dir} ({len(world.store.list_rows())} rows)")
    return EXIT_OK


def _parse_day(value: str, origin_iso: str | None) -> int:
    try:
        return int(value)
    except ValueError:
        origin = (
            dt.datetime.fromisoformat(origin_iso) if origin_iso else DEFAULT_ORIGIN
        )
        return date_to_day(value, origin)


def cmd_sync(args) -> int:
    store_dir = _resolve_store(args.store)
    store = Store(store_dir)
    first_level, second_level, anchor_wallet = load_chains(store_dir)
    day = _parse_day(args.day, store.read_meta().get("origin"))
    report = daily_sync(store, day, first_level, second_level, anchor_wallet)
    if args.json:
        print(json.dumps(report, separators=(",", ":")))
    else:
        for cid, c in report["chains"].items():
            print(
                f"day {day} {cid}: {c['leaf_count']} leaves, root={c['root']}, "
                f"missing={len(c['missing'])}, unmatched={len(c['unmatched'])}"
            )
    return EXIT_OK


def cmd_verify(args) -> int:
    store_dir = _resolve_store(args.store)
    store = Store(store_dir)
    first_level, second_level, _ = load_chains(store_dir)
    try:
        report = full_verify(store, args.event_id, first_level, second_level)
    except NotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    if args.json:
        print(json.dumps(report.to_obj(), separators=(",", ":")))
    else:
        print(f"event {report.event_id}: {report.verdict.upper()}")
        for cid, res in report.first_level.items():
            print(
                f"  {cid:10s} found={res['found']} digest_match={res['digest_match']} "
                f"stored_digest_match={res['stored_digest_match']}"
            )
        for cid, res in report.anchors.items():
            print(
                f"  {cid:10s} path_valid={res['path_valid']} "
                f"root_on_second_level={res['root_on_second_level']}"
            )
        for finding in report.evidence:
            print(f"  ! {finding}")
    if report.verdict == VERDICT_INTACT:
        return EXIT_OK
    return EXIT_TAMPERED if report.verdict == VERDICT_TAMPERED else EXIT_INCOMPLETE


def cmd_tamper(args) -> int:
    store = Store(_resolve_store(args.store))
    try:
        result = store.tamper_row(args.event_id, args.field)
    except NotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except StoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(json.dumps(result, separators=(",", ":")))
    return EXIT_OK


def cmd_attack(args) -> int:
    try:
        if Path(args.scenario).exists():
            scenario = ThreatScenario.load(args.scenario)
        else:
            scenario = ThreatScenario(id=args.scenario, seed=args.seed)
    except (ScenarioError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    store_dir = args.store or os.path.join(
        _store_default(), f"attack-{scenario.id}-{scenario.seed}"
    )
    try:
        result = run_scenario(scenario, store_dir)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        print(json.dumps(result.to_obj(), separators=(",", ":")))
    else:
        print(
            f"{result.threat_id}: detection={result.detection} mitigation={result.mitigation}"
        )
    ok = result.detection or result.mitigation or result.threat_id == "null"
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_cost(args) -> int:
    try:
        if args.scenario:
            with open(args.scenario, encoding="utf-8") as fh:
                scenario = CostScenario.from_obj(json.load(fh))
        elif args.boats or args.events_per_day or args.days:
            scenario = CostScenario(
                boats=args.boats or 1000,
                events_per_boat_per_day=args.events_per_day or 10,
                days=args.days or 365,
            )
        else:
            scenario = default_scenario()
        if args.costs:
            with open(args.costs, encoding="utf-8") as fh:
                costs = UnitCostTable.from_obj(json.load(fh))
        else:
            costs = UnitCostTable()
        report = cost_report(scenario, costs)
    except CostModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        print(json.dumps(report_json_obj(report), separators=(",", ":")))
    else:
        print(format_report_table(report))
    return EXIT_OK


def cmd_export(args) -> int:
    store_dir = _resolve_store(args.store)
    path = Path(store_dir) / "chains" / f"{args.chain}.json.gz"
    if not path.exists():
        print(f"error: no saved state for chain {args.chain!r} in {store_dir}", file=sys.stderr)
        return EXIT_NOT_FOUND
    from .chainsim import Chain

    state = Chain.load(path).export_state()
    text = json.dumps(state, separators=(",", ":"))
    if args.out == "-":
        print(text)
    else:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "sync": cmd_sync,
    "verify": cmd_verify,
    "tamper": cmd_tamper,
    "attack": cmd_attack,
    "cost": cmd_cost,
    "export": cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (StoreError, ChainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
