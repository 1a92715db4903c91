"""Command-line pipeline driver.

Subcommands cover the whole workflow: simulate a labeled scenario, scan a
transfer stream for poisoning, cluster the findings into attack groups,
compute group economics, score predictions against planted truth, search
for lookalike addresses, benchmark scan throughput, and run the full
report pipeline in one shot.

Every output bundle carries a manifest.json recording the tool version,
the subcommand, its options, and content hashes of the input files, so a
bundle can be reproduced and verified later. Reruns with the same inputs
and options produce byte-identical bundles; nothing written here depends
on wall-clock time or filesystem layout. Diagnostics and progress go to
standard error, data to files or standard output.

Exit codes: 0 on success, 1 on usage or input errors, 2 when an internal
invariant breaks.
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import time
from decimal import Decimal, InvalidOperation
from pathlib import Path

from . import __version__
from .addrgen import SearchSpec, search
from .analytics import (
    build_competitions,
    group_economics,
    most_imitated_targets,
    similarity_distribution,
    success_ranks,
    win_loss_matrix,
)
from .clustering import (
    AttackGroup,
    AttackTransferSet,
    attack_ratio,
    build_transfer_sets,
    cluster,
    groups_to_csv,
)
from .core import (
    ChainConfig,
    ParseError,
    PoisonscanError,
    PriceTable,
    TokenRegistry,
    parse_address,
)
from .detector import (
    DetectionReport,
    birthday_filter,
    confirm_payoffs,
    detect_accidental,
    scan,
)
from .ingest import EventStore, iter_events, load_account_history
from .scenario import GroundTruth, ScenarioSpec, benign_stream, generate, score_labels

__all__ = ["main", "run", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

_PROGRESS_INTERVAL = 1.0


class _UsageError(Exception):
    """Raised instead of exiting so run() can map argparse errors to 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}error: {message}")


class _Progress:
    """Throttled rate reporter on standard error."""

    def __init__(self, label: str, unit: str = "events") -> None:
        self.label = label
        self.unit = unit
        self.count = 0
        self._started = time.monotonic()
        self._last = self._started

    def _maybe_emit(self) -> None:
        now = time.monotonic()
        if now - self._last < _PROGRESS_INTERVAL:
            return
        self._last = now
        elapsed = now - self._started
        rate = self.count / elapsed if elapsed > 0 else 0.0
        print(
            f"{self.label}: {self.count:,} {self.unit} ({rate:,.0f} {self.unit}/s)",
            file=sys.stderr,
        )

    def update(self, n: int = 1) -> None:
        self.count += n
        self._maybe_emit()

    def update_to(self, total: int) -> None:
        self.count = total
        self._maybe_emit()


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _tracked(events, progress: _Progress):
    for event in events:
        progress.update()
        yield event


def _decimal_arg(text: str) -> Decimal:
    try:
        return Decimal(text)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a decimal number: {text!r}") from None


def _ensure_outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(outdir: Path, subcommand: str, inputs: dict, options: dict, seed=None) -> None:
    manifest = {
        "tool": "poisonscan",
        "version": __version__,
        "schema": SCHEMA_VERSION,
        "subcommand": subcommand,
        "seed": seed,
        "inputs": {
            name: {"path": str(path), "sha256": _sha256_file(path)}
            for name, path in sorted(inputs.items())
            if path is not None
        },
        "options": options,
    }
    _write_json(outdir / "manifest.json", manifest)


def _read_lines(path) -> list[str]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line:
                out.append(line)
    return out


def _read_labels(path) -> dict[str, str]:
    """Address display labels from a two-column CSV with header address,label."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["address", "label"]:
            raise ParseError("expected header address,label", path=str(path), line=1)
        out = {}
        for number, row in enumerate(reader, 2):
            if len(row) != 2:
                raise ParseError(f"expected 2 columns, got {len(row)}", path=str(path), line=number)
            out[parse_address(row[0])] = row[1]
    return out


def _read_bytecode(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ParseError("expected a JSON object mapping address to code id", path=str(path))
    return {parse_address(addr): str(code) for addr, code in raw.items()}


# ---------------------------------------------------------------------------
# shared input loading


def _load_config(args) -> ChainConfig:
    config = ChainConfig.from_json_file(args.config)
    overrides = {}
    for name in ("window_blocks", "a_min", "b_min"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    tiny = getattr(args, "tiny_threshold_usd", None)
    if tiny is not None:
        overrides["tiny_threshold_usd"] = tiny
    if overrides:
        config = config.with_overrides(**overrides)
    return config


def _load_registry(path) -> TokenRegistry:
    if path is None:
        return TokenRegistry(())
    return TokenRegistry.from_jsonl(path)


def _load_prices(path, config: ChainConfig, registry: TokenRegistry) -> PriceTable:
    parity: tuple[str, ...] = ()
    if config.stablecoin_parity:
        parity = tuple(registry.stablecoins(config.chain_id))
        if config.stablecoins:
            parity += tuple(config.stablecoins)
    if path is None:
        return PriceTable({}, parity_assets=parity)
    return PriceTable.from_csv(path, parity_assets=parity)


def _scan_pipeline(args):
    """events file -> fully post-processed detection report."""
    config = _load_config(args)
    registry = _load_registry(args.registry)
    prices = _load_prices(args.prices, config, registry)
    events = list(iter_events(args.events))
    progress = _Progress("scan")
    report = scan(_tracked(events, progress), config, registry, prices)
    if getattr(args, "history", None):
        store = EventStore(iter_events(args.history))
        report = confirm_payoffs(report, store, registry=registry, prices=prices)
    report = detect_accidental(report, events)
    report = birthday_filter(report, config)
    return events, report


def _scan_options(args) -> dict:
    tiny = getattr(args, "tiny_threshold_usd", None)
    return {
        "window_blocks": args.window_blocks,
        "a_min": args.a_min,
        "b_min": args.b_min,
        "tiny_threshold_usd": None if tiny is None else str(tiny),
        "workers": args.workers,
    }


# ---------------------------------------------------------------------------
# clusters.json round trip


def _write_clusters(path: Path, sets, groups, bot_threshold: float) -> None:
    payload = {
        "schema": SCHEMA_VERSION,
        "bot_threshold": bot_threshold,
        "sets": [dataclasses.asdict(s) for s in sets],
        "groups": [dataclasses.asdict(g) for g in groups],
    }
    _write_json(path, payload)


def _read_clusters(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    sets = tuple(AttackTransferSet(**entry) for entry in raw["sets"])
    groups = []
    for entry in raw["groups"]:
        data = dict(entry)
        data["members"] = tuple(data["members"])
        groups.append(AttackGroup(**data))
    return sets, tuple(groups)


# ---------------------------------------------------------------------------
# analytics tables


def _write_economics_csv(path: Path, econ_rows) -> None:
    rows = [
        [
            number,
            row.group_id,
            row.n_success,
            str(row.revenue_usd),
            str(row.cost_usd),
            str(row.profit_usd),
            row.profit_sign,
            row.quarantined,
        ]
        for number, row in enumerate(econ_rows, 1)
    ]
    _write_csv(
        path,
        ["group", "group_id", "n_success", "revenue_usd", "cost_usd", "profit_usd", "profit_sign", "quarantined"],
        rows,
    )


def _write_win_loss_csv(path: Path, matrix) -> None:
    rows = [[a, b, repr(ratio)] for (a, b), ratio in sorted(matrix.items())]
    _write_csv(path, ["group_id", "other_group_id", "win_ratio"], rows)


def _write_similarity_csv(path: Path, distribution) -> None:
    rows = []
    for number, entry in enumerate(distribution, 1):
        for (a, b) in sorted(entry["cells"]):
            rows.append([number, entry["group_id"], a, b, entry["cells"][(a, b)]])
    _write_csv(path, ["group", "group_id", "a", "b", "count"], rows)


def _write_imitated_csv(path: Path, rows) -> None:
    table = [
        [row["intended"], row["label"] or "", row["lookalikes"], row["transfers"]]
        for row in rows
    ]
    _write_csv(path, ["intended", "label", "lookalikes", "transfers"], table)


def _ranks_payload(records) -> dict:
    hists = success_ranks(records)
    return {
        name: {str(key): hist[key] for key in sorted(hist)}
        for name, hist in sorted(hists.items())
    }


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args) -> int:
    spec = ScenarioSpec.from_json_file(args.spec)
    bundle = generate(spec)
    outdir = _ensure_outdir(args.out)
    bundle.write(outdir)
    _write_manifest(outdir, "simulate", inputs={"spec": args.spec}, options={}, seed=spec.seed)
    total = sum(len(chain) for chain in bundle.chains.values())
    _info(f"simulate: {total} events across {len(bundle.chains)} chain(s)")
    return 0


def _cmd_scan(args) -> int:
    events, report = _scan_pipeline(args)
    outdir = _ensure_outdir(args.out)
    report.write_json(outdir / "report.json")
    _write_manifest(
        outdir,
        "scan",
        inputs={
            "events": args.events,
            "config": args.config,
            "registry": args.registry,
            "prices": args.prices,
            "history": getattr(args, "history", None),
        },
        options=_scan_options(args),
    )
    counts = report.headline_counts()
    poisonings = sum(
        counts.get(label, 0)
        for label in ("tiny_poison", "zero_value_poison", "counterfeit_poison")
    )
    _info(
        f"scan: {len(events)} events, {poisonings} poisoning transfers, "
        f"{len(report.payoffs)} payoffs"
    )
    return 0


def _cmd_cluster(args) -> int:
    report = DetectionReport.read_json(args.report)
    sets = build_transfer_sets(report)
    history = load_account_history(args.accounts) if args.accounts else None
    ratios = attack_ratio(sets, history)
    verified = tuple(_read_lines(args.verified_contracts)) if args.verified_contracts else ()
    bytecode = _read_bytecode(args.bytecode) if args.bytecode else None
    groups = cluster(
        sets,
        args.bot_threshold,
        ratios=ratios,
        exclude_verified=args.exclude_verified,
        verified_contracts=verified,
        bytecode=bytecode,
    )
    outdir = _ensure_outdir(args.out)
    groups_to_csv(groups, outdir / "groups.csv")
    _write_clusters(outdir / "clusters.json", sets, groups, args.bot_threshold)
    _write_manifest(
        outdir,
        "cluster",
        inputs={
            "report": args.report,
            "accounts": args.accounts,
            "verified_contracts": args.verified_contracts,
            "bytecode": args.bytecode,
        },
        options={
            "bot_threshold": args.bot_threshold,
            "exclude_verified": args.exclude_verified,
        },
    )
    _info(f"cluster: {len(sets)} transfer sets -> {len(groups)} groups")
    return 0


def _cmd_econ(args) -> int:
    report = DetectionReport.read_json(args.report)
    sets, groups = _read_clusters(args.clusters)
    prices = PriceTable.from_csv(args.prices)
    econ_rows = group_economics(groups, sets, report, prices)
    records = build_competitions(report, sets, groups)
    matrix = win_loss_matrix(records)
    outdir = _ensure_outdir(args.out)
    _write_economics_csv(outdir / "economics.csv", econ_rows)
    _write_win_loss_csv(outdir / "win_loss.csv", matrix)
    _write_manifest(
        outdir,
        "econ",
        inputs={"report": args.report, "clusters": args.clusters, "prices": args.prices},
        options={},
    )
    profit = sum((row.profit_usd for row in econ_rows), Decimal(0))
    _info(f"econ: {len(econ_rows)} groups, net profit {profit} USD")
    return 0


def _cmd_score(args) -> int:
    report = DetectionReport.read_json(args.report)
    truth = GroundTruth.read_jsonl(args.truth)
    predicted_groups = None
    if args.clusters:
        _, groups = _read_clusters(args.clusters)
        predicted_groups = {
            member: group.group_id for group in groups for member in group.members
        }
    card = score_labels(report.labels, truth, report.chain_id, predicted_groups)
    payload = dataclasses.asdict(card)
    if args.out:
        _write_json(Path(args.out), payload)
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    _info(
        f"score: precision {card.precision:.4f}, recall {card.recall:.4f} "
        f"over {card.n_truth} truth rows"
    )
    return 0


def _cmd_gen(args) -> int:
    targets = _read_lines(args.targets)
    if not targets:
        raise ParseError("no target addresses", path=str(args.targets))
    if args.matches < 0:
        raise _UsageError("error: --matches must be >= 0")
    max_matches = None if args.matches == 0 else args.matches
    if max_matches is None and args.budget is None:
        raise _UsageError(
            "error: an unbounded search never stops; set --matches >= 1 or give a --budget"
        )
    try:
        spec = SearchSpec(
            targets=tuple(targets),
            a_min=args.a_min,
            b_min=args.b_min,
            max_matches=max_matches,
            max_trials=args.budget,
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    reporter = _Progress("gen", unit="keys")
    stats = search(
        spec,
        seed=args.seed,
        workers=args.workers,
        mode=args.mode,
        progress=lambda trials, found: reporter.update_to(trials),
    )
    payload = {
        "schema": SCHEMA_VERSION,
        "a_min": spec.a_min,
        "b_min": spec.b_min,
        "seed": stats.seed,
        "mode": stats.mode,
        "workers": stats.workers,
        "trials": stats.trials,
        "matches": [
            {
                "private_key": f"0x{m.private_key:064x}",
                "address": m.address,
                "target": m.target,
                "a": m.a,
                "b": m.b,
            }
            for m in stats.matches
        ],
    }
    if args.out:
        _write_json(Path(args.out), payload)
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    _info(
        f"gen: {stats.trials:,} keys in {stats.elapsed_seconds:.2f}s "
        f"({stats.aps:,.0f} keys/s), {len(stats.matches)} match(es)"
    )
    return 0


def _cmd_bench(args) -> int:
    events, registry, prices, config = benign_stream(args.n_events, seed=args.seed)
    runs = []
    for _ in range(args.repeat):
        started = time.perf_counter()
        scan(events, config, registry, prices)
        elapsed = time.perf_counter() - started
        runs.append(args.n_events / elapsed)
    payload = {
        "n_events": args.n_events,
        "repeat": args.repeat,
        "seed": args.seed,
        "runs": runs,
        "events_per_second": max(runs),
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    _info(f"bench: best {max(runs):,.0f} events/s over {args.repeat} run(s)")
    return 0


def _cmd_report(args) -> int:
    events, report = _scan_pipeline(args)
    sets = build_transfer_sets(report)
    history = load_account_history(args.accounts) if args.accounts else None
    ratios = attack_ratio(sets, history)
    groups = cluster(sets, args.bot_threshold, ratios=ratios)
    prices = PriceTable.from_csv(args.prices) if args.prices else PriceTable({})
    econ_rows = group_economics(groups, sets, report, prices)
    records = build_competitions(report, sets, groups)
    labels_map = _read_labels(args.labels) if args.labels else None

    outdir = _ensure_outdir(args.out)
    report.write_json(outdir / "report.json")
    groups_to_csv(groups, outdir / "groups.csv")
    _write_clusters(outdir / "clusters.json", sets, groups, args.bot_threshold)
    _write_economics_csv(outdir / "economics.csv", econ_rows)
    _write_win_loss_csv(outdir / "win_loss.csv", win_loss_matrix(records))
    _write_json(outdir / "success_ranks.json", _ranks_payload(records))
    _write_similarity_csv(
        outdir / "similarity_cells.csv", similarity_distribution(groups, sets, report)
    )
    _write_imitated_csv(
        outdir / "most_imitated.csv", most_imitated_targets(report, labels=labels_map)
    )
    summary = {
        "chain_id": report.chain_id,
        "events": len(events),
        "headline": report.headline_counts(),
        "groups": len(groups),
        "n_success": sum(row.n_success for row in econ_rows),
        "revenue_usd": str(sum((row.revenue_usd for row in econ_rows), Decimal(0))),
        "cost_usd": str(sum((row.cost_usd for row in econ_rows), Decimal(0))),
        "profit_usd": str(sum((row.profit_usd for row in econ_rows), Decimal(0))),
        "quarantined": sum(row.quarantined for row in econ_rows),
    }
    _write_json(outdir / "summary.json", summary)
    options = _scan_options(args)
    options["bot_threshold"] = args.bot_threshold
    _write_manifest(
        outdir,
        "report",
        inputs={
            "events": args.events,
            "config": args.config,
            "registry": args.registry,
            "prices": args.prices,
            "accounts": args.accounts,
            "labels": args.labels,
            "history": getattr(args, "history", None),
        },
        options=options,
    )
    _info(f"report: {len(groups)} groups, {summary['n_success']} successful payoffs")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_scan_arguments(sub, history: bool = True) -> None:
    sub.add_argument("--events", required=True, help="transfer events JSONL")
    sub.add_argument("--config", required=True, help="chain config JSON")
    sub.add_argument("--registry", help="token registry JSONL")
    sub.add_argument("--prices", help="daily price CSV")
    if history:
        sub.add_argument("--history", help="full-history events JSONL for payoff confirmation")
    sub.add_argument("--window-blocks", type=int, help="override candidate window length")
    sub.add_argument("--a-min", type=int, help="override prefix match bound")
    sub.add_argument("--b-min", type=int, help="override suffix match bound")
    sub.add_argument(
        "--tiny-threshold-usd", type=_decimal_arg, help="override tiny-transfer ceiling"
    )
    sub.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="worker processes (default: logical cores)",
    )


def _build_parser() -> _Parser:
    parser = _Parser(prog="poisonscan", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--version", action="store_true", help="print tool and schema versions and exit"
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    sub = commands.add_parser("simulate", help="generate a labeled synthetic scenario")
    sub.add_argument("--spec", required=True, help="scenario spec JSON")
    sub.add_argument("--out", required=True, help="output directory")
    sub.set_defaults(func=_cmd_simulate)

    sub = commands.add_parser("scan", help="detect poisoning in a transfer stream")
    _add_scan_arguments(sub)
    sub.add_argument("--out", required=True, help="output directory")
    sub.set_defaults(func=_cmd_scan)

    sub = commands.add_parser("cluster", help="group detected attacks by shared infrastructure")
    sub.add_argument("--report", required=True, help="report.json from scan")
    sub.add_argument("--accounts", help="account history CSV for bot filtering")
    sub.add_argument("--bot-threshold", type=float, default=0.5, help="minimum attack ratio")
    sub.add_argument("--exclude-verified", action="store_true", help="drop sets touching verified contracts")
    sub.add_argument("--verified-contracts", help="file with one verified address per line")
    sub.add_argument("--bytecode", help="JSON map from contract address to bytecode id")
    sub.add_argument("--out", required=True, help="output directory")
    sub.set_defaults(func=_cmd_cluster)

    sub = commands.add_parser("econ", help="per-group revenue, cost, and competition")
    sub.add_argument("--report", required=True, help="report.json from scan")
    sub.add_argument("--clusters", required=True, help="clusters.json from cluster")
    sub.add_argument("--prices", required=True, help="daily price CSV")
    sub.add_argument("--out", required=True, help="output directory")
    sub.set_defaults(func=_cmd_econ)

    sub = commands.add_parser("score", help="compare a report against planted ground truth")
    sub.add_argument("--report", required=True, help="report.json from scan")
    sub.add_argument("--truth", required=True, help="ground truth JSONL from simulate")
    sub.add_argument("--clusters", help="clusters.json for the pairwise Rand index")
    sub.add_argument("--out", help="metrics JSON file (default: stdout)")
    sub.set_defaults(func=_cmd_score)

    sub = commands.add_parser("gen", help="search for lookalike addresses")
    sub.add_argument("--targets", required=True, help="file with one target address per line")
    sub.add_argument("--a-min", type=int, default=3, help="required prefix digits")
    sub.add_argument("--b-min", type=int, default=4, help="required suffix digits")
    sub.add_argument("--matches", type=int, default=1, help="stop after this many matches (0: no limit)")
    sub.add_argument("--budget", type=int, help="stop after this many candidate keys")
    sub.add_argument("--seed", type=int, default=0, help="deterministic stream seed")
    sub.add_argument("--mode", choices=("optimized", "naive"), default="optimized")
    sub.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="worker processes (default: logical cores)",
    )
    sub.add_argument("--out", help="stats JSON file (default: stdout)")
    sub.set_defaults(func=_cmd_gen)

    sub = commands.add_parser("bench", help="measure scan throughput on a synthetic stream")
    sub.add_argument("--n-events", type=int, default=200_000, help="stream length")
    sub.add_argument("--repeat", type=int, default=3, help="timing runs")
    sub.add_argument("--seed", type=int, default=0, help="stream seed")
    sub.set_defaults(func=_cmd_bench)

    sub = commands.add_parser("report", help="full pipeline: scan, cluster, economics, tables")
    _add_scan_arguments(sub)
    sub.add_argument("--accounts", help="account history CSV for bot filtering")
    sub.add_argument("--bot-threshold", type=float, default=0.5, help="minimum attack ratio")
    sub.add_argument("--labels", help="address display labels CSV")
    sub.add_argument("--out", required=True, help="output directory")
    sub.set_defaults(func=_cmd_report)

    return parser


def run(argv=None) -> int:
    """Parse arguments and execute one subcommand, mapping failures to
    the documented exit codes instead of raising."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.version:
            print(f"poisonscan {__version__} (schema {SCHEMA_VERSION})")
            return 0
        if args.command is None:
            raise _UsageError(f"{parser.format_usage()}error: a subcommand is required")
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (PoisonscanError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
