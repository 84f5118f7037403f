"""Command-line front end.

Exit codes: 0 success, 1 data errors, 2 I/O or usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from nftledger import market_stats, preprocess, rarity, tradegraph
from nftledger.errors import ManifestError, NftLedgerError, SchemaError
from nftledger.model import parse_manifest, parse_traits, parse_transactions
from nftledger.preprocess import Flag, SwapFilterConfig
from nftledger.tradegraph import Scope, WashConfig

log = logging.getLogger("nftledger")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "NFTLEDGER_THREADS"

DEFAULTS = {
    "transactions": None,
    "traits": None,
    "manifest": None,
    "out": "out",
    "price_field": "usd",
    "drop_lateral_swaps": True,
    "swap_price": 0.005,
    "swap_tolerance": 1e-9,
    "pair_threshold": 3,
    "max_circuit_len": 8,
    "no_circuit_rule": False,
    "scope": "per_token",
    "window_days": 365,
    "format": "csv",
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    transactions: Path | None
    traits: Path | None
    manifest: Path | None
    out: Path
    price_field: str
    swap: SwapFilterConfig
    wash: WashConfig
    window_days: int
    format: str
    drop_lateral_swaps: bool = True
    threads: int = 1
    written: list[Path] = field(default_factory=list)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the optional JSON config file and explicit flags (flags win)."""
    values = dict(DEFAULTS)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(doc)
    for key in DEFAULTS:
        given = getattr(args, key, None)
        if given is not None:
            values[key] = given
    if values["price_field"] not in ("native", "usd"):
        raise UsageError("price_field must be native or usd")
    if values["format"] not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    max_len = values["max_circuit_len"]
    try:
        swap = SwapFilterConfig(float(values["swap_price"]), float(values["swap_tolerance"]))
        wash = WashConfig(
            pair_repetition_threshold=int(values["pair_threshold"]),
            enable_circuit_rule=not values["no_circuit_rule"],
            max_circuit_length=None if max_len in (None, 0) else int(max_len),
            scope=Scope(values["scope"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    path = lambda v: Path(v) if v else None  # noqa: E731
    return RunConfig(
        transactions=path(values["transactions"]),
        traits=path(values["traits"]),
        manifest=path(values["manifest"]),
        out=Path(values["out"]),
        price_field=values["price_field"],
        swap=swap,
        wash=wash,
        window_days=int(values["window_days"]),
        format=values["format"],
        drop_lateral_swaps=bool(values["drop_lateral_swaps"]),
        threads=thread_count(),
    )


def _round(obj):
    if isinstance(obj, float):
        return round(obj, 6)
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _json_bytes(doc) -> bytes:
    return (json.dumps(_round(doc), indent=2, sort_keys=True) + "\n").encode("utf-8")


def _csv_as_json(data: bytes) -> bytes:
    rows = list(csv.DictReader(io.StringIO(data.decode("utf-8"), newline="")))
    return (json.dumps(rows, indent=2) + "\n").encode("utf-8")


def _write(cfg: RunConfig, name: str, data: bytes, tabular: bool = False) -> None:
    if tabular and cfg.format == "json":
        name = name.rsplit(".", 1)[0] + ".json"
        data = _csv_as_json(data)
    cfg.out.mkdir(parents=True, exist_ok=True)
    target = cfg.out / name
    target.write_bytes(data)
    cfg.written.append(target)


def _require(path: Path | None, flag: str) -> Path:
    if path is None:
        raise UsageError(f"{flag} is required")
    if not path.is_file():
        raise FileNotFoundError(f"{flag}: no such file {path}")
    return path


def _load(cfg: RunConfig, need_traits: bool = False):
    manifest = parse_manifest(_require(cfg.manifest, "--manifest").read_bytes())
    records, report = parse_transactions(_require(cfg.transactions, "--transactions").read_bytes(), manifest)
    if report.error_entries:
        log.warning("%d transaction rows rejected; run `validate` for details", len(report.error_entries))
    traits = None
    if need_traits:
        traits = parse_traits(_require(cfg.traits, "--traits").read_bytes(), manifest)
    return manifest, records, traits


def _analysis_records(cfg: RunConfig, manifest, records):
    if not cfg.drop_lateral_swaps:
        return records
    return preprocess.drop_lateral_swaps(records, manifest.chain, cfg.swap)


def cmd_validate(cfg: RunConfig) -> int:
    manifest = parse_manifest(_require(cfg.manifest, "--manifest").read_bytes())
    _, report = parse_transactions(_require(cfg.transactions, "--transactions").read_bytes(), manifest)
    doc = {"manifest": manifest.to_dict(), "transactions": report.to_dict()}
    if cfg.traits is not None:
        trait_sets = parse_traits(_require(cfg.traits, "--traits").read_bytes(), manifest)
        doc["traits"] = {"token_count": len(trait_sets)}
    _write(cfg, "validation.json", _json_bytes(doc))
    for line, reason in report.error_entries:
        print(f"line {line}: {reason}", file=sys.stderr)
    return EXIT_OK if report.accepted else EXIT_DATA


def cmd_swaps(cfg: RunConfig) -> int:
    manifest, records, _ = _load(cfg)
    flags = preprocess.flag_lateral_swaps(records, cfg.swap, manifest.chain)
    _write(cfg, "swap_flags.csv", preprocess.dump_flags(flags), tabular=True)
    n = sum(f.flag is Flag.LATERAL_SWAP for f in flags)
    print(f"{n} of {len(flags)} transactions flagged {Flag.LATERAL_SWAP.value}")
    return EXIT_OK


def _daily(cfg: RunConfig, manifest, records):
    return market_stats.daily_aggregate(_analysis_records(cfg, manifest, records), cfg.price_field)


def cmd_summarize(cfg: RunConfig) -> int:
    manifest, records, _ = _load(cfg)
    series = _daily(cfg, manifest, records)
    summary = market_stats.summarize(series)
    _write(cfg, "daily_series.csv", market_stats.dump_series(series), tabular=True)
    _write(cfg, "summary.json", _json_bytes(summary.to_dict()))
    return EXIT_OK


def _volatility(cfg: RunConfig, series):
    returns = market_stats.daily_log_returns(series)
    return returns, market_stats.realized_volatility(returns, cfg.window_days)


def cmd_volatility(cfg: RunConfig) -> int:
    manifest, records, _ = _load(cfg)
    returns, vol = _volatility(cfg, _daily(cfg, manifest, records))
    _write(cfg, "returns.csv", market_stats.dump_returns(returns), tabular=True)
    _write(cfg, "volatility.json", _json_bytes(vol.to_dict()))
    print(f"realized volatility {vol.percent:.2f}% over {vol.n_returns} returns")
    return EXIT_OK


def _rarity(cfg: RunConfig, manifest, records, traits):
    rows, regression, table = rarity.rarity_report(
        traits, manifest, _analysis_records(cfg, manifest, records), cfg.price_field
    )
    for w in table.warnings:
        log.warning(w)
    _write(cfg, "rarity.csv", rarity.dump_rarity_rows(rows), tabular=True)
    _write(cfg, "regression.json", _json_bytes(regression.to_dict() if regression else None))


def cmd_rarity(cfg: RunConfig) -> int:
    manifest, records, traits = _load(cfg, need_traits=True)
    _rarity(cfg, manifest, records, traits)
    return EXIT_OK


def _wash(cfg: RunConfig, records):
    report = tradegraph.flag_wash_suspects(records, cfg.wash, workers=cfg.threads)
    _write(cfg, "wash_report.csv", tradegraph.dump_wash_report(report), tabular=True)
    return report


def cmd_wash_scan(cfg: RunConfig) -> int:
    _, records, _ = _load(cfg)
    report = _wash(cfg, records)
    _write(cfg, "wash_flags.csv", preprocess.dump_flags(report.flags), tabular=True)
    _write(cfg, "circuits.json", tradegraph.dump_circuits(report))
    print(f"{len(report.suspects())} of {len(report.tokens)} tokens suspect")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    manifest, records, traits = _load(cfg, need_traits=True)
    series = _daily(cfg, manifest, records)
    _write(cfg, "daily_series.csv", market_stats.dump_series(series), tabular=True)
    returns, vol = _volatility(cfg, series)
    _write(cfg, "returns.csv", market_stats.dump_returns(returns), tabular=True)
    _write(cfg, "volatility.json", _json_bytes(vol.to_dict()))
    _rarity(cfg, manifest, records, traits)
    # wash screening runs on all transactions: swaps are transfers too
    _wash(cfg, records)
    prices = [r.price(cfg.price_field) for r in _analysis_records(cfg, manifest, records)]
    prices = [p for p in prices if p > 0]
    benford = tradegraph.benford_to_dict(tradegraph.benford_test(prices)) if prices else {"n": 0, "chi_square": None}
    _write(cfg, "benford.json", _json_bytes(benford))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "summarize": cmd_summarize,
    "rarity": cmd_rarity,
    "wash-scan": cmd_wash_scan,
    "swaps": cmd_swaps,
    "volatility": cmd_volatility,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with defaults for any flag below")
    common.add_argument("--transactions", help="transactions CSV")
    common.add_argument("--traits", help="traits CSV (long format)")
    common.add_argument("--manifest", help="collection manifest JSON")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--price-field", dest="price_field", choices=("native", "usd"))
    swaps = common.add_mutually_exclusive_group()
    swaps.add_argument("--drop-lateral-swaps", dest="drop_lateral_swaps", action="store_const", const=True,
                       help="exclude 0.005 ETH swap transfers from valuation (default)")
    swaps.add_argument("--keep-lateral-swaps", dest="drop_lateral_swaps", action="store_const", const=False)
    common.add_argument("--swap-price", dest="swap_price", type=float)
    common.add_argument("--swap-tolerance", dest="swap_tolerance", type=float)
    common.add_argument("--pair-threshold", dest="pair_threshold", type=int)
    common.add_argument("--max-circuit-len", dest="max_circuit_len", type=int, help="0 means unbounded")
    common.add_argument("--no-circuit-rule", dest="no_circuit_rule", action="store_const", const=True)
    common.add_argument("--scope", choices=[s.value for s in Scope])
    common.add_argument("--window-days", dest="window_days", type=int)
    common.add_argument("--format", choices=("csv", "json"))

    parser = argparse.ArgumentParser(prog="nftledger", description="NFT transaction analytics")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ManifestError, NftLedgerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
