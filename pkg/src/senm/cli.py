"""Command-line entry point: ``senm <stage> [options]``.

Exit codes: 0 success, 2 invalid input or configuration, 3 data error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .errors import SenmError, ValidationError
from .pipeline import STAGES, Workspace, load_config, override, stage
from .simgen import default_scenario_path, load_scenario, simulate

log = logging.getLogger("senm")


def _csv_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _common(parser: argparse.ArgumentParser, data_required: bool = False) -> None:
    g = parser.add_argument_group("pipeline")
    g.add_argument("--data", type=Path, required=data_required,
                   help="dataset directory (with datasets.csv) or manifest CSV")
    g.add_argument("--out", type=Path, required=True, help="output directory")
    g.add_argument("--config", type=Path, help="TOML file with pipeline settings")
    g.add_argument("--seed", type=int, help="seed for randomized providers")
    g.add_argument("--jobs", type=int, help="worker processes for per-ego work")
    g.add_argument("--datasets", type=_csv_list, help="comma-separated dataset names to process")

    s = parser.add_argument_group("signing")
    s.add_argument("--provider", choices=("precomputed", "lexicon"))
    s.add_argument("--compare-provider", choices=("shifted", "precomputed", "lexicon", "none"),
                   help="second provider for the drift table (default: shifted)")
    s.add_argument("--lexicon", help="lexicon CSV or directory of <lang>.csv files")
    s.add_argument("--sentiment-sidecar", help="CSV of ego_id,interaction_index,label")
    s.add_argument("--sign-threshold", type=float)

    c = parser.add_argument_group("circles and analysis")
    c.add_argument("--bandwidth-quantile", type=float)
    c.add_argument("--circles-filter", type=int, metavar="K", help="analyze egos with exactly K circles")
    c.add_argument("--per-ego-averaging", action="store_true", default=None,
                   help="average circle negativity per ego instead of pooling")
    c.add_argument("--locations", help="CSV mapping location to country and continent")
    c.add_argument("--tables", type=_csv_list, help="subset of tables: 2,3,4,5,6,7,locations")

    t = parser.add_argument_group("topics")
    t.add_argument("--labelmap", help="CSV of term,topic")
    t.add_argument("--top-k", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="senm", description="Signed ego network analysis pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        _common(sub.add_parser(name, help=f"run the {name} stage"), data_required=(name == "ingest"))
    _common(sub.add_parser("pipeline", help="run every stage in order"), data_required=True)
    sim = sub.add_parser("simulate", help="generate synthetic datasets with a truth manifest")
    sim.add_argument("--scenario", type=Path, help="scenario TOML (default: built-in)")
    sim.add_argument("--out", type=Path, required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--jobs", type=int, default=1)
    return parser


def _config(args: argparse.Namespace):
    cfg = load_config(args.config, args.out, data=args.data, seed=args.seed, jobs=args.jobs,
                      datasets=args.datasets, tables=args.tables)
    cfg = override(cfg, "signing", provider=args.provider, compare=args.compare_provider,
                   lexicon_path=args.lexicon, sidecar_path=args.sentiment_sidecar,
                   threshold=args.sign_threshold)
    cfg = override(cfg, "circles", bandwidth_quantile=args.bandwidth_quantile)
    cfg = override(cfg, "analysis", circles_filter=args.circles_filter,
                   per_ego_averaging=args.per_ego_averaging, locations_path=args.locations)
    cfg = override(cfg, "topics", labelmap_path=args.labelmap, k=args.top_k)
    return cfg


def _run(args: argparse.Namespace) -> None:
    if args.command == "simulate":
        with stage("simulate"):
            if args.jobs < 1:
                raise ValidationError("--jobs must be >= 1")
            path = args.scenario or default_scenario_path()
            truth = simulate(load_scenario(path, args.seed), args.out, jobs=args.jobs)
            log.info("simulate: wrote %d datasets to %s", len(truth["datasets"]), args.out)
        return
    with stage("config"):
        cfg = _config(args)
    ws = Workspace(cfg)
    # data-directory defaults (lexicon, labelmap, locations) count as configured
    ws.resolved().validate()
    ws.run(STAGES if args.command == "pipeline" else [args.command])


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except SenmError as exc:
        where = getattr(exc, "stage", args.command)
        print(f"senm {where}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"senm {args.command}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
