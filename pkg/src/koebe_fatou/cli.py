"""Command-line interface: per-stage subcommands and the full pipeline.

Configuration comes from a JSON file (--config); individual flags override
single fields.  Exit codes: 0 clean, 2 invariant violation, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .pipeline import (
    CORPUS,
    PipelineReport,
    RunConfig,
    run_pipeline,
    search_mixed_cubic,
)

EXIT_CLEAN = 0
EXIT_INVARIANT = 2
EXIT_STAGE = 3


def _load_config(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_json(Path(args.config).read_text())
    else:
        map_spec = {"corpus": args.map} if args.map in CORPUS else None
        if map_spec is None:
            if args.map and Path(args.map).exists():
                data = json.loads(Path(args.map).read_text())
                map_spec = data
            else:
                raise ValueError(
                    f"unknown map {args.map!r}; use a corpus name {sorted(CORPUS)} "
                    "or a JSON file"
                )
        cfg = RunConfig(map=map_spec)
    if args.depth is not None:
        cfg.depth = args.depth
    if args.seed is not None:
        cfg.seed = args.seed
    if args.cap is not None:
        cfg.cap = args.cap
    if args.tol is not None:
        # --tol overrides the principal tolerance of the invoked stage;
        # the pipeline maps it onto the uniformizer tolerance.
        cfg.tolerances["uniformize"] = args.tol
        cfg.tolerances["lift"] = min(cfg.tolerances["lift"], args.tol)
    return cfg


def _emit(args, report: PipelineReport, forest=None) -> None:
    text = report.to_json()
    if args.out:
        from .render import render

        render(report.to_json_dict(), args.out, forest=forest)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        print(text)


def _run_sections(args, keep: set[str]):
    cfg = _load_config(args)
    report, code = run_pipeline(cfg)
    if keep:
        sections = {
            k: v
            for k, v in report.sections.items()
            if k in keep | {"config", "map"}
        }
        report = PipelineReport(sections)
    _emit(args, report)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="koebe-fatou",
        description="Puzzle partitions, curve metrology, and circle-domain "
        "uniformization for attracting basins of rational maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--map", default="z2", help="corpus map name or JSON map file")
    common.add_argument("--depth", type=int, default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--cap", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory")

    for name, keep in [
        ("classify", {"classification"}),
        ("puzzle", {"classification", "forest_stats", "ends"}),
        ("turning", {"forest_stats", "turning"}),
        ("fatness", {"forest_stats", "fatness"}),
        ("degrees", {"forest_stats", "degree_tables"}),
        ("uniformize", {"forest_stats", "uniformization"}),
        ("pipeline", set()),
    ]:
        p = sub.add_parser(name, parents=[common])
        p.set_defaults(keep=keep)

    p_search = sub.add_parser("search", parents=[common])
    p_search.add_argument("--a-range", nargs=3, type=float, default=[0.8, 1.2, 50],
                          metavar=("LO", "HI", "N"))
    p_search.add_argument("--b-range", nargs=3, type=float, default=[-1.0, 1.0, 50],
                          metavar=("LO", "HI", "N"))
    p_search.set_defaults(keep=None)

    p_render = sub.add_parser("render", parents=[common])
    p_render.add_argument("--report", required=True, help="report.json to render")
    p_render.set_defaults(keep=None)

    args = parser.parse_args(argv)

    if args.command == "search":
        a_lo, a_hi, a_n = args.a_range
        b_lo, b_hi, b_n = args.b_range
        hits = search_mixed_cubic(
            np.linspace(a_lo, a_hi, int(a_n)), np.linspace(b_lo, b_hi, int(b_n))
        )
        text = json.dumps({"hits": hits}, sort_keys=True, indent=1)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "search.json").write_text(text)
        else:
            print(text)
        if not hits:
            print("no mixed parameters found on the grid", file=sys.stderr)
        return EXIT_CLEAN

    if args.command == "render":
        from .render import render

        report = json.loads(Path(args.report).read_text())
        paths = render(report, args.out or ".")
        for p in paths:
            print(p, file=sys.stderr)
        return EXIT_CLEAN

    try:
        return _run_sections(args, args.keep)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
