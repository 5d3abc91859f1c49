"""Command-line entry point.

Verbs: ``build`` (generate instance files), ``run`` (query endpoints),
``report`` (aggregate records), ``validate`` (re-check gold answers against
the oracles), ``render`` (print one instance's prompt), ``synth`` (write a
synthetic source graph for offline use).  Exit codes: 0 success, 1
configuration or build error, 2 run/report completed with partial failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from kgtextbench.config import ConfigError, load_config
from kgtextbench.graph import load_report_json

log = logging.getLogger("kgtextbench")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to the YAML config file")
    p.add_argument("--out", help="override the configured output directory")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--tasks", help="comma-separated task ids to enable")
    p.add_argument("--formats", help="comma-separated format names")
    p.add_argument("--models", help="comma-separated endpoint model ids")
    p.add_argument("--pseudo", choices=["off", "on", "both"], help="pseudonymization mode")
    p.add_argument(
        "--allow-config-mismatch",
        action="store_true",
        help="reuse instance files built under a different config digest",
    )


def _split(value: str | None) -> list[str] | None:
    return [v.strip() for v in value.split(",") if v.strip()] if value else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgtextbench",
        description="Knowledge-graph reasoning benchmarks over textualized subgraphs",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb, helptext in (
        ("build", "sample subgraphs and generate oracle-verified instances"),
        ("run", "query every endpoint over the built instances"),
        ("report", "aggregate records into summary tables"),
        ("validate", "re-check stored gold answers against the oracles"),
    ):
        p = sub.add_parser(verb, help=helptext)
        _add_common(p)
        if verb == "run":
            p.add_argument("--resume", action="store_true",
                           help="continue an interrupted run, skipping completed keys")

    p = sub.add_parser("render", help="print one built instance's full prompt")
    _add_common(p)
    p.add_argument("--task", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--format", dest="format_name", required=True)
    p.add_argument("--pseudo-instance", action="store_true")

    p = sub.add_parser("synth", help="write a synthetic source graph as TSV files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--edges", type=int, default=2500)

    return parser


def _load(args) -> "BenchConfig":
    return load_config(
        args.config,
        seed=args.seed,
        output_dir=args.out,
        tasks=_split(args.tasks),
        formats=_split(args.formats),
        models=_split(args.models),
        pseudo=args.pseudo,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.verb == "synth":
        from kgtextbench.synth import build_synthetic_kg, write_graph_tsv

        kg = build_synthetic_kg(
            num_core=min(250, max(40, args.edges // 20)),
            num_attr=min(1500, max(100, args.edges * 3 // 10)),
            total_edges=args.edges,
            seed=args.seed,
        )
        paths = write_graph_tsv(kg, args.out_dir)
        print(json.dumps({"files": [str(p) for p in paths],
                          "report": json.loads(load_report_json(kg))}))
        return 0

    from kgtextbench import runner

    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.verb == "build":
            kg = runner.load_source_graph(cfg)
            print(load_report_json(kg))
            manifest = runner.build(cfg, kg)
            print(json.dumps({"manifest": str(Path(cfg.output_dir) / 'manifest.json'),
                              "files": len(manifest["files"])}))
            return 0

        if args.verb == "run":
            result = runner.run(
                cfg, resume=args.resume,
                allow_digest_mismatch=args.allow_config_mismatch,
            )
            print(json.dumps({
                "records": str(result.records_path),
                "new": result.new_records,
                "skipped": result.skipped,
                "errors": result.errors,
            }))
            return 2 if result.errors else 0

        if args.verb == "report":
            summary, report_dir = runner.report(
                cfg, allow_digest_mismatch=args.allow_config_mismatch
            )
            print((report_dir / "digest.txt").read_text(encoding="utf-8"))
            errored = sum(c.errors for c in summary.cells)
            return 2 if errored else 0

        if args.verb == "validate":
            problems = runner.validate(
                cfg, allow_digest_mismatch=args.allow_config_mismatch
            )
            print(json.dumps({"problems": problems}))
            return 1 if problems else 0

        if args.verb == "render":
            print(runner.render_instance(
                cfg, args.task, args.index, args.format_name,
                pseudo=args.pseudo_instance,
                allow_digest_mismatch=args.allow_config_mismatch,
            ))
            return 0
    except runner.BuildError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
