"""Command-line entry point.

One subcommand per pipeline stage plus `pipeline` to chain them. All
subcommands share `--config`, `--out-dir`, `--seed` and `--mock-llm`.
Exit codes: 0 success, 2 invalid config/usage, 3 missing artifact,
4 external service failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import RunConfig, load_config
from .errors import (ApiError, ConfigInvalid, EmbeddingFailure, EmptyResponse,
                     MissingArtifact, TransportError)
from .pipeline import STAGES, run_pipeline, run_stages

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_EXTERNAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowxai",
        description="Explainable intrusion-detection pipeline")
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--out-dir", help="artifact directory (overrides config)")
    parser.add_argument("--seed", type=int, help="seed override")
    parser.add_argument("--mock-llm", action="store_true",
                        help="force the deterministic offline LLM provider")

    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        sub.add_parser(stage, help=f"run only the {stage} stage")
    pipe = sub.add_parser("pipeline", help="run multiple stages in order")
    pipe.add_argument("--stages", default=",".join(STAGES),
                      help="comma-separated subset of: " + ",".join(STAGES))
    show = sub.add_parser("show-config", help="print the effective configuration")
    del show
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.out_dir:
        cfg.out_dir = args.out_dir
    if args.seed is not None:
        cfg.seed = args.seed
    if args.mock_llm:
        cfg.mock_llm = True
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "show-config":
            import dataclasses
            import json
            print(json.dumps(dataclasses.asdict(cfg), sort_keys=True, indent=2))
            return EXIT_OK
        if args.command == "pipeline":
            stages = [s.strip() for s in args.stages.split(",") if s.strip()]
            bad = [s for s in stages if s not in STAGES]
            if bad:
                raise ConfigInvalid(f"unknown stages: {bad}")
            run_pipeline(cfg, stages)
        else:
            run_stages(cfg, [args.command])
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except (TransportError, ApiError, EmptyResponse, EmbeddingFailure) as exc:
        print(f"external service failure: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
