"""Command line entry point: ``topofl run|validate|export-topology``."""

import argparse
import sys

from .harness import ConfigError, RunConfig, export_topology_at, run


def _seeds(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topofl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every seed and write results")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: output_dir from the config)")
    p.add_argument("--seeds", type=_seeds, help="override the seed list, e.g. 0,1,2")

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("--config", required=True)

    p = sub.add_parser("export-topology", help="write the client topology at a round")
    p.add_argument("--config", required=True)
    p.add_argument("--round", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        if args.command == "validate":
            cfg.build_split(cfg.seeds[0])
            print(f"{args.config}: ok ({cfg.strategy.strategy}, {len(cfg.seeds)} seed(s))")
        elif args.command == "run":
            out = run(cfg, args.out, args.seeds)
            print(f"results written to {out / 'results.csv'}")
        else:
            for path in export_topology_at(cfg, args.round, args.out, args.seed):
                print(path)
    except (ConfigError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
