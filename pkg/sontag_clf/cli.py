import argparse
import json
import sys
from typing import List, Optional

from .catalog import export_entry, get_entry, list_entries
from .exceptions import CatalogError, ConfigError
from .hjb import rank_clfs
from .models import SamplingConfig
from .pipeline import EXIT_ERROR, EXIT_OK, run_experiment, validate_config
from .schema import EXPERIMENT_SCHEMA


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sontag-clf",
                                     description="Sontag-formula feedback synthesis and inverse-optimality checks.")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run an experiment config and write trajectories and summary.json")
    run.add_argument("config", help="Path to the experiment JSON file")
    run.add_argument("--out", default=None, help="Output directory (overrides output_dir)")
    run.add_argument("--seed", type=int, default=None, help="Sampling seed (overrides seed)")

    validate = commands.add_parser("validate", help="Validate a config without simulating")
    validate.add_argument("config", help="Path to the experiment JSON file")

    catalog = commands.add_parser("catalog", help="Inspect the built-in benchmark problems")
    catalog_commands = catalog.add_subparsers(dest="catalog_command", required=True)
    catalog_commands.add_parser("list", help="List catalog entries")
    export = catalog_commands.add_parser("export", help="Print an entry as an experiment config")
    export.add_argument("name")
    export.add_argument("--clf", default=None, help="CLF of the entry to export (default: the entry's default)")
    rank = catalog_commands.add_parser("rank", help="Rank the entry's CLFs by flatness of λ near the origin")
    rank.add_argument("name")
    rank.add_argument("--radius", type=float, default=1.0, help="Largest sampled radius")
    rank.add_argument("--samples", type=int, default=200)
    rank.add_argument("--seed", type=int, default=42)

    commands.add_parser("schema", help="Print the experiment config JSON schema")
    return parser


def _catalog(args: argparse.Namespace) -> int:
    if args.catalog_command == "list":
        for name in list_entries():
            print(f"{name}\t{get_entry(name).description}")
        return EXIT_OK
    if args.catalog_command == "export":
        print(json.dumps(export_entry(args.name, args.clf), indent=2))
        return EXIT_OK

    entry = get_entry(args.name)
    sampling = SamplingConfig(samples=args.samples, r_min=min(1e-3, args.radius), r_max=args.radius,
                              seed=args.seed)
    for name, spread in rank_clfs(entry.system, entry.clfs, entry.weights, sampling):
        print(f"{name}\tflatness={spread.flatness:.6g}\tmin={spread.minimum:.6g}\t"
              f"max={spread.maximum:.6g}\tfailures={spread.failures}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run_experiment(args.config, out=args.out, seed=args.seed)
        if args.command == "validate":
            config = validate_config(args.config)
            print(f"OK: {config.system.name or 'inline system'} (n={config.system.n}, m={config.system.m}), "
                  f"V = {config.clf}, {len(config.initial_states)} initial state(s)")
            return EXIT_OK
        if args.command == "catalog":
            return _catalog(args)
        print(json.dumps(EXPERIMENT_SCHEMA, indent=2))
        return EXIT_OK
    except (ConfigError, CatalogError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
