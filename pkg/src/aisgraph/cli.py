"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .dataset import compute_stats
from .errors import AisGraphError, ConfigError
from .pipeline import Config, run_pipeline

log = logging.getLogger("aisgraph")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="aisgraph",
        description="Generate labelled spatio-temporal vessel graphs from AIS tracks.",
    )
    io = p.add_argument_group("input/output")
    io.add_argument("--input", metavar="PATH", help="AIS CSV file")
    io.add_argument("--output", metavar="DIR", help="dataset output directory")
    io.add_argument("--stats", metavar="PATH", help="print statistics of an existing dataset and exit")

    run = p.add_argument_group("run")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--workers", type=int, default=1, help="worker processes (output does not depend on this)")

    grid = p.add_argument_group("windows")
    grid.add_argument("--dt", type=int, default=600, metavar="SECONDS", help="resampling step")
    grid.add_argument("--window-hours", type=float, default=4.0, metavar="H")
    grid.add_argument("--stride", type=int, default=None, metavar="N", help="window stride in samples (default: w)")
    grid.add_argument("--gap-threshold", type=float, default=3600.0, metavar="SECONDS", help="split tracks at longer gaps")
    grid.add_argument("--k-vessels", type=int, default=4, metavar="K")

    inj = p.add_argument_group("injection")
    inj.add_argument("--r-node", type=float, default=0.5, metavar="F")
    inj.add_argument("--r-traj", type=float, default=0.1, metavar="F")
    inj.add_argument("--k-sigma", type=float, default=3.5, metavar="F")
    inj.add_argument("--scenario", action="append", default=[], metavar="FILE", help="scenario file (repeatable)")
    inj.add_argument("--exclude-synthetic-from-injection", action="store_true")
    inj.add_argument("--positive-only", action="store_true", help="always push rates above the mean")

    nb = p.add_argument_group("neighbourhood")
    nb.add_argument("--proximity-km", type=float, default=10.0, metavar="F")
    nb.add_argument("--temporal-edges-only", action="store_true")
    nb.add_argument("--neighbor-radius-km", type=float, default=10.0, metavar="F")
    nb.add_argument("--optics-min-samples", type=int, default=3, metavar="N")
    nb.add_argument("--optics-max-eps-km", type=float, default=25.0, metavar="F")
    nb.add_argument("--optics-xi", type=float, default=0.05, metavar="F")

    syn = p.add_argument_group("virtual neighbours")
    syn.add_argument("--sog-jitter", type=float, default=2.0, metavar="F")
    syn.add_argument("--cog-jitter", type=float, default=15.0, metavar="F")
    syn.add_argument("--pos-jitter-km", type=float, default=5.0, metavar="F")

    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> Config:
    if not args.input or not args.output:
        raise ConfigError("--input and --output are required unless --stats is given")
    return Config(
        input=args.input,
        output=args.output,
        seed=args.seed,
        dt=args.dt,
        window_hours=args.window_hours,
        stride=args.stride,
        gap_threshold=args.gap_threshold,
        k_vessels=args.k_vessels,
        r_node=args.r_node,
        r_traj=args.r_traj,
        k_sigma=args.k_sigma,
        scenario_files=list(args.scenario),
        proximity_km=args.proximity_km,
        temporal_edges_only=args.temporal_edges_only,
        neighbor_radius_km=args.neighbor_radius_km,
        optics_min_samples=args.optics_min_samples,
        optics_max_eps_km=args.optics_max_eps_km,
        optics_xi=args.optics_xi,
        sog_jitter=args.sog_jitter,
        cog_jitter=args.cog_jitter,
        pos_jitter_km=args.pos_jitter_km,
        exclude_synthetic_from_injection=args.exclude_synthetic_from_injection,
        positive_only=args.positive_only,
        workers=args.workers,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.stats:
            print(json.dumps(compute_stats(args.stats), indent=2, sort_keys=True))
            return 0
        manifest = run_pipeline(config_from_args(args))
    except AisGraphError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    counts = manifest["counts"]
    print(f"{counts['graphs']} graphs ({counts['positive_labels']['graph']} anomalous) written to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
