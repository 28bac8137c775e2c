"""Command-line interface.

Subcommands: simulate (ARMSE sweeps), mi, crlb, bandwidth-sweep, plot.
Scenario problems are reported with file and line context and exit code 2.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import CaIsacError
from .scenario import load_scenario


def _add_scenario_flags(parser, trials=True, threads=True):
    parser.add_argument("--scenario", required=True, help="scenario file path")
    parser.add_argument("--seed", type=int, default=None, help="override sim.master_seed")
    parser.add_argument("--out", required=True, help="output directory")
    if trials:
        parser.add_argument("--trials", type=int, default=None, help="override sim.trials")
    if threads:
        parser.add_argument("--threads", type=int, default=1, help="worker processes")


def _load(args, trials=True):
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, master_seed=args.seed)
    if trials and getattr(args, "trials", None) is not None:
        scenario = replace(scenario, trials=args.trials)
    return scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caisac",
        description="Two-band MIMO-OFDM ISAC link simulator and bound calculator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo ARMSE sweep over the SNR grid")
    _add_scenario_flags(p)

    p = sub.add_parser("mi", help="mutual information sweep over SNR and UE antennas")
    _add_scenario_flags(p, trials=False, threads=False)
    p.add_argument("--draws", type=int, default=None, help="override comm.channel_draws")

    p = sub.add_parser("crlb", help="closed-form CRLB curves per band and aggregated")
    _add_scenario_flags(p, trials=False, threads=False)

    p = sub.add_parser("bandwidth-sweep", help="aggregated CRLBs under the subcarrier budget")
    _add_scenario_flags(p, trials=False, threads=False)
    p.add_argument("--snr-db", type=float, default=-20.0, help="fixed per-sample SNR")

    p = sub.add_parser("plot", help="render a sweep CSV to a vector-graphic file")
    p.add_argument("--csv", required=True, help="input CSV path")
    p.add_argument("--out", required=True, help="output file (.svg or .pdf)")
    p.add_argument("--kind", required=True, choices=("armse", "mi", "crlb", "bandwidth"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            from .sweeps import run_sweep
            results, summary = run_sweep(_load(args), args.out, threads=args.threads)
            print(results)
            print(summary)
        elif args.command == "mi":
            from .sweeps import run_mi_sweep
            print(run_mi_sweep(_load(args, trials=False), args.out, draws=args.draws))
        elif args.command == "crlb":
            from .sweeps import run_crlb_sweep
            print(run_crlb_sweep(_load(args, trials=False), args.out))
        elif args.command == "bandwidth-sweep":
            from .sweeps import run_bandwidth_sweep
            print(run_bandwidth_sweep(_load(args, trials=False), args.out, snr_db=args.snr_db))
        elif args.command == "plot":
            from .plotting import emit_plot
            print(emit_plot(args.csv, args.out, args.kind))
    except CaIsacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
