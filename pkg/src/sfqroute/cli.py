"""Command-line entry point."""

from __future__ import annotations

import argparse
import sys
import tempfile

from .benches import BENCH_NAMES, write_bench
from .flow import EXIT_CONFIG, FlowConfig, FlowError, emit_report, run_flow
from .techlib import LAYER_PROFILES


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfqroute",
                                description="Route a placed SFQ netlist with JTL and PTL wires.")
    p.add_argument("--tech", help="technology JSON (default: built-in desk technology)")
    p.add_argument("--placement", help="placement JSON")
    p.add_argument("--netlist", help="netlist JSON")
    p.add_argument("--bench", choices=BENCH_NAMES, help="route a bundled bench instead of files")
    p.add_argument("--out", help="output directory (nothing is written when omitted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-ripup", type=int, default=8, dest="max_ripup")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--mode", choices=sorted(LAYER_PROFILES), default=None,
                   help="layer profile (default nb04; overrides the layers of --tech)")
    p.add_argument("--no-io-opt", action="store_true", help="skip input-stage adjustment")
    p.add_argument("--report", choices=("text", "machine"), default="text")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1 or args.max_ripup < 0:
        print("error: --threads must be >= 1 and --max-ripup >= 0", file=sys.stderr)
        return EXIT_CONFIG
    with tempfile.TemporaryDirectory() as tmp:
        placement, netlist = args.placement, args.netlist
        if args.bench:
            paths = write_bench(args.bench, tmp)
            placement, netlist = str(paths["placement"]), str(paths["netlist"])
        if not placement or not netlist:
            print("error: need --placement and --netlist (or --bench)", file=sys.stderr)
            return EXIT_CONFIG
        cfg = FlowConfig(placement=placement, netlist=netlist, out=args.out, tech=args.tech,
                         rng_seed=args.seed, max_ripup_iters=args.max_ripup, threads=args.threads,
                         mode=args.mode, enable_io_opt=not args.no_io_opt)
        try:
            result = run_flow(cfg)
        except FlowError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return exc.exit_code
    sys.stdout.write(emit_report(result.report, args.report))
    return result.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
