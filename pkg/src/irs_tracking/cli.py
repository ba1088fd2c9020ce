"""Command-line entry point: ``irs-tracking {run,single,codebook-cache}``."""
from __future__ import annotations

import argparse
import logging
import sys
import time

from irs_tracking.codebook import default_cache_dir, main_lobe_table
from irs_tracking.config import SCHEMES, ConfigError, SimConfig, load_config

log = logging.getLogger("irs_tracking")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (keys as in SimConfig)")
    common.add_argument("--seed", type=int)
    common.add_argument("--ptx-dbm", type=_float_list, help="transmit powers, e.g. '-20,-10,0'")
    common.add_argument("--scheme", choices=(*SCHEMES, "all"), default="all")
    common.add_argument("--snr-def", choices=("noiseless", "noisy"))
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="irs-tracking", description="IRS user-tracking link-level simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="Monte-Carlo sweep; writes CSVs, manifest and figures")
    r.add_argument("--drops", type=int)
    r.add_argument("--out", required=True, help="output directory (replaced atomically)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.add_argument("--trace-stride", type=int, default=1, help="keep every n-th data frame in trace CSVs")
    r.add_argument("--no-figures", action="store_true")

    s = sub.add_parser("single", parents=[common], help="one drop; per-timestep trace CSV on stdout")
    s.add_argument("--drop", type=int, default=0, help="drop index")

    c = sub.add_parser("codebook-cache", parents=[common], help="precompute the main-lobe table")
    c.add_argument("--cache-dir", help=f"default: $IRS_TRACKING_CACHE or {default_cache_dir()}")
    return p


def resolve_config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.ptx_dbm is not None:
        overrides["ptx_dbm"] = args.ptx_dbm
    if getattr(args, "drops", None) is not None:
        overrides["drops"] = args.drops
    if args.snr_def is not None:
        overrides["snr_def"] = args.snr_def
    if args.scheme != "all":
        overrides["schemes"] = (args.scheme,)
    return cfg.replace(**overrides) if overrides else cfg


def _cmd_run(cfg: SimConfig, args) -> int:
    from irs_tracking import report, simulation

    t0 = time.perf_counter()
    result = simulation.run(
        cfg, jobs=args.jobs, progress=lambda i: log.info("drop %d/%d done", i + 1, cfg.drops)
    )
    elapsed = time.perf_counter() - t0
    out = report.write_run(
        result, args.out, stride=args.trace_stride, figures=not args.no_figures,
        extra={"runtime_s": round(elapsed, 3)},
    )
    print(report.summary_csv(result.summary()), end="")
    print(f"results written to {out}", file=sys.stderr)
    return 0


def _cmd_single(cfg: SimConfig, args) -> int:
    from irs_tracking import report, simulation

    traces, _ = simulation.simulate_drop(cfg, args.drop, cfg.schemes, simulation.load_tables(cfg, cfg.schemes))
    sys.stdout.write(report.trace_csv(traces))
    return 0


def _cmd_cache(cfg: SimConfig, args) -> int:
    cache = args.cache_dir or cfg.cache_dir or default_cache_dir()
    t0 = time.perf_counter()
    table = main_lobe_table(cfg.codebook(), cfg.geometry().irs_aoa_los, cache_dir=cache)
    print(f"main-lobe table for {len(table.flat)} codewords ready in {cache} ({time.perf_counter() - t0:.1f} s)")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        if getattr(args, "drops", None) is not None and args.drops < 1:
            raise ConfigError("--drops must be >= 1")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    handler = {"run": _cmd_run, "single": _cmd_single, "codebook-cache": _cmd_cache}[args.command]
    return handler(cfg, args)


if __name__ == "__main__":
    sys.exit(main())
