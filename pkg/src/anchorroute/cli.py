"""anchorroute command line: ``run``, ``dump`` and ``verify``."""

from __future__ import annotations

import argparse
import io
import sys
from typing import Optional, Sequence

from . import verify as verify_mod
from .config import ConfigError, build_scenario, load_config
from .sim import Scenario, run, sweep, write_csv, write_dump

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _scenario(args) -> Scenario:
    if args.config is None:
        return build_scenario({}, args.set)
    try:
        return load_config(args.config, args.set)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc.strerror or exc}") from None


def _write_text(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_run(args) -> int:
    sc = _scenario(args)
    if sc.sweep_densities or sc.sweep_seeds:
        densities = sc.sweep_densities or (sc.n_nodes,)
        seeds = sc.sweep_seeds or (sc.seed,)
        reports = sweep(sc, densities, seeds, jobs=args.jobs)
    else:
        reports = [run(sc)]
    # without --out the CSV owns stdout and summaries move to stderr
    info = sys.stdout if args.out not in (None, "-") else sys.stderr
    for r in reports:
        print(r.summary(), file=sys.stderr if r.error else info)
    buf = io.StringIO()
    write_csv(reports, buf)
    _write_text(args.out, buf.getvalue())
    failed = [r for r in reports if r.error]
    if failed:
        print(f"error: {len(failed)} of {len(reports)} runs failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_dump(args) -> int:
    sc = _scenario(args)
    buf = io.StringIO()
    write_dump(sc, buf)
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = verify_mod.run_all(trials=args.trials, seed=args.seed, fault=args.inject_fault)
    bad = 0
    for c in checks:
        print(c.line(), file=sys.stdout if c.ok else sys.stderr)
        bad += not c.ok
    if bad:
        names = ", ".join(c.name for c in checks if not c.ok)
        print(f"error: {bad} properties failed: {names}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anchorroute",
                                description="Anchor-coordinate routing simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_flags(sp):
        sp.add_argument("--config", metavar="PATH", help="key = value scenario file")
        sp.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
        sp.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        help="override one scenario field; repeatable")

    sp = sub.add_parser("run", help="run one scenario or a sweep, writing CSV")
    scenario_flags(sp)
    sp.add_argument("--jobs", type=_positive, default=1, metavar="N",
                    help="worker processes for sweeps")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("dump", help="write graph, anchors and coordinates")
    scenario_flags(sp)
    sp.set_defaults(func=cmd_dump)

    sp = sub.add_parser("verify", help="run the property suites")
    sp.add_argument("--trials", type=_positive, default=2000, metavar="N")
    sp.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    sp.add_argument("--inject-fault", choices=verify_mod.FAULTS, default=None,
                    help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level diagnostic
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
