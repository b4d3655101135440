"""Command-line entry point: ``fdrlab reject|theory|simulate|verify|figures``.

Exit codes: 0 success, 1 a verification check failed, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .distributions import parse_model
from .errors import ConfigurationError, PreconditionError, UnsupportedOperation
from .montecarlo import SimConfig, run, verification_suite
from .procedures import PValueBatch, bh_count, bh_count_strict, bhs
from .theory import bhs_bounds, figure_data, rho, write_figure_csv

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def cmd_reject(args) -> int:
    batch = PValueBatch.from_csv(sys.stdin if args.input == "-" else args.input)
    if args.method == "bhs":
        if args.delta is None or args.x is None:
            raise ConfigurationError("bhs needs --delta and --x")
        out = bhs(batch, args.delta, args.x)
    else:
        if args.q is None:
            raise ConfigurationError(f"{args.method} needs --q")
        out = (bh_count if args.method == "bh" else bh_count_strict)(batch, args.q)
    rejected = set(out.rejected.tolist())
    stream, close = _open_out(args.out)
    try:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("index", "p", "rejected"))
        for i, p in enumerate(batch.values):
            w.writerow((i, repr(float(p)), int(i in rejected)))
        summary = [f"R={out.r}", f"threshold={_num(out.threshold)}", f"q_used={_num(out.q_used)}"]
        if out.gamma_hat is not None:
            summary += [f"gamma_hat={_num(out.gamma_hat)}", f"q_applied={_num(out.q_applied)}"]
        if out.s is not None:
            summary += [f"S={out.s}", f"pi1={_num(out.pi1)}", f"pi2={_num(out.pi2)}", f"pi3={_num(out.pi3)}"]
        stream.write("# " + " ".join(summary) + "\n")
    finally:
        if close:
            stream.close()
    return EXIT_OK


def cmd_theory(args) -> int:
    model = parse_model(args.model)
    if args.q is not None:
        payload = {"summary": rho(model, args.q, args.gamma).as_dict()}
    else:
        if args.delta is None or args.x is None:
            raise ConfigurationError("give --q, or both --delta and --x")
        bounds = bhs_bounds(model, args.gamma, args.delta, args.x)
        payload = {
            "summary": rho(model, bounds.q_limit, args.gamma).as_dict(),
            "bhs": bounds.as_dict(),
        }
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def _load_config(text):
    if os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is neither a file nor valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    return data


def cmd_simulate(args) -> int:
    data = _load_config(args.config)
    data["seed"] = args.seed
    config = SimConfig.from_dict(data)
    report = run(config, threads=args.threads, timing=args.timing)
    stream, close = _open_out(args.out)
    try:
        stream.write(report.to_json())
    finally:
        if close:
            stream.close()
    return EXIT_OK


def cmd_verify(args) -> int:
    failed = 0
    for res in verification_suite(quick=args.quick, seed=args.seed, threads=args.threads):
        print(res.line(), flush=True)
        failed += not res.passed
    print(f"{failed} check(s) failed" if failed else "all checks passed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_figures(args) -> int:
    model = parse_model(args.model)
    kinds = ("fig1", "fig2", "fig3") if args.which == "all" else (args.which,)
    os.makedirs(args.out, exist_ok=True)
    for kind in kinds:
        header, rows = figure_data(kind, model, args.gamma, args.delta)
        path = os.path.join(args.out, f"{kind}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_figure_csv(fh, header, rows)
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdrlab", description="Step-up FDR procedures, their limits and Monte Carlo checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reject", help="apply BH, strict BH or BHS to a CSV of p-values")
    p.add_argument("--input", required=True, help="CSV with a 'p' column and optional 'is_null' (0/1); '-' for stdin")
    p.add_argument("--method", choices=("bh", "bh-strict", "bhs"), default="bh")
    p.add_argument("--q", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--x", type=float)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_reject)

    p = sub.add_parser("theory", help="limiting rejection fraction and BHS brackets")
    p.add_argument("--model", required=True, help="e.g. power:alpha=0.1")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--q", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--x", type=float)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("simulate", help="run a Monte Carlo configuration")
    p.add_argument("--config", required=True, help="JSON file or inline JSON object")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--timing", action="store_true", help="record wall time (breaks byte-identity)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the Monte Carlo check suite")
    p.add_argument("--quick", action="store_true", help="one tenth of the replicates")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("figures", help="write the figure tables as CSV")
    p.add_argument("--which", choices=("fig1", "fig2", "fig3", "all"), default="all")
    p.add_argument("--model", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (ConfigurationError, UnsupportedOperation, PreconditionError, OSError) as exc:
        print(f"fdrlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
