"""Command line entry point: ``lwpd {codebook,check,datagen,train,report}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import codebook as cbk
from .config import ConfigError, load_config
from .learner import gen_mixture, save_csv
from .metrics import atomic_write, read_csv, records_to_csv, write_csv
from .report import comparison_table, svg_chart
from .simulator import run


class CLIError(Exception):
    pass


def parse_seeds(text: str) -> list[int]:
    """"3" -> [3]; "0..4" -> [0, 1, 2, 3, 4]."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise CLIError(f"bad seed range {text!r}; use N or A..B") from None


def cmd_codebook(args) -> int:
    cb = cbk.build_code(cbk.CodeParams(args.n, args.k, args.t, args.d))
    text = cbk.dumps_codebook(cb, rounds=args.rounds)
    report = cbk.analyze_distance(cb).summary() + "\n"
    if args.out:
        atomic_write(args.out, text)
        atomic_write(str(args.out) + ".report.txt", report)
    else:
        sys.stdout.write(text)
    sys.stdout.write(report)
    return 0


def cmd_check(args) -> int:
    cb = cbk.loads_codebook(Path(args.path).read_text())
    failed = []
    for name, ok, detail in cbk.verify_codebook(cb):
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failed.append(name)
    if failed:
        print(f"violated: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_datagen(args) -> int:
    ds = gen_mixture(args.classes, args.components, args.dim, args.records, args.seed,
                     spread=args.spread)
    tmp = Path(args.out).with_name(f".{Path(args.out).name}.tmp")
    save_csv(ds, tmp)
    tmp.replace(args.out)
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = args.out or cfg.output
    seeds = parse_seeds(args.seeds) if args.seeds else [cfg.seed]
    records = []
    for seed in seeds:
        records.extend(run(cfg.replace(seed=seed)))
    if args.overwrite:
        atomic_write(out, records_to_csv(records))
    else:
        write_csv(records, out, append=True)
    print(f"wrote {len(records)} records to {out}")
    return 0


def cmd_report(args) -> int:
    records = []
    for path in args.csv:
        records.extend(read_csv(path))
    if not records:
        raise CLIError("no records in the given files")
    table = comparison_table(records, target=args.target)
    svg = svg_chart(records, log_scale=args.log)
    if args.table:
        atomic_write(args.table, table)
    if args.svg:
        atomic_write(args.svg, svg)
    sys.stdout.write(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lwpd", description="LWPD gradient codes and straggler simulations")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("codebook", help="build and export a codebook with its distance report")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--t", type=int, required=True)
    c.add_argument("--d", type=int, default=None, help="displacement (default: smallest valid prime)")
    c.add_argument("--rounds", type=int, default=0, help="also export this many schedule rounds")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_codebook)

    c = sub.add_parser("check", help="run the property suite on a codebook file")
    c.add_argument("path")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("datagen", help="write a Gaussian-mixture dataset as CSV")
    c.add_argument("--classes", type=int, default=4)
    c.add_argument("--components", type=int, default=8)
    c.add_argument("--dim", type=int, default=20)
    c.add_argument("--records", type=int, default=20000)
    c.add_argument("--spread", type=float, default=3.0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_datagen)

    c = sub.add_parser("train", help="run one experiment and append its metrics")
    c.add_argument("--config", required=True)
    c.add_argument("--seeds", default=None, help="N or A..B (inclusive)")
    c.add_argument("--out", default=None, help="metrics CSV (default: the config's output)")
    c.add_argument("--overwrite", action="store_true", help="replace instead of append")
    c.set_defaults(func=cmd_train)

    c = sub.add_parser("report", help="merge metrics CSVs into a table and an SVG chart")
    c.add_argument("csv", nargs="+")
    c.add_argument("--table", default=None)
    c.add_argument("--svg", default=None)
    c.add_argument("--log", action="store_true", help="log-scale loss axis")
    c.add_argument("--target", type=float, default=None, help="report time to reach this test loss")
    c.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CLIError, ConfigError, ValueError, OSError, IndexError) as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"lwpd {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
