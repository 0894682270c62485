"""Command line: ``qmonitor run|validate|analytic <config>``.

Exit status: 0 when every row succeeded, 2 when some rows failed (their
partial results are still written), 1 for configuration errors.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .errors import ConfigError, ValidationError
from .report import analytic_csv, analytic_rows, run_experiment, width_plot

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def build_parser():
    p = argparse.ArgumentParser(prog="qmonitor", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate every delta_a row and write CSV/SVG/manifest")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides [output] directory)")
    run.add_argument("--plots", action="store_true", default=None, help="also write widths.svg")
    run.add_argument("--parallel", type=int, help="worker processes (overrides [parallel] workers)")

    val = sub.add_parser("validate", help="parse and check a config without running it")
    val.add_argument("config")

    ana = sub.add_parser("analytic", help="closed-form linear-oscillator curves only")
    ana.add_argument("config")
    ana.add_argument("--out", help="write analytic.csv (and analytic.svg with --plots) here instead of stdout")
    ana.add_argument("--plots", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        d = config.delta_as
        print(f"ok: {len(d)} delta_a rows from {d[0]:g} to {d[-1]:g}, n = {config.mode_index}, "
              f"tau = {config.tau:g}, beta_tilde = {config.system.beta_tilde:g}")
        return EXIT_OK

    if args.command == "analytic":
        text = analytic_csv(config)
        if args.out is None:
            sys.stdout.write(text)
            return EXIT_OK
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "analytic.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        if args.plots:
            rows = analytic_rows(config.system, config.tau, config.mode_index, config.delta_as)
            cols = list(zip(*rows))
            with open(os.path.join(args.out, "analytic.svg"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(width_plot(cols[0], None, cols[1], cols[2], cols[3], title=f"n = {config.mode_index}"))
        return EXIT_OK

    if args.parallel is not None and args.parallel < 1:
        print("config error: --parallel must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    outcome = run_experiment(config, out_dir=args.out, plots=args.plots, parallel=args.parallel)
    for r in outcome.rows:
        line = f"delta_a={r.delta_a:.6g} status={r.status}"
        if r.ok:
            line += f" delta_a_eff={r.width_equivalent:.6g} linear={r.analytic_linear:.6g}"
        else:
            line += f" ({r.message})"
        print(line)
    print(f"wrote {len(outcome.files)} files to {os.path.dirname(outcome.files[0]) or '.'}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
