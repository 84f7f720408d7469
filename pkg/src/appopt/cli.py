"""Command-line front end.

Subcommands: run <config>, compare <config>, validate, fit-rate <trace>.
The APPOPT_OUTPUT_DIR environment variable overrides the configured output
directory; a --output-dir flag overrides both. Exit codes: 0 success,
1 run failure, 2 validation failure, 3 config error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import harness

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_VALIDATION_FAILURE = 2
EXIT_CONFIG_ERROR = 3


def _resolve_output_dir(flag_value, config_value):
    if flag_value is not None:
        return flag_value
    return os.environ.get(harness.OUTPUT_DIR_ENV, config_value)


def _cmd_run(args) -> int:
    config = harness.parse_config(args.config)
    out = _resolve_output_dir(args.output_dir, config.output_dir)
    summary = harness.run_experiment(config, output_dir=out)
    for entry in summary.per_seed:
        if entry["status"] == "ok":
            err = entry.get("final_err_sq")
            err_text = "" if err is None else f" final_err_sq={err:.6e}"
            passed = f" target_pass={entry['passed']}" if "passed" in entry else ""
            print(f"seed {entry['seed']}: ok{err_text}{passed} ({entry['trace']})")
        else:
            print(f"seed {entry['seed']}: FAILED ({entry['error']})")
    if summary.median_final_err_sq is not None:
        print(f"median final_err_sq: {summary.median_final_err_sq:.6e}")
    print(f"summary: {summary.output_dir}/summary.json")
    return EXIT_OK if summary.all_ok else EXIT_RUN_FAILURE


def _cmd_compare(args) -> int:
    config_a, config_b = harness.parse_compare_config(args.config)
    table = harness.compare(config_a, config_b)
    out = _resolve_output_dir(args.output_dir, config_a.output_dir)
    path = os.path.join(out, "comparison.csv")
    table.write_csv(path)
    print(f"{'eval_count':>12} {table.solver_a:>16} {table.solver_b:>16}")
    for budget, med_a, med_b in zip(table.budgets, table.median_a, table.median_b):
        print(f"{budget:>12} {med_a:>16.6e} {med_b:>16.6e}")
    print(
        f"at budget {table.final_budget}: wins {table.solver_a}={table.wins_a}, "
        f"{table.solver_b}={table.wins_b}, ties={table.ties}"
    )
    print(f"verdict: {table.verdict}")
    print(f"table: {path}")
    return EXIT_OK


def _cmd_validate(_args) -> int:
    report = harness.validate()
    print(report.format())
    return EXIT_OK if report.passed else EXIT_VALIDATION_FAILURE


def _parse_window(text):
    if text is None:
        return None
    try:
        a, _, b = text.partition(":")
        return (int(a), int(b))
    except ValueError as err:
        raise harness.ConfigError(f"bad --window {text!r}; expected a:b") from err


def _cmd_fit_rate(args) -> int:
    try:
        trace = harness.read_trace(args.trace)
    except OSError as err:
        raise harness.ConfigError(f"cannot read trace {args.trace}: {err}") from err
    fit = harness.fit_rate(trace, window=_parse_window(args.window))
    print(f"window k in [{fit.window[0]}, {fit.window[1]}]")
    print(f"rho_hat = {fit.rho_hat:.6f}")
    print(f"r_squared = {fit.r_squared:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="appopt",
        description="Derivative-free global optimization benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured multi-seed experiment")
    p_run.add_argument("config", help="YAML experiment config")
    p_run.add_argument("--output-dir", default=None, help="override the output directory")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run a two-solver comparison")
    p_cmp.add_argument("config", help="YAML comparison config (side_a / side_b)")
    p_cmp.add_argument("--output-dir", default=None, help="override the output directory")
    p_cmp.set_defaults(func=_cmd_compare)

    p_val = sub.add_parser("validate", help="run the oracle self-checks")
    p_val.set_defaults(func=_cmd_validate)

    p_fit = sub.add_parser("fit-rate", help="fit the error contraction rate of a trace")
    p_fit.add_argument("trace", help="trace CSV produced by `appopt run`")
    p_fit.add_argument("--window", default=None, help="iteration window a:b (inclusive)")
    p_fit.set_defaults(func=_cmd_fit_rate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
