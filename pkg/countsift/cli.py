#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
# Copyright (c) 2026 Countsift Developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program. If not, see <http://www.gnu.org/licenses/>.
"""Command line front end: ``fit``, ``tune``, ``simulate`` and ``bench``.

Diagnostics go to stderr, with verbosity taken from the ``COUNTREG_LOG``
environment variable. stdout carries one JSON status object. Exit status
is 0 on success, 1 on input or configuration errors and 2 when the fit did
not converge.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np
import pandas as pd

from countsift.config import FitControls
from countsift.data import load_dataset, save_dataset, to_jsonable
from countsift.engine import fit_count_sgl
from countsift.errors import ConfigurationError, CountsiftError, SearchError
from countsift.models import ModelKind
from countsift.penalty import Drop, GroupStructure, PenaltyConfig, Perturb
from countsift.simulation import ScenarioConfig, gen_dataset, run_scenario, run_sweep, scenario_grid, write_report
from countsift.tuning import GRID, RANDOM, SearchSpec, tune

LOG = logging.getLogger(__name__)

LOG_ENV = "COUNTREG_LOG"

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2

PENALTY_ALPHAS = {"lasso": 1.0, "group": 0.0}

#: Scenario fields accepted by ``bench --sweep`` and their value types.
SWEEP_FIELDS = {"n": int, "p": int, "D": int, "f": float, "delta_p": float, "delta_D": float, "rho": float,
                "total_mean": float, "replicates": int}


class ArgumentError(ConfigurationError):
    """Invalid command line."""


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        raise ArgumentError("{}: {}".format(self.prog, message))


def _alphas(text):
    try:
        values = tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated numbers, got '{}'".format(text))
    if not values:
        raise argparse.ArgumentTypeError("no alpha values given")
    return values


def _sweep_axis(text):
    name, _, values = text.partition("=")
    name = name.strip().replace("-", "_")
    if name not in SWEEP_FIELDS:
        raise argparse.ArgumentTypeError("cannot sweep '{}', choose from {}".format(name, ", ".join(SWEEP_FIELDS)))
    try:
        parsed = tuple(SWEEP_FIELDS[name](item) for item in values.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("bad values for {}: '{}'".format(name, values))
    if not parsed:
        raise argparse.ArgumentTypeError("no values given for {}".format(name))
    return name, parsed


def _common(parser):
    parser.add_argument("--seed", type=int, default=0, help="Seed of every random draw")
    parser.add_argument("--out-dir", default=".", help="Directory receiving the artifacts")
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="Also write CSV mirrors of the JSON artifacts with 'csv'")


def _threads(parser):
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="Worker processes")


def _solver(parser):
    parser.add_argument("--tol", type=float, default=1e-6, help="Relative objective tolerance")
    parser.add_argument("--max-iter", type=int, default=500, help="Maximum MM iterations per fit")
    parser.add_argument("--epsilon-policy", choices=("drop", "perturb"), default="drop",
                        help="Handling of coefficients reaching zero")


def _inputs(parser):
    parser.add_argument("--model", required=True, choices=[kind.value for kind in ModelKind])
    parser.add_argument("--penalty", choices=("lasso", "group", "sgl"), default="sgl")
    parser.add_argument("--alpha", type=float, help="Lasso share of the penalty")
    parser.add_argument("--covariates", required=True, help="Covariate CSV")
    parser.add_argument("--counts", required=True, help="Count CSV")
    parser.add_argument("--standardize", dest="standardize", action="store_true", default=True,
                        help="Standardize covariates (default)")
    parser.add_argument("--no-standardize", dest="standardize", action="store_false")


def _search(parser):
    parser.add_argument("--mode", choices=(GRID, RANDOM), default=GRID)
    parser.add_argument("--n-lambda", type=int, default=100, help="Penalties per alpha in grid mode")
    parser.add_argument("--alphas", type=_alphas, help="Comma separated alpha grid")
    parser.add_argument("--n-draws", type=int, default=100, help="Random search draws")
    parser.add_argument("--lambda-ratio", type=float, default=1e-3, help="lambda_min / lambda_max")


def _scenario(parser):
    defaults = ScenarioConfig()
    parser.add_argument("--n", type=int, default=defaults.n)
    parser.add_argument("--p", type=int, default=defaults.p)
    parser.add_argument("--D", type=int, default=defaults.D)
    parser.add_argument("--f", type=float, default=defaults.f, help="Association strength")
    parser.add_argument("--delta-p", type=float, default=defaults.delta_p, help="Share of relevant covariates")
    parser.add_argument("--delta-D", type=float, default=defaults.delta_D, help="Share of relevant taxa")
    parser.add_argument("--rho", type=float, default=defaults.rho)
    parser.add_argument("--total-mean", type=float, default=defaults.total_mean)
    parser.add_argument("--replicates", type=int, default=defaults.replicates)


def build_parser():
    """Return the argument parser of the ``countsift`` command."""
    parser = _Parser(prog="countsift", description="Sparse group lasso count regression")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)
    commands.required = True

    fit = commands.add_parser("fit", help="Fit one penalty")
    _inputs(fit)
    fit.add_argument("--lambda", dest="lam", type=float, required=True, help="Penalty level")
    _solver(fit)
    _common(fit)

    tune_parser = commands.add_parser("tune", help="Select the penalty by EBIC")
    _inputs(tune_parser)
    tune_parser.add_argument("--lambda", dest="lam", type=float, help=argparse.SUPPRESS)
    _search(tune_parser)
    _solver(tune_parser)
    _threads(tune_parser)
    _common(tune_parser)

    simulate = commands.add_parser("simulate", help="Write one simulated dataset")
    _scenario(simulate)
    simulate.add_argument("--replicate", type=int, default=0, help="Replicate index")
    _common(simulate)

    bench = commands.add_parser("bench", help="Score selection accuracy over simulated replicates")
    _scenario(bench)
    _search(bench)
    _solver(bench)
    bench.add_argument("--sweep", type=_sweep_axis, action="append", metavar="FIELD=V1,V2",
                       help="Vary a scenario field; repeated axes are crossed")
    _threads(bench)
    _common(bench)
    return parser


def _controls(args):
    return FitControls(max_iter=args.max_iter, tol=args.tol)


def _policy(args):
    return Drop() if args.epsilon_policy == "drop" else Perturb()


def _fixed_alpha(args):
    """Alpha implied by ``--penalty``, checked against ``--alpha``."""
    if args.penalty == "sgl":
        return args.alpha
    alpha = PENALTY_ALPHAS[args.penalty]
    if args.alpha is not None and args.alpha != alpha:
        raise ConfigurationError("--penalty {} fixes alpha={}, got --alpha {}".format(args.penalty, alpha,
                                                                                     args.alpha))
    return alpha


def _search_spec(args, alphas=None):
    alphas = alphas or args.alphas or SearchSpec.alpha_values
    return SearchSpec(mode=args.mode, n_lambda=args.n_lambda, alpha_values=tuple(alphas),
                      n_draws=args.n_draws, lambda_ratio=args.lambda_ratio, seed=args.seed,
                      epsilon_policy=_policy(args))


def _scenario_config(args):
    return ScenarioConfig(n=args.n, p=args.p, D=args.D, f=args.f, delta_p=args.delta_p, delta_D=args.delta_D,
                          rho=args.rho, total_mean=args.total_mean, replicates=args.replicates, seed=args.seed)


def _write_json(path, payload):
    with open(path, "w") as fd:
        json.dump(to_jsonable(payload), fd, indent=2, sort_keys=True, allow_nan=False)
        fd.write("\n")


def _write_csv(path, frame):
    frame.to_csv(path, index=False, float_format="%.17g")


def write_fit(fit, data, lam, alpha, out_dir, fmt="json"):
    """Write ``coefficients.json``, ``trace.csv`` and ``summary.json`` of *fit*; return the file names."""
    kind = fit.b_hat.kind
    rows = ["(intercept)"] + list(data.x.covariate_names)
    roles = fit.b_hat.column_roles
    coefficients = {"model": kind.value, "lambda": lam, "alpha": alpha, "rows": rows, "column_roles": roles,
                    "taxa": list(data.y.taxa_names), "coefficients": fit.b_hat.b,
                    "active_groups": [rows[j] for j in fit.active_groups],
                    "active_cells": [[rows[j], roles[d]] for j, d in fit.active_cells],
                    "signs": fit.signs}
    summary = {"model": kind.value, "lambda": lam, "alpha": alpha, "loglik": fit.loglik_final, "ebic": fit.ebic,
               "kappa": fit.kappa, "iterations": fit.iterations, "converged": fit.converged,
               "n": fit.n_obs, "n_penalized": fit.n_penalized, "clamp_events": fit.clamp_events,
               "drop_events": [event._asdict() for event in fit.drop_events]}
    _write_json(os.path.join(out_dir, "coefficients.json"), coefficients)
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    trace = pd.DataFrame({"iteration": np.arange(1, len(fit.objective_trace) + 1),
                          "objective": fit.objective_trace})
    _write_csv(os.path.join(out_dir, "trace.csv"), trace)
    written = ["coefficients.json", "summary.json", "trace.csv"]
    if fmt == "csv":
        _write_csv(os.path.join(out_dir, "coefficients.csv"),
                   pd.DataFrame(fit.b_hat.b, columns=roles).assign(row=rows)[["row"] + roles])
        flat = {key: value for key, value in summary.items() if key != "drop_events"}
        flat["drop_events"] = len(fit.drop_events)
        _write_csv(os.path.join(out_dir, "summary.csv"), pd.DataFrame([flat]))
        written += ["coefficients.csv", "summary.csv"]
    return written


def cmd_fit(args):
    kind = ModelKind.parse(args.model)
    alpha = _fixed_alpha(args)
    if alpha is None:
        raise ConfigurationError("fit with --penalty sgl needs --alpha")
    data = load_dataset(args.covariates, args.counts, standardize=args.standardize)
    structure = GroupStructure.by_row(data.p, kind.n_columns(data.n_categories))
    config = PenaltyConfig(args.lam, alpha, structure, _policy(args))
    fit = fit_count_sgl(kind, data, config, _controls(args))
    written = write_fit(fit, data, args.lam, alpha, args.out_dir, args.format)
    status = {"converged": fit.converged, "kappa": fit.kappa, "iterations": fit.iterations}
    return (EXIT_OK if fit.converged else EXIT_NOT_CONVERGED), written, status


def cmd_tune(args):
    if args.lam is not None:
        raise ConfigurationError("tune selects lambda itself, drop --lambda")
    kind = ModelKind.parse(args.model)
    alpha = _fixed_alpha(args)
    if alpha is not None and args.alphas is not None:
        raise ConfigurationError("give either --alpha/--penalty or --alphas")
    data = load_dataset(args.covariates, args.counts, standardize=args.standardize)
    spec = _search_spec(args, None if alpha is None else (alpha,))
    if alpha is not None and spec.mode == RANDOM:
        raise ConfigurationError("random search draws alpha, drop --alpha/--penalty")
    result = tune(kind, data, spec, _controls(args), threads=args.threads)
    written = write_fit(result.best_fit, data, result.best_lambda, result.best_alpha, args.out_dir, args.format)
    table = pd.DataFrame(list(result.ebic_table), columns=["lam", "alpha", "ebic", "kappa", "converged"])
    _write_csv(os.path.join(args.out_dir, "ebic_path.csv"), table.rename(columns={"lam": "lambda"}))
    by_alpha = sorted(result.lambda_max_by_alpha.items())
    lambda_max = {"lambda_max": result.lambda_max,
                  "by_alpha": [{"alpha": a, "lambda_max": lam} for a, lam in by_alpha]}
    _write_json(os.path.join(args.out_dir, "lambda_max.json"), lambda_max)
    written += ["ebic_path.csv", "lambda_max.json"]
    if args.format == "csv":
        _write_csv(os.path.join(args.out_dir, "lambda_max.csv"), pd.DataFrame(lambda_max["by_alpha"]))
        written.append("lambda_max.csv")
    status = {"lambda": result.best_lambda, "alpha": result.best_alpha, "ebic": result.best_fit.ebic,
              "kappa": result.best_fit.kappa, "failures": len(result.failures)}
    return EXIT_OK, written, status


def cmd_simulate(args):
    config = _scenario_config(args)
    if args.replicate < 0 or args.replicate >= config.replicates:
        raise ConfigurationError("--replicate must lie in [0, {})".format(config.replicates))
    data, truth = gen_dataset(config, args.replicate)
    save_dataset(data, os.path.join(args.out_dir, "covariates.csv"), os.path.join(args.out_dir, "counts.csv"))
    _write_json(os.path.join(args.out_dir, "truth.json"), truth.to_dict())
    written = ["covariates.csv", "counts.csv", "truth.json"]
    if args.format == "csv":
        rows = ["(intercept)"] + list(data.x.covariate_names)
        frame = pd.DataFrame(truth.beta_true, columns=list(data.y.taxa_names)).assign(row=rows)
        _write_csv(os.path.join(args.out_dir, "truth.csv"), frame[["row"] + list(data.y.taxa_names)])
        written.append("truth.csv")
    return EXIT_OK, written, {"n": data.n, "p": data.p, "D": data.n_categories}


def _bench_sweep(args, base):
    names = [name for name, _ in args.sweep]
    if len(set(names)) != len(names):
        raise ConfigurationError("each --sweep field may be given once, got {}".format(", ".join(names)))
    configs = scenario_grid(base, dict(args.sweep))
    frame = run_sweep(configs, _search_spec(args), _controls(args), threads=args.threads)
    _write_csv(os.path.join(args.out_dir, "sweep.csv"), frame)
    return EXIT_OK, ["sweep.csv"], {"scenarios": len(configs), "failures": int(frame["failures"].sum())}


def cmd_bench(args):
    config = _scenario_config(args)
    if args.sweep:
        return _bench_sweep(args, config)
    report = run_scenario(config, _search_spec(args), _controls(args), threads=args.threads)
    write_report(report, args.out_dir)
    written = ["replicates.csv", "summary.json"]
    if args.format == "csv":
        _write_csv(os.path.join(args.out_dir, "summary.csv"), pd.DataFrame([report.summary]))
        written.append("summary.csv")
    return EXIT_OK, written, {"failures": report.summary["failures"], "replicates": config.replicates}


COMMANDS = {"fit": cmd_fit, "tune": cmd_tune, "simulate": cmd_simulate, "bench": cmd_bench}


def configure_logging():
    """Log to stderr at the level named by ``COUNTREG_LOG`` (default WARNING)."""
    level = logging.getLevelName(os.environ.get(LOG_ENV, "WARNING").strip().upper())
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="[%(levelname)s: %(asctime)s : %(name)s] %(message)s")


def _fail(command, err, code):
    sys.stderr.write(json.dumps({"error": type(err).__name__, "message": str(err)}) + "\n")
    print(json.dumps({"status": "error", "command": command, "exit": code}, sort_keys=True))
    return code


def main(argv=None):
    """Run the ``countsift`` command and return its exit status."""
    configure_logging()
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        os.makedirs(args.out_dir, exist_ok=True)
        code, written, status = COMMANDS[command](args)
    except SearchError as err:
        return _fail(command, err, EXIT_NOT_CONVERGED if err.failures else EXIT_INPUT)
    except (CountsiftError, OSError) as err:
        return _fail(command, err, EXIT_INPUT)
    payload = {"status": "ok" if code == EXIT_OK else "not_converged", "command": command, "exit": code,
               "out_dir": args.out_dir, "artifacts": written}
    payload.update(status)
    print(json.dumps(to_jsonable(payload), sort_keys=True))
    return code
