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
"""Simulated Dirichlet-multinomial data and selection-accuracy benchmarks.

Covariates are AR(1)-correlated normals. The first ``round(delta_p * p)``
covariates are relevant; each is associated with ``round(delta_D * D)``
taxa drawn per scenario seed, with magnitudes evenly spaced over
``[0.6 f, 0.9 f]`` and random signs. Counts are Dirichlet-multinomial with
Poisson row totals. Rounding is half-to-even.
"""

import itertools
import json
import logging
import os
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd
from scipy.linalg import cholesky, toeplitz

from countsift.config import FitControls
from countsift.data import CountDataset, DesignMatrix, to_jsonable
from countsift.engine import FitResult
from countsift.errors import ConfigurationError, CountsiftError, DataError
from countsift.models import CoefficientMatrix, ModelKind, sample_counts
from countsift.streams import rng_stream
from countsift.tuning import SearchSpec, parallel_map, tune

LOG = logging.getLogger(__name__)

# Stream keys, one per purpose.
TRUTH_KEY = 0
COVARIATES_KEY = 1
TOTALS_KEY = 2
COUNTS_KEY = 3

METRICS = ("group_precision", "group_recall", "within_precision", "within_recall", "direction_accuracy")


@dataclass(frozen=True)
class ScenarioConfig:
    """One cell of the simulation design."""

    n: int = 300
    p: int = 25
    D: int = 7
    f: float = 0.8
    delta_p: float = 0.1
    delta_D: float = 0.25
    rho: float = 0.4
    total_mean: float = 5000.0
    replicates: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.D < 2:
            raise ConfigurationError("Scenario needs n >= 1, p >= 1 and D >= 2")
        if self.f < 0:
            raise ConfigurationError("Association strength f must be non-negative")
        if not 0 < self.delta_p <= 1 or not 0 < self.delta_D <= 1:
            raise ConfigurationError("delta_p and delta_D must lie in (0, 1]")
        if round(self.delta_p * self.p) < 1:
            raise ConfigurationError("delta_p * p rounds to no relevant covariates")
        if round(self.delta_D * self.D) < 1:
            raise ConfigurationError("delta_D * D rounds to no relevant taxa")
        if not 0 <= self.rho < 1:
            raise ConfigurationError("rho must lie in [0, 1)")
        if not self.total_mean > 0:
            raise ConfigurationError("total_mean must be positive")
        if self.replicates < 1:
            raise ConfigurationError("replicates must be at least 1")

    @property
    def n_relevant(self):
        return round(self.delta_p * self.p)

    @property
    def n_taxa(self):
        return round(self.delta_D * self.D)


@dataclass(frozen=True, eq=False)
class TruthMask:
    """True coefficients: ``nonzero`` and ``signs`` are ``p x D``, ``beta_true`` includes intercepts."""

    nonzero: np.ndarray
    signs: np.ndarray
    beta_true: np.ndarray

    def to_dict(self):
        return {"nonzero": self.nonzero.tolist(), "signs": self.signs.tolist(), "beta_true": self.beta_true.tolist()}


@dataclass(frozen=True)
class SelectionMetrics:
    """Precision, recall and direction accuracy; ``None`` when undefined."""

    group_precision: Optional[float]
    group_recall: Optional[float]
    within_precision: Optional[float]
    within_recall: Optional[float]
    direction_accuracy: Optional[float]
    within_tp: int = 0
    within_fp: int = 0
    within_tn: int = 0
    within_fn: int = 0
    group_tp: int = 0
    group_fp: int = 0
    group_tn: int = 0
    group_fn: int = 0


def gen_covariates(n, p, rho, seed, *keys):
    """Draw ``n`` rows from ``N(0, Sigma)`` with ``Sigma[j, k] = rho**|j-k|``."""
    sigma = toeplitz(rho ** np.arange(p))
    factor = cholesky(sigma, lower=True)
    draws = rng_stream(seed, *keys).standard_normal((n, p))
    return draws @ factor.T


def gen_truth(p, D, f, delta_p, delta_D, seed):
    """Build the true coefficient layout of a scenario."""
    n_relevant = round(delta_p * p)
    n_taxa = round(delta_D * D)
    if f == 0:
        LOG.warning("Association strength f=0 gives zero-magnitude true coefficients")
    rng = rng_stream(seed, TRUTH_KEY)
    nonzero = np.zeros((p, D), dtype=np.int64)
    for j in range(n_relevant):
        nonzero[j, np.sort(rng.choice(D, size=n_taxa, replace=False))] = 1
    rows, cols = np.nonzero(nonzero)
    magnitudes = np.linspace(0.6 * f, 0.9 * f, rows.size)
    signs = np.zeros((p, D), dtype=np.int64)
    signs[rows, cols] = rng.choice(np.array([-1, 1]), size=rows.size)
    beta_true = np.zeros((p + 1, D))
    beta_true[rows + 1, cols] = magnitudes * signs[rows, cols]
    return TruthMask(nonzero, signs, beta_true)


def gen_dataset(config, replicate_index):
    """Generate replicate *replicate_index* of a scenario.

    The truth is fixed per scenario seed; covariates, totals and counts
    come from streams keyed by the replicate index.
    """
    truth = gen_truth(config.p, config.D, config.f, config.delta_p, config.delta_D, config.seed)
    replicate = int(replicate_index) + 1
    covariates = gen_covariates(config.n, config.p, config.rho, config.seed, replicate, COVARIATES_KEY)
    rng = rng_stream(config.seed, replicate, TOTALS_KEY)
    totals = rng.poisson(config.total_mean, config.n)
    while np.any(totals == 0):
        empty = totals == 0
        totals[empty] = rng.poisson(config.total_mean, int(empty.sum()))
    x = DesignMatrix.from_covariates(covariates, ["x{}".format(j + 1) for j in range(config.p)])
    counts = sample_counts(ModelKind.DM, CoefficientMatrix(truth.beta_true, ModelKind.DM), x, totals,
                           config.seed, keys=(replicate, COUNTS_KEY))
    return CountDataset(x, counts), truth


def _ratio(numerator, denominator):
    return float(numerator) / denominator if denominator else None


def score_selection(truth, fit, threshold=1e-6):
    """Score estimated activity against the truth.

    Args:
        truth (TruthMask): True layout.
        fit: A :class:`~countsift.engine.FitResult`, a coefficient matrix or
            an array whose penalized rows are ``p x D``.
        threshold (float): Magnitude at which an estimate counts as active.
    """
    if isinstance(fit, FitResult):
        values = fit.b_hat.b
    elif isinstance(fit, CoefficientMatrix):
        values = fit.b
    else:
        values = np.asarray(fit, dtype=float)
    estimate = values[1:]
    if estimate.shape != truth.nonzero.shape:
        raise DataError("Estimate of shape {} does not match truth of shape {}".format(
            estimate.shape, truth.nonzero.shape))
    found = np.abs(estimate) >= threshold
    true = truth.nonzero.astype(bool)
    tp = int(np.sum(found & true))
    fp = int(np.sum(found & ~true))
    fn = int(np.sum(~found & true))
    tn = int(np.sum(~found & ~true))
    found_groups = found.any(axis=1)
    true_groups = true.any(axis=1)
    gtp = int(np.sum(found_groups & true_groups))
    gfp = int(np.sum(found_groups & ~true_groups))
    gfn = int(np.sum(~found_groups & true_groups))
    gtn = int(np.sum(~found_groups & ~true_groups))
    hits = found & true
    same_sign = int(np.sum(np.sign(estimate[hits]) == truth.signs[hits]))
    return SelectionMetrics(group_precision=_ratio(gtp, gtp + gfp), group_recall=_ratio(gtp, gtp + gfn),
                            within_precision=_ratio(tp, tp + fp), within_recall=_ratio(tp, tp + fn),
                            direction_accuracy=_ratio(same_sign, tp), within_tp=tp, within_fp=fp, within_tn=tn,
                            within_fn=fn, group_tp=gtp, group_fp=gfp, group_tn=gtn, group_fn=gfn)


@dataclass(frozen=True, eq=False)
class ScenarioReport:
    """Per-replicate rows and mean/SD summary of one scenario."""

    config: ScenarioConfig
    replicates: pd.DataFrame
    summary: dict


def _run_replicate(task):
    config, index, search, controls, threshold = task
    row = {"replicate": index, "status": "ok", "best_lambda": None, "best_alpha": None, "kappa": None,
           "error": ""}
    row.update({metric: None for metric in METRICS})
    try:
        data, truth = gen_dataset(config, index)
        result = tune(ModelKind.DM, data, search, controls)
        metrics = score_selection(truth, result.best_fit, threshold)
    except CountsiftError as err:
        LOG.warning("Replicate %d failed: %s", index, err)
        row.update(status="failed", error="{}: {}".format(type(err).__name__, err))
        return row
    row.update(best_lambda=result.best_lambda, best_alpha=result.best_alpha, kappa=result.best_fit.kappa)
    row.update({metric: getattr(metrics, metric) for metric in METRICS})
    LOG.info("Replicate %d: group recall %s, within recall %s", index, metrics.group_recall, metrics.within_recall)
    return row


def _summarize(config, frame):
    ok = frame[frame["status"] == "ok"]
    summary = {"n": config.n, "p": config.p, "delta_p": config.delta_p, "D": config.D, "delta_D": config.delta_D,
               "f": config.f, "replicates": config.replicates, "failures": int((frame["status"] != "ok").sum())}
    for metric in METRICS:
        values = pd.to_numeric(ok[metric], errors="coerce").dropna()
        summary[metric + "_mean"] = float(values.mean()) if len(values) else None
        summary[metric + "_sd"] = float(values.std(ddof=1)) if len(values) > 1 else None
    return summary


def run_scenario(config, search=None, controls=None, threads=1, threshold=None):
    """Generate, tune and score every replicate of a scenario.

    Replicates run in *threads* worker processes; results do not depend on
    the number of workers.

    Returns:
        ScenarioReport
    """
    search = search or SearchSpec()
    controls = controls or FitControls()
    threshold = controls.zero_report_threshold if threshold is None else threshold
    tasks = [(config, index, search, controls, threshold) for index in range(config.replicates)]
    rows = parallel_map(_run_replicate, tasks, threads)
    frame = pd.DataFrame(rows, columns=["replicate", "status", "best_lambda", "best_alpha", "kappa"]
                         + list(METRICS) + ["error"])
    return ScenarioReport(config, frame, _summarize(config, frame))


def scenario_grid(base, axes):
    """Every combination of the field values in *axes*, applied to *base*.

    Args:
        base (ScenarioConfig): Settings shared by all scenarios.
        axes (dict): Maps a :class:`ScenarioConfig` field to the values it takes.

    Returns:
        list: The scenarios, the last axis varying fastest.
    """
    names = list(axes)
    combos = itertools.product(*(axes[name] for name in names))
    return [replace(base, **dict(zip(names, combo))) for combo in combos]


def run_sweep(configs, search=None, controls=None, threads=1):
    """Run several scenarios and return their summaries, one row per scenario."""
    rows = [run_scenario(config, search, controls, threads).summary for config in configs]
    columns = ["n", "p", "delta_p", "D", "delta_D", "f", "replicates", "failures"]
    columns += [metric + suffix for metric in METRICS for suffix in ("_mean", "_sd")]
    return pd.DataFrame(rows, columns=columns)


def write_report(report, out_dir):
    """Write ``replicates.csv`` and ``summary.json`` for *report* into *out_dir*."""
    os.makedirs(out_dir, exist_ok=True)
    report.replicates.to_csv(os.path.join(out_dir, "replicates.csv"), index=False, float_format="%.17g")
    payload = {"scenario": to_jsonable(asdict(report.config)),
               "summary": to_jsonable(report.summary)}
    with open(os.path.join(out_dir, "summary.json"), "w") as fd:
        json.dump(payload, fd, indent=2, sort_keys=True)
        fd.write("\n")
