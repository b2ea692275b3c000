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
"""Penalty selection by the extended Bayesian information criterion.

``lambda_max`` is located by fitting an ascending probe grid until the fit
is the null model. The default grid is centred on the subgradient bound at
the intercept-only fit. Searches then run either a log-spaced grid of
penalties per alpha, fitted from large to small with warm starts, or random
draws of ``(lambda, alpha)``.
"""

import logging
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np

from countsift.config import FitControls
from countsift.engine import fit_count_sgl, reseed, unpenalized_start
from countsift.errors import ConfigurationError, FitError, SearchError
from countsift.models import ModelKind, working_matrix
from countsift.penalty import Drop, GroupStructure, PenaltyConfig, Perturb, null_lambda
from countsift.streams import rng_stream

LOG = logging.getLogger(__name__)

GRID = "grid"
RANDOM = "random"

#: Stream key of the random-search draws.
RANDOM_SEARCH_KEY = 1

#: Probe grids are extended by doubling up to this multiple of their last value.
PROBE_CAP_FACTOR = 2.0 ** 12

EbicRow = namedtuple("EbicRow", ["lam", "alpha", "ebic", "kappa", "converged"])
PathPoint = namedtuple("PathPoint", ["lam", "alpha", "fit", "error"])


@dataclass(frozen=True)
class SearchSpec:
    """Settings of a tuning search.

    Attributes:
        mode (str): ``"grid"`` or ``"random"``.
        n_lambda (int): Penalties per alpha in grid mode.
        alpha_values (tuple): Alphas of the grid.
        alpha_range (tuple): Bounds of uniform alpha draws in random mode.
        n_draws (int): Number of random draws.
        lambda_ratio (float): ``lambda_min / lambda_max``.
        seed (int): Seed of the random draws.
        warm_starts (bool): Start each grid fit from the previous solution.
        check_cold (bool): Refit every grid point cold and log active-set
            disagreements with the warm-started fit.
        epsilon_policy: Zero handling of every fit.
        probe_grid (tuple): Explicit lambda_max probes, else derived from the data.
    """

    mode: str = GRID
    n_lambda: int = 100
    alpha_values: Tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)
    alpha_range: Tuple[float, float] = (0.1, 0.9)
    n_draws: int = 100
    lambda_ratio: float = 0.001
    seed: int = 0
    warm_starts: bool = True
    check_cold: bool = False
    epsilon_policy: Union[Drop, Perturb] = field(default_factory=Drop)
    probe_grid: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.mode not in (GRID, RANDOM):
            raise ConfigurationError("Search mode must be '{}' or '{}'".format(GRID, RANDOM))
        if self.n_lambda < 1:
            raise ConfigurationError("n_lambda must be at least 1")
        if not self.alpha_values or any(not 0 <= a <= 1 for a in self.alpha_values):
            raise ConfigurationError("alpha values must lie in [0, 1]")
        low, high = self.alpha_range
        if not 0 <= low <= high <= 1:
            raise ConfigurationError("alpha range must satisfy 0 <= low <= high <= 1")
        if self.n_draws < 1:
            raise ConfigurationError("n_draws must be at least 1")
        if not 0 < self.lambda_ratio < 1:
            raise ConfigurationError("lambda_ratio must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class TuningResult:
    best_lambda: float
    best_alpha: float
    best_fit: object
    ebic_table: Tuple[EbicRow, ...]
    lambda_max: float
    lambda_max_by_alpha: Dict[float, float]
    failures: Tuple[Tuple[float, float, str], ...] = ()
    cold_agreement: Optional[float] = None


def penalized_count(kind, p, n_categories):
    """Number of penalized coefficients ``p * d_e`` (at least 1)."""
    return max(p * ModelKind.parse(kind).n_columns(n_categories), 1)


def parallel_map(func, tasks, threads=1):
    """Map *func* over *tasks*, in worker processes when *threads* > 1, keeping task order."""
    tasks = list(tasks)
    if threads is None or threads <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        return list(pool.map(func, tasks))


def lambda_kkt(kind, data, alpha, structure=None, controls=None):
    """Smallest penalty for which the intercept-only fit satisfies the KKT conditions."""
    kind = ModelKind.parse(kind)
    controls = controls or FitControls()
    d_e = kind.n_columns(data.n_categories)
    structure = structure or GroupStructure.by_row(data.p, d_e)
    null_config = PenaltyConfig(0.0, alpha, GroupStructure([], (1, d_e)))
    null_fit = fit_count_sgl(kind, data.intercept_only(), null_config, controls)
    b = np.zeros((data.p + 1, d_e))
    b[0] = null_fit.b_hat.b[0]
    work = working_matrix(kind, b, data, controls.sum_method, controls.clamp_bound)
    gradient = np.asarray(data.x.values).T @ (work.ystar - work.w)
    return null_lambda(gradient, structure, alpha)


def find_lambda_max(kind, data, alpha, probe_grid=None, controls=None, structure=None, epsilon_policy=None,
                    start=None):
    """Smallest probed penalty whose fit is the null model.

    Probes are fitted in ascending order, each warm-started from the
    previous solution. Without a null fit the grid is extended by doubling
    up to :data:`PROBE_CAP_FACTOR` times its last value.

    Raises:
        SearchError: If no probe up to the cap gives the null model.
    """
    kind = ModelKind.parse(kind)
    controls = controls or FitControls()
    structure = structure or GroupStructure.by_row(data.p, kind.n_columns(data.n_categories))
    policy = epsilon_policy or Drop()
    if probe_grid is None:
        base = lambda_kkt(kind, data, alpha, structure, controls)
        if base <= 0:
            LOG.info("Intercept-only fit is already stationary, lambda_max is 0")
            return 0.0
        probe_grid = base * np.geomspace(0.5, 2.0, 9)
    probes = [float(lam) for lam in probe_grid]
    if not probes or probes[0] <= 0 or any(a >= b for a, b in zip(probes, probes[1:])):
        raise ConfigurationError("Probe grid must be positive and strictly increasing")
    cap = probes[-1] * PROBE_CAP_FACTOR
    init = start if start is not None else unpenalized_start(kind, data, controls.warm_start.sweeps, controls)
    index = 0
    fit = None
    while True:
        if index == len(probes):
            if probes[-1] * 2.0 > cap:
                raise SearchError("No null model found up to lambda={!r} ({} active cells)".format(
                    probes[-1], fit.kappa), largest_lambda=probes[-1], active_count=fit.kappa)
            probes.append(probes[-1] * 2.0)
        lam = probes[index]
        fit = fit_count_sgl(kind, data, PenaltyConfig(lam, alpha, structure, policy), controls, init=init)
        if fit.kappa == 0:
            LOG.info("lambda_max for %s at alpha=%g is %g", kind.name, alpha, lam)
            return lam
        init = fit.b_hat
        index += 1


def _lambda_path(lam_max, spec):
    if spec.n_lambda == 1:
        return [lam_max]
    return [lam_max * r for r in np.geomspace(1.0, spec.lambda_ratio, spec.n_lambda)]


def _fit_point(kind, data, lam, alpha, spec, controls, structure, init):
    config = PenaltyConfig(lam, alpha, structure, spec.epsilon_policy)
    try:
        return PathPoint(lam, alpha, fit_count_sgl(kind, data, config, controls, init=init), None)
    except FitError as err:
        LOG.warning("Fit at lambda=%g alpha=%g failed: %s", lam, alpha, err)
        return PathPoint(lam, alpha, None, str(err))


def _alpha_path(task):
    kind, data, alpha, spec, controls, structure, start = task
    lam_max = find_lambda_max(kind, data, alpha, spec.probe_grid, controls, structure, spec.epsilon_policy, start)
    points = []
    agree = 0
    init = start
    for lam in _lambda_path(lam_max, spec):
        point = _fit_point(kind, data, lam, alpha, spec, controls, structure, init if spec.warm_starts else start)
        points.append(point)
        if point.fit is None:
            continue
        if spec.warm_starts:
            init = reseed(point.fit.b_hat, start, controls.zero_report_threshold)
            if spec.check_cold:
                cold = _fit_point(kind, data, lam, alpha, spec, controls, structure, start)
                if cold.fit is not None and cold.fit.active_cells == point.fit.active_cells:
                    agree += 1
                elif cold.fit is not None:
                    LOG.warning("Warm and cold fits disagree at lambda=%g alpha=%g: objectives %.6f vs %.6f",
                             lam, alpha, point.fit.objective_trace[-1], cold.fit.objective_trace[-1])
    kappas = [point.fit.kappa for point in points if point.fit is not None]
    rises = sum(1 for larger, smaller in zip(kappas, kappas[1:]) if smaller < larger)
    if rises:
        LOG.info("Active count grew with lambda in %d of %d adjacent pairs at alpha=%g",
                 rises, len(kappas) - 1, alpha)
    return alpha, lam_max, points, agree


def _random_point(task):
    kind, data, lam, alpha, spec, controls, structure, start = task
    return _fit_point(kind, data, lam, alpha, spec, controls, structure, start)


def tune(kind, data, spec=None, controls=None, structure=None, threads=1):
    """Select ``(lambda, alpha)`` by minimum EBIC over converged fits.

    Ties go to the larger lambda, then to the smaller alpha.

    Args:
        kind (ModelKind): Count model.
        data (CountDataset): Observations.
        spec (SearchSpec): Search settings.
        controls (FitControls): Solver controls for every fit.
        structure (GroupStructure): Penalty groups, one per covariate by default.
        threads (int): Worker processes; alpha paths or random points run in parallel.

    Raises:
        SearchError: If no fit converged.
    """
    kind = ModelKind.parse(kind)
    spec = spec or SearchSpec()
    controls = controls or FitControls()
    structure = structure or GroupStructure.by_row(data.p, kind.n_columns(data.n_categories))
    start = unpenalized_start(kind, data, controls.warm_start.sweeps, controls)
    agreement = None
    if spec.mode == GRID:
        tasks = [(kind, data, float(alpha), spec, controls, structure, start) for alpha in spec.alpha_values]
        paths = parallel_map(_alpha_path, tasks, threads)
        lambda_max_by_alpha = {alpha: lam_max for alpha, lam_max, _, _ in paths}
        points = [point for _, _, path, _ in paths for point in path]
        if spec.check_cold and spec.warm_starts:
            fitted = sum(1 for point in points if point.fit is not None)
            agreement = sum(agree for _, _, _, agree in paths) / fitted if fitted else None
    else:
        low, high = spec.alpha_range
        lambda_max_by_alpha = {}
        for alpha in sorted({low, high}):
            lambda_max_by_alpha[alpha] = find_lambda_max(kind, data, alpha, spec.probe_grid, controls, structure,
                                                         spec.epsilon_policy, start)
        lam_max = max(lambda_max_by_alpha.values())
        rng = rng_stream(spec.seed, RANDOM_SEARCH_KEY)
        alphas = rng.uniform(low, high, spec.n_draws)
        lambdas = np.exp(rng.uniform(np.log(spec.lambda_ratio * lam_max), np.log(lam_max), spec.n_draws)) \
            if lam_max > 0 else np.zeros(spec.n_draws)
        tasks = [(kind, data, float(lam), float(alpha), spec, controls, structure, start)
                 for lam, alpha in zip(lambdas, alphas)]
        points = parallel_map(_random_point, tasks, threads)
    return _select(points, spec, lambda_max_by_alpha, agreement)


def _select(points, spec, lambda_max_by_alpha, agreement):
    rows = []
    failures = []
    candidates = []
    for point in points:
        if point.fit is None:
            rows.append(EbicRow(point.lam, point.alpha, float("nan"), None, False))
            failures.append((point.lam, point.alpha, point.error))
            continue
        value = float(point.fit.ebic)
        rows.append(EbicRow(point.lam, point.alpha, value, point.fit.kappa, point.fit.converged))
        if point.fit.converged and np.isfinite(value):
            candidates.append((value, -point.lam, point.alpha, point))
        else:
            failures.append((point.lam, point.alpha, "did not converge"))
    if not candidates:
        raise SearchError("No converged fits among {} search points".format(len(points)), failures=failures)
    best = min(candidates, key=lambda item: item[:3])[3]
    if spec.mode == GRID:
        lam_max = lambda_max_by_alpha[best.alpha]
    else:
        lam_max = max(lambda_max_by_alpha.values())
    LOG.info("Selected lambda=%g alpha=%g (EBIC %.6f, %d active cells)", best.lam, best.alpha,
             best.fit.ebic, best.fit.kappa)
    return TuningResult(best_lambda=best.lam, best_alpha=best.alpha, best_fit=best.fit, ebic_table=tuple(rows),
                        lambda_max=lam_max, lambda_max_by_alpha=lambda_max_by_alpha, failures=tuple(failures),
                        cold_agreement=agreement)
