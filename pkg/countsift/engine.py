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
"""Penalized count regression by iteratively reweighted Poisson ridge regression.

One outer iteration (a sweep) walks the column blocks of the model. For each
block the working weights and responses of every column, and the ridge
weights of the penalty, are formed at the current coefficients; each column
is then replaced by the solution of its weighted Poisson ridge system. A
column update is accepted only if it does not increase the column's
surrogate, halving the step toward the ridge solution when needed, so the
penalized objective never increases between drop events.
"""

import logging
from collections import deque, namedtuple
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from countsift.config import FitControls
from countsift.errors import FactorizationError, FitError, PenaltyError
from countsift.glm import coefficient_change, halve_step, solve_weighted_ridge
from countsift.models import (CoefficientMatrix, ModelKind, column_surrogate, linear_predictor, loglik,
                              working_matrix)
from countsift.penalty import (Drop, GroupStructure, compute_ridge_weights, eval_sgl_penalty, saturation_events,
                               vanishing_events)

LOG = logging.getLogger(__name__)

ActiveSet = namedtuple("ActiveSet", ["groups", "cells", "signs"])
SweepResult = namedtuple("SweepResult", ["b", "active", "drop_events"])


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of :func:`fit_count_sgl`.

    ``b_hat`` reports cells below the zero threshold, and dropped cells, as
    exact zeros. ``objective_trace`` holds the objective after every sweep.
    """

    b_hat: CoefficientMatrix
    objective_trace: Tuple[float, ...]
    loglik_final: float
    active_groups: Tuple[int, ...]
    active_cells: Tuple[Tuple[int, int], ...]
    kappa: int
    converged: bool
    iterations: int
    drop_events: tuple
    n_obs: int
    n_penalized: int
    clamp_events: int = 0

    @property
    def ebic(self):
        return ebic(self.loglik_final, self.kappa, self.n_obs, self.n_penalized)

    @property
    def signs(self):
        return np.sign(self.b_hat.b[1:]).astype(np.int64)


def ebic(loglik_final, kappa, n, K):
    """Extended BIC ``-2 * loglik + kappa * log(n) + kappa * log(K)``.

    *kappa* counts non-zero penalized coefficients; *K* is the number of
    penalized coefficients.
    """
    if n < 1 or K < 1 or kappa < 0:
        raise ValueError("ebic needs n >= 1, K >= 1 and kappa >= 0")
    if kappa == 0:
        return -2.0 * loglik_final
    return -2.0 * loglik_final + kappa * np.log(n) + kappa * np.log(K)


def _values(b):
    return np.array(b.b if isinstance(b, CoefficientMatrix) else b, dtype=float)


def objective(kind, b, data, config, smoothed=False, method="special", clamp_bound=30.0):
    """Penalized negative log-likelihood ``-loglik(B) + lambda * J(B)``.

    With *smoothed* set and a Perturb policy the penalty uses the same
    smoothing as the ridge weights.
    """
    values = _values(b)
    return -loglik(kind, values, data, method, clamp_bound) + eval_sgl_penalty(values, config, smoothed=smoothed)


def sweep(kind, data, b, config=None, controls=None, active=None, iteration=1, warm=False, column_order=None):
    """Run one pass of column updates over all blocks.

    Args:
        kind (ModelKind): Count model.
        data (CountDataset): Observations.
        b: Current coefficients.
        config (PenaltyConfig): Penalty; ``None`` for an unpenalized pass.
        controls (FitControls): Solver controls.
        active (numpy.ndarray): Boolean mask of live cells, updated in place
            when cells are dropped.
        iteration (int): Recorded in drop events.
        warm (bool): Add the warm-start ridge to unpenalized solves.
        column_order (list): Order in which columns are visited inside each
            block. Columns of a block share their expansion point, so the
            order does not change the result.

    Returns:
        SweepResult: Updated coefficients, live-cell mask and drop events.
    """
    kind = ModelKind.parse(kind)
    controls = controls or FitControls()
    b = _values(b)
    active = np.ones(b.shape, dtype=bool) if active is None else active
    x = np.asarray(data.x.values)
    penalized = config is not None and config.lam > 0
    dropping = penalized and isinstance(config.epsilon_policy, Drop)
    events = []
    for block in kind.update_blocks(data.n_categories):
        ridge = np.zeros(b.shape)
        if penalized:
            weights = compute_ridge_weights(b, config)
            if dropping:
                mask, dropped = saturation_events(weights, active, iteration)
                if dropped:
                    b[mask] = 0.0
                    active &= ~mask
                    events.extend(dropped)
                    weights = compute_ridge_weights(b, config)
            ridge = 2.0 * config.lam * weights.matrix()
        elif warm:
            ridge[1:, :] = controls.warm_ridge
        work = working_matrix(kind, b, data, controls.sum_method, controls.clamp_bound)
        order = block if column_order is None else [d for d in column_order if d in block]
        for d in order:
            rows = np.flatnonzero(active[:, d])
            column = work.column(d)
            if not np.any(column.w > 0):
                continue
            sub = x[:, rows]
            diag = ridge[rows, d]
            try:
                candidate = solve_weighted_ridge(sub, column.w, column.z, diag)
            except FactorizationError as err:
                raise FactorizationError(str(err), smallest_pivot=err.smallest_pivot, column=d)
            halving_diag = diag if penalized else None

            def value(coef):
                return column_surrogate(sub, column, coef, halving_diag, controls.clamp_bound)

            b[rows, d] = halve_step(b[rows, d].copy(), candidate, value, controls.max_halvings)
    return SweepResult(b, active, events)


def unpenalized_start(kind, data, sweeps=20, controls=None):
    """Starting coefficients from *sweeps* unpenalized sweeps begun at zero.

    Falls back to zero coefficients if the sweeps fail.
    """
    kind = ModelKind.parse(kind)
    controls = controls or FitControls()
    zeros = np.zeros((data.p + 1, kind.n_columns(data.n_categories)))
    b = zeros.copy()
    try:
        for _ in range(sweeps):
            b = sweep(kind, data, b, controls=controls, warm=True).b
        loglik(kind, b, data, controls.sum_method, controls.clamp_bound)
    except FitError as err:
        LOG.warning("Unpenalized warm start failed (%s), starting from zero", err)
        b = zeros
    return CoefficientMatrix(b, kind)


def reseed(init, start, threshold):
    """Replace penalized cells of *init* smaller than *threshold* by those of *start*."""
    values = _values(init)
    fresh = _values(start)
    small = np.abs(values) < threshold
    small[0] = False
    values[small] = fresh[small]
    return values


def extract_active(b_hat, threshold, structure=None):
    """Active groups, active cells and signs of a coefficient matrix.

    A cell is active when its magnitude reaches *threshold*; a group when
    any of its cells is active. Groups default to one per covariate.

    Returns:
        ActiveSet: ``(groups, cells, signs)`` with *signs* in coefficient layout.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    values = _values(b_hat)
    structure = structure or GroupStructure.by_row(values.shape[0] - 1, values.shape[1])
    cell_values = structure.values(values)
    live = np.abs(cell_values) >= threshold
    cells = tuple(sorted(zip(structure.rows[live].tolist(), structure.cols[live].tolist())))
    groups = tuple(sorted(set(structure.group_index[live].tolist())))
    signs = np.zeros(values.shape, dtype=np.int64)
    signs[structure.rows[live], structure.cols[live]] = np.sign(cell_values[live]).astype(np.int64)
    return ActiveSet(groups, cells, signs)


def fit_count_sgl(kind, data, config, controls=None, init=None):
    """Fit a sparse group lasso penalized count regression.

    Without *init* the fit starts from :func:`unpenalized_start`. A fit
    starting at zero takes its first sweep without the penalty. Under the
    :class:`~countsift.penalty.Drop` policy saturated cells and groups are
    removed for good, and cells of *init* that are already below the drop
    threshold are removed before the first sweep. Unless
    ``controls.drop_vanishing`` is off, cells and groups whose iterates are
    converging geometrically to zero are removed as well.

    Args:
        kind (ModelKind): Count model.
        data (CountDataset): Observations.
        config (PenaltyConfig): Penalty over a ``(p+1) x d_e`` structure.
        controls (FitControls): Solver controls.
        init: Optional starting coefficients.

    Returns:
        FitResult

    Raises:
        FitError: On non-finite objectives or a failed factorization.
    """
    kind = ModelKind.parse(kind)
    controls = controls or FitControls()
    D = data.n_categories
    if D < kind.min_categories:
        raise FitError("{} regression needs at least {} categories".format(kind.name, kind.min_categories))
    shape = (data.p + 1, kind.n_columns(D))
    if config.structure.shape != shape:
        raise PenaltyError("Group structure of shape {} does not match {}x{} coefficients".format(
            config.structure.shape, *shape))
    if init is None:
        init = unpenalized_start(kind, data, controls.warm_start.sweeps, controls)
    b = _values(init)
    if b.shape != shape:
        raise PenaltyError("Initial coefficients must be {}x{}".format(*shape))
    method, clamp = controls.sum_method, controls.clamp_bound
    LOG.info("Fitting %s with lambda=%g alpha=%g", kind.name, config.lam, config.alpha)

    def current_objective(values):
        value = objective(kind, values, data, config, smoothed=True, method=method, clamp_bound=clamp)
        if not np.isfinite(value):
            raise FitError("Objective became non-finite")
        return value

    active = np.ones(shape, dtype=bool)
    drops = []
    at_origin = not np.any(b[1:])
    vanishing = controls.drop_vanishing and config.lam > 0 and isinstance(config.epsilon_policy, Drop)
    history = deque(maxlen=4)
    previous = None
    if not at_origin:
        if config.lam > 0 and isinstance(config.epsilon_policy, Drop):
            mask, events = saturation_events(compute_ridge_weights(b, config), active, 0)
            b[mask] = 0.0
            active &= ~mask
            drops.extend(events)
        previous = current_objective(b)
        history.append(b.copy())
    trace = []
    converged = False
    iteration = 0
    for iteration in range(1, controls.max_iter + 1):
        first_from_origin = at_origin and iteration == 1
        old = b.copy()
        result = sweep(kind, data, b, None if first_from_origin else config, controls, active, iteration,
                       warm=first_from_origin)
        b = result.b
        dropped = list(result.drop_events)
        if vanishing and not first_from_origin:
            history.append(b.copy())
            mask, events = vanishing_events(np.array(history), config, active, iteration,
                                            controls.zero_report_threshold)
            if events:
                b[mask] = 0.0
                active &= ~mask
                dropped.extend(events)
                history[-1] = b.copy()
        drops.extend(dropped)
        current = current_objective(b)
        trace.append(current)
        change = coefficient_change(b, old, controls.zero_report_threshold)
        if previous is not None and not dropped:
            relative = abs(previous - current) / (1.0 + abs(current))
            if relative < controls.tol and change < controls.coef_tol:
                converged = True
                break
        previous = current
    clamps = linear_predictor(data.x, b, clamp)[1]
    if not converged:
        LOG.warning("%s fit at lambda=%g alpha=%g did not converge in %d iterations",
                    kind.name, config.lam, config.alpha, controls.max_iter)
    structure = config.structure
    reported = b.copy()
    small = np.abs(reported[structure.rows, structure.cols]) < controls.zero_report_threshold
    reported[structure.rows[small], structure.cols[small]] = 0.0
    found = extract_active(reported, controls.zero_report_threshold, structure)
    final = loglik(kind, reported, data, method, clamp)
    LOG.info("%s fit finished after %d iterations: loglik=%.6f, %d active cells, converged=%s",
             kind.name, iteration, final, len(found.cells), converged)
    return FitResult(b_hat=CoefficientMatrix(reported, kind), objective_trace=tuple(trace), loglik_final=final,
                     active_groups=found.groups, active_cells=found.cells, kappa=len(found.cells),
                     converged=converged, iterations=iteration, drop_events=tuple(drops), n_obs=data.n,
                     n_penalized=max(data.p * shape[1], 1), clamp_events=clamps)
