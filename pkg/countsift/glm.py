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
"""Generalized linear models fitted by iteratively reweighted ridge regression.

Each iteration forms the IRLS working weights and responses at the current
coefficients, replaces the sparse group lasso penalty by its ridge
surrogate and solves the resulting weighted ridge system in closed form.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, ldl
from scipy.special import expit, gammaln

from countsift.config import FitControls
from countsift.data import DesignMatrix
from countsift.errors import FactorizationError, FitError, PenaltyError
from countsift.penalty import (Drop, GroupStructure, PenaltyConfig, compute_ridge_weights, eval_sgl_penalty,
                               null_lambda, saturation_events, vanishing_events)

LOG = logging.getLogger(__name__)


class GlmFamily(object):
    """Exponential family with its canonical link."""

    name = None

    def link(self, mu):
        raise NotImplementedError

    def inverse_link(self, eta):
        raise NotImplementedError

    def variance(self, mu):
        raise NotImplementedError

    def deta_dmu(self, mu):
        raise NotImplementedError

    def loglik(self, y, eta):
        """Log-likelihood of responses *y* at linear predictors *eta*."""
        raise NotImplementedError

    def check_response(self, y):
        if not np.all(np.isfinite(y)):
            raise ValueError("Responses must be finite")

    def __repr__(self):
        return "<GlmFamily {}>".format(self.name)


class PoissonFamily(GlmFamily):
    """Poisson responses with the log link."""

    name = "poisson"

    def link(self, mu):
        return np.log(mu)

    def inverse_link(self, eta):
        return np.exp(eta)

    def variance(self, mu):
        return mu

    def deta_dmu(self, mu):
        return 1.0 / mu

    def loglik(self, y, eta):
        return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))

    def check_response(self, y):
        super().check_response(y)
        if np.any(y < 0):
            raise ValueError("Poisson responses must be non-negative")


class BinomialFamily(GlmFamily):
    """Bernoulli responses with the logit link."""

    name = "binomial"

    def link(self, mu):
        return np.log(mu) - np.log1p(-mu)

    def inverse_link(self, eta):
        return expit(eta)

    def variance(self, mu):
        return mu * (1.0 - mu)

    def deta_dmu(self, mu):
        return 1.0 / (mu * (1.0 - mu))

    def loglik(self, y, eta):
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

    def check_response(self, y):
        super().check_response(y)
        if np.any((y < 0) | (y > 1)):
            raise ValueError("Binomial responses must lie in [0, 1]")


POISSON = PoissonFamily()
BINOMIAL = BinomialFamily()


@dataclass(frozen=True, eq=False)
class WorkingQuantities:
    """IRLS weights ``gamma`` and working responses ``z`` at an expansion point."""

    gamma: np.ndarray
    z: np.ndarray
    eta: np.ndarray
    clamped: int = 0


@dataclass(frozen=True, eq=False)
class GlmFitResult:
    beta: np.ndarray
    objective_trace: Tuple[float, ...]
    active_set: Tuple[int, ...]
    converged: bool
    iterations: int
    loglik: float
    drop_events: tuple = ()
    clamp_events: int = 0


def _design_values(x):
    if isinstance(x, DesignMatrix):
        return np.asarray(x.values)
    values = np.asarray(x, dtype=float)
    if values.ndim != 2:
        raise ValueError("Design must be a 2-D array")
    return values


def _smallest_pivot(gram):
    try:
        _, pivots, _ = ldl(gram)
        return float(np.min(np.diag(pivots)))
    except (LinAlgError, ValueError):
        return float("nan")


def solve_weighted_ridge(x, gamma, z, penalty_diag):
    """Solve ``(X' G X + diag(penalty_diag)) b = X' G z`` by Cholesky factorization.

    Args:
        x (DesignMatrix or numpy.ndarray): ``n x k`` design.
        gamma (numpy.ndarray): Non-negative observation weights.
        z (numpy.ndarray): Working responses.
        penalty_diag (numpy.ndarray): Non-negative ridge terms, one per column.

    Raises:
        FactorizationError: If the system is not positive definite.
    """
    values = _design_values(x)
    gamma = np.asarray(gamma, dtype=float)
    z = np.asarray(z, dtype=float)
    penalty_diag = np.asarray(penalty_diag, dtype=float)
    if penalty_diag.shape != (values.shape[1],):
        raise ValueError("Expected {} ridge terms, got {}".format(values.shape[1], penalty_diag.shape))
    if np.any(penalty_diag < 0) or np.any(gamma < 0):
        raise ValueError("Weights and ridge terms must be non-negative")
    weighted = values * gamma[:, None]
    gram = values.T @ weighted
    gram[np.diag_indices_from(gram)] += penalty_diag
    rhs = weighted.T @ z
    if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(rhs))):
        raise FitError("Weighted ridge system has non-finite entries")
    try:
        factor = cho_factor(gram, lower=True, check_finite=False)
    except LinAlgError:
        pivot = _smallest_pivot(gram)
        raise FactorizationError("Weighted ridge system is not positive definite "
                                 "(smallest pivot {!r})".format(pivot), smallest_pivot=pivot)
    return cho_solve(factor, rhs, check_finite=False)


def coefficient_change(new, old, threshold):
    """Largest relative change ``|new - old| / |new|`` over coefficients of magnitude at least *threshold*.

    Coefficients below *threshold* are reported as zero and do not count.
    """
    new = np.asarray(new, dtype=float)
    old = np.asarray(old, dtype=float)
    live = np.abs(new) >= threshold
    if not live.any():
        return 0.0
    return float(np.max(np.abs(new[live] - old[live]) / np.abs(new[live])))


def _linear_predictor(values, beta, clamp_bound):
    eta = values @ beta
    clipped = np.clip(eta, -clamp_bound, clamp_bound)
    return clipped, int(np.count_nonzero(clipped != eta))


def glm_working(family, x, y, beta_t, clamp_bound=30.0):
    """IRLS weights and working responses at *beta_t*.

    Linear predictors are clipped to ``[-clamp_bound, clamp_bound]``; the
    number of clipped entries is returned as ``clamped``.

    Raises:
        FitError: If a weight is not positive or a value is not finite.
    """
    values = _design_values(x)
    y = np.asarray(y, dtype=float)
    eta, clamped = _linear_predictor(values, np.asarray(beta_t, dtype=float), clamp_bound)
    if clamped:
        LOG.debug("Clamped %d linear predictors to +/-%g", clamped, clamp_bound)
    mu = family.inverse_link(eta)
    deta = family.deta_dmu(mu)
    gamma = 1.0 / (family.variance(mu) * deta ** 2)
    z = eta + (y - mu) * deta
    bad = ~(np.isfinite(gamma) & np.isfinite(z) & (gamma > 0))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise FitError("Invalid working quantities for observation {}".format(i), observation=i)
    return WorkingQuantities(gamma, z, eta, clamped)


def glm_loglik(family, x, y, beta, clamp_bound=30.0):
    """Log-likelihood of *beta*, with the same predictor clipping as the fitter."""
    eta, _ = _linear_predictor(_design_values(x), np.asarray(beta, dtype=float), clamp_bound)
    return family.loglik(np.asarray(y, dtype=float), eta)


def halve_step(start, candidate, value, max_halvings):
    """Move from *start* toward *candidate* until *value* does not increase.

    The full step is tried first and halved up to *max_halvings* times; if
    every trial increases *value* the update is rejected and *start* returned.
    """
    baseline = value(start)
    step = 1.0
    for _ in range(max_halvings + 1):
        trial = start + step * (candidate - start)
        if value(trial) <= baseline:
            return trial
        step *= 0.5
    LOG.debug("Update rejected after %d halvings", max_halvings)
    return start


def fit_glm_sgl(x, y, family, config, controls=None, init=None):
    """Fit a sparse group lasso penalized GLM.

    Starting from zero (or *init*), every iteration solves the weighted
    ridge system built from the IRLS quantities and the ridge weights at
    the current coefficients. A fit started at zero takes its first step
    without the penalty since the ridge weights are undefined there. Under
    the :class:`~countsift.penalty.Drop` policy saturated covariates, and
    covariates converging geometrically to zero, are removed from the design
    for good.

    Args:
        x (DesignMatrix or numpy.ndarray): ``n x (p+1)`` design, intercept first.
        y (numpy.ndarray): Responses.
        family (GlmFamily): Response family.
        config (PenaltyConfig): Penalty over a ``(p+1) x 1`` group structure.
        controls (FitControls): Iteration controls.
        init (numpy.ndarray): Optional starting coefficients.

    Returns:
        GlmFitResult
    """
    controls = controls or FitControls()
    values = _design_values(x)
    y = np.asarray(y, dtype=float)
    family.check_response(y)
    n_coef = values.shape[1]
    if config.structure.shape != (n_coef, 1):
        raise PenaltyError("Group structure of shape {} does not match {} coefficients".format(
            config.structure.shape, n_coef))
    beta = np.zeros(n_coef) if init is None else np.array(init, dtype=float).reshape(n_coef)
    active = np.ones((n_coef, 1), dtype=bool)
    dropping = isinstance(config.epsilon_policy, Drop)
    at_origin = not np.any(beta[1:])
    vanishing = dropping and controls.drop_vanishing and config.lam > 0
    history = deque(maxlen=4)

    def objective(b):
        return -glm_loglik(family, values, y, b, controls.clamp_bound) + eval_sgl_penalty(b, config, smoothed=True)

    previous = None if at_origin else objective(beta)
    trace, drops = [], []
    clamps = 0
    converged = False
    iteration = 0
    for iteration in range(1, controls.max_iter + 1):
        penalized = config.lam > 0 and not (at_origin and iteration == 1)
        dropped = False
        nu = np.zeros(n_coef)
        if penalized:
            weights = compute_ridge_weights(beta, config)
            if dropping:
                mask, events = saturation_events(weights, active, iteration)
                if events:
                    beta[mask[:, 0]] = 0.0
                    active &= ~mask
                    drops.extend(events)
                    dropped = True
                    weights = compute_ridge_weights(beta, config)
            nu = weights.matrix()[:, 0]
        cols = np.flatnonzero(active[:, 0])
        sub = values[:, cols]
        work = glm_working(family, sub, y, beta[cols], controls.clamp_bound)
        clamps += work.clamped
        ridge = 2.0 * config.lam * nu[cols] if penalized else np.zeros(cols.size)
        candidate = solve_weighted_ridge(sub, work.gamma, work.z, ridge)

        def surrogate(b):
            return -glm_loglik(family, sub, y, b, controls.clamp_bound) + 0.5 * np.dot(ridge, b ** 2)

        old = beta[cols].copy()
        beta[cols] = halve_step(old, candidate, surrogate, controls.max_halvings)
        if vanishing and penalized:
            history.append(beta[:, None].copy())
            mask, events = vanishing_events(np.array(history), config, active, iteration,
                                            controls.zero_report_threshold)
            if events:
                beta[mask[:, 0]] = 0.0
                active &= ~mask
                drops.extend(events)
                dropped = True
                history[-1] = beta[:, None].copy()
        current = objective(beta)
        if not np.isfinite(current):
            raise FitError("Objective became non-finite at iteration {}".format(iteration))
        trace.append(current)
        change = coefficient_change(beta[cols], old, controls.zero_report_threshold)
        if previous is not None and not dropped:
            relative = abs(previous - current) / (1.0 + abs(current))
            if relative < controls.tol and change < controls.coef_tol:
                converged = True
                break
        previous = current
    if not converged:
        LOG.warning("GLM fit did not converge in %d iterations", controls.max_iter)
    active_set = tuple(int(j) for j in range(1, n_coef) if abs(beta[j]) >= controls.zero_report_threshold)
    return GlmFitResult(beta=beta, objective_trace=tuple(trace), active_set=active_set, converged=converged,
                        iterations=iteration, loglik=glm_loglik(family, values, y, beta, controls.clamp_bound),
                        drop_events=tuple(drops), clamp_events=clamps)


def glm_lambda_max(x, y, family, alpha, structure=None, controls=None):
    """Smallest penalty giving the intercept-only model, from the KKT conditions at that model."""
    values = _design_values(x)
    structure = structure or GroupStructure.singletons(values.shape[1] - 1)
    null = fit_glm_sgl(values[:, :1], y, family, PenaltyConfig(0.0, alpha, GroupStructure([], (1, 1))), controls)
    beta = np.zeros(values.shape[1])
    beta[0] = null.beta[0]
    work = glm_working(family, values, y, beta)
    gradient = values.T @ (work.gamma * (work.z - work.eta))
    return null_lambda(gradient[:, None], structure, alpha)


def fit_glm_path(x, y, family, lambdas, alpha, structure=None, controls=None, epsilon_policy=None):
    """Fit a descending sequence of penalties with warm starts.

    Coefficients that vanished at the previous penalty are restarted from
    the unpenalized fit. Decreases of the active count as the penalty
    decreases are logged.

    Returns:
        list: One :class:`GlmFitResult` per penalty, in the given order.
    """
    controls = controls or FitControls()
    values = _design_values(x)
    lambdas = [float(lam) for lam in lambdas]
    if any(a <= b for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("Path penalties must be strictly decreasing")
    structure = structure or GroupStructure.singletons(values.shape[1] - 1)
    policy = epsilon_policy or Drop()
    start = fit_glm_sgl(values, y, family, PenaltyConfig(0.0, alpha, structure, policy), controls).beta
    fits = []
    init = start
    for lam in lambdas:
        fit = fit_glm_sgl(values, y, family, PenaltyConfig(lam, alpha, structure, policy), controls, init=init)
        if fits and len(fit.active_set) < len(fits[-1].active_set):
            LOG.warning("Active count fell from %d to %d when lambda decreased to %g",
                        len(fits[-1].active_set), len(fit.active_set), lam)
        fits.append(fit)
        init = np.where(np.abs(fit.beta) < controls.zero_report_threshold, start, fit.beta)
        init[0] = fit.beta[0]
    return fits
