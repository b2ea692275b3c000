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
"""Sparse group lasso penalty and its dominating hyperplane ridge surrogate.

Coefficients live in a ``(p+1) x d_e`` matrix. Row 0 holds the unpenalized
intercepts; every other cell belongs to exactly one group. The penalty is

    J(B) = alpha * sum |b_jd| + (1 - alpha) * sum_j sqrt(D_j) * ||b_j||

scaled by ``lambda``, and at an expansion point ``B_t`` it is majorized by
``C_t + lambda * sum nu_jd * b_jd**2`` with ridge weights

    nu_jd = alpha / (2 |b_t,jd|) + (1 - alpha) * sqrt(D_j) / (2 ||b_t,j||).
"""

import logging
from collections import namedtuple
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import brentq

from countsift.errors import PenaltyError

LOG = logging.getLogger(__name__)

#: Ridge weights above this value mark a cell or group as saturated.
WEIGHT_CAP = 1e10

#: Successive contraction ratios of a vanishing series differ by at most this
#: share of the remaining contraction ``1 - rate``.
VANISH_RATIO_TOL = 0.01

#: An extrapolated limit below this share of the current magnitude counts as zero.
VANISH_SHARE = 0.05

#: A cell or group removed from the working design at *iteration*. *target* is
#: ``"group"`` (index: group number) or ``"cell"`` (index: ``(row, column)``).
DropEvent = namedtuple("DropEvent", ["iteration", "target", "index"])


class GroupStructure(object):
    """Disjoint groups of penalized coefficient cells.

    Args:
        groups (list): One list of ``(row, column)`` cells per group.
        shape (tuple): Shape ``(p+1, d_e)`` of the coefficient matrix.
    """

    def __init__(self, groups, shape):
        self.shape = (int(shape[0]), int(shape[1]))
        self.groups = tuple(tuple((int(r), int(c)) for r, c in group) for group in groups)
        rows, cols, index = [], [], []
        for g, group in enumerate(self.groups):
            if not group:
                raise PenaltyError("Group {} is empty".format(g))
            for r, c in group:
                rows.append(r)
                cols.append(c)
                index.append(g)
        self.rows = np.array(rows, dtype=np.int64)
        self.cols = np.array(cols, dtype=np.int64)
        self.group_index = np.array(index, dtype=np.int64)
        self.sizes = np.bincount(self.group_index, minlength=len(self.groups)).astype(np.int64)
        self._validate()

    def _validate(self):
        if self.rows.size == 0:
            return
        if self.rows.min() < 1:
            raise PenaltyError("Intercept cells (row 0) cannot be penalized")
        if self.rows.max() >= self.shape[0] or self.cols.min() < 0 or self.cols.max() >= self.shape[1]:
            raise PenaltyError("Group cells fall outside a {}x{} coefficient matrix".format(*self.shape))
        flat = self.rows * self.shape[1] + self.cols
        if np.unique(flat).size != flat.size:
            raise PenaltyError("Groups overlap")

    @classmethod
    def by_row(cls, p, d_e):
        """One group per covariate spanning all of its columns."""
        return cls([[(j, d) for d in range(d_e)] for j in range(1, p + 1)], (p + 1, d_e))

    @classmethod
    def singletons(cls, p, d_e=1):
        """One group per penalized cell."""
        return cls([[(j, d)] for j in range(1, p + 1) for d in range(d_e)], (p + 1, d_e))

    @property
    def n_groups(self):
        return len(self.groups)

    @property
    def n_cells(self):
        """Number of penalized cells, ``K``."""
        return int(self.rows.size)

    def values(self, beta):
        """Gather the penalized cells of *beta* in group order."""
        beta = np.asarray(beta, dtype=float)
        if beta.ndim == 1 and self.shape[1] == 1:
            beta = beta[:, None]
        if beta.shape != self.shape:
            raise PenaltyError("Coefficients of shape {} do not cover a {}x{} group structure".format(
                beta.shape, *self.shape))
        return beta[self.rows, self.cols]

    def scatter(self, cell_values, fill=0.0):
        """Place per-cell values back into a coefficient-shaped matrix."""
        out = np.full(self.shape, fill, dtype=float)
        out[self.rows, self.cols] = cell_values
        return out

    def group_norms(self, cell_values, epsilon=0.0):
        squares = np.bincount(self.group_index, weights=np.square(cell_values), minlength=self.n_groups)
        return np.sqrt(squares + epsilon ** 2)


@dataclass(frozen=True)
class Drop:
    """Drop cells and groups once they vanish or their weights saturate."""

    threshold: float = 1e-8

    def __post_init__(self):
        if not self.threshold > 0:
            raise PenaltyError("Drop threshold must be positive")


@dataclass(frozen=True)
class Perturb:
    """Smooth the penalty with ``|b| -> sqrt(b**2 + eps**2)``."""

    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.epsilon > 0:
            raise PenaltyError("Perturbation epsilon must be positive")


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty strength, lasso/group balance, groups and zero handling."""

    lam: float
    alpha: float
    structure: GroupStructure
    epsilon_policy: Union[Drop, Perturb] = field(default_factory=Drop)

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise PenaltyError("lambda must be a finite non-negative number, got {!r}".format(self.lam))
        if not 0 <= self.alpha <= 1:
            raise PenaltyError("alpha must lie in [0, 1], got {!r}".format(self.alpha))
        if not isinstance(self.epsilon_policy, (Drop, Perturb)):
            raise PenaltyError("Unknown epsilon policy {!r}".format(self.epsilon_policy))

    @classmethod
    def lasso(cls, lam, structure, epsilon_policy=None):
        return cls(lam, 1.0, structure, epsilon_policy or Drop())

    @classmethod
    def group(cls, lam, structure, epsilon_policy=None):
        return cls(lam, 0.0, structure, epsilon_policy or Drop())

    @property
    def epsilon(self):
        """Smoothing constant, zero unless the policy is :class:`Perturb`."""
        return self.epsilon_policy.epsilon if isinstance(self.epsilon_policy, Perturb) else 0.0

    def with_lambda(self, lam):
        return PenaltyConfig(lam, self.alpha, self.structure, self.epsilon_policy)


@dataclass(frozen=True, eq=False)
class RidgeWeights:
    """Per-cell ridge weights of the surrogate at an expansion point.

    ``nu`` is aligned with the cells of ``structure``. Saturated cells carry
    ``inf``; ``saturated`` flags groups and ``saturated_cells`` flags cells.
    """

    structure: GroupStructure
    nu: np.ndarray
    saturated_cells: np.ndarray
    saturated: np.ndarray

    def matrix(self):
        """Weights in coefficient layout, 0 on the intercept row."""
        return self.structure.scatter(self.nu)


def _absolute(values, epsilon):
    if epsilon:
        return np.sqrt(np.square(values) + epsilon ** 2)
    return np.abs(values)


def eval_sgl_penalty(beta, config, smoothed=False):
    """Evaluate ``lambda * J(beta)``, intercepts excluded.

    Args:
        beta (numpy.ndarray): Coefficient matrix matching ``config.structure``.
        config (PenaltyConfig): Penalty settings.
        smoothed (bool): Use the perturbed penalty when the policy is Perturb.

    Raises:
        PenaltyError: If *beta* does not match the group structure.
    """
    structure = config.structure
    values = structure.values(beta)
    if config.lam == 0 or values.size == 0:
        return 0.0
    epsilon = config.epsilon if smoothed else 0.0
    lasso = _absolute(values, epsilon).sum()
    group = np.dot(np.sqrt(structure.sizes), structure.group_norms(values, epsilon))
    return float(config.lam * (config.alpha * lasso + (1.0 - config.alpha) * group))


def compute_ridge_weights(beta_t, config):
    """Ridge weights of the dominating hyperplane surrogate at *beta_t*.

    Under :class:`Drop` a vanishing cell (only when ``alpha > 0``) or group
    is flagged as saturated and given an infinite weight instead of raising.
    """
    structure = config.structure
    values = structure.values(beta_t)
    alpha = config.alpha
    epsilon = config.epsilon
    sqrt_sizes = np.sqrt(structure.sizes)
    absolute = _absolute(values, epsilon)
    norms = structure.group_norms(values, epsilon)
    with np.errstate(divide="ignore", invalid="ignore"):
        cell_term = alpha / (2.0 * absolute) if alpha > 0 else np.zeros_like(values)
        group_term = (1.0 - alpha) * sqrt_sizes / (2.0 * norms) if alpha < 1 else np.zeros_like(norms)
    nu = cell_term + group_term[structure.group_index]
    nu = np.where(np.isnan(nu), np.inf, nu)
    if isinstance(config.epsilon_policy, Drop):
        threshold = config.epsilon_policy.threshold
        saturated = (norms < threshold) | (group_term > WEIGHT_CAP)
        saturated_cells = saturated[structure.group_index].copy()
        if alpha > 0:
            saturated_cells |= (absolute < threshold) | (nu > WEIGHT_CAP)
        if structure.n_groups:
            full = np.bincount(structure.group_index, weights=saturated_cells, minlength=structure.n_groups)
            saturated |= full == structure.sizes
    else:
        saturated = np.zeros(structure.n_groups, dtype=bool)
        saturated_cells = np.zeros(values.shape, dtype=bool)
    return RidgeWeights(structure, nu, saturated_cells, saturated)


def eval_surrogate(beta, beta_t, config):
    """Evaluate the ridge surrogate of ``lambda * J`` expanded at *beta_t*.

    The value is ``C_t + lambda * sum(nu * beta**2)`` where ``C_t`` makes the
    surrogate touch the (smoothed) penalty at *beta_t*; with no smoothing
    ``C_t = lambda * J(beta_t) / 2``.

    Raises:
        PenaltyError: If a weight at *beta_t* is infinite (a zero cell or
            group without smoothing).
    """
    values = config.structure.values(beta)
    if config.lam == 0:
        return 0.0
    weights = compute_ridge_weights(beta_t, config)
    if not np.all(np.isfinite(weights.nu)):
        raise PenaltyError("Surrogate is undefined at an expansion point with zero cells; use Perturb")
    values_t = config.structure.values(beta_t)
    constant = eval_sgl_penalty(beta_t, config, smoothed=True) - config.lam * np.dot(weights.nu, values_t ** 2)
    return float(constant + config.lam * np.dot(weights.nu, values ** 2))


def _group_null_lambda(gradient, size, alpha):
    scale = np.abs(gradient)
    top = scale.max(initial=0.0)
    if top == 0:
        return 0.0
    if alpha == 0:
        return float(np.linalg.norm(gradient) / np.sqrt(size))
    if alpha == 1:
        return float(top)

    def excess(lam):
        shrunk = np.maximum(scale - alpha * lam, 0.0)
        return np.linalg.norm(shrunk) - (1.0 - alpha) * lam * np.sqrt(size)

    return float(brentq(excess, 0.0, top / alpha, xtol=1e-14, rtol=1e-12))


def null_lambda(gradient, structure, alpha):
    """Smallest ``lambda`` at which zero penalized coefficients satisfy the KKT conditions.

    Args:
        gradient (numpy.ndarray): Log-likelihood gradient in coefficient layout,
            evaluated where all penalized cells are zero.
        structure (GroupStructure): Penalized groups.
        alpha (float): Lasso/group balance.
    """
    values = structure.values(gradient)
    best = 0.0
    for g in range(structure.n_groups):
        members = values[structure.group_index == g]
        best = max(best, _group_null_lambda(members, structure.sizes[g], alpha))
    return best


def _drop_mask(structure, hit, whole, iteration):
    """Mask and events for the flagged cells *hit*; groups flagged in *whole* drop as a unit."""
    mask = np.zeros(structure.shape, dtype=bool)
    if not hit.any():
        return mask, []
    events = []
    for g in np.unique(structure.group_index[hit]):
        if whole[g]:
            events.append(DropEvent(iteration, "group", int(g)))
    for i in np.flatnonzero(hit):
        if not whole[structure.group_index[i]]:
            events.append(DropEvent(iteration, "cell", (int(structure.rows[i]), int(structure.cols[i]))))
    mask[structure.rows[hit], structure.cols[hit]] = True
    for event in events:
        LOG.debug("Dropping %s %s at iteration %d", event.target, event.index, iteration)
    return mask, events


def saturation_events(weights, active, iteration):
    """Find active cells whose weights saturated.

    Args:
        weights (RidgeWeights): Weights at the current coefficients.
        active (numpy.ndarray): Boolean coefficient-shaped mask of live cells.
        iteration (int): Iteration number recorded in the events.

    Returns:
        tuple: Boolean mask of cells to drop and the list of :data:`DropEvent`.
    """
    structure = weights.structure
    hit = weights.saturated_cells & active[structure.rows, structure.cols]
    return _drop_mask(structure, hit, weights.saturated, iteration)


def _vanishing(series, threshold):
    """Flag the columns of *series*, oldest row first, that are converging to zero."""
    last, before = series[-1], series[-2]
    steps = np.diff(series, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = steps[1:] / steps[:-1]
        rate = ratios[-1]
        steady = np.all((ratios > 0) & (ratios < 1), axis=0)
        steady &= np.abs(ratios[-1] - ratios[-2]) <= VANISH_RATIO_TOL * (1.0 - rate)
        limit = last + steps[-1] * rate / (1.0 - rate)
    toward_zero = np.sign(steps[-1]) == -np.sign(last)
    bound = np.maximum(threshold, VANISH_SHARE * np.abs(last))
    extrapolated = steady & toward_zero & (np.abs(limit) < bound)
    return (np.abs(last) < np.abs(before)) & (extrapolated | (np.abs(last) < threshold))


def vanishing_events(history, config, active, iteration, threshold):
    """Find active cells and groups whose iterates are converging to zero.

    A series vanishes when it shrinks and is either below *threshold* or
    contracts geometrically, at a steady rate, toward a limit whose Aitken
    extrapolation is negligible. Groups are judged by their norms, single
    cells only when ``alpha > 0``.

    Args:
        history (numpy.ndarray): At least four coefficient matrices, oldest first.
        config (PenaltyConfig): Penalty whose structure defines cells and groups.
        active (numpy.ndarray): Boolean coefficient-shaped mask of live cells.
        iteration (int): Iteration number recorded in the events.
        threshold (float): Magnitude reported as zero.

    Returns:
        tuple: Boolean mask of cells to drop and the list of :data:`DropEvent`.
    """
    structure = config.structure
    history = np.asarray(history, dtype=float)
    if history.shape[0] < 4 or structure.n_cells == 0:
        return np.zeros(structure.shape, dtype=bool), []
    values = history[:, structure.rows, structure.cols]
    live = active[structure.rows, structure.cols]
    norms = np.stack([structure.group_norms(row) for row in values])
    groups = _vanishing(norms, threshold)
    hit = groups[structure.group_index]
    if config.alpha > 0:
        hit = hit | _vanishing(values, threshold)
    hit &= live
    whole = groups.copy()
    if structure.n_groups:
        counted = np.bincount(structure.group_index, weights=hit | ~live, minlength=structure.n_groups)
        whole |= counted == structure.sizes
    return _drop_mask(structure, hit, whole, iteration)
