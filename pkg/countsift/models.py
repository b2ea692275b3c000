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
"""Multivariate count regression models.

Four models are supported, each with its own layout of the ``(p+1) x d_e``
coefficient matrix:

* ``MN``, multinomial: ``beta_1 .. beta_{D-1}``, category ``D`` is the reference.
* ``DM``, Dirichlet-multinomial: ``beta_1 .. beta_D``.
* ``NM``, negative multinomial: ``beta, alpha_1 .. alpha_D``.
* ``GDM``, generalized Dirichlet-multinomial: ``alpha_1 .. alpha_{D-1}, beta_1 .. beta_{D-1}``.

For every model the log-likelihood is minorized, column by column, by a
weighted Poisson log-likelihood ``sum_i ystar_i * eta_i - w_i * exp(eta_i - eta_t,i)``
whose weights ``w`` and pseudo-responses ``ystar`` are computed here. The
IRLS form used by the ridge solver is ``z = eta_t + (ystar - w) / w``.
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from countsift.data import CountMatrix, DesignMatrix
from countsift.errors import ConfigurationError, DataError, FitError
from countsift.special import log_rising, ratio_rising, reciprocal_rising
from countsift.streams import rng_stream

LOG = logging.getLogger(__name__)


class ModelKind(enum.Enum):
    """The supported count models."""

    MN = "mn"
    DM = "dm"
    NM = "nm"
    GDM = "gdm"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError("Unknown model '{}', use one of {}".format(
                value, [kind.value for kind in cls]))

    @property
    def min_categories(self):
        return 2 if self in (ModelKind.MN, ModelKind.GDM) else 1

    def n_columns(self, n_categories):
        """Coefficient column count ``d_e`` for *n_categories* categories."""
        D = n_categories
        if self is ModelKind.MN:
            return D - 1
        if self is ModelKind.DM:
            return D
        if self is ModelKind.NM:
            return D + 1
        return 2 * (D - 1)

    def n_categories(self, n_columns):
        """Inverse of :meth:`n_columns`."""
        if self is ModelKind.MN:
            return n_columns + 1
        if self is ModelKind.DM:
            return n_columns
        if self is ModelKind.NM:
            return n_columns - 1
        return n_columns // 2 + 1

    def column_roles(self, n_categories):
        D = n_categories
        if self is ModelKind.MN:
            return ["beta_{}".format(d) for d in range(1, D)]
        if self is ModelKind.DM:
            return ["beta_{}".format(d) for d in range(1, D + 1)]
        if self is ModelKind.NM:
            return ["beta"] + ["alpha_{}".format(d) for d in range(1, D + 1)]
        return ["alpha_{}".format(d) for d in range(1, D)] + ["beta_{}".format(d) for d in range(1, D)]

    def update_blocks(self, n_categories):
        """Column blocks updated in sequence; columns within a block share one expansion point."""
        columns = list(range(self.n_columns(n_categories)))
        if self is ModelKind.NM:
            return [columns[:1], columns[1:]]
        return [columns]


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """Regression coefficients of a count model, intercepts in row 0."""

    b: np.ndarray
    kind: ModelKind

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        kind = ModelKind.parse(self.kind)
        if b.ndim != 2 or b.shape[0] < 1:
            raise DataError("Coefficient matrix must be 2-D with an intercept row")
        if kind.n_columns(kind.n_categories(b.shape[1])) != b.shape[1] or b.shape[1] < 1:
            raise DataError("{} coefficients cannot have {} columns".format(kind.name, b.shape[1]))
        if not np.all(np.isfinite(b)):
            raise DataError("Coefficient matrix has non-finite entries")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "kind", kind)

    @classmethod
    def zeros(cls, kind, p, n_categories):
        kind = ModelKind.parse(kind)
        return cls(np.zeros((p + 1, kind.n_columns(n_categories))), kind)

    @property
    def p(self):
        return self.b.shape[0] - 1

    @property
    def n_categories(self):
        return self.kind.n_categories(self.b.shape[1])

    @property
    def column_roles(self):
        return self.kind.column_roles(self.n_categories)


@dataclass(frozen=True, eq=False)
class ColumnWorking:
    """Working weights ``w``, responses ``z`` and expansion predictors ``eta`` of one column."""

    w: np.ndarray
    z: np.ndarray
    eta: np.ndarray

    @property
    def ystar(self):
        """Pseudo-responses of the weighted Poisson surrogate."""
        return self.w * (1.0 + self.z - self.eta)


@dataclass(frozen=True, eq=False)
class WorkingMatrix:
    """Working quantities of all columns, each ``n x d_e``."""

    w: np.ndarray
    z: np.ndarray
    eta: np.ndarray
    ystar: np.ndarray

    def column(self, d):
        return ColumnWorking(self.w[:, d], self.z[:, d], self.eta[:, d])


def _values(b):
    return np.asarray(b.b if isinstance(b, CoefficientMatrix) else b, dtype=float)


def _check_layout(kind, b, data):
    D = data.n_categories
    if D < kind.min_categories:
        raise DataError("{} regression needs at least {} categories, got {}".format(
            kind.name, kind.min_categories, D))
    expected = (data.p + 1, kind.n_columns(D))
    if b.shape != expected:
        raise DataError("{} coefficients for these data must be {}x{}, got {}".format(
            kind.name, expected[0], expected[1], b.shape))


def linear_predictor(x, b, clamp_bound=30.0):
    """Return ``X @ B`` clipped to ``[-clamp_bound, clamp_bound]`` and the number of clipped entries."""
    eta = np.asarray(x.values if isinstance(x, DesignMatrix) else x) @ _values(b)
    clipped = np.clip(eta, -clamp_bound, clamp_bound)
    return clipped, int(np.count_nonzero(clipped != eta))


def _log1p_sum_exp(eta):
    """Row-wise ``log(1 + sum(exp(eta)))``."""
    top = np.maximum(eta.max(axis=1, initial=-np.inf), 0.0)
    shifted = np.exp(-top) + np.exp(eta - top[:, None]).sum(axis=1)
    small = np.log1p(np.exp(eta).sum(axis=1))
    return np.where(top > 0, top + np.log(shifted), small)


def tail_totals(counts):
    """``zeta[i, d] = sum_{k >= d} y[i, k]``."""
    counts = np.asarray(counts.values if isinstance(counts, CountMatrix) else counts)
    return np.cumsum(counts[:, ::-1], axis=1)[:, ::-1]


def _log_multinomial(y):
    return gammaln(y.sum(axis=1) + 1.0) - gammaln(y + 1.0).sum(axis=1)


def _raise_non_finite(cells, rows, what):
    bad = np.argwhere(~np.isfinite(cells))
    if bad.size:
        i, d = (int(v) for v in bad[0])
        raise FitError("Non-finite {} for observation {}, column {}".format(what, i, d), observation=i, column=d)
    bad = np.flatnonzero(~np.isfinite(rows))
    if bad.size:
        i = int(bad[0])
        raise FitError("Non-finite {} for observation {}".format(what, i), observation=i)


def loglik(kind, b, data, method="special", clamp_bound=30.0):
    """Exact log-likelihood of the count model, normalizing constants included.

    Finite products ``prod_{l<y} (z + l)`` enter as sums of logarithms
    computed by :func:`countsift.special.log_rising`.

    Raises:
        FitError: If a term is not finite; the observation and column are attached.
    """
    kind = ModelKind.parse(kind)
    values = _values(b)
    _check_layout(kind, values, data)
    eta, _ = linear_predictor(data.x, values, clamp_bound)
    y = np.asarray(data.y.values)
    totals = np.asarray(data.y.row_totals)
    n, D = y.shape
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if kind is ModelKind.MN:
            cells = y[:, :D - 1] * eta
            rows = -totals * _log1p_sum_exp(eta) + _log_multinomial(y)
        elif kind is ModelKind.DM:
            a = np.exp(eta)
            cells = log_rising(a, y, method)
            rows = -log_rising(a.sum(axis=1), totals, method) + _log_multinomial(y)
        elif kind is ModelKind.NM:
            size = np.exp(eta[:, 0])
            cells = y * eta[:, 1:]
            rows = (log_rising(size, totals, method) - (size + totals) * _log1p_sum_exp(eta[:, 1:])
                    - gammaln(y + 1.0).sum(axis=1))
        else:
            a = np.exp(eta[:, :D - 1])
            bb = np.exp(eta[:, D - 1:])
            zeta = tail_totals(y)
            cells = (log_rising(a, y[:, :D - 1], method) + log_rising(bb, zeta[:, 1:], method)
                     - log_rising(a + bb, zeta[:, :D - 1], method))
            rows = _log_multinomial(y)
    _raise_non_finite(cells, rows, "log-likelihood term")
    return float(cells.sum() + rows.sum())


def working_matrix(kind, b, data, method="special", clamp_bound=30.0):
    """Working weights and responses of every column at *b*.

    For NM the alpha columns use whatever beta column *b* holds, so the
    caller passes the freshly updated beta when updating the alphas.

    Raises:
        FitError: If a weight is non-finite, or not positive for an
            observation that contributes to its column.
    """
    kind = ModelKind.parse(kind)
    values = _values(b)
    _check_layout(kind, values, data)
    eta, clamped = linear_predictor(data.x, values, clamp_bound)
    if clamped:
        LOG.debug("Clamped %d linear predictors to +/-%g", clamped, clamp_bound)
    y = np.asarray(data.y.values)
    totals = np.asarray(data.y.row_totals)
    n, D = y.shape
    contributing = np.ones(eta.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if kind is ModelKind.MN:
            log_denominator = _log1p_sum_exp(eta)
            w = totals[:, None] * np.exp(eta - log_denominator[:, None])
            ystar = y[:, :D - 1].astype(float)
        elif kind is ModelKind.DM:
            a = np.exp(eta)
            w = a * reciprocal_rising(a.sum(axis=1), totals, method)[:, None]
            ystar = ratio_rising(a, y, method)
        elif kind is ModelKind.NM:
            size = np.exp(eta[:, 0])
            log_denominator = _log1p_sum_exp(eta[:, 1:])
            w_size = size * log_denominator
            w_alpha = np.exp(eta[:, 1:] - log_denominator[:, None]) * (size + totals)[:, None]
            w = np.column_stack([w_size, w_alpha])
            ystar = np.column_stack([ratio_rising(size, totals, method), y.astype(float)])
        else:
            a = np.exp(eta[:, :D - 1])
            bb = np.exp(eta[:, D - 1:])
            zeta = tail_totals(y)
            shared = reciprocal_rising(a + bb, zeta[:, :D - 1], method)
            w = np.hstack([a * shared, bb * shared])
            ystar = np.hstack([ratio_rising(a, y[:, :D - 1], method), ratio_rising(bb, zeta[:, 1:], method)])
            contributing = np.tile(zeta[:, :D - 1] > 0, 2)
        z = np.where(w > 0, eta + (ystar - w) / w, eta)
    bad = ~(np.isfinite(w) & np.isfinite(ystar) & np.isfinite(z)) | (w < 0) | (contributing & (w <= 0))
    if bad.any():
        i, d = (int(v) for v in np.argwhere(bad)[0])
        raise FitError("Invalid working weight for observation {}, column {}".format(i, d), observation=i, column=d)
    return WorkingMatrix(w, z, eta, ystar)


def irprr_working(kind, b_current, data, d, method="special", clamp_bound=30.0):
    """Working weights and responses of column *d* at *b_current*."""
    kind = ModelKind.parse(kind)
    n_columns = kind.n_columns(data.n_categories)
    if not 0 <= d < n_columns:
        raise ValueError("Column {} out of range for {} columns".format(d, n_columns))
    return working_matrix(kind, b_current, data, method, clamp_bound).column(d)


def column_surrogate(x, working, b_col, penalty_diag=None, clamp_bound=30.0):
    """Negative weighted Poisson surrogate of one column plus its ridge term.

    The value is ``sum_i w_i * exp(eta_i - eta_t,i) - ystar_i * eta_i +
    0.5 * sum(penalty_diag * b_col**2)`` with ``eta = X @ b_col``; minimizing
    it over *b_col* is one column update.
    """
    values = np.asarray(x.values if isinstance(x, DesignMatrix) else x)
    b_col = np.asarray(b_col, dtype=float)
    eta = np.clip(values @ b_col, -clamp_bound, clamp_bound)
    with np.errstate(over="ignore", invalid="ignore"):
        value = np.sum(working.w * np.exp(eta - working.eta) - working.ystar * eta)
    if penalty_diag is not None:
        value += 0.5 * np.dot(penalty_diag, b_col ** 2)
    return float(value) if np.isfinite(value) else np.inf


def sample_counts(kind, b, x, totals, rng_seed, keys=()):
    """Draw a count matrix from a DM or MN regression.

    Row ``i`` uses the stream ``(rng_seed, *keys, i)`` so rows do not depend
    on each other. DM rows draw Dirichlet proportions as normalized gamma
    variates; both models then draw a multinomial with the row total.

    Raises:
        ConfigurationError: For NM or GDM.
        DataError: If a total is below 1.
    """
    kind = ModelKind.parse(kind)
    if kind not in (ModelKind.DM, ModelKind.MN):
        raise ConfigurationError("Sampling is only implemented for DM and MN, not {}".format(kind.name))
    totals = np.asarray(totals)
    if np.any(totals < 1):
        raise DataError("Row totals must be at least 1")
    eta, _ = linear_predictor(x, b)
    n = eta.shape[0]
    D = kind.n_categories(eta.shape[1])
    counts = np.zeros((n, D), dtype=np.int64)
    for i in range(n):
        rng = rng_stream(rng_seed, *keys, i)
        if kind is ModelKind.DM:
            draws = rng.standard_gamma(np.exp(eta[i]))
            total = draws.sum()
            if total > 0:
                proportions = draws / total
            else:
                proportions = np.zeros(D)
                proportions[np.argmax(eta[i])] = 1.0
        else:
            full = np.append(eta[i], 0.0)
            proportions = np.exp(full - full.max())
            proportions /= proportions.sum()
        counts[i] = rng.multinomial(int(totals[i]), proportions)
    return CountMatrix(counts)
