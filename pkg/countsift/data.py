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
"""Dataset containers, validation and CSV input/output.

A dataset pairs a design matrix (intercept column first) with a matrix of
non-negative integer counts. Covariate and count files are plain CSV with
a header row; rows are matched by position.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from countsift.errors import DataError

LOG = logging.getLogger(__name__)

#: Reals this close to an integer are accepted as counts.
INTEGER_TOLERANCE = 1e-9


def _frozen(values):
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """An ``n x (p+1)`` design matrix whose first column is the intercept."""

    values: np.ndarray
    covariate_names: Tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError("Design matrix must be 2-D with at least one row and the intercept column")
        if not np.all(np.isfinite(values)):
            rows = np.nonzero(~np.all(np.isfinite(values), axis=1))[0]
            raise DataError("Design matrix has non-finite entries in row {}".format(int(rows[0])))
        if not np.all(values[:, 0] == 1.0):
            raise DataError("Column 0 of the design matrix must be identically 1")
        names = tuple(self.covariate_names) or tuple("x{}".format(j + 1) for j in range(values.shape[1] - 1))
        if len(names) != values.shape[1] - 1:
            raise DataError("Got {} covariate names for {} covariates".format(len(names), values.shape[1] - 1))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "covariate_names", names)

    @classmethod
    def from_covariates(cls, covariates, covariate_names=()):
        """Build a design matrix by prepending the intercept column to *covariates*."""
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates[:, None]
        ones = np.ones((covariates.shape[0], 1))
        return cls(np.hstack([ones, covariates]), tuple(covariate_names))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1] - 1

    @property
    def covariates(self):
        return self.values[:, 1:]


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """An ``n x D`` matrix of non-negative integer counts with positive row totals."""

    values: np.ndarray
    taxa_names: Tuple[str, ...] = ()
    row_totals: np.ndarray = field(init=False)

    def __post_init__(self):
        values = _as_counts(self.values)
        totals = values.sum(axis=1)
        empty = np.nonzero(totals < 1)[0]
        if empty.size:
            raise DataError("Count row {} has a zero total".format(int(empty[0])))
        names = tuple(self.taxa_names) or tuple("t{}".format(d + 1) for d in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DataError("Got {} taxa names for {} count columns".format(len(names), values.shape[1]))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "taxa_names", names)
        object.__setattr__(self, "row_totals", _frozen(totals))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def n_categories(self):
        return self.values.shape[1]


def _as_counts(values):
    values = np.asarray(values)
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise DataError("Count matrix must be 2-D with at least one row and one column")
    if np.issubdtype(values.dtype, np.integer):
        counts = values.astype(np.int64)
    else:
        try:
            reals = values.astype(float)
        except (TypeError, ValueError):
            raise DataError("Counts must be numeric")
        if not np.all(np.isfinite(reals)):
            row = int(np.nonzero(~np.all(np.isfinite(reals), axis=1))[0][0])
            raise DataError("Count row {} has missing or non-finite entries".format(row))
        rounded = np.rint(reals)
        off = np.abs(reals - rounded) > INTEGER_TOLERANCE
        if off.any():
            row, col = (int(i) for i in np.argwhere(off)[0])
            raise DataError("Non-integer count {!r} in row {}, column {}".format(reals[row, col], row, col))
        counts = rounded.astype(np.int64)
    negative = np.argwhere(counts < 0)
    if negative.size:
        row, col = (int(i) for i in negative[0])
        raise DataError("Negative count {} in row {}, column {}".format(counts[row, col], row, col))
    return counts


@dataclass(frozen=True, eq=False)
class Standardization:
    """Per-covariate centring and scaling applied at load time."""

    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        sds = np.asarray(self.sds, dtype=float)
        if means.shape != sds.shape:
            raise DataError("Standardization means and sds differ in length")
        if np.any(sds <= 0):
            raise DataError("Standardization sds must be positive")
        object.__setattr__(self, "means", _frozen(means))
        object.__setattr__(self, "sds", _frozen(sds))

    def apply(self, covariates):
        """Centre and scale raw *covariates* with the recorded moments."""
        return (np.asarray(covariates, dtype=float) - self.means) / self.sds


@dataclass(frozen=True, eq=False)
class CountDataset:
    """Design matrix and counts for the same ``n`` observations."""

    x: DesignMatrix
    y: CountMatrix
    standardization: Optional[Standardization] = None

    def __post_init__(self):
        if self.x.n != self.y.n:
            raise DataError("Design matrix has {} rows but count matrix has {}".format(self.x.n, self.y.n))
        if self.standardization is not None and len(self.standardization.sds) != self.x.p:
            raise DataError("Standardization record does not match the number of covariates")

    @property
    def n(self):
        return self.x.n

    @property
    def p(self):
        return self.x.p

    @property
    def n_categories(self):
        return self.y.n_categories

    def intercept_only(self):
        """Return the same counts paired with the intercept column alone."""
        return CountDataset(DesignMatrix(self.x.values[:, :1]), self.y)


def standardize_covariates(covariates):
    """Centre and scale columns to mean 0 and population sd 1.

    Returns:
        tuple: The standardized matrix and its :class:`Standardization`.

    Raises:
        DataError: If a column is constant.
    """
    covariates = np.asarray(covariates, dtype=float)
    means = covariates.mean(axis=0)
    sds = covariates.std(axis=0, ddof=0)
    constant = np.nonzero(sds <= 0)[0]
    if constant.size:
        raise DataError("Covariate column {} is constant and cannot be standardized".format(int(constant[0])))
    record = Standardization(means, sds)
    return record.apply(covariates), record


def indicator_c(y):
    """Return the 0/1 matrix flagging positive counts in *y*."""
    values = y.values if isinstance(y, CountMatrix) else np.asarray(y)
    return (values > 0).astype(np.int64)


def _read_csv(path, what):
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except FileNotFoundError:
        raise
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as err:
        raise DataError("Could not parse {} file {}: {}".format(what, path, err))
    return frame


def _numeric(frame, path, what):
    try:
        return frame.apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except (TypeError, ValueError) as err:
        raise DataError("Non-numeric entry in {} file {}: {}".format(what, path, err))


def load_dataset(covariates_path, counts_path, standardize=False):
    """Load and validate a dataset from a covariate CSV and a count CSV.

    Args:
        covariates_path (str): CSV with one named column per covariate.
        counts_path (str): CSV with one named column per category.
        standardize (bool): Centre and scale covariates to mean 0, sd 1.

    Returns:
        CountDataset: The validated dataset, intercept column prepended.

    Raises:
        DataError: On parse failure, row-count mismatch, invalid counts or
            constant covariates under standardization.
    """
    cov_frame = _read_csv(covariates_path, "covariate")
    count_frame = _read_csv(counts_path, "count")
    if len(cov_frame) != len(count_frame):
        raise DataError("Covariate file {} has {} rows but count file {} has {}".format(
            covariates_path, len(cov_frame), counts_path, len(count_frame)))
    covariates = _numeric(cov_frame, covariates_path, "covariate")
    if not np.all(np.isfinite(covariates)):
        row = int(np.nonzero(~np.all(np.isfinite(covariates), axis=1))[0][0])
        raise DataError("Covariate file {} has a missing value in row {}".format(covariates_path, row))
    counts = _numeric(count_frame, counts_path, "count")
    record = None
    if standardize and covariates.shape[1]:
        covariates, record = standardize_covariates(covariates)
    x = DesignMatrix.from_covariates(covariates, [str(name) for name in cov_frame.columns])
    try:
        y = CountMatrix(counts, tuple(str(name) for name in count_frame.columns))
    except DataError as err:
        raise DataError("{}: {}".format(counts_path, err))
    LOG.info("Loaded %d observations, %d covariates, %d categories", x.n, x.p, y.n_categories)
    return CountDataset(x, y, record)


def save_dataset(dataset, covariates_path, counts_path):
    """Write *dataset* to the CSV layout read by :func:`load_dataset`.

    The stored (possibly standardized) covariates are written, reals with 17
    significant digits.
    """
    covariates = pd.DataFrame(np.asarray(dataset.x.covariates), columns=list(dataset.x.covariate_names))
    covariates.to_csv(covariates_path, index=False, float_format="%.17g")
    counts = pd.DataFrame(np.asarray(dataset.y.values), columns=list(dataset.y.taxa_names))
    counts.to_csv(counts_path, index=False)


def to_jsonable(value):
    """Convert numpy scalars, arrays and containers to JSON-ready values, non-finite reals to ``None``."""
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value
