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
"""Exceptions raised by countsift."""


class CountsiftError(Exception):
    """Base class for all countsift errors."""


class DataError(CountsiftError, ValueError):
    """Input data could not be read or failed validation."""


class PenaltyError(CountsiftError, ValueError):
    """Penalty configuration does not fit the coefficients it is applied to."""


class ConfigurationError(CountsiftError, ValueError):
    """Solver, search or scenario settings are invalid."""


class FitError(CountsiftError, RuntimeError):
    """A fit produced non-finite or otherwise unusable intermediate values.

    Args:
        message (str): Description of the failure.
        observation (int): Offending observation (row) index, if known.
        column (int): Offending coefficient column, if known.
    """

    def __init__(self, message, observation=None, column=None):
        super().__init__(message)
        self.observation = observation
        self.column = column


class FactorizationError(FitError):
    """The weighted ridge system was not positive definite."""

    def __init__(self, message, smallest_pivot=None, column=None):
        super().__init__(message, column=column)
        self.smallest_pivot = smallest_pivot


class SearchError(CountsiftError):
    """A tuning search could not produce a result.

    Args:
        message (str): Description of the failure.
        largest_lambda (float): Largest penalty tried, for lambda_max searches.
        active_count (int): Active cells at *largest_lambda*.
        failures (list): ``(lambda, alpha, message)`` for failed grid points.
    """

    def __init__(self, message, largest_lambda=None, active_count=None, failures=None):
        super().__init__(message)
        self.largest_lambda = largest_lambda
        self.active_count = active_count
        self.failures = list(failures or [])
