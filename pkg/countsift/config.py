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
"""Solver controls shared by the GLM and count-model fitters."""

from dataclasses import dataclass, field

from countsift.errors import ConfigurationError
from countsift.special import METHODS


@dataclass(frozen=True)
class WarmStart:
    """Number of unpenalized sweeps run from the origin before penalizing.

    ``WarmStart(0)`` starts from zero coefficients.
    """

    sweeps: int = 20

    def __post_init__(self):
        if int(self.sweeps) != self.sweeps or self.sweeps < 0:
            raise ConfigurationError("Warm start sweeps must be a non-negative integer")

    @classmethod
    def zero(cls):
        return cls(0)

    @classmethod
    def unpenalized(cls, sweeps=20):
        return cls(sweeps)


@dataclass(frozen=True)
class FitControls:
    """Iteration limits and tolerances.

    Attributes:
        max_iter (int): Maximum number of outer iterations.
        tol (float): Relative objective change declaring convergence.
        coef_tol (float): Largest relative change, over coefficients not
            reported as zero, allowed at convergence.
        warm_start (WarmStart): Unpenalized start-up sweeps.
        zero_report_threshold (float): Magnitude below which a coefficient
            is reported as zero.
        clamp_bound (float): Linear predictors are clipped to +/- this value.
        sum_method (str): ``"special"`` or ``"loop"`` rising-factorial sums.
        max_halvings (int): Step halvings tried before a column update is
            rejected.
        warm_ridge (float): Ridge added to penalized rows during the
            unpenalized warm start so that ``n < p`` designs stay solvable.
        drop_vanishing (bool): Under the Drop policy, also drop cells and
            groups whose iterates are converging geometrically to zero.

    The zero-handling policy itself is part of
    :class:`countsift.penalty.PenaltyConfig`.
    """

    max_iter: int = 500
    tol: float = 1e-6
    coef_tol: float = 1e-4
    warm_start: WarmStart = field(default_factory=WarmStart)
    zero_report_threshold: float = 1e-6
    clamp_bound: float = 30.0
    sum_method: str = "special"
    max_halvings: int = 30
    warm_ridge: float = 1e-6
    drop_vanishing: bool = True

    def __post_init__(self):
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigurationError("max_iter must be a positive integer")
        if not self.tol > 0:
            raise ConfigurationError("tol must be positive")
        if not self.coef_tol > 0:
            raise ConfigurationError("coef_tol must be positive")
        if not self.zero_report_threshold > 0:
            raise ConfigurationError("zero_report_threshold must be positive")
        if not self.clamp_bound > 0:
            raise ConfigurationError("clamp_bound must be positive")
        if self.sum_method not in METHODS:
            raise ConfigurationError("sum_method must be one of {}".format(METHODS))
        if self.max_halvings < 0:
            raise ConfigurationError("max_halvings must be non-negative")
        if self.warm_ridge < 0:
            raise ConfigurationError("warm_ridge must be non-negative")
        if not isinstance(self.warm_start, WarmStart):
            raise ConfigurationError("warm_start must be a WarmStart")
