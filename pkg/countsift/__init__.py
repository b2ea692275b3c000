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
"""Sparse group lasso regularized multivariate count regression."""

from importlib.metadata import PackageNotFoundError, version

from countsift.config import FitControls, WarmStart
from countsift.data import CountDataset, CountMatrix, DesignMatrix, load_dataset, save_dataset
from countsift.engine import FitResult, ebic, fit_count_sgl
from countsift.errors import (ConfigurationError, CountsiftError, DataError, FactorizationError, FitError,
                              PenaltyError, SearchError)
from countsift.models import CoefficientMatrix, ModelKind
from countsift.penalty import Drop, GroupStructure, PenaltyConfig, Perturb
from countsift.simulation import ScenarioConfig, run_scenario, score_selection
from countsift.tuning import SearchSpec, find_lambda_max, tune

try:
    __version__ = version("countsift")
except PackageNotFoundError:
    __version__ = "unknown"

__all__ = ["CoefficientMatrix", "ConfigurationError", "CountDataset", "CountMatrix", "CountsiftError",
           "DataError", "DesignMatrix", "Drop", "FactorizationError", "FitControls", "FitError", "FitResult",
           "GroupStructure", "ModelKind", "PenaltyConfig", "PenaltyError", "Perturb", "SearchError",
           "ScenarioConfig", "SearchSpec", "WarmStart", "ebic", "find_lambda_max", "fit_count_sgl", "load_dataset",
           "run_scenario", "save_dataset", "score_selection", "tune"]
