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
"""Selection accuracy on the standard simulation scenarios.

These runs take minutes to hours and only run with ``COUNTSIFT_RUN_BENCH=1``.
"""
import filecmp
import os
import tempfile
import unittest

import numpy as np

from countsift.engine import fit_count_sgl
from countsift.models import ModelKind
from countsift.penalty import GroupStructure, PenaltyConfig
from countsift.simulation import ScenarioConfig, gen_dataset, run_scenario, write_report
from countsift.tuning import SearchSpec, find_lambda_max

BENCH = os.environ.get("COUNTSIFT_RUN_BENCH") == "1"
THREADS = os.cpu_count() or 1


@unittest.skipUnless(BENCH, "set COUNTSIFT_RUN_BENCH=1 to run the benchmarks")
class TestSelectionAccuracy(unittest.TestCase):

    def test_large_sample(self):
        summary = run_scenario(ScenarioConfig(n=300), threads=THREADS).summary
        self.assertGreaterEqual(summary["group_recall_mean"], 0.95)
        self.assertAlmostEqual(summary["within_recall_mean"], 0.91, delta=0.15)
        self.assertAlmostEqual(summary["group_precision_mean"], 0.90, delta=0.20)
        self.assertGreaterEqual(summary["direction_accuracy_mean"], 0.95)

    def test_small_sample(self):
        summary = run_scenario(ScenarioConfig(n=100), threads=THREADS).summary
        self.assertGreaterEqual(summary["group_recall_mean"], 0.90)
        self.assertAlmostEqual(summary["within_recall_mean"], 0.89, delta=0.15)

    def test_many_relevant_covariates_lose_power(self):
        summary = run_scenario(ScenarioConfig(n=100, p=100, delta_p=0.5), threads=THREADS).summary
        self.assertLessEqual(summary["group_recall_mean"], 0.20)


@unittest.skipUnless(BENCH, "set COUNTSIFT_RUN_BENCH=1 to run the benchmarks")
class TestPenaltyStructure(unittest.TestCase):

    def setUp(self):
        self.data, self.truth = gen_dataset(ScenarioConfig(), 0)
        self.structure = GroupStructure.by_row(25, 7)

    def _fit(self, alpha, share):
        lam = share * find_lambda_max(ModelKind.DM, self.data, alpha)
        return fit_count_sgl(ModelKind.DM, self.data, PenaltyConfig(lam, alpha, self.structure))

    def test_group_lasso_keeps_whole_groups(self):
        fit = self._fit(0.0, 0.3)
        self.assertGreater(fit.kappa, 0)
        for row in fit.b_hat.b[1:]:
            self.assertTrue(np.all(row == 0) or np.all(row != 0))

    def test_lasso_zeroes_cells_inside_retained_groups(self):
        fit = self._fit(1.0, 0.3)
        retained = [row for row in fit.b_hat.b[1:] if np.any(row != 0)]
        self.assertTrue(retained)
        self.assertTrue(any(np.any(row == 0) for row in retained))


@unittest.skipUnless(BENCH, "set COUNTSIFT_RUN_BENCH=1 to run the benchmarks")
class TestBenchDeterminism(unittest.TestCase):

    def test_reports_identical_across_runs_and_workers(self):
        config = ScenarioConfig(replicates=4, seed=9)
        search = SearchSpec(n_lambda=30)
        with tempfile.TemporaryDirectory() as tmp:
            dirs = []
            for index, threads in enumerate((1, 1, 4)):
                out_dir = os.path.join(tmp, str(index))
                write_report(run_scenario(config, search, threads=threads), out_dir)
                dirs.append(out_dir)
            for name in ("replicates.csv", "summary.json"):
                for other in dirs[1:]:
                    self.assertTrue(filecmp.cmp(os.path.join(dirs[0], name), os.path.join(other, name),
                                                shallow=False))
