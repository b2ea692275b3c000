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
"""Penalized count regression engine tests."""
import unittest

import numpy as np
import pytest

from countsift.config import FitControls, WarmStart
from countsift.data import CountDataset, CountMatrix, DesignMatrix
from countsift.engine import ebic, extract_active, fit_count_sgl, objective, reseed, sweep, unpenalized_start
from countsift.errors import FitError, PenaltyError
from countsift.glm import solve_weighted_ridge
from countsift.models import CoefficientMatrix, ModelKind, loglik, sample_counts, working_matrix
from countsift.penalty import Drop, GroupStructure, PenaltyConfig, Perturb, compute_ridge_weights
from countsift.streams import rng_stream


def _dm_data(n=60, p=3, D=3, seed=0, signal=0.8, total=40):
    rng = rng_stream(seed, 0)
    x = DesignMatrix.from_covariates(rng.standard_normal((n, p)))
    b = np.zeros((p + 1, D))
    b[0] = 1.0
    b[1, 0] = signal
    b[1, 1] = -signal
    return CountDataset(x, sample_counts(ModelKind.DM, b, x, np.full(n, total), seed, keys=(1,)))


def _random_data(n=12, p=2, D=3, seed=0):
    rng = np.random.default_rng(seed)
    x = DesignMatrix.from_covariates(rng.standard_normal((n, p)))
    y = rng.integers(0, 8, (n, D))
    y[:, 0] += 1
    return CountDataset(x, CountMatrix(y))


def _config(kind, data, lam, alpha, policy=None):
    structure = GroupStructure.by_row(data.p, kind.n_columns(data.n_categories))
    return PenaltyConfig(lam, alpha, structure, policy or Drop())


class TestObjective(unittest.TestCase):

    def test_dm_uniform(self):
        data = CountDataset(DesignMatrix(np.ones((1, 1))), CountMatrix([[1, 1]]))
        config = _config(ModelKind.DM, data, 1.0, 0.5)
        self.assertAlmostEqual(objective(ModelKind.DM, np.zeros((1, 2)), data, config), -np.log(1 / 3), places=12)

    def test_lambda_zero_is_negative_loglik(self):
        data = _random_data()
        b = np.random.default_rng(1).uniform(-0.5, 0.5, (3, 3))
        config = _config(ModelKind.DM, data, 0.0, 0.5)
        self.assertEqual(objective(ModelKind.DM, b, data, config), -loglik(ModelKind.DM, b, data))

    def test_zero_coefficients(self):
        data = _random_data()
        config = _config(ModelKind.GDM, data, 3.0, 0.5)
        b = np.zeros((3, 4))
        self.assertEqual(objective(ModelKind.GDM, b, data, config), -loglik(ModelKind.GDM, b, data))


class TestExtractActive(unittest.TestCase):

    def test_all_zero(self):
        found = extract_active(np.zeros((3, 2)), 1e-6)
        self.assertEqual(found.groups, ())
        self.assertEqual(found.cells, ())

    def test_threshold(self):
        b = np.array([[5.0, 5.0], [0.3, -1e-9]])
        found = extract_active(b, 1e-6)
        self.assertEqual(found.cells, ((1, 0),))
        self.assertEqual(found.groups, (0,))
        self.assertEqual(found.signs[1, 0], 1)
        self.assertEqual(found.signs[1, 1], 0)
        self.assertEqual(found.signs[0, 0], 0)

    def test_invalid_threshold(self):
        with self.assertRaises(ValueError):
            extract_active(np.zeros((2, 2)), 0.0)


def test_reseed_keeps_intercepts():
    init = np.array([[0.0, 1.0], [1e-9, 2.0]])
    start = np.array([[7.0, 7.0], [3.0, 3.0]])
    np.testing.assert_array_equal(reseed(init, start, 1e-6), [[0.0, 1.0], [3.0, 2.0]])


@pytest.mark.parametrize("kind", list(ModelKind))
@pytest.mark.parametrize("seed", range(3))
def test_unpenalized_sweep_never_decreases_loglik(kind, seed):
    data = _random_data(seed=seed)
    b = np.random.default_rng(seed).uniform(-0.5, 0.5, (3, kind.n_columns(3)))
    before = loglik(kind, b, data)
    after = loglik(kind, sweep(kind, data, b.copy()).b, data)
    assert after >= before - 1e-8


def test_nm_alpha_order_does_not_matter():
    data = _random_data(D=3, seed=4)
    b = np.random.default_rng(4).uniform(-0.5, 0.5, (3, 4))
    config = _config(ModelKind.NM, data, 0.5, 0.5)
    forward = sweep(ModelKind.NM, data, b.copy(), config).b
    backward = sweep(ModelKind.NM, data, b.copy(), config, column_order=[0, 3, 2, 1]).b
    assert abs(loglik(ModelKind.NM, forward, data) - loglik(ModelKind.NM, backward, data)) < 1e-10


@pytest.mark.parametrize("kind", list(ModelKind))
def test_column_update_minimizes_ridge_model(kind):
    data = _random_data(seed=6)
    rng = np.random.default_rng(6)
    b = rng.uniform(-0.5, 0.5, (3, kind.n_columns(3)))
    config = _config(kind, data, 0.7, 0.5)
    work = working_matrix(kind, b, data)
    ridge = 2.0 * config.lam * compute_ridge_weights(b, config).matrix()
    x = data.x.values
    for d in range(b.shape[1]):
        column = work.column(d)
        coef = solve_weighted_ridge(x, column.w, column.z, ridge[:, d])

        def model(values):
            residual = column.z - x @ values
            return 0.5 * np.sum(column.w * residual ** 2) + 0.5 * np.dot(ridge[:, d], values ** 2)

        best = model(coef)
        for j in range(coef.size):
            for step in (1e-4, -1e-4):
                moved = coef.copy()
                moved[j] += step
                assert model(moved) >= best


class TestUnpenalizedStart(unittest.TestCase):

    def test_improves_on_zero(self):
        data = _dm_data()
        start = unpenalized_start(ModelKind.DM, data, 20)
        self.assertIsInstance(start, CoefficientMatrix)
        zero = np.zeros((4, 3))
        self.assertGreater(loglik(ModelKind.DM, start, data), loglik(ModelKind.DM, zero, data))

    def test_zero_sweeps(self):
        data = _dm_data()
        np.testing.assert_array_equal(unpenalized_start(ModelKind.DM, data, 0).b, 0.0)


class TestFitCountSgl(unittest.TestCase):

    def setUp(self):
        self.data = _dm_data()

    def test_fit_result(self):
        fit = fit_count_sgl(ModelKind.DM, self.data, _config(ModelKind.DM, self.data, 2.0, 0.5))
        self.assertTrue(fit.converged)
        self.assertEqual(fit.kappa, len(fit.active_cells))
        self.assertEqual(fit.n_penalized, 9)
        self.assertEqual(fit.n_obs, 60)
        self.assertEqual(len(fit.objective_trace), fit.iterations)
        self.assertIn(1, [cell[0] for cell in fit.active_cells])
        self.assertAlmostEqual(fit.loglik_final, loglik(ModelKind.DM, fit.b_hat, self.data), places=10)
        reported = np.abs(fit.b_hat.b[1:])
        self.assertTrue(np.all((reported == 0) | (reported >= 1e-6)))
        found = extract_active(fit.b_hat, 1e-6)
        self.assertEqual(found.cells, fit.active_cells)
        self.assertEqual(fit.ebic, ebic(fit.loglik_final, fit.kappa, 60, 9))

    def test_deterministic(self):
        config = _config(ModelKind.DM, self.data, 2.0, 0.5)
        first = fit_count_sgl(ModelKind.DM, self.data, config)
        second = fit_count_sgl(ModelKind.DM, self.data, config)
        np.testing.assert_array_equal(first.b_hat.b, second.b_hat.b)
        self.assertEqual(first.objective_trace, second.objective_trace)

    def test_descent_between_drops(self):
        for policy in (Drop(), Perturb(1e-8)):
            fit = fit_count_sgl(ModelKind.DM, self.data, _config(ModelKind.DM, self.data, 4.0, 0.5, policy))
            dropped = {event.iteration for event in fit.drop_events}
            trace = fit.objective_trace
            for t in range(1, len(trace)):
                if t + 1 not in dropped:
                    self.assertLessEqual(trace[t], trace[t - 1] + 1e-8 * (1 + abs(trace[t - 1])))

    def test_vanishing_cells_are_dropped_for_good(self):
        fit = fit_count_sgl(ModelKind.DM, self.data, _config(ModelKind.DM, self.data, 2.0, 1.0))
        self.assertTrue(fit.converged)
        for event in fit.drop_events:
            if event.target == "cell":
                self.assertEqual(fit.b_hat.b[event.index], 0.0)
            else:
                np.testing.assert_array_equal(fit.b_hat.b[event.index + 1], 0.0)
        smooth = fit_count_sgl(ModelKind.DM, self.data, _config(ModelKind.DM, self.data, 2.0, 1.0, Perturb(1e-8)))
        self.assertEqual(smooth.drop_events, ())

    def test_group_lasso_keeps_whole_groups(self):
        fit = fit_count_sgl(ModelKind.DM, self.data, _config(ModelKind.DM, self.data, 6.0, 0.0))
        for row in fit.b_hat.b[1:]:
            self.assertTrue(np.all(row == 0) or np.all(np.abs(row) >= 1e-6))

    def test_intercept_only(self):
        data = self.data.intercept_only()
        fit = fit_count_sgl(ModelKind.DM, data, PenaltyConfig(1.0, 0.5, GroupStructure([], (1, 3))))
        self.assertTrue(fit.converged)
        self.assertEqual(fit.kappa, 0)
        self.assertEqual(fit.n_penalized, 1)

    def test_zero_init_starts_unpenalized(self):
        controls = FitControls(warm_start=WarmStart.zero())
        fit = fit_count_sgl(ModelKind.DM, self.data, _config(ModelKind.DM, self.data, 2.0, 0.5), controls)
        self.assertTrue(fit.converged)
        self.assertIn(0, fit.active_groups)

    def test_zero_cells_of_init_dropped(self):
        init = unpenalized_start(ModelKind.DM, self.data).b.copy()
        init[3] = 0.0
        fit = fit_count_sgl(ModelKind.DM, self.data, _config(ModelKind.DM, self.data, 2.0, 0.5), init=init)
        early = [event for event in fit.drop_events if event.iteration == 0]
        self.assertEqual([(event.target, event.index) for event in early], [("group", 2)])
        np.testing.assert_array_equal(fit.b_hat.b[3], 0.0)

    def test_structure_mismatch(self):
        with self.assertRaises(PenaltyError):
            fit_count_sgl(ModelKind.DM, self.data, PenaltyConfig(1.0, 0.5, GroupStructure.by_row(2, 3)))

    def test_too_few_categories(self):
        data = CountDataset(DesignMatrix(np.ones((2, 1))), CountMatrix([[1], [2]]))
        with self.assertRaises(FitError):
            fit_count_sgl(ModelKind.MN, data, PenaltyConfig(1.0, 0.5, GroupStructure([], (1, 0))))

    def test_more_covariates_than_observations(self):
        data = _dm_data(n=8, p=12, seed=3)
        fit = fit_count_sgl(ModelKind.DM, data, _config(ModelKind.DM, data, 3.0, 0.5),
                            FitControls(max_iter=100))
        self.assertTrue(np.all(np.isfinite(fit.b_hat.b)))
