"""
Tests for the restricted master problem.
"""
from unittest import TestCase, mock

import numpy as np

from discrete_barycenter.exceptions import ContractError, MasterError, NumericalError
from discrete_barycenter.initialization import greedy_vertex, repair_to_vertex, two_approx
from discrete_barycenter.master import add_column, init_rm, polish, raw_weights, recover_solution, solve_rm
from discrete_barycenter.model import SparseMass, is_feasible
from discrete_barycenter.pricing import Partition, choose_partition
from test_utils import random_instance


class MasterTests(TestCase):
    """
    Tests for init_rm, add_column, solve_rm and the solution recovery.
    """

    def test_single_column(self):
        inst = random_instance([2, 3, 2, 3], seed=1)
        partition = choose_partition(inst, 'large')
        p1 = greedy_vertex(inst)
        state = init_rm(p1, inst, partition)
        self.assertEqual(len(state.columns), 1)
        np.testing.assert_allclose(state.mu, [1.0])
        self.assertAlmostEqual(state.objective, p1.cost(inst), places=12)
        self.assertEqual(state.n_master_rows, 2 + 2 + 1)

    def test_two_approx_start(self):
        inst = random_instance([3, 3, 3], seed=2)
        p1 = repair_to_vertex(two_approx(inst), inst)
        state = init_rm(p1, inst, choose_partition(inst, 'any'))
        self.assertLessEqual(state.objective, two_approx(inst).cost + 1e-9)

    def test_infeasible_start(self):
        inst = random_instance([2, 2, 2])
        with self.assertRaises(ContractError):
            init_rm(SparseMass({0: 1.0}), inst, choose_partition(inst, 'any'))

    def test_convexity_row_only(self):
        """
        With two measures both are priced and the master keeps only the convexity row.
        """
        inst = random_instance([2, 3], seed=4)
        partition = Partition(pair=(0, 1), perm=(0, 1), size_a=2, size_b=3, n_u=6, n_d=1)
        p1 = greedy_vertex(inst)
        state = init_rm(p1, inst, partition)
        self.assertEqual(state.n_master_rows, 1)
        self.assertEqual(state.y.size, 0)
        self.assertAlmostEqual(state.objective, p1.cost(inst), places=12)

    def test_column_images(self):
        inst = random_instance([2, 3, 2, 3], seed=5)
        partition = choose_partition(inst, 'any')
        state = init_rm(greedy_vertex(inst), inst, partition)
        column = add_column(state, SparseMass({7: 1.0}))
        self.assertEqual(len(state.columns), 2)
        self.assertEqual(sorted(column.amp.tolist()), [0.0, 0.0, 0.0, 1.0, 1.0])
        for column in state.columns:
            self.assertAlmostEqual(column.amp[:2].sum(), 1.0)
            self.assertAlmostEqual(column.amp[2:].sum(), 1.0)

    def test_resolve_without_new_column(self):
        inst = random_instance([3, 2, 3], seed=6)
        state = init_rm(greedy_vertex(inst), inst, choose_partition(inst, 'any'))
        pivots = state.pivots
        mu, _, _, objective = solve_rm(state)
        self.assertEqual(state.pivots, pivots)
        np.testing.assert_allclose(mu, [1.0])
        self.assertEqual(len(state.history), 2)
        self.assertAlmostEqual(state.history[0], objective, places=12)

    def test_duplicate_column(self):
        inst = random_instance([3, 2, 3], seed=7)
        state = init_rm(greedy_vertex(inst), inst, choose_partition(inst, 'any'))
        add_column(state, state.columns[0].p)
        mu, _, _, objective = solve_rm(state)
        self.assertAlmostEqual(mu.sum(), 1.0)
        self.assertAlmostEqual(objective, state.history[0], places=12)

    def test_duals_price_existing_columns(self):
        """
        Every master column has nonnegative reduced cost against (y, sigma).
        """
        inst = random_instance([2, 3, 2], seed=8)
        partition = choose_partition(inst, 'any')
        state = init_rm(greedy_vertex(inst), inst, partition)
        add_column(state, SparseMass({0: 0.5, 11: 0.5}))
        add_column(state, SparseMass({5: 0.5, 6: 0.5}))
        mu, y, sigma, objective = solve_rm(state)
        self.assertAlmostEqual(mu.sum(), 1.0, delta=1e-9)
        self.assertTrue(np.all(mu >= -1e-12))
        for column in state.columns:
            self.assertGreaterEqual(column.cost - y @ column.amp + sigma, -1e-9)
        self.assertLessEqual(objective, state.history[0] + 1e-9)

    def test_recover_and_polish(self):
        inst = random_instance([2, 3, 2], seed=9)
        partition = choose_partition(inst, 'large')
        state = init_rm(greedy_vertex(inst), inst, partition)
        raw = raw_weights(state)
        barycenter = recover_solution(state)
        self.assertTrue(is_feasible(barycenter.weights, inst))
        self.assertAlmostEqual(barycenter.masses.sum(), 1.0, delta=1e-9)
        self.assertAlmostEqual(barycenter.objective, state.objective, delta=1e-9)
        self.assertEqual(barycenter.support_size, len(raw))
        polished = recover_solution(state, polish(state))
        self.assertTrue(is_feasible(polished.weights, inst))
        self.assertLessEqual(polished.objective, barycenter.objective + 1e-9)
        self.assertLessEqual(polished.support_size, sum(inst.sizes) - inst.n + 1)
        for point, assignment in zip(polished.points, polished.assignments):
            expected = sum(lam * measure.points[j] for lam, measure, j in zip(inst.lambdas, inst.measures, assignment))
            np.testing.assert_allclose(point, expected, atol=1e-12)


class MasterFailureTests(TestCase):
    """
    Tests for numerical failures inside the master and polish solves.
    """

    def setUp(self):
        super().setUp()
        inst = random_instance([3, 2, 3, 2], seed=10)
        self.state = init_rm(greedy_vertex(inst), inst, choose_partition(inst, 'large'))
        self.solve = self.state.solver.solve
        self.warm_arguments = []

    def fail_first_solves(self, count):
        def solve(lp, warm=None):
            self.warm_arguments.append(warm)
            if len(self.warm_arguments) <= count:
                raise NumericalError('basis condition estimate 1.000e+18 exceeds threshold')
            return self.solve(lp, warm=warm)
        return solve

    def test_warm_failure_retried_cold(self):
        add_column(self.state, self.state.columns[0].p)
        expected = self.state.objective
        with mock.patch.object(self.state.solver, 'solve', side_effect=self.fail_first_solves(1)):
            with self.assertLogs('discrete_barycenter.master', level='WARNING'):
                _, _, _, objective = solve_rm(self.state)
        self.assertIsNotNone(self.warm_arguments[0])
        self.assertIsNone(self.warm_arguments[1])
        self.assertAlmostEqual(objective, expected, places=12)

    def test_cold_failure_raises(self):
        with mock.patch.object(self.state.solver, 'solve', side_effect=self.fail_first_solves(2)):
            with self.assertRaises(MasterError):
                solve_rm(self.state)

    def test_polish_falls_back_to_convex_combination(self):
        with mock.patch.object(self.state.solver, 'solve', side_effect=self.fail_first_solves(1)):
            with self.assertLogs('discrete_barycenter.master', level='WARNING'):
                weights = polish(self.state)
        self.assertEqual(dict(weights), dict(raw_weights(self.state)))
