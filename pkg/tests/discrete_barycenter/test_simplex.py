"""
Tests for the dense simplex kernel.
"""
import itertools
from unittest import TestCase

import ddt
import numpy as np

from discrete_barycenter.exceptions import NumericalError
from discrete_barycenter.simplex import Basis, DenseLP, LPStatus, SimplexOptions, SimplexSolver, _SimplexRun, solve
from test_utils import linprog_optimum, vertex_optimum


def random_feasible_lp(seed, m=None, k=None):
    """
    A bounded LP with a known feasible point and nonnegative costs.
    """
    rng = np.random.default_rng(seed)
    m = m or int(rng.integers(2, 11))
    k = k or int(rng.integers(m + 1, 31))
    A = rng.normal(size=(m, k))
    x0 = rng.random(k) * (rng.random(k) < 0.6)
    cost = rng.random(k)
    return DenseLP(cost, A, A @ x0)


def assignment_lp(costs):
    size = costs.shape[0]
    A = np.zeros((2 * size, size * size))
    for i in range(size):
        A[i, i * size:(i + 1) * size] = 1.0
        A[size + i, i::size] = 1.0
    return DenseLP(costs.reshape(-1), A, np.ones(2 * size))


@ddt.ddt
class SimplexTests(TestCase):
    """
    Tests for SimplexSolver.
    """

    def assert_optimal(self, lp, solution):
        self.assertEqual(solution.status, LPStatus.OPTIMAL)
        np.testing.assert_allclose(lp.A @ solution.x, lp.rhs, atol=1e-9)
        self.assertTrue(np.all(solution.x >= -1e-9))
        reduced = lp.cost - lp.A.T @ solution.duals
        self.assertTrue(np.all(reduced >= -1e-9))
        self.assertLessEqual(
            abs(solution.objective - lp.rhs @ solution.duals), 1e-8 * (1 + abs(solution.objective))
        )

    def test_single_constraint(self):
        lp = DenseLP([1.0, 1.0], [[1.0, 1.0]], [1.0])
        solution = solve(lp)
        self.assert_optimal(lp, solution)
        self.assertAlmostEqual(solution.objective, 1.0)

    def test_unbounded(self):
        lp = DenseLP([-1.0, 0.0], [[1.0, -1.0]], [0.0])
        self.assertEqual(solve(lp).status, LPStatus.UNBOUNDED)

    def test_infeasible(self):
        lp = DenseLP([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])
        self.assertEqual(solve(lp).status, LPStatus.INFEASIBLE)

    def test_negative_rhs(self):
        lp = DenseLP([1.0, 2.0], [[-1.0, -1.0]], [-2.0])
        solution = solve(lp)
        self.assert_optimal(lp, solution)
        np.testing.assert_allclose(solution.x, [2.0, 0.0])

    def test_redundant_rows(self):
        """
        Linearly dependent rows leave an artificial in the basis at zero.
        """
        lp = DenseLP([1.0, 3.0, 2.0], [[1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [1.0, 0.0, 1.0]], [1.0, 2.0, 0.5])
        solution = solve(lp)
        self.assert_optimal(lp, solution)
        self.assertAlmostEqual(solution.objective, 2.0)

    @ddt.data(*range(6))
    def test_assignment_against_permutations(self, seed):
        costs = np.random.default_rng(seed).random((3, 3))
        best = min(sum(costs[i, p[i]] for i in range(3)) for p in itertools.permutations(range(3)))
        lp = assignment_lp(costs)
        solution = solve(lp)
        self.assert_optimal(lp, solution)
        self.assertAlmostEqual(solution.objective, best, delta=1e-8)

    def test_random_against_linprog(self):
        for seed in range(500):
            with self.subTest(seed=seed):
                lp = random_feasible_lp(seed)
                solution = solve(lp)
                self.assert_optimal(lp, solution)
                optimum = linprog_optimum(lp.cost, lp.A, lp.rhs)
                self.assertAlmostEqual(solution.objective, optimum, delta=1e-7 * (1 + abs(optimum)))

    def test_small_against_vertex_enumeration(self):
        for seed in range(500):
            rng = np.random.default_rng(10_000 + seed)
            m = int(rng.integers(2, 5))
            with self.subTest(seed=seed):
                lp = random_feasible_lp(10_000 + seed, m=m, k=m + int(rng.integers(1, 5)))
                solution = solve(lp)
                self.assert_optimal(lp, solution)
                self.assertAlmostEqual(solution.objective, vertex_optimum(lp.cost, lp.A, lp.rhs), delta=1e-8)

    def test_warm_start_needs_no_pivots(self):
        lp = random_feasible_lp(3)
        first = solve(lp)
        again = solve(lp, warm=first.basis)
        self.assertEqual(again.iterations, 0)
        self.assertAlmostEqual(again.objective, first.objective, places=12)
        np.testing.assert_allclose(again.x, first.x, atol=1e-12)

    def test_warm_start_after_adding_a_column(self):
        lp = random_feasible_lp(5, m=4, k=8)
        first = solve(lp)
        extra = np.random.default_rng(0).normal(size=(4, 1))
        bigger = DenseLP(np.r_[lp.cost, -1.0], np.hstack([lp.A, extra]), lp.rhs)
        warm = solve(bigger, warm=first.basis)
        cold = solve(bigger)
        self.assertEqual(warm.status, cold.status)
        if cold.status is LPStatus.OPTIMAL:
            self.assertAlmostEqual(warm.objective, cold.objective, delta=1e-8)

    def test_bad_warm_basis_is_ignored(self):
        lp = random_feasible_lp(7, m=3, k=6)
        with self.assertLogs('discrete_barycenter.simplex', level='WARNING'):
            solution = solve(lp, warm=Basis((0, 0, 1)))
        self.assert_optimal(lp, solution)

    def test_artificial_encoding(self):
        self.assertEqual(Basis.artificial(0), -1)
        self.assertEqual(Basis.artificial(4), -5)

    def test_degenerate_lp_with_bland_fallback(self):
        """
        A highly degenerate assignment LP still solves with an immediate Bland switch.
        """
        costs = np.random.default_rng(11).random((4, 4))
        lp = assignment_lp(costs)
        solution = SimplexSolver(SimplexOptions(bland_after=0, refactor_period=3)).solve(lp)
        self.assert_optimal(lp, solution)
        best = min(sum(costs[i, p[i]] for i in range(4)) for p in itertools.permutations(range(4)))
        self.assertAlmostEqual(solution.objective, best, delta=1e-8)

    def test_non_finite_data_rejected(self):
        with self.assertRaises(ValueError):
            DenseLP([np.inf], [[1.0]], [1.0])

    def test_redundant_rows_many_columns(self):
        """
        Many near-degenerate columns over rows with a built-in dependency still solve cleanly.
        """
        rng = np.random.default_rng(21)
        blocks = []
        for _ in range(300):
            column = np.zeros(9)
            column[rng.integers(0, 4)] = 1.0
            column[4 + rng.integers(0, 4)] = 1.0
            column[8] = -1.0
            blocks.append(column)
        A = np.array(blocks).T
        # Rows 0-3 and rows 4-7 both sum to minus the last row.
        A = np.hstack([A, np.array([[1, 0, 0, 0, 1, 0, 0, 0, -1], [0, 1, 0, 0, 0, 1, 0, 0, -1],
                                    [0, 0, 1, 0, 0, 0, 1, 0, -1], [0, 0, 0, 1, 0, 0, 0, 1, -1]], dtype=float).T])
        lp = DenseLP(rng.random(A.shape[1]), A, np.r_[np.full(8, 0.25), -1.0])
        solution = solve(lp)
        self.assert_optimal(lp, solution)
        self.assertAlmostEqual(solution.objective, linprog_optimum(lp.cost, lp.A, lp.rhs), delta=1e-9)


class BasisRepairTests(TestCase):
    """
    Tests for the treatment of ill-conditioned bases.
    """

    def test_dependent_column_replaced_by_artificial(self):
        lp = DenseLP([1.0, 1.0, 0.0], [[1.0, 1.0, 0.0], [1.0, 1.0 + 1e-15, 1.0]], [1.0, 1.0])
        run = _SimplexRun(lp, SimplexOptions())
        run.basic = np.array([0, 1])
        with self.assertLogs('discrete_barycenter.simplex', level='WARNING'):
            self.assertTrue(run._refactor())
        self.assertEqual(int(np.sum(run.basic < 0)), 1)
        np.testing.assert_allclose(run._basis_matrix() @ run.binv, np.eye(2), atol=1e-12)

    def test_well_conditioned_basis_untouched(self):
        lp = DenseLP([1.0, 1.0], [[1.0, 0.0], [1.0, 1.0]], [1.0, 2.0])
        run = _SimplexRun(lp, SimplexOptions())
        run.basic = np.array([0, 1])
        self.assertFalse(run._refactor())
        np.testing.assert_array_equal(run.basic, [0, 1])
        np.testing.assert_allclose(run.x_b, [1.0, 1.0])

    def test_warm_start_refuses_ill_conditioned_basis(self):
        lp = DenseLP([1.0, 1.0, 0.0], [[1.0, 1.0, 0.0], [1.0, 1.0 + 1e-15, 1.0]], [1.0, 1.0])
        with self.assertLogs('discrete_barycenter.simplex', level='WARNING'):
            solution = solve(lp, warm=Basis((0, 1)))
        self.assertEqual(solution.status, LPStatus.OPTIMAL)
        self.assertAlmostEqual(solution.objective, 1.0, delta=1e-9)

    def test_gives_up_after_repeated_repairs(self):
        options = SimplexOptions(max_condition=1.0, refactor_period=1, max_repairs=2)
        with self.assertRaises(NumericalError):
            SimplexSolver(options).solve(random_feasible_lp(2))
