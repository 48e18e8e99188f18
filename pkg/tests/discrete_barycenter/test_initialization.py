"""
Tests for the initial vertex constructions.
"""
from unittest import TestCase

import numpy as np

from discrete_barycenter.driver import solve_direct
from discrete_barycenter.exceptions import ContractError
from discrete_barycenter.initialization import ApproxBarycenter, greedy_vertex, repair_to_vertex, two_approx
from discrete_barycenter.model import Instance, combination_costs, is_feasible, tuple_of
from test_utils import column_rank, identical_instance, random_instance


class GreedyVertexTests(TestCase):
    """
    Tests for greedy_vertex.
    """

    def test_worked_example(self):
        inst = Instance.from_arrays([[[0.0], [1.0]], [[0.0], [1.0], [2.0]]], [[0.5, 0.5], [0.25, 0.25, 0.5]])
        mass = greedy_vertex(inst)
        self.assertEqual(dict(mass), {0: 0.25, 1: 0.25, 5: 0.5})

    def test_single_measure(self):
        inst = random_instance([5], masses='random', seed=2)
        mass = greedy_vertex(inst)
        self.assertEqual(list(mass), [0, 1, 2, 3, 4])
        np.testing.assert_allclose(list(mass.values()), inst.measures[0].masses)

    def test_identical_measures(self):
        inst = identical_instance([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [1 / 3, 1 / 3, 1 / 3], 4)
        mass = greedy_vertex(inst)
        self.assertEqual(len(mass), 3)
        for h in mass:
            indices = tuple_of(h, inst.strides).indices
            self.assertEqual(len(set(indices)), 1)

    def test_bounds_and_vertex_property(self):
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            sizes = [int(size) for size in rng.integers(1, 9, size=rng.integers(1, 11))]
            with self.subTest(seed=seed, sizes=sizes):
                inst = random_instance(sizes, seed=seed, masses='random')
                mass = greedy_vertex(inst)
                self.assertTrue(is_feasible(mass, inst))
                self.assertGreaterEqual(len(mass), max(sizes))
                self.assertLessEqual(len(mass), sum(sizes) - len(sizes) + 1)
                self.assertEqual(column_rank(mass, inst.strides), len(mass))

    def test_subset_of_measures(self):
        inst = random_instance([3, 4, 2], masses='random', seed=4)
        mass = greedy_vertex(inst, measures=[1, 2])
        self.assertTrue(is_feasible(mass, inst, measures=[1, 2]))
        for h in mass:
            self.assertEqual(tuple_of(h, inst.strides).indices[0], 0)


class TwoApproxTests(TestCase):
    """
    Tests for two_approx and repair_to_vertex.
    """

    def test_single_measure(self):
        inst = random_instance([4], seed=1)
        apx = two_approx(inst)
        self.assertAlmostEqual(apx.cost, 0.0, places=12)
        self.assertEqual(apx.size, 4)
        mass = repair_to_vertex(apx, inst)
        self.assertEqual(len(mass), 4)
        self.assertTrue(is_feasible(mass, inst))

    def test_identical_measures(self):
        points = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
        inst = identical_instance(points, [0.2, 0.3, 0.5], 3)
        apx = two_approx(inst)
        self.assertAlmostEqual(apx.cost, 0.0, places=12)
        np.testing.assert_allclose(sorted(apx.mass), [0.2, 0.3, 0.5], atol=1e-9)
        mass = repair_to_vertex(apx, inst)
        self.assertAlmostEqual(mass.cost(inst), 0.0, places=12)

    def test_ratio_against_direct(self):
        for seed in range(200):
            rng = np.random.default_rng(500 + seed)
            sizes = [int(size) for size in rng.integers(2, 6, size=rng.integers(3, 5))]
            with self.subTest(seed=seed, sizes=sizes):
                inst = random_instance(sizes, seed=500 + seed, masses='random' if seed % 2 else 'uniform')
                optimum = solve_direct(inst).objective
                apx = two_approx(inst)
                self.assertGreaterEqual(apx.cost, optimum - 1e-9)
                self.assertLessEqual(apx.cost, 2 * optimum + 1e-9)
                mass = repair_to_vertex(apx, inst)
                self.assertTrue(is_feasible(mass, inst))
                self.assertAlmostEqual(mass.total, 1.0, delta=1e-9)
                self.assertLessEqual(mass.cost(inst), apx.cost + 1e-9)
                self.assertGreaterEqual(mass.cost(inst), optimum - 1e-9)

    def test_repair_on_ten_ten_eleven(self):
        """
        Repairing the restricted-support barycenter of measures with 10, 10 and 11 points.
        """
        for seed in range(10):
            with self.subTest(seed=seed):
                inst = random_instance([10, 10, 11], seed=seed)
                apx = two_approx(inst)
                mass = repair_to_vertex(apx, inst)
                self.assertTrue(is_feasible(mass, inst))
                self.assertLessEqual(len(mass), 10 + 10 + 11 - 3 + 1)
                self.assertLessEqual(mass.cost(inst), apx.cost + 1e-9)

    def test_flows(self):
        inst = random_instance([2, 3, 2], seed=8)
        apx = two_approx(inst)
        for i in range(inst.n):
            for s in range(apx.size):
                total = sum(flow for _, flow in apx.flows(i, s))
                self.assertAlmostEqual(total, apx.mass[s], delta=1e-9)

    def test_repair_of_non_splitting_solution(self):
        inst = Instance.from_arrays([[[0.0], [2.0]], [[1.0], [3.0]]], [[0.5, 0.5], [0.5, 0.5]])
        apx = ApproxBarycenter(
            support=np.array([[0.5], [2.5]]),
            mass=np.array([0.5, 0.5]),
            plans=(np.array([[0.5, 0.0], [0.0, 0.5]]), np.array([[0.5, 0.0], [0.0, 0.5]])),
            cost=0.25,
        )
        mass = repair_to_vertex(apx, inst)
        self.assertEqual(dict(mass), {0: 0.5, 3: 0.5})
        expected = float(combination_costs(np.array([0, 3], dtype=np.uint64), inst).mean())
        self.assertAlmostEqual(mass.cost(inst), expected)

    def test_repair_splits_mass(self):
        inst = Instance.from_arrays([[[0.0]], [[1.0], [3.0]]], [[1.0], [0.5, 0.5]])
        apx = ApproxBarycenter(
            support=np.array([[1.0]]),
            mass=np.array([1.0]),
            plans=(np.array([[1.0]]), np.array([[0.5, 0.5]])),
            cost=0.0,
        )
        self.assertEqual(dict(repair_to_vertex(apx, inst)), {0: 0.5, 1: 0.5})

    def test_inconsistent_flows(self):
        inst = Instance.from_arrays([[[0.0]], [[1.0], [3.0]]], [[1.0], [0.5, 0.5]])
        apx = ApproxBarycenter(
            support=np.array([[1.0]]),
            mass=np.array([1.0]),
            plans=(np.array([[1.0]]), np.array([[0.7, 0.3]])),
            cost=0.0,
        )
        with self.assertRaises(ContractError):
            repair_to_vertex(apx, inst)
