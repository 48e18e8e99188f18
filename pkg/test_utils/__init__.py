"""
Test utilities.

Since pytest discourages putting __init__.py into testdirectory
(i.e. making tests a package) one cannot import from anywhere
under tests folder. However, random instance factories and the brute-force
reference solvers are useful in multiple test modules.

So this package is the place to put them.
"""
import itertools
import os
import unittest

import numpy as np
from scipy.optimize import linprog

from discrete_barycenter.model import Instance, cost_vector, dense_columns

LARGE_TESTS = os.environ.get('BARYCENTER_LARGE_TESTS') == '1'

large_test = unittest.skipUnless(LARGE_TESTS, 'set BARYCENTER_LARGE_TESTS=1 to run')


def random_instance(sizes, dim=2, seed=0, masses='uniform', lambdas=None):
    """
    Measures with points drawn from the unit cube; masses uniform or Dirichlet.
    """
    rng = np.random.default_rng(seed)
    points = []
    weights = []
    for size in sizes:
        points.append(rng.random((size, dim)))
        if masses == 'random':
            drawn = rng.dirichlet(np.ones(size))
            weights.append(drawn / drawn.sum())
        else:
            weights.append(np.full(size, 1.0 / size))
    return Instance.from_arrays(points, weights, lambdas)


def identical_instance(points, masses, n):
    return Instance.from_arrays([points] * n, [masses] * n)


def column_rank(mass, strides):
    """
    Rank of the 0/1 constraint columns of the combinations carrying ``mass``.
    """
    indices, _ = mass.arrays()
    return int(np.linalg.matrix_rank(dense_columns(indices, strides)))


def linprog_optimum(cost, A, rhs):
    """
    Optimal value of ``min c^T x, A x = b, x >= 0`` from scipy's HiGHS, or None if not optimal.
    """
    result = linprog(cost, A_eq=A, b_eq=rhs, bounds=(0, None), method='highs')
    return result.fun if result.status == 0 else None


def enumerate_vertices(A, rhs, tol=1e-9):
    """
    Every basic feasible solution of ``{x : A x = b, x >= 0}``, by trying all column subsets.

    Only usable for a handful of columns.
    """
    A = np.asarray(A, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    rank = np.linalg.matrix_rank(A)
    vertices = []
    for subset in itertools.combinations(range(A.shape[1]), rank):
        B = A[:, subset]
        if np.linalg.matrix_rank(B) < rank:
            continue
        values, *_ = np.linalg.lstsq(B, rhs, rcond=None)
        if np.max(np.abs(B @ values - rhs)) > tol or np.any(values < -tol):
            continue
        x = np.zeros(A.shape[1])
        x[list(subset)] = values
        vertices.append(x)
    return vertices


def vertex_optimum(cost, A, rhs):
    """
    The smallest objective over all vertices, or None for an empty polytope.
    """
    vertices = enumerate_vertices(A, rhs)
    if not vertices:
        return None
    return min(float(np.asarray(cost) @ x) for x in vertices)


def full_lp(inst):
    """
    The explicit constraint matrix, right-hand side and costs of the full barycenter LP.
    """
    indices = np.arange(inst.n_combinations, dtype=np.uint64)
    return dense_columns(indices, inst.strides), np.array(inst.masses), cost_vector(inst)
