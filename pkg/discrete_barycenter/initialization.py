"""
Initial vertices for the column generation.

Two starts are provided: a greedy sweep over the support points of all
measures, and a barycenter restricted to the union of the input supports
(at most twice the optimal cost) repaired into a mass vector over
combinations.
"""
import logging
from dataclasses import dataclass

import numpy as np

from discrete_barycenter.exceptions import ContractError, SimplexError
from discrete_barycenter.model import FEASIBILITY_TOL, MASS_ZERO_TOL, SparseMass
from discrete_barycenter.simplex import DenseLP, LPStatus, SimplexSolver

logger = logging.getLogger(__name__)


def greedy_vertex(inst, measures=None):
    """
    Build a vertex of ``{w : A w = d, w >= 0}`` with a minimum-remaining-mass sweep.

    One pointer walks through the support points of every measure. Each
    step places the smallest remaining mass among the pointed-to points on
    the combination of all pointers, then advances every pointer whose point
    is exhausted.

    Args:
        inst: the instance.
        measures: optional subset of measure positions; only their rows are
            satisfied and the point index of every other measure stays 0.

    Returns:
        SparseMass with between ``max |P_i|`` and ``sum |P_i| - n + 1`` entries.
    """
    positions = list(range(inst.n)) if measures is None else sorted(set(measures))
    if not positions:
        raise ContractError('greedy construction needs at least one measure')
    strides = inst.strides
    remaining = [inst.measures[i].masses.copy() for i in positions]
    pointers = [0] * len(positions)
    sizes = [inst.measures[i].size for i in positions]
    n_o = [strides.n_o[i] for i in positions]
    entries = {}
    assigned = 0.0
    while assigned < 1.0 - MASS_ZERO_TOL and all(j < size for j, size in zip(pointers, sizes)):
        amount = min(rem[j] for rem, j in zip(remaining, pointers))
        h = sum(j * stride for j, stride in zip(pointers, n_o))
        entries[h] = entries.get(h, 0.0) + amount
        assigned += amount
        for k, rem in enumerate(remaining):
            rem[pointers[k]] -= amount
            if rem[pointers[k]] <= MASS_ZERO_TOL:
                pointers[k] += 1
    mass = SparseMass(entries)
    logger.debug(f'[greedy] {len(mass)} combinations for sizes {[inst.sizes[i] for i in positions]}')
    return mass


@dataclass(frozen=True, eq=False)
class ApproxBarycenter:
    """
    A barycenter whose support is restricted to the input support points.

    ``plans[i][s, j]`` is the mass support point ``s`` sends to point ``j``
    of measure ``i``; every plan's rows sum to ``mass``.
    """

    support: np.ndarray
    mass: np.ndarray
    plans: tuple
    cost: float

    @property
    def size(self):
        return self.mass.size

    def flows(self, i, s):
        """
        Nonzero ``(point index, mass)`` pairs sent by support point ``s`` to measure ``i``.
        """
        row = self.plans[i][s]
        return [(int(j), float(row[j])) for j in np.flatnonzero(row > MASS_ZERO_TOL)]


def _candidate_support(inst):
    return np.unique(np.concatenate([measure.points for measure in inst.measures]), axis=0)


def two_approx(inst, solver=None):
    """
    Solve the barycenter LP with support restricted to the union of the input supports.

    Variables are the flows ``y[i][s, j]`` from candidate ``s`` to point ``j``
    of measure ``i``. The mass ``z_s`` of a candidate is the row sum of the
    first measure's flows, so the coupling rows read
    ``sum_j y[i][s, j] - sum_j y[0][s, j] = 0`` for every other measure.

    Raises:
        SimplexError: the LP did not solve to optimality.
    """
    solver = solver or SimplexSolver()
    candidates = _candidate_support(inst)
    n_s = candidates.shape[0]
    sizes = inst.sizes
    offsets = np.concatenate([[0], np.cumsum([n_s * size for size in sizes])])
    n_vars = int(offsets[-1])
    n_coupling = (inst.n - 1) * n_s
    A = np.zeros((n_coupling + sum(sizes), n_vars))
    cost = np.empty(n_vars)
    for i, (lam, measure) in enumerate(zip(inst.lambdas, inst.measures)):
        diff = candidates[:, None, :] - measure.points[None, :, :]
        cost[offsets[i]:offsets[i + 1]] = lam * np.einsum('sjk,sjk->sj', diff, diff).reshape(-1)
        block = np.arange(n_s * sizes[i]).reshape(n_s, sizes[i]) + offsets[i]
        if i > 0:
            for s in range(n_s):
                row = (i - 1) * n_s + s
                A[row, block[s]] = 1.0
                A[row, offsets[0] + s * sizes[0] + np.arange(sizes[0])] = -1.0
        marginal_start = n_coupling + sum(sizes[:i])
        for j in range(sizes[i]):
            A[marginal_start + j, block[:, j]] = 1.0
    rhs = np.concatenate([np.zeros(n_coupling), inst.masses])
    solution = solver.solve(DenseLP(cost, A, rhs))
    if solution.status is not LPStatus.OPTIMAL:
        message = f'restricted-support LP ended {solution.status.value}'
        logger.error(f'[two_approx] {message}')
        raise SimplexError(message)
    x = np.where(solution.x > MASS_ZERO_TOL, solution.x, 0.0)
    plans = [x[offsets[i]:offsets[i + 1]].reshape(n_s, sizes[i]) for i in range(inst.n)]
    mass = plans[0].sum(axis=1)
    keep = mass > MASS_ZERO_TOL
    apx = ApproxBarycenter(
        support=candidates[keep],
        mass=mass[keep],
        plans=tuple(plan[keep] for plan in plans),
        cost=float(cost @ x),
    )
    logger.debug(f'[two_approx] {apx.size} of {n_s} candidates used, cost {apx.cost:.9g}')
    return apx


def _check_consistency(apx, inst):
    if abs(apx.mass.sum() - 1.0) > FEASIBILITY_TOL:
        raise ContractError(f'approximate barycenter has total mass {apx.mass.sum()!r}')
    if len(apx.plans) != inst.n:
        raise ContractError(f'expected {inst.n} transport plans, got {len(apx.plans)}')
    for i, (plan, measure) in enumerate(zip(apx.plans, inst.measures)):
        if plan.shape != (apx.size, measure.size):
            raise ContractError(f'measure {i}: plan shape {plan.shape} does not match')
        if np.any(plan < -FEASIBILITY_TOL):
            raise ContractError(f'measure {i}: negative flow in plan')
        if np.max(np.abs(plan.sum(axis=1) - apx.mass)) > FEASIBILITY_TOL:
            raise ContractError(f'measure {i}: outgoing flows do not match support masses')
        if np.max(np.abs(plan.sum(axis=0) - measure.masses)) > FEASIBILITY_TOL:
            raise ContractError(f'measure {i}: incoming flows do not match point masses')


def repair_to_vertex(apx, inst):
    """
    Split every support point of ``apx`` into combinations that do not split mass.

    Each round takes, for every measure, the lowest-index destination that
    still receives flow from the support point and moves the smallest of
    those flows onto the combination of destinations. The mass then sits at
    the weighted mean of the combination, which never costs more than
    keeping it at the original support point.

    Raises:
        ContractError: the flows of ``apx`` are inconsistent.
    """
    _check_consistency(apx, inst)
    strides = inst.strides
    entries = {}
    for s in range(apx.size):
        left = float(apx.mass[s])
        pending = [[list(flow) for flow in apx.flows(i, s)] for i in range(inst.n)]
        while left > MASS_ZERO_TOL:
            for i, flows in enumerate(pending):
                if not flows:
                    raise ContractError(f'support point {s} has {left!r} mass left but no flow to measure {i}')
            amount = min(left, min(flows[0][1] for flows in pending))
            h = sum(flows[0][0] * n_o for flows, n_o in zip(pending, strides.n_o))
            entries[h] = entries.get(h, 0.0) + amount
            for flows in pending:
                flows[0][1] -= amount
                if flows[0][1] <= MASS_ZERO_TOL:
                    flows.pop(0)
            left -= amount
    mass = SparseMass(entries)
    logger.debug(f'[repair] {apx.size} support points split into {len(mass)} combinations')
    return mass
