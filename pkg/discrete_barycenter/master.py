"""
The restricted master problem of the Dantzig-Wolfe decomposition.

Every column is a vertex ``p_j`` of the pricing polytope ``{p : A_p p = d_p}``.
The master picks a convex combination of them that also meets the rows of
the remaining (master) measures::

    min  sum_j (c^T p_j) mu_j
    s.t. sum_j (A_m p_j) mu_j = d_m
         -sum_j mu_j          = -1
         mu >= 0

The convexity row is written with a negative sign so that its dual enters
the pricing objective with a plus sign.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from discrete_barycenter.exceptions import ContractError, MasterError, NumericalError, SimplexError
from discrete_barycenter.model import (
    FEASIBILITY_TOL,
    Barycenter,
    SparseMass,
    combination_costs,
    dense_columns,
    feasibility_residual,
    marginals,
    reindex,
)
from discrete_barycenter.simplex import DenseLP, LinearProgram, LPStatus, SimplexSolver

logger = logging.getLogger(__name__)

MONOTONICITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DWColumn:
    """
    A master column: the vertex ``p``, its cost and its master-row image ``A_m p``.
    """

    p: SparseMass
    cost: float
    amp: np.ndarray


class MasterLP(LinearProgram):
    """
    The master LP over the columns generated so far.
    """

    def __init__(self, columns, rhs):
        self._cost = np.array([column.cost for column in columns])
        self._rhs = rhs
        matrix = np.empty((rhs.size, len(columns)))
        for j, column in enumerate(columns):
            matrix[:-1, j] = column.amp
            matrix[-1, j] = -1.0
        self.matrix = matrix

    @property
    def cost(self):
        return self._cost

    @property
    def rhs(self):
        return self._rhs

    def columns(self, indices):
        return self.matrix[:, np.asarray(indices, dtype=np.int64)]

    def transpose_dot(self, y):
        return self.matrix.T @ y


@dataclass
class MasterState:
    """
    Columns, current solution and warm-start basis of the master problem.

    Columns live in the index space of ``permuted``, the instance with the
    pricing pair in front.
    """

    inst: object
    permuted: object
    partition: object
    rhs: np.ndarray
    solver: SimplexSolver
    columns: list = field(default_factory=list)
    mu: np.ndarray = None
    y: np.ndarray = None
    sigma: float = 0.0
    basis: object = None
    objective: float = None
    history: list = field(default_factory=list)
    pivots: int = 0

    @property
    def n_master_rows(self):
        return self.rhs.size


def _column(p, permuted):
    masters = range(2, permuted.n)
    delivered = marginals(p, permuted, masters)
    amp = np.concatenate([delivered[k] for k in masters]) if permuted.n > 2 else np.zeros(0)
    return DWColumn(p=p, cost=p.cost(permuted), amp=amp)


def init_rm(p1, inst, partition, solver=None):
    """
    Start the master problem from a feasible mass vector of the full LP.

    ``p1`` is given in the index space of ``inst`` and moved to the permuted
    space of ``partition`` before becoming the first column.

    Raises:
        ContractError: ``p1`` does not satisfy ``A p = d``.
    """
    residual = feasibility_residual(p1, inst)
    if residual > FEASIBILITY_TOL:
        message = f'initial vertex violates A p = d by {residual:.3e}'
        logger.error(f'[master] {message}')
        raise ContractError(message)
    permuted = inst.permuted(partition.perm)
    masters = permuted.masses[permuted.strides.row_offsets[2]:]
    state = MasterState(
        inst=inst,
        permuted=permuted,
        partition=partition,
        rhs=np.concatenate([masters, [-1.0]]),
        solver=solver or SimplexSolver(),
    )
    add_column(state, reindex(p1, inst.strides, permuted.strides, partition.perm))
    solve_rm(state)
    return state


def add_column(state, p):
    """
    Append the vertex ``p`` (permuted index space) as a new master column.
    """
    column = _column(p, state.permuted)
    state.columns.append(column)
    return column


def solve_rm(state):
    """
    Re-solve the master problem, warm-started from the previous basis.

    Returns:
        ``(mu, y, sigma, objective)`` with ``y`` the duals of the master
        measure rows and ``sigma`` the dual of the convexity row.

    A warm solve that fails numerically is retried once from scratch.

    Raises:
        MasterError: the master problem did not solve to optimality.
    """
    lp = MasterLP(state.columns, state.rhs)
    try:
        solution = state.solver.solve(lp, warm=state.basis)
    except NumericalError as err:
        if state.basis is None:
            raise MasterError(f'master problem with {len(state.columns)} columns: {err}') from err
        logger.warning(f'[master] Warm solve failed ({err}), solving from scratch')
        try:
            solution = state.solver.solve(lp)
        except NumericalError as cold_err:
            raise MasterError(f'master problem with {len(state.columns)} columns: {cold_err}') from cold_err
    if solution.status is not LPStatus.OPTIMAL:
        message = f'master problem with {len(state.columns)} columns ended {solution.status.value}'
        logger.error(f'[master] {message}')
        raise MasterError(message)
    if state.objective is not None and solution.objective > state.objective + MONOTONICITY_TOL:
        logger.warning(
            f'[master] Objective rose from {state.objective:.12g} to {solution.objective:.12g}'
        )
    state.mu = solution.x
    state.y = solution.duals[:-1]
    state.sigma = float(solution.duals[-1])
    state.basis = solution.basis
    state.objective = solution.objective
    state.history.append(solution.objective)
    state.pivots += solution.iterations
    return state.mu, state.y, state.sigma, state.objective


def raw_weights(state):
    """
    ``w = sum_j mu_j p_j`` in the permuted index space.
    """
    return SparseMass.combine(
        (float(mu), column.p) for mu, column in zip(state.mu, state.columns) if mu > 0
    )


def polish(state):
    """
    Re-solve the full LP restricted to the combinations used by any column.

    The result is a basic optimal mass vector in the permuted index space,
    so it has at most ``sum |P_i| - n + 1`` entries. Falls back to the raw
    convex combination if the restricted LP does not solve.
    """
    used = sorted({h for column in state.columns for h in column.p})
    indices = np.array(used, dtype=np.uint64)
    permuted = state.permuted
    lp = DenseLP(combination_costs(indices, permuted), dense_columns(indices, permuted.strides), permuted.masses)
    try:
        solution = state.solver.solve(lp)
    except SimplexError as err:
        logger.warning(f'[master] Polish LP failed ({err}), keeping the convex combination')
        return raw_weights(state)
    if solution.status is not LPStatus.OPTIMAL:
        logger.warning(f'[master] Polish LP ended {solution.status.value}, keeping the convex combination')
        return raw_weights(state)
    logger.debug(
        f'[master] Polish over {len(used)} combinations: objective {solution.objective:.12g} '
        f'(master {state.objective:.12g})'
    )
    return SparseMass(zip(used, solution.x))


def recover_solution(state, weights=None):
    """
    The barycenter for ``weights`` (default: the raw convex combination), in input order.
    """
    if weights is None:
        weights = raw_weights(state)
    partition = state.partition
    original = reindex(weights, state.permuted.strides, state.inst.strides, partition.inverse)
    if not original and state.inst.n:
        raise ContractError('master solution carries no mass')
    return Barycenter.from_mass(original, state.inst)
