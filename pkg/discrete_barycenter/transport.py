"""
Exact solver for the balanced transportation problem.

The pricing problem of the column generation becomes a classical
transportation problem once exactly two measures are assigned to it. It is
solved here with the transportation simplex: a northwest-corner starting
tree, MODI potentials for the reduced costs and cycle pivots along the
spanning tree of basic cells.
"""
import enum
import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from discrete_barycenter.exceptions import ContractError, SimplexError
from discrete_barycenter.simplex import DenseLP, LPStatus, SimplexSolver

logger = logging.getLogger(__name__)

BALANCE_TOL = 1e-9
REDUCED_COST_TOL = 1e-11
FLOW_TIE_TOL = 1e-15


class TransportMethod(str, enum.Enum):
    MODI = 'modi'
    SIMPLEX = 'simplex'


@dataclass(frozen=True, eq=False)
class TransportationProblem:
    """
    Ship ``supplies`` (rows) to ``demands`` (columns) at ``costs[row, col]`` per unit.
    """

    supplies: np.ndarray
    demands: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        supplies = np.asarray(self.supplies, dtype=float).reshape(-1)
        demands = np.asarray(self.demands, dtype=float).reshape(-1)
        costs = np.asarray(self.costs, dtype=float)
        if costs.shape != (supplies.size, demands.size):
            raise ContractError(
                f'cost matrix shape {costs.shape} does not match '
                f'{supplies.size} supplies and {demands.size} demands'
            )
        if supplies.size == 0 or demands.size == 0:
            raise ContractError('a transportation problem needs supplies and demands')
        if np.any(supplies <= 0) or np.any(demands <= 0):
            raise ContractError('supplies and demands must be positive')
        if not np.all(np.isfinite(costs)):
            raise ContractError('costs must be finite')
        gap = abs(supplies.sum() - demands.sum())
        if gap > BALANCE_TOL:
            raise ContractError(f'unbalanced transportation problem (supply - demand = {gap:.3e})')
        object.__setattr__(self, 'supplies', supplies)
        object.__setattr__(self, 'demands', demands)
        object.__setattr__(self, 'costs', costs)

    @property
    def shape(self):
        return self.costs.shape


@dataclass(frozen=True)
class TransportPlan:
    """
    Nonzero flows ``(row, col, mass)`` of a basic optimal plan, in row-major order.
    """

    flows: tuple
    objective: float


class _TransportSimplex:
    """
    Transportation simplex over a spanning tree of basic cells.

    Rows are tree nodes ``0..m-1`` and columns nodes ``m..m+k-1``. The tree
    always has ``m + k - 1`` cells, some of them possibly carrying zero flow.
    """

    def __init__(self, problem, max_iterations=100_000, bland_after=50):
        self.problem = problem
        self.m, self.k = problem.shape
        self.max_iterations = max_iterations
        self.bland_after = bland_after
        self.flows = {}
        self.iterations = 0
        self.degenerate_streak = 0

    def _northwest_corner(self):
        supply = self.problem.supplies.copy()
        demand = self.problem.demands.copy()
        i = j = 0
        while True:
            amount = max(min(supply[i], demand[j]), 0.0)
            self.flows[(i, j)] = amount
            supply[i] -= amount
            demand[j] -= amount
            if i == self.m - 1 and j == self.k - 1:
                break
            if j == self.k - 1 or (i < self.m - 1 and supply[i] <= demand[j]):
                i += 1
            else:
                j += 1

    def _adjacency(self):
        neighbours = [[] for _ in range(self.m + self.k)]
        for i, j in self.flows:
            neighbours[i].append(self.m + j)
            neighbours[self.m + j].append(i)
        return neighbours

    def _potentials(self):
        costs = self.problem.costs
        u = np.zeros(self.m)
        v = np.zeros(self.k)
        neighbours = self._adjacency()
        seen = [False] * (self.m + self.k)
        seen[0] = True
        queue = deque([0])
        while queue:
            node = queue.popleft()
            for other in neighbours[node]:
                if seen[other]:
                    continue
                seen[other] = True
                if node < self.m:
                    v[other - self.m] = costs[node, other - self.m] - u[node]
                else:
                    u[other] = costs[other, node - self.m] - v[node - self.m]
                queue.append(other)
        if not all(seen):
            raise ContractError('basic cells do not span all rows and columns')
        return u, v

    def _entering(self, u, v):
        reduced = self.problem.costs - u[:, None] - v[None, :]
        for cell in self.flows:
            reduced[cell] = 0.0
        negative = reduced < -REDUCED_COST_TOL
        if not negative.any():
            return None
        if self.degenerate_streak >= self.bland_after:
            flat = int(np.argmax(negative))
        else:
            flat = int(np.argmin(reduced))
        return divmod(flat, self.k)

    def _cycle(self, cell):
        """
        Cells of the pivot cycle, starting with the entering cell.
        """
        row, col = cell
        neighbours = self._adjacency()
        parent = {row: None}
        queue = deque([row])
        target = self.m + col
        while queue and target not in parent:
            node = queue.popleft()
            for other in neighbours[node]:
                if other not in parent:
                    parent[other] = node
                    queue.append(other)
        if target not in parent:
            raise ContractError(f'no tree path closes a cycle through cell {cell}')
        cycle = [cell]
        node = target
        while parent[node] is not None:
            previous = parent[node]
            if node >= self.m:
                cycle.append((previous, node - self.m))
            else:
                cycle.append((node, previous - self.m))
            node = previous
        return cycle

    def _pivot(self, cell):
        cycle = self._cycle(cell)
        donors = cycle[1::2]
        theta = min(self.flows[donor] for donor in donors)
        leaving = min(donor for donor in donors if self.flows[donor] - theta <= FLOW_TIE_TOL)
        for receiver in cycle[2::2]:
            self.flows[receiver] += theta
        for donor in donors:
            self.flows[donor] = max(self.flows[donor] - theta, 0.0)
        del self.flows[leaving]
        self.flows[cell] = theta
        self.iterations += 1
        if theta <= FLOW_TIE_TOL:
            self.degenerate_streak += 1
        else:
            self.degenerate_streak = 0

    def run(self):
        self._northwest_corner()
        while True:
            if self.iterations >= self.max_iterations:
                raise SimplexError(f'transportation simplex did not finish in {self.max_iterations} pivots')
            u, v = self._potentials()
            cell = self._entering(u, v)
            if cell is None:
                break
            self._pivot(cell)
        costs = self.problem.costs
        flows = tuple(
            (i, j, self.flows[(i, j)])
            for i, j in sorted(self.flows)
            if self.flows[(i, j)] > 0.0
        )
        objective = float(sum(mass * costs[i, j] for i, j, mass in flows))
        return TransportPlan(flows=flows, objective=objective)


def _solve_with_simplex(problem):
    m, k = problem.shape
    A = np.zeros((m + k, m * k))
    for i in range(m):
        A[i, i * k:(i + 1) * k] = 1.0
    for j in range(k):
        A[m + j, j::k] = 1.0
    lp = DenseLP(problem.costs.reshape(-1), A, np.concatenate([problem.supplies, problem.demands]))
    solution = SimplexSolver().solve(lp)
    if solution.status is not LPStatus.OPTIMAL:
        raise ContractError(f'transportation LP reported {solution.status.value}')
    flows = tuple(
        (int(flat // k), int(flat % k), float(solution.x[flat]))
        for flat in np.flatnonzero(solution.x > 0.0)
    )
    return TransportPlan(flows=flows, objective=solution.objective)


def solve_transportation(problem, method=TransportMethod.MODI):
    """
    Return an optimal basic flow for a balanced transportation problem.

    Costs may be negative. Ties among entering and leaving cells are broken
    by the lowest ``(row, col)``, so the result is deterministic.
    ``method='simplex'`` routes the same problem through the generic simplex
    kernel instead, which is useful for differential testing.
    """
    method = TransportMethod(method)
    if method is TransportMethod.SIMPLEX:
        return _solve_with_simplex(problem)
    solver = _TransportSimplex(problem)
    plan = solver.run()
    logger.debug(f'[transport] {problem.shape} solved in {solver.iterations} pivots, objective {plan.objective:.9g}')
    return plan
