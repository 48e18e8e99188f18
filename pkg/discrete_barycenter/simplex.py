"""
Dense two-phase primal simplex for equality-form linear programs.

Solves ``min c^T x  s.t.  A x = b, x >= 0`` with an explicit basis inverse
that is updated by rank-one pivots and refactorized periodically. A previous
basis can be passed back in as a warm start, which is how the restricted
master problem is re-solved after each new column.
"""
import abc
import enum
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from discrete_barycenter.exceptions import NumericalError, SimplexError

logger = logging.getLogger(__name__)


class LPStatus(enum.Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    UNBOUNDED = 'unbounded'


@dataclass(frozen=True)
class SimplexOptions:
    """
    Tolerances and pivoting limits of the simplex kernel.
    """

    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-9
    # Pivot and drive-out thresholds are relative to the largest entry of the direction or row.
    pivot_tol: float = 1e-9
    drive_out_tol: float = 1e-7
    # Basic values may overshoot to -harris_tol in the ratio test in exchange for a larger pivot.
    harris_tol: float = 1e-12
    # Dantzig pricing switches to Bland's rule after this many degenerate pivots in a row.
    bland_after: int = 50
    refactor_period: int = 100
    max_condition: float = 1e14
    # Columns whose QR diagonal falls below this fraction of the largest are treated as dependent.
    rank_tol: float = 1e-9
    max_repairs: int = 5
    max_iterations: int = 100_000


class LinearProgram(abc.ABC):
    """
    An equality-form LP whose constraint matrix is available column by column.

    Subclasses only have to hand out selected columns and the product
    ``A^T y``; the matrix itself may be implicit.
    """

    @property
    @abc.abstractmethod
    def cost(self):
        """
        Objective coefficients, one per column.
        """

    @property
    @abc.abstractmethod
    def rhs(self):
        """
        Right-hand side, one entry per row.
        """

    @abc.abstractmethod
    def columns(self, indices):
        """
        Dense ``(n_rows, len(indices))`` block of the selected columns.
        """

    @abc.abstractmethod
    def transpose_dot(self, y):
        """
        ``A^T y`` over all columns.
        """

    @property
    def n_rows(self):
        return self.rhs.size

    @property
    def n_cols(self):
        return self.cost.size


class DenseLP(LinearProgram):
    """
    An LP with an explicitly stored dense constraint matrix.
    """

    def __init__(self, cost, A, rhs):
        cost = np.asarray(cost, dtype=float).reshape(-1)
        rhs = np.asarray(rhs, dtype=float).reshape(-1)
        A = np.asarray(A, dtype=float).reshape(rhs.size, cost.size)
        for name, values in (('cost', cost), ('A', A), ('rhs', rhs)):
            if not np.all(np.isfinite(values)):
                raise ValueError(f'{name} contains non-finite values')
        if rhs.size == 0:
            raise ValueError('an LP needs at least one constraint row')
        self._cost = cost
        self._rhs = rhs
        self.A = A

    @property
    def cost(self):
        return self._cost

    @property
    def rhs(self):
        return self._rhs

    def columns(self, indices):
        return self.A[:, np.asarray(indices, dtype=np.int64)]

    def transpose_dot(self, y):
        return self.A.T @ y


@dataclass(frozen=True)
class Basis:
    """
    The basic column of every row position.

    Nonnegative entries are column indices of the LP; a negative entry
    ``-1 - r`` stands for the artificial variable of row ``r``, so a basis
    stays meaningful after columns are appended to the LP.
    """

    basic: tuple

    @staticmethod
    def artificial(row):
        return -1 - row


@dataclass
class LPSolution:
    status: LPStatus
    x: np.ndarray
    duals: np.ndarray
    objective: float
    basis: Basis
    iterations: int


class _BasisRepaired(Exception):
    """
    The basis was replaced during a refactorization and the phases must restart from it.
    """


class _SimplexRun:
    """
    State of one solve: basis, its inverse and the basic values.
    """

    def __init__(self, lp, options):
        self.lp = lp
        self.options = options
        self.m = lp.n_rows
        rhs = lp.rhs
        # Rows are sign-flipped so the right-hand side is nonnegative and the
        # artificial identity is a feasible starting basis.
        self.signs = np.where(rhs < 0, -1.0, 1.0)
        self.b = self.signs * rhs
        self.basic = None
        self.binv = None
        self.x_b = None
        self.iterations = 0
        self.degenerate_streak = 0
        self.since_refactor = 0

    def _basis_matrix(self):
        B = np.zeros((self.m, self.m))
        real = self.basic >= 0
        if real.any():
            B[:, real] = self.signs[:, None] * self.lp.columns(self.basic[real])
        for position in np.flatnonzero(~real):
            B[-1 - self.basic[position], position] = 1.0
        return B

    def _factorize(self):
        B = self._basis_matrix()
        with np.errstate(all='ignore'):
            lu = linalg.lu_factor(B, check_finite=False)
            binv = linalg.lu_solve(lu, np.eye(self.m), check_finite=False)
        if not np.all(np.isfinite(binv)):
            return B, None, np.inf
        return B, binv, np.linalg.norm(B, 1) * np.linalg.norm(binv, 1)

    def _replace_dependent_columns(self, B):
        """
        Put artificials on the basis positions whose columns are numerically dependent.

        A pivoted QR of ``B`` ranks the basic columns; the rows left uncovered
        by the kept columns, found by a pivoted QR of their transpose, receive
        the artificials.
        """
        _, R, order = linalg.qr(B, mode='economic', pivoting=True)
        diagonal = np.abs(np.diag(R))
        rank = int(np.sum(diagonal > self.options.rank_tol * diagonal[0])) if diagonal[0] > 0 else 0
        if rank:
            _, _, rows = linalg.qr(B[:, order[:rank]].T, mode='economic', pivoting=True)
            free_rows = rows[rank:]
        else:
            free_rows = np.arange(self.m)
        basic = self.basic.copy()
        basic[order[rank:]] = [Basis.artificial(int(row)) for row in free_rows]
        if np.unique(basic).size < self.m:
            basic = np.array([Basis.artificial(r) for r in range(self.m)], dtype=np.int64)
        logger.debug(f'[simplex] {self.m - rank} dependent basic columns replaced by artificials')
        self.basic = basic

    def _refactor(self, repair=True):
        """
        Recompute the basis inverse and the basic values from scratch.

        An ill-conditioned basis gets artificials on its dependent positions,
        or the all-artificial basis if that is not enough.

        Returns:
            True when the basis had to be repaired.

        Raises:
            NumericalError: the basis is ill-conditioned and ``repair`` is off.
        """
        B, binv, condition = self._factorize()
        repaired = condition > self.options.max_condition
        if repaired:
            if not repair:
                raise NumericalError(f'basis condition estimate {condition:.3e} exceeds threshold')
            logger.warning(f'[simplex] Basis condition estimate {condition:.3e} exceeds threshold, repairing')
            self._replace_dependent_columns(B)
            B, binv, condition = self._factorize()
            if condition > self.options.max_condition:
                logger.warning('[simplex] Repaired basis is still ill-conditioned, using the artificial basis')
                self.basic = np.array([Basis.artificial(r) for r in range(self.m)], dtype=np.int64)
                binv = np.eye(self.m)
        self.binv = binv
        self.x_b = binv @ self.b
        self._clip()
        self.since_refactor = 0
        return repaired

    def _clip(self):
        tiny = (self.x_b < 0) & (self.x_b > -self.options.feasibility_tol)
        self.x_b[tiny] = 0.0

    def _cold_start(self):
        self.basic = np.array([Basis.artificial(r) for r in range(self.m)], dtype=np.int64)
        self.binv = np.eye(self.m)
        self.x_b = self.b.copy()
        self.since_refactor = 0

    def _warm_start(self, warm):
        basic = np.array(warm.basic, dtype=np.int64)
        valid = (
            basic.size == self.m
            and np.unique(basic).size == self.m
            and np.all(basic < self.lp.n_cols)
            and np.all(basic >= -self.m)
        )
        if not valid:
            logger.warning('[simplex] Ignoring warm basis that does not fit the LP dimensions')
            return False
        self.basic = basic
        try:
            self._refactor(repair=False)
        except NumericalError as err:
            logger.warning(f'[simplex] Ignoring warm basis: {err}')
            return False
        if np.any(self.x_b < -self.options.feasibility_tol):
            logger.debug('[simplex] Warm basis is primal infeasible, starting cold')
            return False
        return True

    def _basic_costs(self, c_real, c_art):
        real = self.basic >= 0
        c_b = np.full(self.m, c_art)
        c_b[real] = c_real[self.basic[real]]
        return c_b

    def _choose_entering(self, reduced):
        candidates = reduced < -self.options.optimality_tol
        if not candidates.any():
            return None
        if self.degenerate_streak >= self.options.bland_after:
            return int(np.argmax(candidates))
        return int(np.argmin(reduced))

    def _ratio_test(self, d):
        """
        Leaving row for direction ``d``, or None if ``d`` has no eligible pivot.

        Harris' two passes: the first bounds the step with every basic value
        allowed to go ``harris_tol`` negative, the second takes the
        largest pivot among the rows that block within that bound.
        """
        options = self.options
        eligible = d > options.pivot_tol * max(1.0, float(np.abs(d).max()))
        if not eligible.any():
            return None
        x = np.maximum(self.x_b, 0.0)
        ratios = np.full(self.m, np.inf)
        ratios[eligible] = x[eligible] / d[eligible]
        if self.degenerate_streak >= options.bland_after:
            ties = np.flatnonzero(ratios <= ratios.min() + options.feasibility_tol)
            return int(ties[np.argmin(self.basic[ties])])
        bound = float(np.min((x[eligible] + options.harris_tol) / d[eligible]))
        ties = np.flatnonzero(ratios <= bound)
        pivots = d[ties]
        # artificials leave first, unless that means a much smaller pivot
        artificial_ties = ties[(self.basic[ties] < 0) & (pivots >= 0.1 * pivots.max())]
        if artificial_ties.size:
            ties = artificial_ties
        return int(ties[np.argmax(d[ties])])

    def _entering_direction(self, column):
        a = self.signs * self.lp.columns([column])[:, 0]
        return self.binv @ a

    def _pivot(self, row, column, d):
        theta = max(self.x_b[row], 0.0) / d[row]
        self.x_b -= theta * d
        self.x_b[row] = theta
        pivot_row = self.binv[row] / d[row]
        self.binv -= np.outer(d, pivot_row)
        self.binv[row] = pivot_row
        self.basic[row] = column
        self.iterations += 1
        if theta <= self.options.feasibility_tol:
            self.degenerate_streak += 1
        else:
            self.degenerate_streak = 0
        self.since_refactor += 1
        if self.since_refactor >= self.options.refactor_period:
            if self._refactor():
                raise _BasisRepaired
        else:
            self._clip()

    def _iterate(self, c_real, c_art):
        """
        Run primal simplex pivots with the given phase costs until optimal or unbounded.
        """
        while True:
            if self.iterations >= self.options.max_iterations:
                raise SimplexError(f'simplex iteration limit {self.options.max_iterations} reached')
            y = self.binv.T @ self._basic_costs(c_real, c_art)
            reduced = c_real - self.lp.transpose_dot(self.signs * y)
            real = self.basic[self.basic >= 0]
            reduced[real] = 0.0
            entering = self._choose_entering(reduced)
            if entering is None:
                return LPStatus.OPTIMAL
            d = self._entering_direction(entering)
            row = self._ratio_test(d)
            if row is None:
                return LPStatus.UNBOUNDED
            self._pivot(row, entering, d)

    def _artificial_level(self):
        artificial = self.basic < 0
        return float(self.x_b[artificial].sum()) if artificial.any() else 0.0

    def _drive_out_artificials(self):
        """
        Pivot zero-valued artificials out of the basis where the row allows it.

        Artificials left behind sit on redundant rows and stay at zero.
        """
        for position in np.flatnonzero(self.basic < 0):
            row = self.lp.transpose_dot(self.signs * self.binv[position])
            row[self.basic[self.basic >= 0]] = 0.0
            magnitude = np.abs(row)
            column = int(np.argmax(magnitude))
            scale = max(1.0, float(np.abs(self.binv[position]).max()))
            if magnitude[column] <= self.options.drive_out_tol * scale:
                continue
            d = self._entering_direction(column)
            self.x_b[position] = 0.0
            self._pivot(position, column, d)

    def _phases(self):
        lp = self.lp
        tol = self.options.feasibility_tol * max(1.0, float(np.abs(self.b).sum()))
        if self._artificial_level() > tol:
            status = self._iterate(np.zeros(lp.n_cols), 1.0)
            if status is not LPStatus.OPTIMAL or self._artificial_level() > tol:
                logger.debug(f'[simplex] Phase I ended with infeasibility {self._artificial_level():.3e}')
                return LPStatus.INFEASIBLE
        if np.any(self.basic < 0):
            self._drive_out_artificials()
        status = self._iterate(lp.cost, 0.0)
        if self.since_refactor and self._refactor():
            raise _BasisRepaired
        return status

    def solve(self, warm):
        if warm is None or not self._warm_start(warm):
            self._cold_start()
        repairs = 0
        while True:
            try:
                return self._solution(self._phases())
            except _BasisRepaired:
                repairs += 1
            if repairs > self.options.max_repairs:
                raise NumericalError(f'basis still ill-conditioned after {self.options.max_repairs} repairs')
            if np.any(self.x_b < -self.options.feasibility_tol):
                logger.warning('[simplex] Repaired basis is primal infeasible, restarting from the artificial basis')
                self._cold_start()

    def _solution(self, status):
        lp = self.lp
        x = np.zeros(lp.n_cols)
        real = self.basic >= 0
        x[self.basic[real]] = self.x_b[real]
        y = self.binv.T @ self._basic_costs(lp.cost, 0.0)
        return LPSolution(
            status=status,
            x=x,
            duals=self.signs * y,
            objective=float(lp.cost @ x),
            basis=Basis(tuple(int(j) for j in self.basic)),
            iterations=self.iterations,
        )


class SimplexSolver:
    """
    Primal simplex solver; one instance handles one solve at a time.
    """

    def __init__(self, options=None):
        self.options = options or SimplexOptions()

    def solve(self, lp, warm=None):
        """
        Solve ``lp``, optionally starting from basis ``warm``.

        Without a usable warm basis the solve starts from the artificial
        basis and runs Phase I first. A basis that turns ill-conditioned
        during the solve is repaired with artificials and the phases resume
        from it. Infeasible and unbounded problems are reported through
        ``LPSolution.status``.

        Raises:
            NumericalError: the basis stayed ill-conditioned through ``max_repairs`` repairs.
            SimplexError: the iteration limit was reached.
        """
        solution = _SimplexRun(lp, self.options).solve(warm)
        logger.debug(
            f'[simplex] {solution.status.value} after {solution.iterations} pivots '
            f'({lp.n_rows} rows, {lp.n_cols} columns)'
        )
        return solution


def solve(lp, warm=None, options=None):
    """
    Convenience wrapper around :class:`SimplexSolver`.
    """
    return SimplexSolver(options).solve(lp, warm)
