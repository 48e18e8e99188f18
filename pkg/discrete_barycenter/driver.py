"""
The column generation loop and the direct LP solve used as its reference.
"""
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from discrete_barycenter.config import SolveConfig, StartMethod
from discrete_barycenter.exceptions import CapacityError, SimplexError
from discrete_barycenter.initialization import greedy_vertex, repair_to_vertex, two_approx
from discrete_barycenter.master import add_column, init_rm, polish, raw_weights, recover_solution, solve_rm
from discrete_barycenter.model import Barycenter, SparseMass, along_axis, cost_vector, dense_columns
from discrete_barycenter.pricing import (
    FLOAT_BYTES,
    INDEX_BYTES,
    best_costs,
    choose_partition,
    expand_column,
    init_reduced_costs,
    recompute_reduced_costs,
    solve_pricing,
    update_reduced_costs,
)
from discrete_barycenter.simplex import LinearProgram, LPStatus, SimplexSolver
from discrete_barycenter.transport import TransportationProblem, solve_transportation

logger = logging.getLogger(__name__)

TIMING_STEPS = ('setup-RM', 'solve-RM', 'update-reduced-costs', 'calc-best-costs', 'solve-pricing')
DIRECT_STEP = 'solve-direct'


class StepTimer:
    """
    Accumulates wall-clock seconds per named step.
    """

    def __init__(self, steps=TIMING_STEPS):
        self.seconds = {step: 0.0 for step in steps}

    @contextmanager
    def step(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + time.perf_counter() - start


class MemoryLedger:
    """
    Bytes of the persistent arrays of a run, by name, and the peak of their sum.
    """

    def __init__(self):
        self.records = {}
        self.peak = 0

    @property
    def current(self):
        return sum(self.records.values())

    def allocate(self, name, nbytes):
        """
        Record (or resize) allocation ``name``.
        """
        self.records[name] = int(nbytes)
        self.peak = max(self.peak, self.current)


def direct_memory_estimate(strides):
    """
    Bytes an explicit sparse constraint matrix and cost vector of the full LP would take.

    Every one of the ``N`` columns has ``n`` nonzeros, each stored as an
    index and a coefficient.
    """
    return strides.total * (strides.n * (INDEX_BYTES + FLOAT_BYTES) + FLOAT_BYTES)


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    rm_objective: float
    pricing_objective: float


@dataclass(frozen=True)
class RunStats:
    """
    Sizes seen during a run.

    ``raw_support`` counts the combinations of the master's convex
    combination, ``polished_support`` those of the reported solution.
    """

    variant: str = ''
    pair: tuple = ()
    master_rows: int = 0
    n_u: int = 0
    n_d: int = 0
    initial_objective: float = 0.0
    columns: int = 0
    pivots: int = 0
    raw_support: int = 0
    polished_support: int = 0


@dataclass(frozen=True, eq=False)
class SolveResult:
    """
    Outcome of a barycenter solve.

    ``iterations`` counts the columns added to the master problem (simplex
    pivots for the direct solve). ``trace`` holds one entry per pricing round.
    """

    barycenter: Barycenter
    objective: float
    iterations: int
    converged: bool
    timings: dict
    peak_memory: int
    trace: tuple = ()
    stats: RunStats = field(default_factory=RunStats)

    def timing_shares(self):
        """
        Percentage of the measured time spent in each step.
        """
        total = sum(self.timings.values())
        if total <= 0:
            return {step: 0.0 for step in self.timings}
        return {step: 100.0 * seconds / total for step, seconds in self.timings.items()}

    def error_trace(self, reference):
        """
        Absolute error of the master objective against a known optimum, per trace entry.
        """
        return np.array([abs(entry.rm_objective - reference) for entry in self.trace])


def _single_measure(inst, timer):
    with timer.step('setup-RM'):
        mass = greedy_vertex(inst)
        barycenter = Barycenter.from_mass(mass, inst)
    return barycenter


def _two_measures(inst, cfg, timer, ledger):
    ledger.allocate('cost-vector', FLOAT_BYTES * inst.n_combinations)
    with timer.step('solve-pricing'):
        costs = cost_vector(inst).reshape(inst.sizes)
        problem = TransportationProblem(inst.measures[0].masses, inst.measures[1].masses, costs)
        plan = solve_transportation(problem, cfg.transport_method)
    size_b = inst.sizes[1]
    mass = SparseMass((row * size_b + col, flow) for row, col, flow in plan.flows)
    return Barycenter.from_mass(mass, inst)


def _start_vertex(inst, cfg):
    if cfg.start is StartMethod.GREEDY:
        return greedy_vertex(inst)
    return repair_to_vertex(two_approx(inst), inst)


def _result(barycenter, iterations, converged, timer, ledger, trace=(), stats=None):
    return SolveResult(
        barycenter=barycenter,
        objective=barycenter.objective,
        iterations=iterations,
        converged=converged,
        timings=dict(timer.seconds),
        peak_memory=ledger.peak,
        trace=tuple(trace),
        stats=stats or RunStats(),
    )


def solve(inst, cfg=None, ledger=None):
    """
    Solve the barycenter problem of ``inst`` by column generation.

    One or two measures are handled without the loop. Otherwise the pricing
    pair is chosen, the master problem starts from the configured initial
    vertex, and columns are added until the pricing objective is no longer
    below ``-cfg.tol`` or ``cfg.max_iter`` columns were added. A run that hits
    the limit returns its current solution with ``converged=False``.

    Raises:
        CapacityError: the reduced-cost arrays would exceed ``cfg.memory_cap``.
    """
    cfg = cfg or SolveConfig()
    ledger = ledger if ledger is not None else MemoryLedger()
    timer = StepTimer()
    logger.info(f'[solve] {inst.n} measures, sizes {list(inst.sizes)}, variant {cfg.variant}')
    if inst.n == 1:
        return _result(_single_measure(inst, timer), 0, True, timer, ledger)
    if inst.n == 2:
        return _result(_two_measures(inst, cfg, timer, ledger), 0, True, timer, ledger)

    partition = choose_partition(inst, cfg.pair_variant)
    permuted = inst.permuted(partition.perm)
    with timer.step('update-reduced-costs'):
        pricing = init_reduced_costs(permuted, partition, cfg.memory_cap, ledger)
    with timer.step('setup-RM'):
        master = init_rm(_start_vertex(inst, cfg), inst, partition)
    pair_masses = (permuted.measures[0].masses, permuted.measures[1].masses)
    logger.info(
        f'[solve] Pricing pair {partition.pair}: n_u={partition.n_u}, n_d={partition.n_d}, '
        f'initial objective {master.objective:.12g}'
    )

    trace = []
    iterations = 0
    since_recompute = 0
    converged = False
    while True:
        with timer.step('update-reduced-costs'):
            if since_recompute >= cfg.recompute_period:
                recompute_reduced_costs(pricing, master.y)
                since_recompute = 0
            else:
                update_reduced_costs(pricing, pricing.y, master.y, partition, permuted.strides)
                since_recompute += 1
            pricing.sigma = master.sigma
        with timer.step('calc-best-costs'):
            best_costs(pricing, partition)
        with timer.step('solve-pricing'):
            objective, plan = solve_pricing(pricing, partition, pair_masses, cfg.transport_method)
        trace.append(TraceEntry(iterations, master.objective, objective))
        logger.debug(
            f'[solve] Iteration {iterations}: rm objective {master.objective:.12g}, '
            f'pricing objective {objective:.6g}'
        )
        if objective >= -cfg.tol:
            converged = True
            break
        if iterations >= cfg.max_iter:
            logger.warning(f'[solve] Stopped after {iterations} columns without converging ({objective:.3e})')
            break
        with timer.step('setup-RM'):
            add_column(master, expand_column(plan, pricing, partition))
        with timer.step('solve-RM'):
            solve_rm(master)
        iterations += 1
        ledger.allocate('master-columns', FLOAT_BYTES * (master.n_master_rows + 1) * len(master.columns))

    raw = raw_weights(master)
    weights = raw
    if cfg.polish:
        with timer.step('solve-RM'):
            weights = polish(master)
    barycenter = recover_solution(master, weights)
    stats = RunStats(
        variant=cfg.variant,
        pair=partition.pair,
        master_rows=master.n_master_rows,
        n_u=partition.n_u,
        n_d=partition.n_d,
        initial_objective=master.history[0],
        columns=len(master.columns),
        pivots=master.pivots,
        raw_support=len(raw),
        polished_support=len(weights),
    )
    logger.info(
        f'[solve] {"Converged" if converged else "Stopped"} after {iterations} columns: '
        f'objective {barycenter.objective:.12g}, support {barycenter.support_size}'
    )
    return _result(barycenter, iterations, converged, timer, ledger, trace, stats)


class CombinationLP(LinearProgram):
    """
    The full barycenter LP with columns generated from the combination index.
    """

    def __init__(self, inst):
        self.inst = inst
        self.strides = inst.strides
        self._cost = cost_vector(inst)

    @property
    def cost(self):
        return self._cost

    @property
    def rhs(self):
        return self.inst.masses

    def columns(self, indices):
        return dense_columns(indices, self.strides)

    def transpose_dot(self, y):
        sizes = self.strides.sizes
        offsets = self.strides.row_offsets
        out = np.zeros(sizes)
        for i in range(self.strides.n):
            out += along_axis(y[offsets[i]:offsets[i + 1]], i, self.strides.n)
        return out.reshape(-1)


def solve_direct(inst, cfg=None):
    """
    Solve the full LP with the simplex kernel, for instances up to ``cfg.oracle_cap`` combinations.

    Raises:
        CapacityError: the instance has more combinations than the cap.
        SimplexError: the LP did not solve to optimality.
    """
    cfg = cfg or SolveConfig()
    strides = inst.strides
    if strides.total > cfg.oracle_cap:
        message = f'direct solve refused: N={strides.total} combinations exceed the cap of {cfg.oracle_cap}'
        logger.info(f'[solve_direct] {message}')
        raise CapacityError(message, required=strides.total, limit=cfg.oracle_cap)
    timer = StepTimer(steps=(DIRECT_STEP,))
    ledger = MemoryLedger()
    ledger.allocate('sparse-lp', direct_memory_estimate(strides))
    with timer.step(DIRECT_STEP):
        solution = SimplexSolver().solve(CombinationLP(inst))
    if solution.status is not LPStatus.OPTIMAL:
        message = f'direct LP ended {solution.status.value}'
        logger.error(f'[solve_direct] {message}')
        raise SimplexError(message)
    weights = SparseMass(
        (int(h), float(solution.x[h])) for h in np.flatnonzero(solution.x > 0.0)
    )
    barycenter = Barycenter.from_mass(weights, inst)
    stats = RunStats(variant='direct', polished_support=len(weights), raw_support=len(weights))
    return _result(barycenter, solution.iterations, True, timer, ledger, stats=stats)
