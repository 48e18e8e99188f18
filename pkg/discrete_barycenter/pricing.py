"""
The pricing problem of the column generation.

Two measures (the pricing pair) are moved to the front of the instance. The
constraint rows of the pair then repeat every unique column pattern over a
contiguous range of ``n_d`` combinations, so the pricing LP compresses to a
transportation problem over the ``n_u`` unique columns, each priced at the
smallest reduced cost among its duplicates.

The reduced-cost vector ``a = c - A_m^T y`` has one entry per combination and
is the dominant allocation of a run. It is kept as a flat array and updated
through reshaped views, one master row at a time: the combinations holding a
one in row ``j`` of measure ``k`` are exactly the slice ``[..., j, ...]`` on
axis ``k`` of ``a.reshape(sizes)``.
"""
import logging
from dataclasses import dataclass

import numpy as np

from discrete_barycenter.config import PairVariant
from discrete_barycenter.exceptions import CapacityError, ContractError
from discrete_barycenter.model import SparseMass, along_axis, cost_vector
from discrete_barycenter.transport import TransportationProblem, TransportMethod, solve_transportation

logger = logging.getLogger(__name__)

FLOAT_BYTES = np.dtype(float).itemsize
INDEX_BYTES = np.dtype(np.int64).itemsize


@dataclass(frozen=True)
class Partition:
    """
    The pricing pair and the measure order that puts it first.

    ``pair`` holds input positions in input order; position ``k`` of the
    permuted instance holds input measure ``perm[k]``.
    """

    pair: tuple
    perm: tuple
    size_a: int
    size_b: int
    n_u: int
    n_d: int

    @property
    def inverse(self):
        return tuple(int(k) for k in np.argsort(self.perm))


def choose_partition(inst, variant=PairVariant.LARGE):
    """
    Pick the pricing pair.

    ``any`` takes the first two measures, ``large`` the two largest supports
    and ``small`` the two smallest, with ties going to the earlier measure.
    """
    variant = PairVariant(variant)
    if inst.n < 3:
        raise ContractError(f'pricing needs at least 3 measures, got {inst.n}')
    sizes = inst.sizes
    if variant is PairVariant.ANY:
        ranked = list(range(inst.n))
    elif variant is PairVariant.LARGE:
        ranked = sorted(range(inst.n), key=lambda i: (-sizes[i], i))
    else:
        ranked = sorted(range(inst.n), key=lambda i: (sizes[i], i))
    pair = tuple(sorted(ranked[:2]))
    perm = pair + tuple(i for i in range(inst.n) if i not in pair)
    size_a, size_b = sizes[pair[0]], sizes[pair[1]]
    n_u = size_a * size_b
    return Partition(
        pair=pair,
        perm=perm,
        size_a=size_a,
        size_b=size_b,
        n_u=n_u,
        n_d=inst.n_combinations // n_u,
    )


@dataclass
class PricingState:
    """
    Reduced costs over all combinations and their compression to unique columns.

    ``index[j]`` is the combination attaining ``best[j]``; ``y`` holds the
    master duals the reduced costs currently reflect.
    """

    sizes: tuple
    cost: np.ndarray
    reduced: np.ndarray
    best: np.ndarray
    index: np.ndarray
    sigma: float
    y: np.ndarray
    master_offsets: tuple

    def master_rows(self, y):
        """
        Split a master dual vector into one block per master measure, keyed by axis.
        """
        return {
            k: y[start:stop]
            for k, start, stop in zip(range(2, len(self.sizes)), self.master_offsets, self.master_offsets[1:])
        }


def pricing_memory(inst, partition):
    """
    Bytes held by a :class:`PricingState` for ``inst``.
    """
    return 2 * FLOAT_BYTES * inst.n_combinations + (FLOAT_BYTES + INDEX_BYTES) * partition.n_u


def init_reduced_costs(inst, partition, memory_cap=None, ledger=None):
    """
    Set up the pricing state of a permuted instance with all duals at zero.

    Args:
        inst: the instance with the pricing pair at positions 0 and 1.
        partition: the partition that produced ``inst``.
        memory_cap: optional byte budget for the arrays scaling with ``N``.
        ledger: optional :class:`MemoryLedger`-like object with ``allocate``.

    Raises:
        CapacityError: the arrays would exceed ``memory_cap``.
    """
    required = pricing_memory(inst, partition)
    if memory_cap is not None and required > memory_cap:
        message = (
            f'pricing arrays for N={inst.n_combinations} combinations need {required} bytes, '
            f'memory cap is {memory_cap}'
        )
        logger.info(f'[pricing] {message}')
        raise CapacityError(message, required=required, limit=memory_cap)
    n_combinations = inst.n_combinations
    if ledger is not None:
        ledger.allocate('cost-vector', FLOAT_BYTES * n_combinations)
        ledger.allocate('reduced-costs', FLOAT_BYTES * n_combinations)
        ledger.allocate('best-costs', (FLOAT_BYTES + INDEX_BYTES) * partition.n_u)
    # the reduced-cost array doubles as scratch while the costs are built
    reduced = np.empty(n_combinations)
    cost = cost_vector(inst, scratch=reduced)
    np.copyto(reduced, cost)
    offsets = inst.strides.row_offsets
    master_offsets = tuple(offset - offsets[2] for offset in offsets[2:])
    state = PricingState(
        sizes=inst.sizes,
        cost=cost,
        reduced=reduced,
        best=np.empty(partition.n_u),
        index=np.empty(partition.n_u, dtype=np.int64),
        sigma=0.0,
        y=np.zeros(master_offsets[-1]),
        master_offsets=master_offsets,
    )
    best_costs(state, partition)
    return state


def update_reduced_costs(state, y_old, y_new, partition, strides):
    """
    Apply a change of master duals to the reduced costs.

    Only rows whose dual changed are touched; for a row of measure ``k`` that
    is ``N / |P_k|`` entries.
    """
    delta = np.asarray(y_new, dtype=float) - np.asarray(y_old, dtype=float)
    view = state.reduced.reshape(strides.sizes)
    changed = 0
    for k, block in state.master_rows(delta).items():
        for j in np.flatnonzero(block):
            index = [slice(None)] * strides.n
            index[k] = int(j)
            view[tuple(index)] -= block[j]
            changed += 1
    state.y = np.array(y_new, dtype=float)
    logger.debug(f'[pricing] {changed} master rows changed')
    return changed


def recompute_reduced_costs(state, y):
    """
    Rebuild the reduced costs from the cost vector, discarding accumulated rounding.
    """
    np.copyto(state.reduced, state.cost)
    view = state.reduced.reshape(state.sizes)
    ndim = len(state.sizes)
    for k, block in state.master_rows(np.asarray(y, dtype=float)).items():
        view -= along_axis(block, k, ndim)
    state.y = np.array(y, dtype=float)


def best_costs(state, partition):
    """
    Compress the reduced costs to the cheapest duplicate of every unique column.

    Ties go to the lowest combination index.
    """
    ranges = state.reduced.reshape(partition.n_u, partition.n_d)
    argmin = ranges.argmin(axis=1)
    unique = np.arange(partition.n_u)
    state.best[:] = ranges[unique, argmin]
    state.index[:] = unique * partition.n_d + argmin


def solve_pricing(state, partition, masses, method=TransportMethod.MODI):
    """
    Solve the compressed pricing problem.

    Args:
        masses: the point masses of the two pair measures.

    Returns:
        ``(objective, plan)`` where the objective is the transport cost plus
        the convexity dual; a negative value means the expanded column improves
        the master problem.
    """
    supplies, demands = masses
    costs = state.best.reshape(partition.size_a, partition.size_b)
    plan = solve_transportation(TransportationProblem(supplies, demands, costs), method)
    return plan.objective + state.sigma, plan


def expand_column(plan, state, partition):
    """
    Lift a pricing plan to a mass vector over combinations of the permuted instance.
    """
    return SparseMass(
        (int(state.index[row * partition.size_b + col]), mass)
        for row, col, mass in plan.flows
    )
