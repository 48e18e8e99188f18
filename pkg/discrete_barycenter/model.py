"""
Instances, combination index arithmetic and transport costs.

The barycenter LP has one row per support point of every input measure and
one column per combination ``s_h`` (one support point taken from each
measure). Column ``h`` has a one in exactly one row of each measure block.
The matrix is never stored: the rows of a column are recovered from the
support sizes alone, using the number of consecutive ones ``n_o(i)`` of each
measure block, and combination index ``h`` is the mixed-radix number
``sum_i j_i * n_o(i)``.
"""
import logging
from collections.abc import Mapping
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from discrete_barycenter.exceptions import CapacityError, ContractError, InstanceError

logger = logging.getLogger(__name__)

MASS_ZERO_TOL = 1e-12
FEASIBILITY_TOL = 1e-9
NORMALIZATION_TOL = 1e-12
MAX_COMBINATIONS = 2 ** 64 - 1


def _frozen_array(values, dtype=float):
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """
    A probability measure with finite support in R^d.

    ``points`` is a ``(k, d)`` array of support points and ``masses`` the
    matching ``k`` positive masses summing to one.
    """

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        masses = np.array(self.masses, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] == 0:
            raise InstanceError('points must be a non-empty list of coordinate vectors')
        if points.shape[1] == 0:
            raise InstanceError('points must have at least one coordinate')
        if masses.ndim != 1 or masses.size != points.shape[0]:
            raise InstanceError(
                f'expected {points.shape[0]} masses (one per point), got {masses.size}'
            )
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(masses))):
            raise InstanceError('points and masses must be finite')
        if np.any(masses <= 0):
            raise InstanceError(f'masses must be positive, found {masses.min()!r}')
        total = masses.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InstanceError(f'masses sum to {total!r}, expected 1')
        points.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'masses', masses)

    @property
    def size(self):
        return self.masses.size

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class Strides:
    """
    Consecutive-ones counts of the implicit constraint matrix.

    ``n_o[i]`` is the product of the sizes of all measures after ``i`` (the
    run length of ones in the rows of measure ``i``), ``total`` is the number
    of combinations ``N`` and ``row_offsets[i]`` is the first row of measure
    ``i``'s block, with ``row_offsets[n]`` the total number of rows.
    """

    sizes: tuple
    n_o: tuple
    total: int
    row_offsets: tuple

    @property
    def n(self):
        return len(self.sizes)

    @property
    def n_rows(self):
        return self.row_offsets[-1]


def make_strides(sizes):
    """
    Build the strides of the implicit matrix for the given support sizes.

    Raises:
        CapacityError: the number of combinations does not fit in 64 bits.
    """
    sizes = tuple(int(size) for size in sizes)
    if not sizes or any(size < 1 for size in sizes):
        raise InstanceError(f'support sizes must be positive, got {list(sizes)}')
    n_o = [1] * len(sizes)
    for i in range(len(sizes) - 2, -1, -1):
        n_o[i] = n_o[i + 1] * sizes[i + 1]
    total = n_o[0] * sizes[0]
    if total > MAX_COMBINATIONS:
        raise CapacityError(
            f'{total} combinations do not fit a 64-bit index (sizes {list(sizes)})',
            required=total,
            limit=MAX_COMBINATIONS,
        )
    row_offsets = [0]
    for size in sizes:
        row_offsets.append(row_offsets[-1] + size)
    return Strides(sizes=sizes, n_o=tuple(n_o), total=total, row_offsets=tuple(row_offsets))


@dataclass(frozen=True, eq=False)
class Instance:
    """
    The input of a barycenter problem: ``n`` measures and their weights.
    """

    measures: tuple
    lambdas: np.ndarray

    def __post_init__(self):
        measures = tuple(self.measures)
        lambdas = np.array(self.lambdas, dtype=float)
        if not measures:
            raise InstanceError('an instance needs at least one measure')
        if lambdas.ndim != 1 or lambdas.size != len(measures):
            raise InstanceError(f'expected {len(measures)} weights, got {lambdas.size}')
        if not np.all(np.isfinite(lambdas)) or np.any(lambdas < 0):
            raise InstanceError('weights must be finite and nonnegative')
        if abs(lambdas.sum() - 1.0) > NORMALIZATION_TOL:
            raise InstanceError(f'weights sum to {lambdas.sum()!r}, expected 1')
        dims = {measure.dim for measure in measures}
        if len(dims) != 1:
            for i, measure in enumerate(measures):
                if measure.dim != measures[0].dim:
                    raise InstanceError(
                        f'measure {i}: points have dimension {measure.dim}, '
                        f'measure 0 has dimension {measures[0].dim}'
                    )
        lambdas.setflags(write=False)
        object.__setattr__(self, 'measures', measures)
        object.__setattr__(self, 'lambdas', lambdas)

    @classmethod
    def from_arrays(cls, points, masses, lambdas=None):
        """
        Build an instance from per-measure point and mass lists.

        Weights default to uniform. Invariant violations are reported with
        the index of the offending measure.
        """
        if len(points) != len(masses):
            raise InstanceError(f'got {len(points)} point lists but {len(masses)} mass lists')
        measures = []
        for i, (measure_points, measure_masses) in enumerate(zip(points, masses)):
            try:
                measures.append(DiscreteMeasure(measure_points, measure_masses))
            except InstanceError as err:
                raise InstanceError(f'measure {i}: {err}') from err
        if lambdas is None:
            lambdas = np.full(len(measures), 1.0 / len(measures)) if measures else []
        return cls(tuple(measures), lambdas)

    @property
    def n(self):
        return len(self.measures)

    @property
    def dim(self):
        return self.measures[0].dim

    @property
    def sizes(self):
        return tuple(measure.size for measure in self.measures)

    @cached_property
    def strides(self):
        return make_strides(self.sizes)

    @property
    def n_combinations(self):
        return self.strides.total

    @cached_property
    def masses(self):
        """
        The right-hand side ``d``: all masses concatenated in row order.
        """
        return _frozen_array(np.concatenate([measure.masses for measure in self.measures]))

    def permuted(self, order):
        """
        Return the instance with measure ``order[k]`` moved to position ``k``.
        """
        order = tuple(order)
        if sorted(order) != list(range(self.n)):
            raise ValueError(f'{order} is not a permutation of {self.n} measures')
        return Instance(tuple(self.measures[i] for i in order), self.lambdas[list(order)])


@dataclass(frozen=True)
class Combination:
    """
    One support point index per measure, together with its column index ``h``.
    """

    indices: tuple
    h: int


def tuple_of(h, strides):
    """
    Decode combination index ``h`` into one point index per measure.
    """
    h = int(h)
    if not 0 <= h < strides.total:
        raise IndexError(f'combination index {h} out of range [0, {strides.total})')
    indices = tuple((h // n_o) % size for n_o, size in zip(strides.n_o, strides.sizes))
    return Combination(indices=indices, h=h)


def index_of(indices, strides):
    """
    Encode one point index per measure into combination index ``h``.
    """
    indices = tuple(int(j) for j in indices)
    if len(indices) != strides.n:
        raise IndexError(f'expected {strides.n} point indices, got {len(indices)}')
    for i, (j, size) in enumerate(zip(indices, strides.sizes)):
        if not 0 <= j < size:
            raise IndexError(f'point index {j} of measure {i} out of range [0, {size})')
    return sum(j * n_o for j, n_o in zip(indices, strides.n_o))


def column_support(h, strides):
    """
    Rows holding a one in column ``h`` of the implicit matrix, one per measure block.
    """
    combination = tuple_of(h, strides)
    return tuple(offset + j for offset, j in zip(strides.row_offsets, combination.indices))


def combination_digits(indices, strides):
    """
    Vectorized :func:`tuple_of`: an ``(L, n)`` array of point indices.
    """
    h = np.asarray(indices, dtype=np.uint64).reshape(-1)
    digits = np.empty((h.size, strides.n), dtype=np.int64)
    for i, (n_o, size) in enumerate(zip(strides.n_o, strides.sizes)):
        digits[:, i] = (h // np.uint64(n_o)) % np.uint64(size)
    return digits


def encode_digits(digits, strides):
    """
    Vectorized :func:`index_of` for an ``(L, n)`` array of point indices.
    """
    digits = np.asarray(digits, dtype=np.uint64).reshape(-1, strides.n)
    h = np.zeros(digits.shape[0], dtype=np.uint64)
    for i, n_o in enumerate(strides.n_o):
        h += digits[:, i] * np.uint64(n_o)
    return h


def dense_columns(indices, strides):
    """
    Materialize the 0/1 columns for the given combination indices.

    Only ever called for small index sets (a basis, a column union, a test).
    """
    digits = combination_digits(indices, strides)
    matrix = np.zeros((strides.n_rows, digits.shape[0]))
    columns = np.arange(digits.shape[0])
    for i, offset in enumerate(strides.row_offsets[:-1]):
        matrix[offset + digits[:, i], columns] = 1.0
    return matrix


def along_axis(values, axis, ndim):
    """
    Reshape a 1-D array so that it broadcasts along ``axis`` of an ``ndim`` array.
    """
    shape = [1] * ndim
    shape[axis] = -1
    return np.asarray(values).reshape(shape)


def weighted_mean(combination, inst):
    """
    The weighted mean ``sum_i lambda_i x_i^h`` of a combination.
    """
    mean = np.zeros(inst.dim)
    for lam, measure, j in zip(inst.lambdas, inst.measures, combination.indices):
        mean += lam * measure.points[j]
    return mean


def combination_cost(combination, inst):
    """
    Transport cost ``c_h = sum_i lambda_i ||x^h - x_i^h||^2`` of one unit of mass.
    """
    mean = weighted_mean(combination, inst)
    cost = 0.0
    for lam, measure, j in zip(inst.lambdas, inst.measures, combination.indices):
        diff = mean - measure.points[j]
        cost += lam * float(diff @ diff)
    return cost


def closed_form_cost(combination, inst):
    """
    ``sum_i lambda_i ||x_i^h||^2 - ||x^h||^2``, equal to :func:`combination_cost`.
    """
    mean = weighted_mean(combination, inst)
    second_moment = sum(
        lam * float(measure.points[j] @ measure.points[j])
        for lam, measure, j in zip(inst.lambdas, inst.measures, combination.indices)
    )
    return second_moment - float(mean @ mean)


def weighted_means(indices, inst):
    """
    Weighted means of many combinations at once, as an ``(L, d)`` array.
    """
    digits = combination_digits(indices, inst.strides)
    means = np.zeros((digits.shape[0], inst.dim))
    for i, (lam, measure) in enumerate(zip(inst.lambdas, inst.measures)):
        means += lam * measure.points[digits[:, i]]
    return means


def combination_costs(indices, inst):
    """
    Vectorized :func:`combination_cost`.
    """
    digits = combination_digits(indices, inst.strides)
    means = weighted_means(indices, inst)
    costs = np.zeros(digits.shape[0])
    for i, (lam, measure) in enumerate(zip(inst.lambdas, inst.measures)):
        diff = means - measure.points[digits[:, i]]
        costs += lam * np.einsum('ij,ij->i', diff, diff)
    return costs


def cost_vector(inst, out=None, scratch=None):
    """
    The full cost vector ``c`` over all ``N`` combinations, in index order.

    Uses the closed form, one dimension at a time, so that a single scratch
    array of length ``N`` is needed besides the result. Both can be passed
    in as preallocated flat float arrays.
    """
    shape = inst.sizes
    ndim = inst.n
    cost = np.empty(inst.n_combinations) if out is None else out
    mean = (np.empty(inst.n_combinations) if scratch is None else scratch).reshape(shape)
    view = cost.reshape(shape)
    view.fill(0.0)
    for i, (lam, measure) in enumerate(zip(inst.lambdas, inst.measures)):
        view += along_axis(lam * np.einsum('jk,jk->j', measure.points, measure.points), i, ndim)
    for k in range(inst.dim):
        mean.fill(0.0)
        for i, (lam, measure) in enumerate(zip(inst.lambdas, inst.measures)):
            mean += along_axis(lam * measure.points[:, k], i, ndim)
        np.square(mean, out=mean)
        view -= mean
    return cost


class SparseMass(Mapping):
    """
    A sparse nonnegative vector over combination indices, ordered by index.

    Entries at or below ``MASS_ZERO_TOL`` are dropped; repeated indices are
    summed on construction.
    """

    __slots__ = ('_entries',)

    def __init__(self, entries=None):
        accumulated = {}
        items = entries.items() if isinstance(entries, Mapping) else (entries or ())
        for h, mass in items:
            h = int(h)
            accumulated[h] = accumulated.get(h, 0.0) + float(mass)
        for h, mass in accumulated.items():
            if mass < -FEASIBILITY_TOL:
                raise ContractError(f'negative mass {mass!r} at combination {h}')
        self._entries = {h: accumulated[h] for h in sorted(accumulated) if accumulated[h] > MASS_ZERO_TOL}
        total = sum(self._entries.values())
        if total > 1.0 + FEASIBILITY_TOL:
            raise ContractError(f'total mass {total!r} exceeds one')

    @classmethod
    def combine(cls, weighted):
        """
        The sum of ``weight * mass`` over ``(weight, SparseMass)`` pairs.
        """
        accumulated = {}
        for weight, mass in weighted:
            for h, value in mass.items():
                accumulated[h] = accumulated.get(h, 0.0) + weight * value
        return cls(accumulated)

    def __getitem__(self, h):
        return self._entries[h]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __repr__(self):
        return f'SparseMass({self._entries!r})'

    @property
    def total(self):
        return sum(self._entries.values())

    def arrays(self):
        """
        The entries as ``(indices, masses)`` numpy arrays.
        """
        indices = np.fromiter(self._entries.keys(), dtype=np.uint64, count=len(self._entries))
        masses = np.fromiter(self._entries.values(), dtype=float, count=len(self._entries))
        return indices, masses

    def cost(self, inst):
        """
        ``c^T w`` for this mass vector.
        """
        if not self._entries:
            return 0.0
        indices, masses = self.arrays()
        return float(masses @ combination_costs(indices, inst))


def reindex(mass, source, target, order):
    """
    Re-express ``mass`` after reordering measures.

    Position ``k`` of the ``target`` index space holds the measure found at
    position ``order[k]`` of the ``source`` index space.
    """
    if not mass:
        return SparseMass()
    indices, masses = mass.arrays()
    digits = combination_digits(indices, source)[:, list(order)]
    return SparseMass(zip(encode_digits(digits, target).tolist(), masses))


def marginals(mass, inst, measures=None):
    """
    ``A w`` split per measure: the mass delivered to every support point.
    """
    positions = range(inst.n) if measures is None else measures
    delivered = {i: np.zeros(inst.measures[i].size) for i in positions}
    if mass:
        indices, masses = mass.arrays()
        digits = combination_digits(indices, inst.strides)
        for i in delivered:
            np.add.at(delivered[i], digits[:, i], masses)
    return delivered


def feasibility_residual(mass, inst, measures=None):
    """
    Largest absolute violation of ``A w = d`` over the rows of the given measures.
    """
    delivered = marginals(mass, inst, measures)
    return max(
        float(np.max(np.abs(delivered[i] - inst.measures[i].masses)))
        for i in delivered
    )


def is_feasible(mass, inst, measures=None, tol=FEASIBILITY_TOL):
    """
    Whether ``mass`` satisfies ``A w = d`` (restricted to ``measures`` if given).
    """
    return feasibility_residual(mass, inst, measures) <= tol


@dataclass(frozen=True, eq=False)
class Barycenter:
    """
    A barycenter: support points, their masses and the combination each one
    transports to (one point index per input measure, in input order).
    """

    points: np.ndarray
    masses: np.ndarray
    assignments: tuple
    objective: float
    weights: SparseMass

    @classmethod
    def from_mass(cls, mass, inst):
        """
        Turn a feasible ``w`` into barycenter support points at the weighted means.
        """
        if not mass:
            return cls(np.zeros((0, inst.dim)), np.zeros(0), (), 0.0, mass)
        indices, masses = mass.arrays()
        digits = combination_digits(indices, inst.strides)
        points = weighted_means(indices, inst)
        objective = float(masses @ combination_costs(indices, inst))
        assignments = tuple(tuple(int(j) for j in row) for row in digits)
        return cls(points, masses, assignments, objective, mass)

    @property
    def support_size(self):
        return self.masses.size
