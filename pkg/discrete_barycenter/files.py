"""
Instance and result files.

Instances are JSON documents with a ``weights`` array and one
``{"points": [...], "masses": [...]}`` object per measure; a tabular CSV
import is provided as well. Floats are written with the shortest
representation that reads back to the same double.
"""
import csv
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import List, Optional

import pytz
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from discrete_barycenter.exceptions import InstanceError
from discrete_barycenter.model import Instance

logger = logging.getLogger(__name__)

TRACE_HEADER = ('iter', 'rm_obj', 'pricing_obj')


class MeasureDocument(BaseModel):
    model_config = ConfigDict(extra='forbid')

    points: List[List[float]]
    masses: List[float]


class InstanceDocument(BaseModel):
    """
    The JSON form of an :class:`~discrete_barycenter.model.Instance`.

    ``combinations`` is informational; when present it must equal the
    product of the support sizes.
    """

    model_config = ConfigDict(extra='forbid')

    combinations: Optional[int] = None
    weights: Optional[List[float]] = None
    measures: List[MeasureDocument] = Field(min_length=1)

    def to_instance(self):
        inst = Instance.from_arrays(
            [measure.points for measure in self.measures],
            [measure.masses for measure in self.measures],
            self.weights,
        )
        if self.combinations is not None and self.combinations != inst.n_combinations:
            raise InstanceError(
                f'combinations: header says {self.combinations}, supports give {inst.n_combinations}'
            )
        return inst

    @classmethod
    def from_instance(cls, inst):
        return cls(
            combinations=inst.n_combinations,
            weights=inst.lambdas.tolist(),
            measures=[
                MeasureDocument(points=measure.points.tolist(), masses=measure.masses.tolist())
                for measure in inst.measures
            ],
        )


class BarycenterEntry(BaseModel):
    coords: List[float]
    mass: float
    assignment: List[int]


class TraceRow(BaseModel):
    iter: int
    rm_obj: float
    pricing_obj: float


class ResultDocument(BaseModel):
    objective: float
    iterations: int
    converged: bool
    barycenter: List[BarycenterEntry]
    timings: dict
    trace: List[TraceRow]
    stats: dict = Field(default_factory=dict)
    peak_memory: int = 0
    created_at: str = ''


def _format_location(loc):
    return '.'.join(str(part) for part in loc) or '<document>'


def parse_instance(text, source='<input>'):
    """
    Parse an instance document.

    Raises:
        InstanceError: malformed JSON (with line and column), a schema
            violation (with the field path) or an invalid instance.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise InstanceError(f'{source}: line {err.lineno}, column {err.colno}: {err.msg}') from err
    try:
        document = InstanceDocument.model_validate(data)
    except ValidationError as err:
        first = err.errors()[0]
        raise InstanceError(f'{source}: {_format_location(first["loc"])}: {first["msg"]}') from err
    try:
        return document.to_instance()
    except InstanceError as err:
        raise InstanceError(f'{source}: {err}') from err


def load_instance(path):
    path = Path(path)
    logger.debug(f'[files] Loading instance from {path}')
    return parse_instance(path.read_text(), source=str(path))


def dump_instance(inst):
    """
    Serialize ``inst`` to JSON text, deterministically.
    """
    return json.dumps(InstanceDocument.from_instance(inst).model_dump(), indent=2) + '\n'


def _is_number(value):
    try:
        float(value)
    except ValueError:
        return False
    return True


def load_csv(path, weights=None):
    """
    Read rows ``measure_id, coord_1, ..., coord_d, mass`` into an instance.

    A header row is skipped if its first field is not a number. Measures
    keep the order in which their ids first appear; weights default to
    uniform.
    """
    points = {}
    masses = {}
    with open(path, newline='') as handle:
        for line_number, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not field.strip() for field in row):
                continue
            if line_number == 1 and not _is_number(row[0]):
                continue
            if len(row) < 3:
                raise InstanceError(f'{path}: line {line_number}: expected measure_id, coordinates and mass')
            try:
                values = [float(field) for field in row[1:]]
            except ValueError as err:
                raise InstanceError(f'{path}: line {line_number}: {err}') from err
            key = row[0].strip()
            points.setdefault(key, []).append(values[:-1])
            masses.setdefault(key, []).append(values[-1])
    if not points:
        raise InstanceError(f'{path}: no measures found')
    try:
        return Instance.from_arrays(list(points.values()), list(masses.values()), weights)
    except InstanceError as err:
        raise InstanceError(f'{path}: {err}') from err


def result_document(result):
    barycenter = result.barycenter
    stats = result.stats
    return ResultDocument(
        objective=result.objective,
        iterations=result.iterations,
        converged=result.converged,
        barycenter=[
            BarycenterEntry(coords=point.tolist(), mass=float(mass), assignment=list(assignment))
            for point, mass, assignment in zip(barycenter.points, barycenter.masses, barycenter.assignments)
        ],
        timings=dict(result.timings),
        trace=[
            TraceRow(iter=entry.iteration, rm_obj=entry.rm_objective, pricing_obj=entry.pricing_objective)
            for entry in result.trace
        ],
        stats={
            'variant': stats.variant,
            'pair': list(stats.pair),
            'master_rows': stats.master_rows,
            'n_u': stats.n_u,
            'n_d': stats.n_d,
            'initial_objective': stats.initial_objective,
            'columns': stats.columns,
            'pivots': stats.pivots,
            'raw_support': stats.raw_support,
            'polished_support': stats.polished_support,
            'timing_shares': result.timing_shares(),
        },
        peak_memory=result.peak_memory,
        created_at=datetime.now(pytz.utc).isoformat(),
    )


def dump_result(result):
    return json.dumps(result_document(result).model_dump(), indent=2) + '\n'


def write_trace_csv(result, path, reference=None):
    """
    Write the per-iteration trace; with a reference optimum an ``abs_error`` column is added.
    """
    header = TRACE_HEADER + (('abs_error',) if reference is not None else ())
    errors = result.error_trace(reference) if reference is not None else None
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for k, entry in enumerate(result.trace):
            row = [entry.iteration, repr(float(entry.rm_objective)), repr(float(entry.pricing_objective))]
            if errors is not None:
                row.append(repr(float(errors[k])))
            writer.writerow(row)
