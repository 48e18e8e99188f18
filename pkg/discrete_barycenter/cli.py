"""
Command-line interface: ``discrete-barycenter {solve,gen,compare}``.
"""
import logging
import time
from pathlib import Path

import click
import numpy as np

from discrete_barycenter.config import PairVariant, SolveConfig, StartMethod
from discrete_barycenter.driver import solve, solve_direct
from discrete_barycenter.exceptions import BarycenterError, InstanceError
from discrete_barycenter.files import dump_instance, dump_result, load_csv, load_instance, write_trace_csv
from discrete_barycenter.model import Instance

logger = logging.getLogger(__name__)

START_CHOICES = {'greedy': StartMethod.GREEDY, '2app': StartMethod.TWO_APP}
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def _read_instance(path, input_format):
    if input_format is None:
        input_format = 'csv' if Path(path).suffix.lower() == '.csv' else 'json'
    if input_format == 'csv':
        return load_csv(path)
    return load_instance(path)


def _fail(ctx, err):
    click.echo(f'Error: {err}', err=True)
    ctx.exit(EXIT_INPUT_ERROR)


def _write(text, out):
    if out is None or out == '-':
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='Log every column generation iteration.')
def main(verbose):
    """
    Exact discrete Wasserstein barycenters by column generation.
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format='%(asctime)s %(levelname)s %(name)s %(message)s',
    )


input_options = [
    click.option('--input', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option('--input-format', type=click.Choice(['json', 'csv']), default=None,
                 help='Defaults to the file extension.'),
    click.option('--tol', type=float, default=1e-6, show_default=True),
    click.option('--max-iter', type=int, default=100_000, show_default=True),
]


def with_input_options(func):
    for option in reversed(input_options):
        func = option(func)
    return func


@main.command('solve')
@with_input_options
@click.option('--start', type=click.Choice(sorted(START_CHOICES)), default='greedy', show_default=True)
@click.option('--pair', type=click.Choice([variant.value for variant in PairVariant]), default='large',
              show_default=True)
@click.option('--polish/--no-polish', default=True, show_default=True)
@click.option('--direct', is_flag=True, help='Solve the full LP directly instead.')
@click.option('--out', default='-', help='Result file (default: stdout).')
@click.option('--trace-csv', type=click.Path(dir_okay=False), default=None)
@click.option('--reference', type=float, default=None, help='Known optimum; adds abs_error to the trace CSV.')
@click.pass_context
def cmd_solve(ctx, input_path, input_format, tol, max_iter, start, pair, polish, direct, out, trace_csv,
              reference):
    """
    Solve one instance and write the result document.

    Exits 0 on convergence, 1 on input, capacity or solver errors and 2 when the
    iteration limit is reached first.
    """
    try:
        inst = _read_instance(input_path, input_format)
        cfg = SolveConfig(
            start=START_CHOICES[start],
            pair_variant=PairVariant(pair),
            tol=tol,
            max_iter=max_iter,
            polish=polish,
        )
        result = solve_direct(inst, cfg) if direct else solve(inst, cfg)
    except (BarycenterError, ValueError) as err:
        _fail(ctx, err)
    _write(dump_result(result), out)
    if trace_csv:
        write_trace_csv(result, trace_csv, reference)
    if not result.converged:
        click.echo(f'Not converged after {result.iterations} iterations', err=True)
        ctx.exit(EXIT_NOT_CONVERGED)


def _parse_sizes(value):
    try:
        sizes = [int(part) for part in value.split(',') if part.strip()]
    except ValueError as err:
        raise click.BadParameter(f'{value!r} is not a comma-separated list of integers') from err
    if not sizes or any(size < 1 for size in sizes):
        raise click.BadParameter('sizes must be positive integers')
    return sizes


def generate_instance(sizes, dim=2, masses='uniform', seed=0):
    """
    A random instance with points drawn uniformly from the unit cube.

    Continuous draws put the measures in general position with probability one.
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
    return Instance.from_arrays(points, weights)


@main.command('gen')
@click.option('--n', 'n_measures', type=int, default=None, help='Number of measures.')
@click.option('--size', type=int, default=None, help='Support size of every measure.')
@click.option('--sizes', default=None, help='Comma-separated support sizes, one per measure.')
@click.option('--dim', type=int, default=2, show_default=True)
@click.option('--masses', type=click.Choice(['uniform', 'random']), default='uniform', show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', default='-', help='Instance file (default: stdout).')
def cmd_gen(n_measures, size, sizes, dim, masses, seed, out):
    """
    Generate a random instance in general position.
    """
    if sizes is not None:
        sizes = _parse_sizes(sizes)
        if n_measures is not None and n_measures != len(sizes):
            raise click.BadParameter(f'--n {n_measures} does not match {len(sizes)} sizes', param_hint='--sizes')
    elif n_measures is not None and size is not None:
        if n_measures < 1 or size < 1:
            raise click.BadParameter('--n and --size must be positive')
        sizes = [size] * n_measures
    else:
        raise click.UsageError('give --sizes, or --n together with --size')
    if dim < 1:
        raise click.BadParameter('--dim must be positive', param_hint='--dim')
    _write(dump_instance(generate_instance(sizes, dim, masses, seed)), out)


@main.command('compare')
@with_input_options
@click.option('--direct', is_flag=True, help='Also solve the full LP directly.')
@click.pass_context
def cmd_compare(ctx, input_path, input_format, tol, max_iter, direct):
    """
    Run all six start/pair variants on one instance and print a summary table.
    """
    try:
        inst = _read_instance(input_path, input_format)
    except InstanceError as err:
        _fail(ctx, err)
    click.echo(f'{"start":<8} {"pair":<6} {"iterations":>10} {"objective":>20} {"seconds":>9} converged')
    runs = [(start, pair) for start in START_CHOICES for pair in PairVariant]
    for start, pair in runs:
        cfg = SolveConfig(start=START_CHOICES[start], pair_variant=pair, tol=tol, max_iter=max_iter)
        began = time.perf_counter()
        try:
            result = solve(inst, cfg)
        except BarycenterError as err:
            click.echo(f'{start:<8} {pair.value:<6} failed: {err}')
            continue
        seconds = time.perf_counter() - began
        click.echo(
            f'{start:<8} {pair.value:<6} {result.iterations:>10} {result.objective:>20.12g} '
            f'{seconds:>9.3f} {result.converged}'
        )
    if direct:
        began = time.perf_counter()
        try:
            result = solve_direct(inst, SolveConfig(tol=tol))
        except BarycenterError as err:
            click.echo(f'{"direct":<15} failed: {err}')
            return
        seconds = time.perf_counter() - began
        click.echo(
            f'{"direct":<15} {result.iterations:>10} {result.objective:>20.12g} {seconds:>9.3f} {result.converged}'
        )
