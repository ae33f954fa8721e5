"""Command handling module: one click command per pipeline stage, JSON in and out."""
import functools
import logging
import sys

import click
import numpy as np
import orjson
import pandas as pd
from pydantic import ValidationError

from config import (BRANCH_CAP, BRANCH_DEPTH, DEFAULT_SEED, ORBIT_CAP,
                    THREADS, TOLERANCE)
from errors import (InputValidationError, IntertwinerNotConjugatorError,
                    NumericalAbort)
from models.schemas import (BranchResult, EulResult, GarnierRequest, GermModel,
                            LaurentModel, LocalRHRequest, LocalRHResult,
                            MildResult, MonodromyResultModel, OrbitResult,
                            PhasePointModel, ReduceResult, RepTupleModel,
                            RoundtripResult, FlowResult, from_pair,
                            matrix_to_json, to_pair, to_pairs)
from models.types import Tolerances
from services import (BraidService, ConnectionService, ExactOrbitOracle,
                      GarnierService, LinalgService, MonodromyService)

# Configure logging
logger = logging.getLogger(__name__)

EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class Runtime:
    """Services configured from the command line options of one invocation."""

    def __init__(self, tol=TOLERANCE, seed=DEFAULT_SEED, threads=THREADS):
        """
        Args:
            tol (float): Relative equality tolerance
            seed (int): Seed of the randomized internals
            threads (int): Worker threads for orbit frontiers, loops and continuations
        """
        self.tolerances = Tolerances(tol=tol)
        self.seed = seed
        self.linalg = LinalgService(tol=tol, seed=seed)
        self.braid = BraidService(self.linalg, threads=threads)
        self.connections = ConnectionService(self.linalg)
        self.garnier = GarnierService(threads=threads)
        self.monodromy = MonodromyService(threads=threads)

    def header(self, command):
        """
        Common fields of every result document.

        Args:
            command (str): Subcommand name echoed in the output

        Returns:
            dict: ``command``, the effective ``tolerances`` and the ``seed``
        """
        return {'command': command, 'tolerances': self.tolerances.as_dict(), 'seed': self.seed}


def _read_json(stream):
    try:
        return orjson.loads(stream.read())
    except orjson.JSONDecodeError as e:
        raise InputValidationError(f'input is not valid JSON: {e}')


def _emit(result, stream):
    payload = orjson.dumps(result.model_dump(by_alias=True),
                           option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_INDENT_2)
    stream.write(payload.decode() + '\n')


def _fail(code, kind, error):
    message = orjson.dumps({'error': kind, 'message': str(error)}, option=orjson.OPT_SORT_KEYS).decode()
    click.echo(message, err=True)
    sys.exit(code)


def reports_errors(command):
    """Map validation failures to exit code 2 and numerical aborts to exit code 3."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (InputValidationError, ValidationError) as e:
            logger.error(f"Invalid input: {e}")
            _fail(EXIT_INPUT, 'input', e)
        except (NumericalAbort, IntertwinerNotConjugatorError) as e:
            logger.error(f"Numerical abort: {e}")
            _fail(EXIT_NUMERICAL, type(e).__name__, e)
    return wrapper


def io_options(command):
    command = click.option('--input', 'input_', type=click.File('r'), default='-',
                           help='JSON request file, - for stdin')(command)
    command = click.option('--output', type=click.File('w'), default='-',
                           help='JSON result file, - for stdout')(command)
    return command


@click.group()
@click.option('--tol', type=float, default=TOLERANCE, show_default=True, help='Relative equality tolerance')
@click.option('--seed', type=int, default=DEFAULT_SEED, show_default=True, help='Seed of randomized internals')
@click.option('--threads', type=click.IntRange(min=1), default=THREADS, show_default=True,
              help='Worker threads')
@click.pass_context
def cli(ctx, tol, seed, threads):
    """Isomonodromic deformations: braid orbits, logarithmic connections, Garnier systems."""
    if tol <= 0:
        raise click.BadParameter('must be positive', param_hint='--tol')
    ctx.obj = Runtime(tol=tol, seed=seed, threads=threads)


# ---------------------------------------------------------------- braid orbits

@cli.command()
@io_options
@click.option('--cap', type=click.IntRange(min=1), default=ORBIT_CAP, show_default=True)
@click.option('--exact', is_flag=True, help='Exact arithmetic (Gaussian-integer entries only)')
@click.pass_obj
@reports_errors
def orbit(runtime, input_, output, cap, exact):
    """Pure braid orbit of a tuple modulo simultaneous conjugation."""
    rep = RepTupleModel.model_validate(_read_json(input_)).to_domain()
    if exact:
        verdict = ExactOrbitOracle(runtime.braid).orbit(rep, cap=cap)
    else:
        verdict = runtime.braid.orbit_bfs(rep, cap=cap)
    _emit(OrbitResult(**runtime.header('orbit'), kind=verdict.kind, size=verdict.size,
                      visited=verdict.visited, fingerprints=list(verdict.fingerprints), cap=cap), output)


# ------------------------------------------------------------ log connections

def _reduced(runtime, germ):
    if runtime.connections.check_reduced(germ).ok:
        return runtime.connections.as_reduced(germ)
    reduced, _ = runtime.connections.pdl_reduce(germ)
    return reduced


@cli.command()
@io_options
@click.pass_obj
@reports_errors
def reduce(runtime, input_, output):
    """Holomorphic gauge reduction of a germ to reduced form."""
    germ = GermModel.model_validate(_read_json(input_)).to_domain()
    reduced, gauge = runtime.connections.pdl_reduce(germ)
    residual = runtime.connections.gauge_residual(germ, gauge, reduced.germ, germ.degree)
    _emit(ReduceResult(**runtime.header('reduce'), reduced=GermModel.from_domain(reduced.germ),
                       lambda_=to_pairs(reduced.lambda_diag),
                       blocks=[(b.start, b.stop) for b in reduced.blocks],
                       gauge=LaurentModel.from_domain(gauge), gauge_residual=residual), output)


@cli.command()
@io_options
@click.pass_obj
@reports_errors
def eul(runtime, input_, output):
    """Constant residue C of the Euler connection attached to a germ."""
    germ = GermModel.model_validate(_read_json(input_)).to_domain()
    reduced = _reduced(runtime, germ)
    C = runtime.connections.eul(reduced)
    L = runtime.connections.floor_exponents(reduced)
    _emit(EulResult(**runtime.header('eul'), C=matrix_to_json(C), L=[int(x) for x in L]), output)


@cli.command()
@io_options
@click.pass_obj
@reports_errors
def mild(runtime, input_, output):
    """Decide whether every meromorphic automorphism of a germ is holomorphic."""
    germ = GermModel.model_validate(_read_json(input_)).to_domain()
    reduced = _reduced(runtime, germ)
    verdict = runtime.connections.is_mild(reduced)
    result = dict(runtime.header('mild'), verdict='mild' if verdict.mild else 'not_mild', report=verdict.report)
    if not verdict.mild:
        residual = runtime.connections.gauge_residual(reduced.germ, verdict.witness, reduced.germ)
        result.update(witness=LaurentModel.from_domain(verdict.witness), entry=verdict.entry,
                      exponent_gap=verdict.exponent_gap, witness_residual=residual)
    _emit(MildResult(**result), output)


@cli.command('local-rh')
@io_options
@click.pass_obj
@reports_errors
def local_rh(runtime, input_, output):
    """Commuting residues realizing commuting local monodromies."""
    request = LocalRHRequest.model_validate(_read_json(input_))
    residues = runtime.connections.local_rh_residues(request.to_domain())
    _emit(LocalRHResult(**runtime.header('local-rh'), residues=[matrix_to_json(R) for R in residues]), output)


# -------------------------------------------------------------------- garnier

def _garnier_request(stream):
    request = GarnierRequest.model_validate(_read_json(stream))
    return request, request.config.to_domain(), request.phase.to_domain()


def _trajectory_frame(trajectory):
    N = trajectory.endpoint.N
    columns = {'arclength': trajectory.arclength}
    for name, attr in (('t', 't'), ('lambda', 'lam'), ('nu', 'nu')):
        values = np.array([getattr(p, attr) for p in trajectory.points])
        for i in range(N):
            columns[f're_{name}{i + 1}'] = values[:, i].real
            columns[f'im_{name}{i + 1}'] = values[:, i].imag
    return pd.DataFrame(columns)


@cli.command('garnier-flow')
@io_options
@click.option('--csv', 'csv_path', type=click.Path(dir_okay=False, writable=True),
              help='Also write the trajectory as CSV')
@click.pass_obj
@reports_errors
def garnier_flow(runtime, input_, output, csv_path):
    """Integrate the Garnier system along a polyline in t-space."""
    request, config, phase = _garnier_request(input_)
    trajectory = runtime.garnier.trace_flow(config, phase, request.waypoints())
    if csv_path:
        _trajectory_frame(trajectory).to_csv(csv_path, index=False)
        logger.info(f"Trajectory with {len(trajectory.points)} samples written to {csv_path}")
    _emit(FlowResult(**runtime.header('garnier-flow'), endpoint=PhasePointModel.from_domain(trajectory.endpoint),
                     samples=len(trajectory.points), arclength=float(trajectory.arclength[-1])), output)


@cli.command()
@io_options
@click.pass_obj
@reports_errors
def monodromy(runtime, input_, output):
    """Monodromy tuple of the companion system at a phase point."""
    request, config, phase = _garnier_request(input_)
    potential = runtime.garnier.potential(config, phase)
    basepoint = from_pair(request.basepoint) if request.basepoint else None
    result = runtime.monodromy.garnier_monodromy(potential, include_lambda=request.include_lambda,
                                                 basepoint=basepoint)
    _emit(MonodromyResultModel(**runtime.header('monodromy'), tuple=RepTupleModel.from_domain(result.tuple),
                               labels=list(result.labels), basepoint=to_pair(result.basepoint),
                               traces=to_pairs(result.tuple.traces())), output)


@cli.command('branch-probe')
@io_options
@click.option('--cap', type=click.IntRange(min=1), default=BRANCH_CAP, show_default=True)
@click.option('--depth', type=click.IntRange(min=0), default=BRANCH_DEPTH, show_default=True)
@click.pass_obj
@reports_errors
def branch_probe(runtime, input_, output, cap, depth):
    """Count the branches of a Garnier solution under continuation in t."""
    _, config, phase = _garnier_request(input_)
    verdict = runtime.garnier.branch_probe(config, phase, depth=depth, cap=cap)
    _emit(BranchResult(**runtime.header('branch-probe'), kind=verdict.kind, count=verdict.count,
                       branches=[PhasePointModel.from_domain(b) for b in verdict.branches],
                       visited=verdict.visited, cap=cap, depth=verdict.depth_reached), output)


@cli.command()
@io_options
@click.pass_obj
@reports_errors
def roundtrip(runtime, input_, output):
    """Normalized form followed by companion extraction, compared with the input."""
    request, config, phase = _garnier_request(input_)
    theta_n = from_pair(request.theta_n) if request.theta_n else None
    triple = runtime.garnier.normalized_form(config, phase, theta_n)
    extracted = runtime.garnier.companion_extract(triple, phase)
    L = runtime.garnier.hamiltonians(config, phase)
    deviation = max(float(np.max(np.abs(extracted.a - config.a))),
                    float(np.max(np.abs(extracted.nu - phase.nu))),
                    float(np.max(np.abs(extracted.L - L))))
    _emit(RoundtripResult(**runtime.header('roundtrip'), a=to_pairs(extracted.a), nu=to_pairs(extracted.nu),
                          L=to_pairs(extracted.L), hamiltonians=to_pairs(L),
                          lambda_double=to_pairs(extracted.lambda_double), max_deviation=deviation), output)
