from __future__ import annotations

import orjson
import pandas as pd
import pytest
from click.testing import CliRunner

from handlers import cli
from models.schemas import (BranchResult, EulResult, FlowResult, LocalRHResult,
                            MildResult, MonodromyResultModel, OrbitResult,
                            ReduceResult, RoundtripResult)


def pair(z):
    z = complex(z)
    return [z.real, z.imag]


def matrix(rows):
    return [[pair(x) for x in row] for row in rows]


DIAGONAL_TUPLE = {
    'n': 3, 'm': 2, 'product_constraint': False,
    'matrices': [matrix([[1j, 0], [0, -1]]), matrix([[2, 0], [0, 0.5]]), matrix([[-1, 0], [0, 1j]])],
}
GAUSSIAN_TUPLE = {
    'n': 3, 'm': 2,
    'matrices': [matrix([[1j, 0], [0, -1]]), matrix([[-1, 0], [0, 1]]), matrix([[1j, 0], [0, 1j]])],
}
RESONANT_GERM = {'m': 2, 'coeffs': [matrix([[1.5, 0], [0, -1.5]])]}
ALGEBRAIC_REQUEST = {
    'config': {'N': 1, 'theta': [pair(0.3), pair(0.4), pair(0.3), pair(1.4)]},
    'phase': {'t': [pair(2j)], 'lambda': [pair(1 + 1j)], 'nu': [pair(0.375 - 0.375j)]},
}
CONSTANT_REQUEST = {
    'config': {'N': 1, 'theta': [pair(1), pair(1 / 3), pair(2 / 3), pair(4 / 3)]},
    'phase': {'t': [pair(2j)], 'lambda': [pair(-1)], 'nu': [pair(-0.75)]},
}
FLOW_REQUEST = dict(ALGEBRAIC_REQUEST, path=[[pair(2j)], [pair(1.5 + 1.5j)]])
REDUCIBLE_GERM = {'m': 2, 'coeffs': [matrix([[0.2, 1], [0, 1.2]]), matrix([[0.5, 0.1], [0.3, -0.2]])]}
COMMUTING_MONODROMIES = {'monodromies': [matrix([[1j, 0], [0, -1]]), matrix([[-1, 0], [0, 1]])]}


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def invoke(runner, args, payload):
    return runner.invoke(cli, ['--threads', '2'] + args, input=orjson.dumps(payload).decode())


def test_unknown_command(runner) -> None:
    assert runner.invoke(cli, ['teleport']).exit_code == 2


def test_invalid_tolerance(runner) -> None:
    assert runner.invoke(cli, ['--tol', '0', 'orbit'], input='{}').exit_code == 2


def test_malformed_json(runner) -> None:
    result = runner.invoke(cli, ['orbit'], input='{"n": 3,')
    assert result.exit_code == 2
    assert orjson.loads(result.stderr.strip().splitlines()[-1])['error'] == 'input'


def test_schema_violation(runner) -> None:
    payload = dict(DIAGONAL_TUPLE, n=4)
    assert invoke(runner, ['orbit'], payload).exit_code == 2


def test_orbit_of_commuting_tuple(runner) -> None:
    result = invoke(runner, ['orbit'], DIAGONAL_TUPLE)
    assert result.exit_code == 0
    body = orjson.loads(result.stdout)
    assert body['command'] == 'orbit'
    assert body['kind'] == 'finite'
    assert body['size'] == 1
    assert body['seed'] == 0
    assert set(body['tolerances']) == {'tol', 'cluster_tol', 'singular', 'rtol', 'separation', 'branch_tol'}


def test_exact_orbit(runner) -> None:
    result = invoke(runner, ['orbit', '--exact'], GAUSSIAN_TUPLE)
    assert result.exit_code == 0
    assert orjson.loads(result.stdout)['size'] == 1


def test_orbit_over_cap_is_a_verdict(runner) -> None:
    payload = {'n': 3, 'm': 2, 'matrices': [matrix([[1, 1], [0, 1]]), matrix([[1, 0], [-1, 1]]),
                                            matrix([[2, 1], [1, 1]])]}
    result = invoke(runner, ['orbit', '--cap', '5'], payload)
    assert result.exit_code == 0
    assert orjson.loads(result.stdout)['kind'] == 'exceeded_cap'


def test_output_is_deterministic(runner) -> None:
    first = invoke(runner, ['orbit'], DIAGONAL_TUPLE).stdout
    second = invoke(runner, ['orbit'], DIAGONAL_TUPLE).stdout
    assert first == second


def test_reduce(runner) -> None:
    result = invoke(runner, ['reduce'], REDUCIBLE_GERM)
    assert result.exit_code == 0
    body = orjson.loads(result.stdout)
    assert body['gauge_residual'] < 1e-8
    assert body['blocks'] == [[0, 2]]
    assert body['lambda'][0][0] == pytest.approx(1.2)


def test_reduce_needs_enough_terms(runner) -> None:
    payload = {'m': 2, 'coeffs': [matrix([[3.2, 0], [0, 0.2]])]}
    result = invoke(runner, ['reduce'], payload)
    assert result.exit_code == 2
    assert 'raise degree' in result.stderr


def test_eul(runner) -> None:
    result = invoke(runner, ['eul'], RESONANT_GERM)
    assert result.exit_code == 0
    body = orjson.loads(result.stdout)
    assert body['L'] == [1, -2]
    assert body['C'][0][0] == pytest.approx([0.5, 0.0])


def test_mild_verdicts(runner) -> None:
    result = invoke(runner, ['mild'], RESONANT_GERM)
    assert result.exit_code == 0
    body = orjson.loads(result.stdout)
    assert body['verdict'] == 'not_mild'
    assert body['entry'] == [2, 1]
    assert body['exponent_gap'] == 3
    assert body['witness_residual'] < 1e-8

    mild = invoke(runner, ['mild'], {'m': 2, 'coeffs': [matrix([[0.3, 0], [0, -0.45]])]})
    assert orjson.loads(mild.stdout)['verdict'] == 'mild'


def test_local_rh(runner) -> None:
    result = invoke(runner, ['local-rh'], COMMUTING_MONODROMIES)
    assert result.exit_code == 0
    residues = orjson.loads(result.stdout)['residues']
    assert residues[0][0][0] == pytest.approx([0.25, 0.0])
    assert residues[0][1][1] == pytest.approx([0.5, 0.0])


def test_local_rh_numerical_abort(runner) -> None:
    result = invoke(runner, ['local-rh'], {'monodromies': [matrix([[0, 0], [0, 0]])]})
    assert result.exit_code == 3
    assert orjson.loads(result.stderr.strip().splitlines()[-1])['error'] == 'SingularMatrixError'


def test_local_rh_precondition(runner) -> None:
    payload = {'monodromies': [matrix([[1, 1], [0, 1]]), matrix([[1, 0], [1, 1]])]}
    assert invoke(runner, ['local-rh'], payload).exit_code == 2


def test_garnier_flow_with_csv(runner, tmp_path) -> None:
    csv_path = tmp_path / 'trajectory.csv'
    result = invoke(runner, ['garnier-flow', '--csv', str(csv_path)], FLOW_REQUEST)
    assert result.exit_code == 0
    body = orjson.loads(result.stdout)
    frame = pd.read_csv(csv_path)
    assert len(frame) == body['samples']
    assert list(frame.columns[:3]) == ['arclength', 're_t1', 'im_t1']
    assert frame['re_t1'].iloc[-1] == pytest.approx(1.5)


def test_garnier_flow_degeneracy(runner) -> None:
    payload = dict(CONSTANT_REQUEST, path=[[pair(2j)], [pair(-1)]])
    result = invoke(runner, ['garnier-flow'], payload)
    assert result.exit_code == 3
    assert orjson.loads(result.stderr.strip().splitlines()[-1])['error'] == 'DegeneracyError'


def test_monodromy(runner) -> None:
    result = invoke(runner, ['monodromy'], dict(ALGEBRAIC_REQUEST, include_lambda=True))
    assert result.exit_code == 0
    body = orjson.loads(result.stdout)
    assert body['tuple']['n'] == 5
    assert sorted(body['labels']) == ['0', '1', 'inf', 'lambda1', 't1']


def test_branch_probe(runner) -> None:
    result = invoke(runner, ['branch-probe', '--depth', '1'], CONSTANT_REQUEST)
    assert result.exit_code == 0
    body = orjson.loads(result.stdout)
    assert body['kind'] == 'branches'
    assert body['count'] == 1


def test_roundtrip(runner) -> None:
    result = invoke(runner, ['roundtrip'], ALGEBRAIC_REQUEST)
    assert result.exit_code == 0
    assert orjson.loads(result.stdout)['max_deviation'] < 1e-7


@pytest.mark.parametrize('args, payload, model', [
    (['orbit'], DIAGONAL_TUPLE, OrbitResult),
    (['reduce'], REDUCIBLE_GERM, ReduceResult),
    (['eul'], RESONANT_GERM, EulResult),
    (['mild'], RESONANT_GERM, MildResult),
    (['local-rh'], COMMUTING_MONODROMIES, LocalRHResult),
    (['garnier-flow'], FLOW_REQUEST, FlowResult),
    (['monodromy'], ALGEBRAIC_REQUEST, MonodromyResultModel),
    (['branch-probe', '--depth', '1'], CONSTANT_REQUEST, BranchResult),
    (['roundtrip'], ALGEBRAIC_REQUEST, RoundtripResult),
])
def test_output_parses_back_to_itself(runner, args, payload, model) -> None:
    result = invoke(runner, args, payload)
    assert result.exit_code == 0
    body = orjson.loads(result.stdout)
    parsed = model.model_validate(body)
    assert body['command'] == args[0]
    assert orjson.loads(orjson.dumps(parsed.model_dump(by_alias=True))) == body


def test_branches_at_real_time(runner) -> None:
    payload = dict(CONSTANT_REQUEST, phase={'t': [pair(2.0)], 'lambda': [pair(-1)], 'nu': [pair(-0.75)]})
    result = invoke(runner, ['branch-probe', '--depth', '1'], payload)
    assert result.exit_code == 0
    assert orjson.loads(result.stdout)['count'] == 1


@pytest.mark.slow
def test_monodromy_output_feeds_the_orbit_command(runner) -> None:
    monodromy = invoke(runner, ['monodromy'], ALGEBRAIC_REQUEST)
    assert monodromy.exit_code == 0
    tuple_ = orjson.loads(monodromy.stdout)['tuple']
    assert tuple_['accuracy'] > 0
    result = invoke(runner, ['orbit', '--cap', '50'], tuple_)
    assert result.exit_code == 0
    body = orjson.loads(result.stdout)
    assert body['kind'] == 'finite'
    assert body['size'] == 2
