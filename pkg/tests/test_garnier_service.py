from __future__ import annotations

import numpy as np
import pytest

from errors import (DegeneracyError, IllConditionedError, InputValidationError,
                    PreconditionError)
from models.types import GarnierConfig, PhasePoint, UReading
from services import GarnierService
from services.loop_geometry import segment_distance
from tests.builders import random_garnier

ALGEBRAIC_THETA = (0.3, 0.4, 0.3, 1.4)  # lambda = sqrt(t), nu = 3 / (4 sqrt(t))
CONSTANT_THETA = (1.0, 1 / 3, 2 / 3, 4 / 3)  # lambda = -1, nu = -3/4 for every t


def _algebraic_seed(shift=0.0):
    return GarnierConfig(ALGEBRAIC_THETA), PhasePoint([2j], [1 + 1j], [0.375 - 0.375j + shift])


def test_theta_to_coeffs() -> None:
    assert np.allclose(GarnierService.theta_to_coeffs([1, 1, 1, 1]), [0, 0, 0, -1])
    a = GarnierService.theta_to_coeffs([0.5, 0.0, 2.0, 3.0])
    assert np.allclose(a, [-0.1875, -0.25, 0.75, 0.75 - 4.25 / 4])
    assert np.allclose(GarnierService.theta_to_coeffs([3, 1, 1, 1])[:3], [2, 0, 0])


@pytest.mark.parametrize('theta', [(1, 1, 1, 1), (0.3, 0.4, 0.3, 1.4), (0.5, 0.2j, 1.1, 0.7, 2.5 + 1j)])
def test_theta_n_roots(theta) -> None:
    config = GarnierConfig(theta)
    roots = GarnierService.coeffs_to_theta_n(config.a)
    assert abs(sum(roots) - 2) < 1e-12
    assert min(abs(r - config.theta_n) for r in roots) < 1e-10


def test_hand_computed_hamiltonian(garnier) -> None:
    L = garnier.hamiltonians(GarnierConfig([1, 1, 1, 1]), PhasePoint([2.0], [3.0], [0.0]))
    assert np.allclose(L, [0.5])


def test_hamiltonians_reject_collisions(garnier) -> None:
    with pytest.raises(IllConditionedError):
        garnier.hamiltonians(GarnierConfig([1, 1, 1, 1]), PhasePoint([2.0], [2.0], [0.0]))


@pytest.mark.parametrize('N', [1, 2, 3])
def test_full_sum_hamiltonians_make_lambda_apparent(garnier, N) -> None:
    rng = np.random.default_rng(40 + N)
    for _ in range(10):
        config, phase = random_garnier(rng, N)
        L = garnier.hamiltonians(config, phase)
        assert np.allclose(garnier.apparency_defect(config, phase, L), 0.0, atol=1e-9)


def test_skip_reading_leaves_a_logarithm(garnier) -> None:
    config = GarnierConfig([0.5, 0.3, 0.7, 1.2])
    phase = PhasePoint([2 + 1j], [0.4 + 0.8j], [0.3])
    full = garnier.hamiltonians(config, phase, UReading.FULL_SUM)
    skip = garnier.hamiltonians(config, phase, UReading.SKIP_I)
    assert abs(garnier.apparency_defect(config, phase, full)[0]) < 1e-10
    assert abs(garnier.apparency_defect(config, phase, skip)[0]) > 1e-3


@pytest.mark.parametrize('N', [1, 2])
def test_compiled_gradient_matches_finite_differences(garnier, N) -> None:
    rng = np.random.default_rng(50 + N)
    config, phase = random_garnier(rng, N)
    d_lam, d_nu, d_t = garnier.hamiltonian_gradient(config, phase.t, phase.lam, phase.nu)
    h = 1e-6
    for k in range(N):
        e = np.zeros(N)
        e[k] = h
        shifted = [
            (PhasePoint(phase.t, phase.lam + e, phase.nu), PhasePoint(phase.t, phase.lam - e, phase.nu), d_lam),
            (PhasePoint(phase.t, phase.lam, phase.nu + e), PhasePoint(phase.t, phase.lam, phase.nu - e), d_nu),
            (PhasePoint(phase.t + e, phase.lam, phase.nu), PhasePoint(phase.t - e, phase.lam, phase.nu), d_t),
        ]
        for plus, minus, exact in shifted:
            numeric = (garnier.hamiltonians(config, plus) - garnier.hamiltonians(config, minus)) / (2 * h)
            assert np.allclose(numeric, exact[:, k], rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize('N', [1, 2, 3])
def test_normalized_form_roundtrip(garnier, N) -> None:
    rng = np.random.default_rng(60 + N)
    for _ in range(100 // N):
        config, phase = random_garnier(rng, N)
        triple = garnier.normalized_form(config, phase)
        assert np.allclose(np.sort_complex(triple.psi.roots()), np.sort_complex(phase.lam))
        beta, constant = triple.b_expansion_at_infinity()
        assert abs(beta + config.theta_n) < 1e-9 and abs(constant) < 1e-9

        extracted = garnier.companion_extract(triple, phase)
        assert np.allclose(extracted.a, config.a, rtol=1e-7, atol=1e-7)
        assert np.allclose(extracted.nu, phase.nu, rtol=1e-7, atol=1e-7)
        assert np.allclose(extracted.L, garnier.hamiltonians(config, phase), rtol=1e-7, atol=1e-7)
        assert np.allclose(extracted.lambda_double, 0.75)


def test_roundtrip_with_the_other_exponent_at_infinity(garnier) -> None:
    rng = np.random.default_rng(70)
    config, phase = random_garnier(rng, 2)
    triple = garnier.normalized_form(config, phase, 2 - config.theta_n)
    extracted = garnier.companion_extract(triple, phase)
    assert np.allclose(extracted.a, config.a, rtol=1e-7, atol=1e-7)


def test_incompatible_exponent_at_infinity(garnier) -> None:
    config, phase = _algebraic_seed()
    with pytest.raises(InputValidationError):
        garnier.normalized_form(config, phase, 0.123)


def test_basis_numerator_extraction(garnier) -> None:
    rng = np.random.default_rng(71)
    config, phase = random_garnier(rng, 2)
    L = garnier.hamiltonians(config, phase)
    P = garnier.basis_numerator(config.a, phase, L)
    extracted = garnier.extract_coefficients(P, phase)
    assert np.allclose(extracted.a, config.a)
    assert np.allclose(extracted.L, L)
    assert np.allclose(extracted.nu, phase.nu)


def test_potential_matches_basis_numerator(garnier) -> None:
    rng = np.random.default_rng(72)
    config, phase = random_garnier(rng, 1)
    potential = garnier.potential(config, phase)
    P = garnier.basis_numerator(config.a, phase, potential.L)
    z = 0.37 - 1.21j
    denominator = (garnier._phi(phase)(z) * garnier._psi(phase)(z)) ** 2
    assert np.isclose(potential(z), P(z) / denominator)


def test_flow_follows_the_algebraic_solution(garnier) -> None:
    config, phase = _algebraic_seed()
    end = garnier.flow(config, phase, [[2j], [1.5 + 1.5j]])
    s = np.sqrt(1.5 + 1.5j)
    assert np.allclose(end.lam, [s], atol=1e-7)
    assert np.allclose(end.nu, [0.75 / s], atol=1e-7)


@pytest.mark.parametrize('N', [1, 2])
def test_flow_is_reversible(garnier, N) -> None:
    rng = np.random.default_rng(80 + N)
    config, phase = random_garnier(rng, N)
    target = phase.t + 0.05 * (rng.standard_normal(N) + 1j * rng.standard_normal(N))
    trajectory = garnier.trace_flow(config, phase, [phase.t, target, phase.t])
    back = trajectory.endpoint
    assert np.allclose(back.lam, phase.lam, atol=1e-7)
    assert np.allclose(back.nu, phase.nu, atol=1e-7)
    assert np.all(np.diff(trajectory.arclength) >= 0)
    assert np.isclose(trajectory.arclength[-1], 2 * np.linalg.norm(target - phase.t))


def test_flow_along_trivial_paths(garnier) -> None:
    config, phase = _algebraic_seed()
    assert garnier.flow(config, phase, []) is phase
    assert garnier.trace_flow(config, phase, [phase.t]).points == (phase,)
    assert garnier.flow(config, phase, [phase.t, phase.t]) is phase


def test_flow_path_must_start_at_phase(garnier) -> None:
    config, phase = _algebraic_seed()
    with pytest.raises(PreconditionError):
        garnier.flow(config, phase, [[1j], [2j]])


def test_flow_path_through_a_fixed_pole(garnier) -> None:
    config, phase = _algebraic_seed()
    with pytest.raises(PreconditionError):
        garnier.flow(config, phase, [[2j], [-2j]])


def test_flow_collision_is_reported(garnier) -> None:
    config = GarnierConfig(CONSTANT_THETA)
    phase = PhasePoint([2j], [-1.0], [-0.75])
    with pytest.raises(DegeneracyError) as excinfo:
        garnier.flow(config, phase, [[2j], [-1.0]])
    assert excinfo.value.location['pair'] == ('t1', 'lambda1')


def test_elementary_loops(garnier) -> None:
    loops = garnier.elementary_loops(np.array([2j, -1.5 + 0.5j]))
    assert [label for label, _ in loops] == ['t1~0', 't1~1', 't1~t2', 't2~0', 't2~1', 't2~t1']
    for _, waypoints in loops:
        assert np.allclose(waypoints[0], waypoints[-1])


@pytest.mark.parametrize('t0', [[2.0], [-0.5], [0.5], [3.0, -2.0]])
def test_elementary_loops_keep_clear_of_the_other_points(garnier, t0) -> None:
    t0 = np.array(t0, dtype=complex)
    loops = garnier.elementary_loops(t0, avoid=[-1.0])
    for label, waypoints in loops:
        i = int(label[1:label.index('~')]) - 1
        fixed = [0.0, 1.0, -1.0] + [t0[j] for j in range(t0.size) if j != i]
        for a, b in zip(waypoints[:-1], waypoints[1:]):
            assert np.allclose(np.delete(a, i), np.delete(b, i))
            for p in fixed:
                assert segment_distance(p, a[i], b[i]) > 0.1
        ring = np.array([w[i] for w in waypoints[2:-2]])
        target = {'0': 0.0, '1': 1.0}.get(label.split('~')[1])
        if target is not None:
            winding = np.sum(np.angle((ring[1:] - target) / (ring[:-1] - target)))
            assert np.isclose(winding, 2 * np.pi)


def test_branches_at_real_time(garnier) -> None:
    verdict = garnier.branch_probe(GarnierConfig(CONSTANT_THETA), PhasePoint([2.0], [-1.0], [-0.75]), depth=1)
    assert verdict.kind == 'branches'
    assert verdict.count == 1


@pytest.mark.slow
def test_algebraic_solution_at_real_time(garnier) -> None:
    config = GarnierConfig(ALGEBRAIC_THETA)
    phase = PhasePoint([4.0], [2.0], [0.375])
    verdict = garnier.branch_probe(config, phase, depth=2)
    assert verdict.kind == 'branches'
    assert verdict.count == 2
    other = [b for b in verdict.branches if not np.allclose(b.lam, phase.lam, atol=1e-6)][0]
    assert np.allclose(other.lam, [-2.0], atol=1e-6)


@pytest.mark.slow
def test_constant_solution_has_one_branch(garnier) -> None:
    verdict = garnier.branch_probe(GarnierConfig(CONSTANT_THETA), PhasePoint([2j], [-1.0], [-0.75]))
    assert verdict.kind == 'branches'
    assert verdict.count == 1


@pytest.mark.slow
def test_algebraic_solution_has_two_branches(garnier) -> None:
    config, phase = _algebraic_seed()
    verdict = garnier.branch_probe(config, phase)
    assert verdict.kind == 'branches'
    assert verdict.count == 2
    other = [b for b in verdict.branches if not np.allclose(b.lam, phase.lam, atol=1e-6)][0]
    assert np.allclose(other.lam, -phase.lam, atol=1e-6)
    assert np.allclose(other.nu, -phase.nu, atol=1e-6)


@pytest.mark.slow
def test_perturbed_solution_exceeds_cap(garnier) -> None:
    config, phase = _algebraic_seed(shift=1e-3)
    verdict = garnier.branch_probe(config, phase, depth=2, cap=64)
    assert verdict.kind == 'exceeded_cap'


def test_continuations_are_memoized(garnier) -> None:
    config = GarnierConfig(CONSTANT_THETA)
    phase = PhasePoint([2j], [-1.0], [-0.75])
    garnier.branch_probe(config, phase, depth=1)
    misses = garnier.endpoints.misses
    garnier.branch_probe(config, phase, depth=1)
    assert garnier.endpoints.misses == misses
    assert garnier.endpoints.hits >= 2
    assert garnier.endpoints.size() > 0
    garnier.endpoints.clear()
    assert garnier.endpoints.size() == 0
    assert garnier.endpoints.hits == 0
