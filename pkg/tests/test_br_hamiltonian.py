import numpy as np
import pytest
from pydantic import ValidationError

from backend.errors import DomainError
from backend.lemma_jobs import ground_state_box
from lab_config import ALPHA_DEFAULT
from pipeline.br_hamiltonian import (
    ALPHA_Z_C,
    CouplingParams,
    SlaterState,
    abs_momentum_form,
    br_one_particle_form,
    control_lemma_ratio,
    coulomb_form,
    coulomb_pair_integral,
    critical_charge,
    ground_state_one_particle,
    hartree_potential,
    kinetic_form,
    semibounded_quotients,
    spectral_result_json,
    two_particle_energy_form,
)
from pipeline.field_utils import gaussian_field, grid_spacing, make_grid, random_smooth_field
from pipeline.projector_ops import apply_lambda_fourier


def test_critical_coupling_value():
    assert ALPHA_Z_C == pytest.approx(2.0 / (np.pi / 2.0 + 2.0 / np.pi))
    assert critical_charge(ALPHA_DEFAULT) == pytest.approx(ALPHA_Z_C * 137.036)
    assert 124.0 < critical_charge(ALPHA_DEFAULT) < 125.0


def test_supercritical_coupling_is_rejected():
    with pytest.raises(ValidationError, match="critical coupling"):
        CouplingParams(alpha=ALPHA_DEFAULT, z=130.0)
    assert CouplingParams(alpha=ALPHA_DEFAULT, z=100.0).alpha_z == pytest.approx(100.0 / 137.036)


def test_kinetic_form_dominates_norm(small_field):
    g = apply_lambda_fourier(small_field)
    assert kinetic_form(g) >= g.norm() ** 2


def test_kato_inequality_on_smooth_fields(rng):
    for _ in range(4):
        f = random_smooth_field(24, 20.0, rng, 2.0, (1.0, 2.5))
        assert coulomb_form(f, 1.0) <= 0.5 * np.pi * abs_momentum_form(f)


def test_one_particle_form_bounded_below(rng):
    params = CouplingParams(alpha=ALPHA_DEFAULT, z=60.0)
    fields = [random_smooth_field(16, 8.0, rng, 1.0, (0.3, 1.5)) for _ in range(6)]
    quotients = semibounded_quotients(fields, params)
    assert len(quotients) == 6
    assert min(quotients) >= 1.0 - params.alpha_z
    f = apply_lambda_fourier(fields[0])
    floor = (params.z_c - params.z) / params.z_c * kinetic_form(f)
    assert br_one_particle_form(f, params) >= floor


def test_ground_state_in_bracket():
    params = CouplingParams(alpha=ALPHA_DEFAULT, z=20.0)
    result = ground_state_one_particle(params, 16, ground_state_box(params, 12.0), tol=1e-6, seed=1)
    assert 1.0 - params.alpha_z < result.e1 < 1.0
    assert result.state is not None
    assert result.state.norm() == pytest.approx(1.0, rel=1e-10)
    payload = spectral_result_json(result)
    assert payload["z"] == 20.0 and payload["grid_n"] == 16


def test_ground_state_box_needs_charge():
    with pytest.raises(DomainError):
        ground_state_box(CouplingParams(alpha=ALPHA_DEFAULT, z=0.0), 12.0)


def test_hartree_far_field_and_sign():
    n, box, sigma = 32, 16.0, 0.6
    r = np.linalg.norm(make_grid(n, box), axis=-1)
    density = np.exp(-0.5 * (r / sigma) ** 2)
    density /= np.sum(density) * grid_spacing(n, box) ** 3
    potential = hartree_potential(density, box)
    assert potential.min() > 0.0
    far = (r > 5.0 * sigma) & (r < 7.0)
    np.testing.assert_allclose(potential[far] * r[far], 1.0, rtol=0.02)


def test_hartree_rejects_negative_density():
    density = np.zeros((8, 8, 8))
    density[0, 0, 0] = -1.0
    with pytest.raises(DomainError):
        hartree_potential(density, 4.0)
    with pytest.raises(ValueError):
        hartree_potential(np.ones((8, 8, 8)), 4.0, convention="spherical")


def test_pair_integral_is_symmetric(rng):
    a = rng.random((8, 8, 8))
    b = rng.random((8, 8, 8))
    assert coulomb_pair_integral(a, b, 6.0) == pytest.approx(coulomb_pair_integral(b, a, 6.0), rel=1e-12)


def test_antisymmetrized_norm_of_disjoint_product():
    f = gaussian_field(16, 16.0, (-4.0, 0.0, 0.0), 0.8, (1.0, 0.0, 0.0, 0.0)).normalized()
    g = gaussian_field(16, 16.0, (4.0, 0.0, 0.0), 0.8, (0.0, 1.0, 0.0, 0.0)).normalized()
    state = SlaterState.product(f, g)
    assert state.antisym_norm_squared() == pytest.approx(1.0, rel=1e-10)
    assert state.plain_norm_squared() == pytest.approx(1.0, rel=1e-10)


def test_two_particle_form(rng):
    params = CouplingParams(alpha=ALPHA_DEFAULT, z=10.0)
    f = random_smooth_field(16, 10.0, rng, 1.5, (0.8, 1.5))
    g = random_smooth_field(16, 10.0, rng, 1.5, (0.8, 1.5))
    state = SlaterState.product(f, g)
    full = two_particle_energy_form(state, params)
    bare = two_particle_energy_form(state, params, include_interaction=False)
    assert full > bare
    assert full >= 2.0 * (1.0 - params.alpha_z)
    assert two_particle_energy_form(state.swapped(), params) == pytest.approx(full, rel=1e-10)
    assert control_lemma_ratio(state, params) > 0.0


def test_identical_factors_vanish_under_antisymmetrization(rng):
    f = random_smooth_field(16, 10.0, rng, 1.5, (0.8, 1.5))
    with pytest.raises(DomainError):
        two_particle_energy_form(SlaterState.product(f, f), CouplingParams(alpha=ALPHA_DEFAULT, z=1.0))
