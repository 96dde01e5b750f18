import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backend.errors import DomainError, PreconditionError
from backend.theorem_lab import (
    antisym_overlap_check,
    build_partition,
    build_weyl_state,
    calibrate_localization_constant,
    fourier_mass_check,
    hard_part_constants,
    hard_part_m,
    localization_check,
    localization_fields,
    localization_sweep,
    low_mode_cutoff,
    minimum_radius,
    orthogonalize_low,
    partition_report,
    sine_mode_transform,
    sine_mode_transform_closed,
    sine_mode_values,
    weyl_convergence_report,
    weyl_residual_report,
)
from lab_config import ALPHA_DEFAULT, SEED_DEFAULT
from pipeline.br_hamiltonian import CouplingParams, ground_state_one_particle
from pipeline.field_utils import gaussian_field


@settings(max_examples=30, deadline=None)
@given(
    points=st.lists(st.floats(-6.0, 6.0, allow_nan=False), min_size=6, max_size=6),
    r=st.floats(0.5, 3.0),
)
def test_partition_squares_sum_to_one(points, r):
    partition = build_partition(2, r)
    values = partition.values(np.array(points).reshape(1, 2, 3))
    assert values.shape == (1, 3)
    assert np.sum(values**2) == pytest.approx(1.0, abs=1e-12)
    assert np.all(values >= 0.0)


def test_partition_chi0_is_one_near_origin():
    partition = build_partition(1, 2.0)
    values = partition.values(np.zeros((1, 1, 3)))
    np.testing.assert_allclose(values[0], [1.0, 0.0])


def test_partition_far_particle_is_outer():
    partition = build_partition(1, 1.0)
    values = partition.values(np.array([[[5.0, 0.0, 0.0]]]))
    np.testing.assert_allclose(values[0], [0.0, 1.0])


def test_trivial_partition_is_single_one():
    partition = build_partition(3, 1.0, trivial=True)
    values = partition.values(np.random.default_rng(0).normal(size=(4, 3, 3)))
    np.testing.assert_array_equal(values, np.ones((4, 1)))


@pytest.mark.parametrize("n, r", [(0, 1.0), (2, 0.0), (1, -1.0)])
def test_partition_rejects_bad_arguments(n, r):
    with pytest.raises(DomainError):
        build_partition(n, r)


def test_partition_rejects_wrong_point_shape():
    with pytest.raises(ValueError):
        build_partition(2, 1.0).values(np.zeros((3, 1, 3)))


def test_partition_report_passes():
    report = partition_report(1, [1.0, 2.0, 4.0], n_samples=2000, n_derivative_samples=200, seed=3)
    assert report.lemma == "partition"
    assert report.passed
    assert report.measured_value < 1e-10


@pytest.mark.parametrize("p", [0.37, -1.3, 2.71, 5.05])
def test_sine_transform_matches_closed_form(p):
    k = np.arange(1, 7)
    numeric = sine_mode_transform(k, 1.5, np.array([p]))
    closed = sine_mode_transform_closed(k, 1.5, np.array([p]))
    np.testing.assert_allclose(numeric, closed, rtol=1e-10, atol=1e-12)


def test_sine_modes_are_orthonormal_and_compact():
    r = 0.75
    nodes, weights = np.polynomial.legendre.leggauss(200)
    x = 2.0 * r * nodes
    values = sine_mode_values(np.arange(1, 6), r, x)
    gram = (values * (2.0 * r * weights)) @ values.T
    np.testing.assert_allclose(gram, np.eye(5), atol=1e-12)
    assert np.all(sine_mode_values(np.arange(1, 6), r, np.array([-2.0, 1.6])) == 0.0)


def test_sine_transform_finite_on_resonance():
    r = 1.0
    p = np.array([np.pi / (4.0 * r)])
    value = sine_mode_transform(np.array([1.0]), r, p)
    assert np.all(np.isfinite(value))


def test_low_mode_cutoff_value():
    assert low_mode_cutoff(1, 1.0, 2.0) == 35


def test_orthogonalize_low_zeroes_leading_block():
    c = np.ones((5, 5, 5), dtype=np.complex128)
    out = orthogonalize_low(c, 3)
    assert np.all(out[:2, :2, :2] == 0.0)
    assert out[2, 0, 0] == 1.0
    assert np.all(c == 1.0)


def test_fourier_mass_one_dimensional_passes():
    report = fourier_mass_check(1, 1.0, 2.0, n_random=5, seed=11)
    assert report.passed
    assert report.measured["low_cutoff"] == 35
    assert report.measured_value >= 0.5


def test_fourier_mass_rejects_bad_dim():
    with pytest.raises(DomainError):
        fourier_mass_check(2, 1.0, 1.0, n_random=1)


def test_hard_part_m_positive(params):
    m = hard_part_m(params, 0.0)
    assert m > 0.0
    assert hard_part_m(params, 1.0) > m


def test_minimum_radius_meets_nuclear_condition(params):
    r = minimum_radius(params, 0.1)
    assert params.alpha_z / r == pytest.approx(0.1 * (1.0 - params.alpha_z))


def test_weyl_state_rejects_narrow_ramp():
    with pytest.raises(PreconditionError):
        build_weyl_state(1.5, 1.0, grid_n=16, box_l=40.0)


def test_weyl_state_rejects_lambda_below_one():
    with pytest.raises(DomainError):
        build_weyl_state(0.5, 20.0)


def test_weyl_state_is_normalized():
    state = build_weyl_state(1.2, 12.0, seed=5, grid_n=32, box_l=60.0)
    assert state.field.norm() == pytest.approx(1.0, rel=1e-10)
    assert state.lam >= 1.0
    assert state.lam == pytest.approx(np.sqrt(1.0 + state.k @ state.k))


@pytest.fixture
def weyl_state():
    return build_weyl_state(1.2, 12.0, seed=5, grid_n=32, box_l=60.0)


def test_weyl_residual_exact_inequalities(weyl_state, params):
    rho = gaussian_field(32, 60.0, (0.0, 0.0, 0.0), 2.0, (1.0, 0.0, 0.0, 0.0)).normalized().density()
    report = weyl_residual_report(weyl_state, params, rho, 0.99)
    assert report.lemma == "weyl_residual"
    assert report.measured["kinetic"] <= report.bound["kinetic"] * (1.0 + 1e-12)
    assert report.measured["nuclear_far"] <= report.bound["nuclear_far"]
    assert report.measured["target_energy"] == pytest.approx(0.99 + weyl_state.lam)


def test_antisym_overlap_far_from_ground_state(weyl_state):
    phi = gaussian_field(32, 60.0, (0.0, 0.0, 0.0), 2.0, (1.0, 0.0, 0.0, 0.0)).normalized()
    report = antisym_overlap_check(weyl_state, phi)
    assert report.passed
    assert report.measured_value > 0.9


def test_localization_check_against_calibrated_constant(params):
    constant = calibrate_localization_constant(params, [0.02, 0.04], 16, 3, seed=8)
    assert constant > 0.0
    fields = localization_fields(0.04, 16, 3, seed=8)
    report = localization_check(fields, build_partition(1, 0.04), params, constant)
    assert report.passed
    assert report.measured["ims_cross_terms"] < 1e-10
    assert report.bound["limit"] == pytest.approx(1.5 * constant)


def test_localization_check_fails_under_a_tiny_constant(params):
    fields = localization_fields(0.04, 16, 2, seed=8)
    report = localization_check(fields, build_partition(1, 0.04), params, 1e-12)
    assert not report.passed


def test_localization_check_rejects_negative_constant(params):
    with pytest.raises(DomainError):
        localization_check(localization_fields(0.04, 16, 1, seed=8), build_partition(1, 0.04), params, -1.0)


def test_localization_sweep_decays_like_inverse_radius(params):
    report = localization_sweep(params, [0.02, 0.04], grid_n=16, n_fields=4, seed=8)
    [ratio] = report.measured["ratios"]
    assert 1.6 <= ratio <= 2.6
    assert report.bound["constant_source"] == "calibration sweep"
    assert report.passed


def test_localization_sweep_uses_frozen_constant(params):
    report = localization_sweep(params, [0.02, 0.04], grid_n=16, n_fields=2, seed=8, frozen_constant=1e-12)
    assert report.bound["constant_source"] == "preset"
    assert not report.passed
    assert report.notes[0] == "tightest: constant"


def test_localization_sweep_needs_two_scales(params):
    with pytest.raises(DomainError):
        localization_sweep(params, [0.02], grid_n=16, n_fields=1)


def test_hard_part_reports_constants(params):
    report = hard_part_constants(params, 0.0, r=1.0, grid_n=32, box_l=8.0, n_states=1, seed=2)
    m = hard_part_m(params, 0.0)
    assert report.measured["m"] == pytest.approx(m)
    assert report.measured["l"] == low_mode_cutoff(3, 1.0, m)
    assert report.measured["r_min"] == pytest.approx(minimum_radius(params, 0.1))


def test_hard_part_needs_grid_beyond_cutoff(params):
    with pytest.raises(PreconditionError, match="grid cutoff"):
        hard_part_constants(params, 0.0, grid_n=16, box_l=8.0)


def test_hard_part_needs_room_for_chi0(params):
    with pytest.raises(PreconditionError, match="support radius"):
        hard_part_constants(params, 0.0, r=1.5, grid_n=64, box_l=8.0)


def test_weyl_convergence_needs_a_state_and_two_scales(synthetic_ground, params):
    with pytest.raises(DomainError, match="two scales"):
        weyl_convergence_report(1.0, [8.0], params, synthetic_ground)
    with pytest.raises(DomainError, match="no state"):
        weyl_convergence_report(1.0, [8.0, 16.0], params, dataclasses.replace(synthetic_ground, state=None))


@pytest.mark.slow
def test_weyl_convergence_sweep_passes():
    coupling = CouplingParams(alpha=ALPHA_DEFAULT, z=10.0)
    ground = ground_state_one_particle(coupling, 64, 160.0, seed=SEED_DEFAULT)
    report, per_scale = weyl_convergence_report(1.0, [8.0, 16.0, 32.0], coupling, ground)
    assert report.lemma == "weyl_convergence"
    assert report.passed
    assert len(per_scale) == 6
    proxies = report.measured["proxy"]
    assert proxies[0] > proxies[1] > proxies[2]
    assert min(report.measured["antisym_norm"]) >= 0.9
