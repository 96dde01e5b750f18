import numpy as np
import pytest

from backend.errors import DomainError
from backend.lemma_jobs import (
    LEMMA_JOBS,
    SELFCHECK_JOBS,
    bessel_accuracy_check,
    commutator_smoothing_check,
    control_check,
    dirac_symbols_check,
    dual_representation_check,
    ground_state_box,
    ground_state_check,
    hartree_check,
    kato_check,
    kramers_partner,
    projector_invariants_check,
    run_lemma_jobs,
    semiboundedness_check,
    truncation_uniform_check,
    two_particle_check,
    young_bound,
)
from lemma_presets import LEMMA_DESCRIPTIONS


def test_every_job_has_a_preset():
    assert set(LEMMA_JOBS) <= set(LEMMA_DESCRIPTIONS)
    assert set(SELFCHECK_JOBS) <= set(LEMMA_JOBS)


def test_dirac_symbols_pass(params):
    [report] = dirac_symbols_check(params, seed=0, n_samples=50)
    assert report.passed
    assert report.inputs["n_samples"] == 50


def test_bessel_accuracy_pass(params):
    [report] = bessel_accuracy_check(params, n_points=8)
    assert report.passed
    assert set(report.measured) == {"k0", "k1", "derivatives", "branch"}


def test_projector_invariants_pass(params):
    [report] = projector_invariants_check(params, seed=2, grid_n=12, box_l=8.0)
    assert report.passed
    assert report.measured["contraction"] == 0.0


def test_kato_pass(params):
    [report] = kato_check(params, seed=4, grid_n=24, box_l=20.0, n_fields=3)
    assert report.passed
    assert report.measured_value < 1.0


def test_hartree_pass(params):
    [report] = hartree_check(params, grid_n=32, box_l=16.0)
    assert report.passed
    assert report.inputs["convention"] == "isolated"


def test_two_particle_without_ground_state(params):
    [report] = two_particle_check(params, seed=6, grid_n=16, box_l=8.0, n_states=2)
    assert report.passed
    assert "kramers_pair" not in report.measured


def test_kramers_partner_is_pointwise_orthogonal(small_field):
    partner = kramers_partner(small_field)
    overlap = np.sum(np.conj(np.asarray(small_field.data)) * np.asarray(partner.data), axis=-1)
    np.testing.assert_allclose(overlap, 0.0, atol=1e-14)
    assert partner.norm() == pytest.approx(small_field.norm())


def test_kramers_partner_twice_is_minus_identity(small_field):
    twice = kramers_partner(kramers_partner(small_field))
    np.testing.assert_allclose(np.asarray(twice.data), -np.asarray(small_field.data))


def test_young_bound_decreases_with_cutoff():
    values = [young_bound(16, 0.5, eps) for eps in (0.5, 1.0, 2.0)]
    assert values[0] > values[1] > values[2] > 0.0


def test_ground_state_box_scales_with_orbital_radius(params):
    assert ground_state_box(params, 12.0) == pytest.approx(12.0 / params.alpha_z)


def test_run_rejects_unknown_lemma(params):
    with pytest.raises(DomainError, match="no_such_lemma"):
        run_lemma_jobs(["kato", "no_such_lemma"], params)


def test_run_merges_in_lemma_order(params):
    overrides = {
        "dirac_symbols": {"n_samples": 20},
        "bessel_accuracy": {"n_points": 5},
        "projector_invariants": {"grid_n": 12, "box_l": 8.0},
    }
    reports = run_lemma_jobs(["projector_invariants", "dirac_symbols", "bessel_accuracy"], params,
                             seed=1, overrides=overrides, max_workers=2)
    assert [r.lemma for r in reports] == ["bessel_accuracy", "dirac_symbols", "projector_invariants"]
    assert all(r.passed for r in reports)


def test_truncation_uniform_gates_the_symbol_spread(params):
    [report] = truncation_uniform_check(params, seed=3, grid_n=16, box_l=12.0, epsilon_cells=[1.0, 2.0, 4.0])
    assert report.passed
    assert report.measured_value == report.measured["spread"]
    assert report.measured["spread"] < report.bound["max_spread"] == 0.10
    assert max(report.measured["operator_norms"]) <= 0.5
    assert all(r <= y for r, y in zip(report.measured["ratios"], report.bound["young"]))


def test_commutator_smoothing_constant_comes_from_a_separate_sweep(params):
    [report] = commutator_smoothing_check(params, seed=4, grid_n=16, box_l=20.0, n_cases=10)
    assert report.bound["constant_source"] == "calibration sweep"
    assert report.passed
    [frozen] = commutator_smoothing_check(params, seed=4, grid_n=16, box_l=20.0, n_cases=10, frozen_constant=1e-9)
    assert frozen.bound["constant_source"] == "preset"
    assert not frozen.passed


def test_semiboundedness_pass(params):
    reports = semiboundedness_check(params, seed=5, grid_n=16, n_fields=5, z_values=[20.0, 60.0])
    assert [r.inputs["z"] for r in reports] == [20.0, 60.0]
    for report in reports:
        assert report.passed
        assert report.measured["min_quotient"] >= report.bound["lower"] * (1.0 - 0.01)


@pytest.mark.slow
def test_semiboundedness_defaults_pass(params):
    reports = semiboundedness_check(params, seed=5)
    assert len(reports) == 3
    assert all(r.passed for r in reports)


@pytest.mark.slow
def test_dual_representation_error_shrinks_with_epsilon(params):
    [report] = dual_representation_check(params, seed=6)
    assert report.passed
    assert min(report.measured["monotone_gaps"]) >= 0.0
    assert report.notes == []


def test_control_against_kato_floor(params):
    [report] = control_check(params, seed=7, grid_n=16, box_l=8.0)
    floor = 1.0 - 0.5 * np.pi * params.alpha_z
    assert report.bound["kato_floor"] == pytest.approx(floor)
    assert report.measured["measured_c"] == min(report.measured["ratios"])
    assert report.passed


@pytest.mark.slow
def test_ground_state_window_and_monotonicity(params):
    [report] = ground_state_check(params, seed=0, grid_n=32, z_values=[20.0, 50.0, 90.0], refine_grid_n=0)
    assert report.passed
    energies = report.measured["e1"]
    assert energies[0] > energies[1] > energies[2]
    assert "refinement_drift" not in report.measured


@pytest.mark.slow
def test_ground_state_defaults_with_refinement(params):
    [report] = ground_state_check(params, seed=0)
    assert report.inputs["z_values"] == [1.0, 20.0, 50.0, 90.0]
    assert report.passed
    assert report.measured["refinement_drift"] < 1e-3
