import dataclasses

import numpy as np
import pytest

from backend.errors import DegenerateFamilyError, DomainError
from backend.radial_trial import (
    build_trial_family,
    density_profile,
    diagonal_terms,
    negativity_radius,
    offdiagonal_envelope,
    offdiagonal_terms,
    radial_shell,
    separating_radius,
    trial_energy_report,
)
from pipeline.projector_ops import apply_lambda_fourier


@pytest.fixture
def family(synthetic_ground):
    return build_trial_family(synthetic_ground, base_r=64.0, count=3)


def test_shell_is_normalized_at_huge_scale():
    shell = radial_shell(2)
    assert shell.lambda_norm2(1e8) == pytest.approx(1.0, rel=1e-6)


def test_projected_norm_shrinks_at_small_scale():
    shell = radial_shell(2)
    assert shell.lambda_norm2(0.5) < shell.lambda_norm2(4.0) < 1.0


def test_momentum_gradient_matches_position_gradient():
    shell = radial_shell(2)
    momentum = float(np.sum(shell.q_nodes**2 * shell.b_hat**2 * shell.q_weights))
    assert momentum == pytest.approx(shell.gradient_norm2(), rel=1e-4)


def test_support_of_the_bump():
    shell = radial_shell(2)
    assert shell.inner == pytest.approx(1.6)
    assert shell.outer == pytest.approx(1.8)
    assert shell.values(np.array([1.5, 1.9])).tolist() == [0.0, 0.0]
    assert shell.values(np.array([1.7]))[0] > 0.0


def test_family_scales_double(family):
    assert family.scales == [128.0, 256.0, 512.0]
    assert family.delta == pytest.approx(1.0 / 12.0)
    assert family.rho_mass() == pytest.approx(1.0)


def test_leading_coefficient_is_measured_and_below_bound(family, params):
    far = family.with_base(2.0**18)
    report = trial_energy_report(far, params)
    rows = report.measured["shells"]
    for row in rows:
        assert row["leading_coefficient"] == pytest.approx(row["diagonal"] * row["scale"] / params.alpha, rel=1e-12)
        assert row["leading_coefficient"] < 0.0
        assert row["leading_coefficient"] <= row["bound_coefficient"]
    # the kinetic share of the coefficient falls like 1/R_m
    assert rows[2]["leading_coefficient"] < rows[0]["leading_coefficient"]
    assert rows[0]["leading_coefficient"] != pytest.approx(-rows[0]["lambda_norm2"] / 12.0, rel=0.05)


def test_electron_bound_tightens_the_constant_potential_bound(family, params):
    terms = offdiagonal_terms(family, params, 1, 2)
    shell = family.shell
    norm_m = np.sqrt(shell.lambda_norm2(family.scales[0]))
    norm_n = np.sqrt(shell.lambda_norm2(family.scales[1]))
    flat = params.alpha * family.potential_max() * (terms["inner_n"] * norm_m + terms["outer_m"] * norm_n)
    assert terms["electron_bound"] <= flat * (1.0 + 1e-12)


def test_capped_ball_norm_respects_the_cap():
    shell = radial_shell(2)
    plain = shell.ball_norm(100.0, 1000.0)
    assert shell.capped_ball_norm(100.0, 1000.0, 0.5) <= 0.5 * plain + 1e-15
    assert shell.capped_ball_norm(100.0, 1000.0, 0.25) <= shell.capped_ball_norm(100.0, 1000.0, 0.5)


@pytest.mark.parametrize("z", [2.0, 10.0])
def test_negativity_radius_gives_negative_family(synthetic_ground, z):
    from pipeline.br_hamiltonian import CouplingParams

    ground = dataclasses.replace(synthetic_ground, z=z)
    coupling = CouplingParams(alpha=ground.alpha, z=z)
    family = build_trial_family(ground, base_r=64.0, count=3)
    r = negativity_radius(family, coupling)
    assert r >= 64.0
    report = trial_energy_report(family.with_base(r), coupling, require_negative=True)
    assert report.passed
    assert report.measured["rayleigh"]["span"] < 0.0
    assert all(e < 0.0 for e in report.measured["rayleigh"]["effective"])


@pytest.mark.parametrize("m", [1, 2, 3])
def test_diagonal_pieces_within_bounds(family, params, m):
    measured, bound = diagonal_terms(family, params, m)
    assert measured["kinetic"] <= bound["kinetic"]
    assert measured["i3"] <= bound["i3"]
    assert measured["kinetic_residual"] ** 2 <= bound["kinetic"]
    assert measured["diagonal"] <= bound["diagonal"]


def test_offdiagonal_radius_sits_in_gap(family, params):
    radius = separating_radius(family, 1, 2)
    shell = family.shell
    assert shell.outer * family.scales[0] < radius < shell.inner * family.scales[1]
    terms = offdiagonal_terms(family, params, 1, 2)
    assert abs(terms["kinetic"]) <= terms["kinetic_bound"] + 1e-12
    with pytest.raises(ValueError):
        offdiagonal_terms(family, params, 2, 1)


def test_offdiagonal_envelope_decays(family, params):
    envelope = offdiagonal_envelope(family, params)
    assert envelope["rate"] > 0.0
    assert len(envelope["totals"]) == 6


def test_trial_report_passes_at_large_base(family, params):
    report = trial_energy_report(family, params)
    assert report.lemma == "trial_energy"
    assert report.passed
    assert len(report.measured["shells"]) == 3


def test_trial_report_rejects_mismatched_z(family):
    from pipeline.br_hamiltonian import CouplingParams

    with pytest.raises(DomainError):
        trial_energy_report(family, CouplingParams(z=3.0))


def test_vanishing_upper_spinor_is_degenerate(synthetic_ground):
    with pytest.raises(DegenerateFamilyError):
        build_trial_family(synthetic_ground, base_r=8.0, upper_spinor=(0.0, 0.0))


def test_family_needs_two_electrons(synthetic_ground):
    with pytest.raises(DomainError):
        build_trial_family(synthetic_ground, base_r=8.0, n_electrons=3)


def test_family_needs_enough_charge(synthetic_ground):
    light = dataclasses.replace(synthetic_ground, z=1.0)
    with pytest.raises(DomainError):
        build_trial_family(light, base_r=8.0)


def test_density_profile_conserves_mass(synthetic_ground):
    radii, masses = density_profile(synthetic_ground.state)
    assert np.all(radii > 0.0)
    assert np.sum(masses) == pytest.approx(synthetic_ground.state.norm() ** 2, rel=1e-12)


def test_materialized_shell_matches_radial_norm(synthetic_ground):
    family = build_trial_family(synthetic_ground, base_r=4.0, count=1)
    psi = family.materialize(1, 64, 32.0)
    ratio = apply_lambda_fourier(psi).norm() ** 2 / psi.norm() ** 2
    assert ratio == pytest.approx(family.shell.lambda_norm2(8.0), rel=0.05)
