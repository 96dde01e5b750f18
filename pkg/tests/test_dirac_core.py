import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from models.dirac_core import (
    apply_lambda_symbol,
    dirac_energy,
    dirac_matrices,
    free_dirac_symbol,
    lambda_symbol,
    positive_eigenvector,
    symbol_invariant_residuals,
)

momenta = arrays(np.float64, (3,), elements=st.floats(min_value=-50.0, max_value=50.0, allow_nan=False))


def test_clifford_relations():
    mats = dirac_matrices()
    eye = np.eye(4)
    for j in range(3):
        a_j = mats.alphas[j]
        np.testing.assert_allclose(a_j @ mats.beta + mats.beta @ a_j, 0.0, atol=1e-15)
        for k in range(3):
            expected = 2.0 * eye if j == k else 0.0
            np.testing.assert_allclose(a_j @ mats.alphas[k] + mats.alphas[k] @ a_j, expected, atol=1e-15)
    np.testing.assert_allclose(mats.beta @ mats.beta, eye)


@settings(max_examples=200, deadline=None)
@given(p=momenta)
def test_lambda_symbol_is_hermitian_projector_of_rank_two(p):
    lam = lambda_symbol(p).matrix
    np.testing.assert_allclose(lam @ lam, lam, atol=1e-12)
    np.testing.assert_allclose(lam, lam.conj().T, atol=1e-14)
    assert abs(np.trace(lam) - 2.0) < 1e-12


@settings(max_examples=200, deadline=None)
@given(p=momenta)
def test_free_symbol_squares_to_energy(p):
    free = free_dirac_symbol(p).matrix
    energy = float(dirac_energy(p))
    np.testing.assert_allclose(free @ free, energy**2 * np.eye(4), rtol=1e-12, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(p=momenta, seed=st.integers(min_value=0, max_value=10_000))
def test_positive_eigenvector(p, seed):
    u = positive_eigenvector(p, seed)
    assert np.linalg.norm(u) == pytest.approx(1.0)
    free = free_dirac_symbol(p).matrix
    np.testing.assert_allclose(free @ u, float(dirac_energy(p)) * u, atol=1e-10 * float(dirac_energy(p)))


def test_positive_eigenvector_is_seeded():
    p = [0.3, -1.2, 2.0]
    np.testing.assert_array_equal(positive_eigenvector(p, 7), positive_eigenvector(p, 7))


def test_grid_application_matches_matrix(rng):
    p = rng.normal(scale=5.0, size=(6, 3))
    v = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    out = apply_lambda_symbol(p, v)
    for i in range(6):
        np.testing.assert_allclose(out[i], lambda_symbol(p[i]).matrix @ v[i], atol=1e-13)


def test_symbol_residuals_below_acceptance_tolerance():
    worst = symbol_invariant_residuals(1000, seed=0)
    for key in ("idempotency", "hermiticity", "trace", "commutator"):
        assert worst[key] < 1e-13, key
    assert worst["spectrum"] < 1e-12


def test_momentum_must_be_finite():
    with pytest.raises(ValueError):
        lambda_symbol([np.inf, 0.0, 0.0])


def test_positive_eigenvector_reports_null_draws(monkeypatch):
    from types import SimpleNamespace

    import models.dirac_core as dirac_core
    from backend.errors import LabError, SamplingError

    monkeypatch.setattr(dirac_core, "lambda_symbol", lambda p: SimpleNamespace(matrix=np.zeros((4, 4))))
    with pytest.raises(SamplingError) as info:
        dirac_core.positive_eigenvector(np.array([0.3, 0.0, 0.0]), seed=1)
    assert isinstance(info.value, LabError)
