import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from backend.errors import DomainError
from models.besselk import (
    CROSSOVER,
    bessel_eval,
    bessel_k0,
    bessel_k01,
    bessel_k1,
    branch_mismatch,
    commutator_envelope_integral,
    g_decay,
    g_decay_values,
    k_integral_oracle,
)
from pipeline.projector_ops import commutator_l2_constant


@settings(max_examples=200, deadline=None)
@given(z=st.floats(min_value=1e-4, max_value=50.0))
def test_matches_scipy(z):
    k0, k1 = bessel_k01(z)
    assert k0 == pytest.approx(special.k0(z), rel=1e-10)
    assert k1 == pytest.approx(special.k1(z), rel=1e-10)


@pytest.mark.parametrize("z", [1e-3, 0.1, 1.0, 2.0, 2.5, 7.0, 25.0])
def test_matches_integral_oracle(z):
    k0, k1 = bessel_k01(z)
    assert k0 == pytest.approx(k_integral_oracle(0, z), rel=1e-10)
    assert k1 == pytest.approx(k_integral_oracle(1, z), rel=1e-10)


def test_vectorized_shape():
    z = np.geomspace(0.01, 20.0, 12).reshape(3, 4)
    k0, k1 = bessel_k01(z)
    assert k0.shape == (3, 4)
    np.testing.assert_allclose(k1, special.k1(z), rtol=1e-10)


def test_branches_agree_at_crossover():
    assert branch_mismatch() < 1e-9
    assert bessel_eval(CROSSOVER).regime == "series"
    assert bessel_eval(CROSSOVER + 1e-9).regime == "asymptotic"


@pytest.mark.parametrize("z", [0.0, -1.0, np.nan])
def test_rejects_non_positive(z):
    with pytest.raises(DomainError):
        bessel_k01(z)


def test_recurrence_identity():
    # K_2 = K_0 + 2 K_1 / z
    z = np.linspace(0.3, 15.0, 30)
    k0, k1 = bessel_k01(z)
    np.testing.assert_allclose(k0 + 2.0 * k1 / z, special.kn(2, z), rtol=1e-9)


def test_decay_envelope_is_decreasing():
    d = np.linspace(0.5, 30.0, 60)
    g = g_decay_values(d)
    assert np.all(np.diff(g) < 0.0)
    assert g_decay(1.0).value == pytest.approx(float(g_decay_values(1.0)))


def test_envelope_integral_closed_form():
    assert commutator_envelope_integral() == pytest.approx(commutator_l2_constant(), rel=1e-8)


def test_scalar_and_array_entry_points_agree():
    z = np.array([0.05, 1.0, 2.0, 3.5, 12.0])
    np.testing.assert_allclose(bessel_k0(z), special.k0(z), rtol=1e-10)
    np.testing.assert_allclose(bessel_k1(z), special.k1(z), rtol=1e-10)
    assert isinstance(bessel_k0(1.0), float)
    assert bessel_k1(1.0) == bessel_k01(1.0)[1]
