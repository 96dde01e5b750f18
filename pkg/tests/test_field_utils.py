import numpy as np
import pytest

from pipeline.field_utils import (
    HEADER_BYTES,
    SpinorField,
    compact_bump_field,
    field_from_bytes,
    field_to_bytes,
    grid_spacing,
    make_grid,
    momentum_grid,
    plane_wave,
    radius_grid,
    random_compact_field,
    read_field,
    snap_to_dual_lattice,
    write_field,
)
from pipeline.lattice import (
    cell_average_inverse_power,
    difference_vectors,
    get_executor,
    inverse_power_convolve,
    kernel_spectrum,
    lattice_convolve,
    unused_slot_mask,
)


def test_grid_has_no_node_at_origin():
    r = radius_grid(8, 4.0)
    assert r.min() == pytest.approx(np.sqrt(3.0) * 0.25)
    x = make_grid(8, 4.0)
    assert x.shape == (8, 8, 8, 3)
    assert x[0, 0, 0, 0] == pytest.approx(-2.0 + 0.25)


def test_momenta_on_dual_lattice():
    p = momentum_grid(8, 4.0)
    step = 2.0 * np.pi / 4.0
    np.testing.assert_allclose(p / step, np.round(p / step), atol=1e-12)
    np.testing.assert_allclose(snap_to_dual_lattice([0.7, -0.2, 3.0], 4.0) / step, [0.0, 0.0, 2.0])


def test_fourier_is_unitary(small_field):
    assert small_field.to_fourier().norm() == pytest.approx(small_field.norm(), rel=1e-12)
    back = small_field.to_fourier().to_spatial()
    np.testing.assert_allclose(back.data, small_field.data, atol=1e-12)


def test_plane_wave_is_single_mode():
    box = 6.0
    k = snap_to_dual_lattice([2.0, 0.0, -1.0], box)
    f = plane_wave(8, box, k, [1.0, 0.0, 0.0, 0.0])
    power = np.sum(np.abs(f.to_fourier().data) ** 2, axis=-1)
    assert np.count_nonzero(power > 1e-12 * power.max()) == 1


def test_shape_is_checked():
    with pytest.raises(ValueError):
        SpinorField(4, 1.0, np.zeros((4, 4, 4, 3)))


def test_field_data_is_read_only(small_field):
    with pytest.raises(ValueError):
        small_field.data[0, 0, 0, 0] = 1.0


def test_codec_layout(small_field):
    raw = field_to_bytes(small_field)
    assert len(raw) == HEADER_BYTES + 16**3 * 4 * 8
    back = field_from_bytes(raw)
    assert back.grid_n == 16 and back.box_l == 10.0
    np.testing.assert_allclose(back.data, small_field.data.astype(np.complex64), rtol=1e-6)
    with pytest.raises(ValueError):
        field_from_bytes(raw[:4])


def test_write_and_read_with_sidecar(tmp_path, small_field):
    path, sidecar = write_field(tmp_path / "state.bin", small_field, extra={"e1": 0.5})
    assert sidecar.name == "state.bin.json"
    assert '"e1": 0.5' in sidecar.read_text()
    assert read_field(path).norm() == pytest.approx(small_field.norm(), rel=1e-6)


def test_compact_fields_vanish_outside_support(rng):
    f = compact_bump_field(16, 8.0, (0.5, 0.0, 0.0), 2.0, [0, 1, 0, 0])
    outside = np.linalg.norm(make_grid(16, 8.0) - [0.5, 0.0, 0.0], axis=-1) >= 2.0
    assert np.all(f.data[outside] == 0.0)
    g = random_compact_field(16, 8.0, rng, 3.0)
    assert g.norm() == pytest.approx(1.0)
    assert np.all(g.density()[radius_grid(16, 8.0) > 3.0] == 0.0)


def test_cell_average_of_inverse_distance():
    # mean of 1/|x| over the unit cube
    assert cell_average_inverse_power(1) == pytest.approx(2.3800774, rel=1e-6)
    with pytest.raises(ValueError):
        cell_average_inverse_power(3)


def test_lattice_convolution_equals_direct_sum(rng):
    n, h = 5, 0.7
    values = rng.normal(size=(n, n, n))
    d = difference_vectors(n, h)
    r = np.linalg.norm(d, axis=-1)
    table = np.where(r > 0.0, np.exp(-r), 0.0)
    table[unused_slot_mask(n)] = 0.0
    fast = lattice_convolve(values, kernel_spectrum(table), h)

    x = make_grid(n, n * h).reshape(-1, 3)
    dist = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1)
    kern = np.where(dist > 0.0, np.exp(-dist), 0.0)
    direct = (kern @ values.ravel() * h**3).reshape(n, n, n)
    np.testing.assert_allclose(fast.real, direct, atol=1e-12)


def test_coulomb_far_field_of_point_like_charge():
    n, box = 32, 16.0
    h = grid_spacing(n, box)
    values = np.zeros((n, n, n))
    values[n // 2, n // 2, n // 2] = 1.0 / h**3
    potential = inverse_power_convolve(values, h, 1).real
    x = make_grid(n, box)
    source = x[n // 2, n // 2, n // 2]
    r = np.linalg.norm(x - source, axis=-1)
    far = r > 4.0
    np.testing.assert_allclose(potential[far] * r[far], 1.0, rtol=1e-10)


def test_executor_is_shared():
    assert get_executor() is get_executor()
