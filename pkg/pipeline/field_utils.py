# pipeline/field_utils.py
"""
Uniform periodic grids, spinor fields in position and momentum space,
and the binary field codec.

Grid: grid_n points per axis on a box of edge box_l, origin-centered, with a
half-cell offset so that no node sits at x = 0:

    x_i = (i + 1/2) h - box_l / 2,   h = box_l / grid_n

Fourier transform: unitary DFT (scipy.fft, norm="ortho") over the three
spatial axes; momenta p = 2 pi fftfreq(grid_n, h) on the dual lattice.
"""
from dataclasses import dataclass, field
import io
import json
import logging
from pathlib import Path
import struct
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from numpy.typing import NDArray
from scipy import fft as sfft

from lab_config import get_num_threads

logger = logging.getLogger(__name__)

ArrayC = NDArray[np.complex128]
ArrayR = NDArray[np.float64]

N_COMPONENTS = 4
HEADER_FORMAT = "<idi"  # grid_n (int32), box_l (float64), components (int32)
HEADER_BYTES = struct.calcsize(HEADER_FORMAT)
SPATIAL_AXES = (0, 1, 2)


def grid_spacing(grid_n: int, box_l: float) -> float:
    return float(box_l) / int(grid_n)


def axis_nodes(grid_n: int, box_l: float) -> ArrayR:
    h = grid_spacing(grid_n, box_l)
    return (np.arange(grid_n) + 0.5) * h - 0.5 * box_l


def make_grid(grid_n: int, box_l: float) -> ArrayR:
    """Node coordinates, shape (grid_n, grid_n, grid_n, 3)."""
    x = axis_nodes(grid_n, box_l)
    return np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)


def radius_grid(grid_n: int, box_l: float) -> ArrayR:
    return np.linalg.norm(make_grid(grid_n, box_l), axis=-1)


def momentum_axis(grid_n: int, box_l: float) -> ArrayR:
    return 2.0 * np.pi * sfft.fftfreq(grid_n, d=grid_spacing(grid_n, box_l))


def momentum_grid(grid_n: int, box_l: float) -> ArrayR:
    """Dual-lattice momenta in FFT order, shape (grid_n, grid_n, grid_n, 3)."""
    p = momentum_axis(grid_n, box_l)
    return np.stack(np.meshgrid(p, p, p, indexing="ij"), axis=-1)


def forward_fft(data: np.ndarray) -> ArrayC:
    return sfft.fftn(data, axes=SPATIAL_AXES, norm="ortho", workers=get_num_threads())


def inverse_fft(data: np.ndarray) -> ArrayC:
    return sfft.ifftn(data, axes=SPATIAL_AXES, norm="ortho", workers=get_num_threads())


def _frozen(values: np.ndarray, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpinorField:
    grid_n: int
    box_l: float
    data: ArrayC = field(repr=False)

    def __post_init__(self):
        expected = (self.grid_n,) * 3 + (N_COMPONENTS,)
        if np.shape(self.data) != expected:
            raise ValueError(f"spinor data must have shape {expected}, got {np.shape(self.data)}")
        object.__setattr__(self, "data", _frozen(self.data, np.complex128))

    @classmethod
    def zeros(cls, grid_n: int, box_l: float) -> "SpinorField":
        return cls(grid_n, box_l, np.zeros((grid_n,) * 3 + (N_COMPONENTS,), dtype=np.complex128))

    @property
    def spacing(self) -> float:
        return grid_spacing(self.grid_n, self.box_l)

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    def coords(self) -> ArrayR:
        return make_grid(self.grid_n, self.box_l)

    def with_data(self, data: np.ndarray) -> "SpinorField":
        return SpinorField(self.grid_n, self.box_l, data)

    def same_grid(self, other: "SpinorField") -> bool:
        return self.grid_n == other.grid_n and np.isclose(self.box_l, other.box_l)

    def density(self) -> ArrayR:
        """Pointwise |f(x)|^2 summed over components."""
        return np.sum(np.abs(self.data) ** 2, axis=-1)

    def norm(self) -> float:
        return float(np.sqrt(self.cell_volume * np.sum(np.abs(self.data) ** 2)))

    def inner(self, other: "SpinorField") -> complex:
        """<self, other>, antilinear in self."""
        if not self.same_grid(other):
            raise ValueError("fields live on different grids")
        return complex(self.cell_volume * np.vdot(self.data, other.data))

    def normalized(self) -> "SpinorField":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero field")
        return self.with_data(self.data / n)

    def __add__(self, other: "SpinorField") -> "SpinorField":
        return self.with_data(self.data + other.data)

    def __sub__(self, other: "SpinorField") -> "SpinorField":
        return self.with_data(self.data - other.data)

    def scale(self, factor: Union[complex, np.ndarray]) -> "SpinorField":
        """Multiply by a scalar or by a scalar grid function."""
        factor = np.asarray(factor)
        if factor.ndim == 3:
            factor = factor[..., None]
        return self.with_data(self.data * factor)

    def to_fourier(self) -> "FourierField":
        return FourierField(self.grid_n, self.box_l, forward_fft(self.data))


@dataclass(frozen=True)
class FourierField:
    grid_n: int
    box_l: float
    data: ArrayC = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data, np.complex128))

    @property
    def spacing(self) -> float:
        return grid_spacing(self.grid_n, self.box_l)

    def momenta(self) -> ArrayR:
        return momentum_grid(self.grid_n, self.box_l)

    def norm(self) -> float:
        # unitary DFT: same cell weight as the position-space norm
        return float(np.sqrt(self.spacing**3 * np.sum(np.abs(self.data) ** 2)))

    def weighted_norm(self, weight: ArrayR) -> float:
        """sqrt(sum weight(p) |f(p)|^2 h^3)."""
        return float(np.sqrt(self.spacing**3 * np.sum(weight[..., None] * np.abs(self.data) ** 2)))

    def with_data(self, data: np.ndarray) -> "FourierField":
        return FourierField(self.grid_n, self.box_l, data)

    def to_spatial(self) -> SpinorField:
        return SpinorField(self.grid_n, self.box_l, inverse_fft(self.data))


def plane_wave(grid_n: int, box_l: float, k, spinor) -> SpinorField:
    """e^{i k.x} u sampled on the grid."""
    x = make_grid(grid_n, box_l)
    phase = np.exp(1j * (x @ np.asarray(k, dtype=np.float64)))
    return SpinorField(grid_n, box_l, phase[..., None] * np.asarray(spinor, dtype=np.complex128))


def snap_to_dual_lattice(k, box_l: float) -> ArrayR:
    step = 2.0 * np.pi / box_l
    return np.round(np.asarray(k, dtype=np.float64) / step) * step


# =============================================================================
# Binary codec
# =============================================================================

def field_to_bytes(f: SpinorField) -> bytes:
    """
    Header (grid_n int32, box_l float64, components int32), little endian,
    followed by complex64 values in row-major (x, y, z, component) order.
    """
    buf = io.BytesIO()
    buf.write(struct.pack(HEADER_FORMAT, f.grid_n, f.box_l, N_COMPONENTS))
    buf.write(np.ascontiguousarray(f.data, dtype="<c8").tobytes(order="C"))
    return buf.getvalue()


def field_from_bytes(b: bytes) -> SpinorField:
    if len(b) < HEADER_BYTES:
        raise ValueError("truncated field header")
    grid_n, box_l, components = struct.unpack(HEADER_FORMAT, b[:HEADER_BYTES])
    if components != N_COMPONENTS:
        raise ValueError(f"expected {N_COMPONENTS} components, header says {components}")
    count = grid_n**3 * components
    values = np.frombuffer(b, dtype="<c8", count=count, offset=HEADER_BYTES)
    return SpinorField(grid_n, box_l, values.reshape((grid_n,) * 3 + (components,)))


def sidecar_metadata(f: SpinorField, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    meta = {
        "grid_n": f.grid_n,
        "box_l": f.box_l,
        "components": N_COMPONENTS,
        "dtype": "complex64",
        "byte_order": "little",
        "order": "x,y,z,component",
        "header_bytes": HEADER_BYTES,
        "node_offset": "half-cell",
        "norm": f.norm(),
    }
    if extra:
        meta.update(extra)
    return meta


def write_field(path: Union[str, Path], f: SpinorField, extra: Optional[Dict[str, Any]] = None) -> Tuple[Path, Path]:
    """Write the binary dump and its JSON sidecar (<path>.json)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(field_to_bytes(f))
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(sidecar_metadata(f, extra), indent=2, sort_keys=True))
    logger.debug("wrote field %s (%d^3)", path, f.grid_n)
    return path, sidecar


def read_field(path: Union[str, Path]) -> SpinorField:
    return field_from_bytes(Path(path).read_bytes())


# =============================================================================
# Test fields
# =============================================================================

def gaussian_field(grid_n: int, box_l: float, center, width: float, spinor) -> SpinorField:
    """exp(-|x - center|^2 / (2 width^2)) u."""
    x = make_grid(grid_n, box_l) - np.asarray(center, dtype=np.float64)
    envelope = np.exp(-0.5 * np.sum(x * x, axis=-1) / width**2)
    return SpinorField(grid_n, box_l, envelope[..., None] * np.asarray(spinor, dtype=np.complex128))


def compact_bump_field(grid_n: int, box_l: float, center, radius: float, spinor) -> SpinorField:
    """(1 - |x - c|^2 / radius^2)^3 u inside the ball, exactly zero outside (C^2)."""
    x = make_grid(grid_n, box_l) - np.asarray(center, dtype=np.float64)
    s = np.sum(x * x, axis=-1) / radius**2
    envelope = np.where(s < 1.0, (1.0 - s) ** 3, 0.0)
    return SpinorField(grid_n, box_l, envelope[..., None] * np.asarray(spinor, dtype=np.complex128))


def random_spinor(rng: np.random.Generator) -> ArrayC:
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    return v / np.linalg.norm(v)


def random_smooth_field(
    grid_n: int,
    box_l: float,
    rng: np.random.Generator,
    max_center: float,
    width_range: Tuple[float, float],
    n_bumps: int = 3,
) -> SpinorField:
    """Normalized sum of Gaussian bumps with random centers, widths and spinors."""
    data = np.zeros((grid_n,) * 3 + (N_COMPONENTS,), dtype=np.complex128)
    for _ in range(n_bumps):
        center = rng.uniform(-max_center, max_center, size=3)
        width = rng.uniform(*width_range)
        data += gaussian_field(grid_n, box_l, center, width, random_spinor(rng)).data
    return SpinorField(grid_n, box_l, data).normalized()


def random_compact_field(
    grid_n: int,
    box_l: float,
    rng: np.random.Generator,
    support_radius: float,
) -> SpinorField:
    """Normalized compact bump centered near the origin, support within support_radius."""
    radius = rng.uniform(0.5, 0.8) * support_radius
    center = rng.uniform(-1.0, 1.0, size=3)
    center *= 0.9 * (support_radius - radius) / max(np.linalg.norm(center), 1e-12)
    return compact_bump_field(grid_n, box_l, center, radius, random_spinor(rng)).normalized()
