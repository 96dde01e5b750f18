# pipeline/lattice.py
"""
Translation-invariant lattice sums on the uniform grid.

A sum  out(x_i) = sum_j K(x_i - x_j) v(x_j) h^3  over grid nodes is a linear
convolution of v with the kernel tabulated on the difference lattice.  It is
evaluated exactly (up to rounding) by a circular FFT convolution of length
2 grid_n, which never wraps one term onto another.
"""
import atexit
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
import logging
import threading
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import NDArray
from scipy import fft as sfft

from lab_config import get_num_threads

logger = logging.getLogger(__name__)

ArrayR = NDArray[np.float64]
ArrayC = NDArray[np.complex128]

_executor: Optional[ThreadPoolExecutor] = None
_executor_lock = threading.Lock()


def get_executor() -> ThreadPoolExecutor:
    """Shared worker pool sized by BR_NUM_THREADS."""
    global _executor
    with _executor_lock:
        if _executor is None:
            _executor = ThreadPoolExecutor(max_workers=get_num_threads())
    return _executor


def _shutdown_executor():
    global _executor
    with _executor_lock:
        if _executor is not None:
            _executor.shutdown(wait=False)
            _executor = None


atexit.register(_shutdown_executor)


def difference_offsets(grid_n: int) -> ArrayR:
    """
    Integer offsets of the circulant layout of length 2 grid_n:
    0..n-1, then the unused slot n, then -(n-1)..-1.
    """
    offsets = np.arange(2 * grid_n)
    offsets[offsets > grid_n] -= 2 * grid_n
    return offsets


def difference_vectors(grid_n: int, h: float) -> ArrayR:
    """Displacements x_i - x_j in circulant layout, shape (2n, 2n, 2n, 3)."""
    d = difference_offsets(grid_n) * h
    return np.stack(np.meshgrid(d, d, d, indexing="ij"), axis=-1)


def unused_slot_mask(grid_n: int) -> NDArray[np.bool_]:
    """True on the circulant slots that never pair two grid nodes."""
    slot = np.arange(2 * grid_n) == grid_n
    return slot[:, None, None] | slot[None, :, None] | slot[None, None, :]


def kernel_spectrum(table: np.ndarray) -> ArrayC:
    """FFT of a circulant kernel table (any trailing axes are carried along)."""
    return sfft.fftn(table, axes=(0, 1, 2), workers=get_num_threads())


def lattice_convolve(values: np.ndarray, spectrum: np.ndarray, h: float) -> ArrayC:
    """
    sum_j K(x_i - x_j) values_j h^3 for every node i.

    values: (n, n, n) or (n, n, n, c); spectrum: kernel_spectrum of a
    (2n, 2n, 2n) table.
    """
    n = values.shape[0]
    size = (2 * n,) * 3
    workers = get_num_threads()
    padded = sfft.fftn(values, s=size, axes=(0, 1, 2), workers=workers)
    if padded.ndim == 4 and spectrum.ndim == 3:
        spectrum = spectrum[..., None]
    out = sfft.ifftn(padded * spectrum, axes=(0, 1, 2), workers=workers)
    return out[:n, :n, :n] * h**3


@lru_cache(maxsize=None)
def cell_average_inverse_power(power: int) -> float:
    """
    Average of |x|^(-power) over the unit cube centered at the origin.

    The cube integral reduces to its faces:
        int_cube r^-s = 3/(3-s) int_{[-1/2,1/2]^2} (1/4 + u^2 + v^2)^(-s/2) du dv
    """
    if not 0 < power < 3:
        raise ValueError("power must lie in (0, 3)")
    nodes, weights = leggauss(96)
    u = 0.5 * nodes
    w = 0.5 * weights
    uu, vv = np.meshgrid(u, u, indexing="ij")
    face = np.sum(np.outer(w, w) * (0.25 + uu**2 + vv**2) ** (-0.5 * power))
    return float(3.0 / (3.0 - power) * face)


def radial_table(grid_n: int, h: float, profile: Callable[[ArrayR], ArrayR], self_value: float) -> ArrayR:
    """Scalar radial kernel on the difference lattice with an explicit self-cell value."""
    r = np.linalg.norm(difference_vectors(grid_n, h), axis=-1)
    table = np.zeros_like(r)
    positive = r > 0.0
    table[positive] = profile(r[positive])
    table[~positive] = self_value
    table[unused_slot_mask(grid_n)] = 0.0
    return table


@lru_cache(maxsize=8)
def inverse_power_spectrum(grid_n: int, h: float, power: int) -> ArrayC:
    """Spectrum of |x|^-power with the self cell replaced by its exact cell average."""
    self_value = cell_average_inverse_power(power) * h ** (-power)
    table = radial_table(grid_n, h, lambda r: r ** (-float(power)), self_value)
    spectrum = kernel_spectrum(table)
    spectrum.setflags(write=False)
    logger.debug("built |x|^-%d lattice kernel for n=%d h=%.4g", power, grid_n, h)
    return spectrum


def inverse_power_convolve(values: np.ndarray, h: float, power: int = 1) -> ArrayC:
    """int |x - y|^-power values(y) dy by the midpoint rule with an averaged self cell."""
    spectrum = inverse_power_spectrum(values.shape[0], float(h), int(power))
    return lattice_convolve(values, spectrum, h)
