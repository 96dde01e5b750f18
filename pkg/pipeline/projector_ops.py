# pipeline/projector_ops.py
"""
The positive spectral projector L+ on grid spinor fields.

Two independent representations:

1. Momentum space: multiplication by L+(p) on the dual lattice.
2. Coordinate space: the singular integral kernel

   (L+ f)(x) = f(x)/2
             + 1/(4 pi^2) int [beta K1(r)/r + i alpha.(x-y) K0(r)/r^2] f(y) dy
             + i/(2 pi^2) PV int alpha.(x-y) K1(r)/r^3 f(y) dy,     r = |x - y|

   evaluated by the midpoint rule over grid cells.  The principal-value piece
   drops the ball r < epsilon (cell-center test).  The integrable beta piece is
   summed with singularity subtraction against its exact full-space mass 1/2.

Plus cutoff profiles, the commutator [chi, L+], Sobolev norms and an
empirical operator-norm estimator.
"""
from dataclasses import dataclass
from functools import lru_cache
import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import integrate, optimize
from scipy.special import spherical_jn

from backend.errors import PreconditionError
from models.besselk import bessel_k01, bessel_k1, g_decay_values
from models.dirac_core import (
    apply_beta,
    apply_lambda_symbol,
    dirac_energy,
    dirac_matrices,
)
from pipeline.field_utils import (
    FourierField,
    SpinorField,
    forward_fft,
    grid_spacing,
    inverse_fft,
    make_grid,
    momentum_grid,
)
from pipeline.lattice import (
    difference_vectors,
    get_executor,
    kernel_spectrum,
    lattice_convolve,
    unused_slot_mask,
)

logger = logging.getLogger(__name__)

ArrayC = NDArray[np.complex128]
ArrayR = NDArray[np.float64]
FieldMap = Callable[[SpinorField], SpinorField]

__all__ = [
    "SpinorField",
    "FourierField",
    "CutoffProfile",
    "apply_lambda_fourier",
    "apply_lambda_kernel",
    "commutator_apply",
    "estimate_operator_norm",
    "h1_norm",
    "h_half_norm",
]

CUTOFF_KINDS = ("shell", "ball", "complement", "unit")
SUPPORT_THRESHOLD = 1e-13
TARGET_CHUNK = 64
PV_P_MIN = 0.1
PV_P_SPAN = 50.0  # momenta up to PV_P_SPAN / epsilon
PV_P_POINTS = 160


# =============================================================================
# Momentum-space representation
# =============================================================================

@lru_cache(maxsize=8)
def cached_momenta(grid_n: int, box_l: float) -> ArrayR:
    p = momentum_grid(grid_n, box_l)
    p.setflags(write=False)
    return p


@lru_cache(maxsize=8)
def cached_energy(grid_n: int, box_l: float) -> ArrayR:
    e = dirac_energy(cached_momenta(grid_n, box_l))
    e.setflags(write=False)
    return e


def project_fourier_data(data: ArrayC, grid_n: int, box_l: float) -> ArrayC:
    """L+(p) applied to momentum-space data (FFT order)."""
    return apply_lambda_symbol(cached_momenta(grid_n, box_l), data)


def apply_lambda_fourier(f: SpinorField) -> SpinorField:
    f_hat = f.to_fourier()
    projected = project_fourier_data(f_hat.data, f.grid_n, f.box_l)
    return f_hat.with_data(projected).to_spatial()


def sobolev_norm(f: SpinorField, s: float) -> float:
    """(sum (1 + |p|^2)^s |f(p)|^2 h^3)^(1/2) on the dual lattice."""
    weight = cached_energy(f.grid_n, f.box_l) ** (2.0 * s)
    return f.to_fourier().weighted_norm(weight)


def h1_norm(f: SpinorField) -> float:
    return sobolev_norm(f, 1.0)


def h_half_norm(f: SpinorField) -> float:
    return sobolev_norm(f, 0.5)


def spectral_gradient(values: ArrayR, grid_n: int, box_l: float) -> ArrayR:
    """Gradient of a real scalar grid function by FFT differentiation, shape (..., 3)."""
    p = cached_momenta(grid_n, box_l)
    v_hat = forward_fft(values.astype(np.complex128))
    return np.real(inverse_fft(1j * p * v_hat[..., None]))


# =============================================================================
# Cutoff profiles
# =============================================================================

def smoothstep(t: ArrayR) -> ArrayR:
    """C^2 quintic ramp 6t^5 - 15t^4 + 10t^3, clamped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def smoothstep_d1(t: ArrayR) -> ArrayR:
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 30.0 * t**2 * (1.0 - t) ** 2, 0.0)


def smoothstep_d2(t: ArrayR) -> ArrayR:
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)


def radial_profile(kind: str, u: ArrayR, order: int = 0) -> ArrayR:
    """
    Profile chi(u) of the scaled radius u = |y| / R and its u-derivatives.

    shell: 0 outside [1, 2], rising on [1, 1.5], falling on [1.5, 2]
    ball: 1 on [0, 1], falling to 0 at 2
    complement: 1 - ball
    unit: identically 1 (degenerate)
    """
    u = np.asarray(u, dtype=np.float64)
    fns = (smoothstep, smoothstep_d1, smoothstep_d2)
    if kind == "unit":
        return np.ones_like(u) if order == 0 else np.zeros_like(u)
    if kind == "ball":
        t = u - 1.0
        if order == 0:
            return 1.0 - smoothstep(t)
        return -fns[order](t)
    if kind == "complement":
        t = u - 1.0
        return fns[order](t)
    if kind == "shell":
        rise = 2.0 * (u - 1.0)
        fall = 2.0 * (2.0 - u)
        lower = u <= 1.5
        if order == 0:
            return np.where(lower, smoothstep(rise), smoothstep(fall))
        scale = 2.0**order
        sign = 1.0 if order % 2 == 0 else -1.0
        return np.where(lower, scale * fns[order](rise), sign * scale * fns[order](fall))
    raise ValueError(f"unknown cutoff kind {kind!r}; expected one of {CUTOFF_KINDS}")


@dataclass(frozen=True)
class CutoffProfile:
    scale_r: float
    kind: str
    sup_grad: float
    sup_hess: float

    def values_at(self, points: ArrayR) -> ArrayR:
        r = np.linalg.norm(points, axis=-1)
        return radial_profile(self.kind, r / self.scale_r)

    def on_grid(self, grid_n: int, box_l: float) -> ArrayR:
        return self.values_at(make_grid(grid_n, box_l))

    def gradient_on_grid(self, grid_n: int, box_l: float) -> ArrayR:
        x = make_grid(grid_n, box_l)
        r = np.linalg.norm(x, axis=-1)
        d1 = radial_profile(self.kind, r / self.scale_r, order=1) / self.scale_r
        return (d1 / r)[..., None] * x


def make_cutoff(kind: str, scale_r: float, grid_n: int, box_l: float) -> CutoffProfile:
    """
    Profile chi(x / scale_r) with sup-norms measured at the grid nodes.

    Hessian of a radial function: eigenvalues chi''(r) (radial) and
    chi'(r)/r (tangential, twice); the sup of the larger one is recorded.
    """
    if kind not in CUTOFF_KINDS:
        raise ValueError(f"unknown cutoff kind {kind!r}")
    if scale_r <= 0.0:
        raise ValueError("scale_r must be > 0")
    r = np.linalg.norm(make_grid(grid_n, box_l), axis=-1)
    u = r / scale_r
    d1 = radial_profile(kind, u, order=1) / scale_r
    d2 = radial_profile(kind, u, order=2) / scale_r**2
    sup_grad = float(np.max(np.abs(d1)))
    sup_hess = float(max(np.max(np.abs(d2)), np.max(np.abs(d1) / r)))
    return CutoffProfile(scale_r=float(scale_r), kind=kind, sup_grad=sup_grad, sup_hess=sup_hess)


def commutator_apply(chi: CutoffProfile, f: SpinorField) -> SpinorField:
    """chi L+ f - L+(chi f), both projections in the Fourier representation."""
    weight = chi.on_grid(f.grid_n, f.box_l)
    return apply_lambda_fourier(f).scale(weight) - apply_lambda_fourier(f.scale(weight))


def commutator_l2_constant() -> float:
    """
    c in ||[chi, L+]|| <= c ||grad chi||_inf, from integrating the kernel
    envelope K1 + 3 K0 + 6 K1 / r over R^3: (2 + 9 pi / 2) / pi.
    """
    return (2.0 + 4.5 * np.pi) / np.pi


def multiplier_ratio(chi: CutoffProfile, f: SpinorField) -> Tuple[float, float]:
    """
    ||chi f||_{H^1/2} / ||f||_{H^1/2} and the reference (||chi||_inf + ||grad chi||_inf).
    """
    weight = chi.on_grid(f.grid_n, f.box_l)
    num = h_half_norm(f.scale(weight))
    den = h_half_norm(f)
    reference = float(np.max(np.abs(weight))) + chi.sup_grad
    return (num / den if den > 0.0 else 0.0), reference


# =============================================================================
# Operator norms
# =============================================================================

def random_field(template: SpinorField, rng: np.random.Generator) -> SpinorField:
    shape = template.data.shape
    data = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return template.with_data(data).normalized()


def estimate_operator_norm(
    op: FieldMap,
    n_probes: int,
    seed: Optional[int],
    template: SpinorField,
    adjoint: Optional[FieldMap] = None,
    power_steps: int = 25,
) -> float:
    """
    Lower bound on ||op|| from seeded random unit probes refined by power
    iteration.  With an adjoint the iteration runs on op* op, otherwise on op.
    Every recorded ratio ||op v|| / ||v|| is itself a valid lower bound.
    """
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_probes):
        v = random_field(template, rng)
        for _ in range(power_steps + 1):
            image = op(v)
            ratio = image.norm() / v.norm()
            best = max(best, ratio)
            if ratio == 0.0:
                break
            nxt = adjoint(image) if adjoint is not None else image
            nxt_norm = nxt.norm()
            if nxt_norm == 0.0:
                break
            v = nxt.scale(1.0 / nxt_norm)
    logger.debug("operator norm lower bound %.6g from %d probes", best, n_probes)
    return float(best)


# =============================================================================
# Coordinate-space kernel
# =============================================================================

def kernel_profiles(r: ArrayR) -> Tuple[ArrayR, ArrayR, ArrayR]:
    """
    Radial factors of the kernel at r > 0:
    a = K1/(4 pi^2 r)  (beta), b = K0/(4 pi^2 r^2), c = K1/(2 pi^2 r^3)  (i alpha.(x-y))
    """
    k0, k1 = bessel_k01(r)
    four_pi2 = 4.0 * np.pi**2
    return k1 / (four_pi2 * r), k0 / (four_pi2 * r * r), 2.0 * k1 / (four_pi2 * r**3)


def kernel_matrix_norm(r: ArrayR) -> ArrayR:
    """Triangle bound a(r) + r (b(r) + c(r)) on the 4x4 kernel norm."""
    a, b, c = kernel_profiles(np.asarray(r, dtype=np.float64))
    return a + r * (b + c)


def support_radius(f: SpinorField) -> float:
    dens = f.density()
    peak = float(np.max(dens))
    if peak == 0.0:
        return 0.0
    r = np.linalg.norm(f.coords(), axis=-1)
    return float(np.max(r[dens > SUPPORT_THRESHOLD * peak]))


@dataclass(frozen=True)
class KernelTables:
    """Spectra of the lattice kernel tables for one grid and one epsilon."""
    grid_n: int
    box_l: float
    epsilon: float
    beta_spectrum: ArrayC
    smooth_vector_spectrum: ArrayC  # b(r) (x - y), shape (2n, 2n, 2n, 3)
    pv_vector_spectrum: ArrayC  # c(r) (x - y) on r >= epsilon
    beta_lattice_mass: float  # sum_{n != 0} a(|n| h) h^3


@lru_cache(maxsize=4)
def build_kernel_tables(grid_n: int, box_l: float, epsilon: float) -> KernelTables:
    h = grid_spacing(grid_n, box_l)
    d = difference_vectors(grid_n, h)
    r = np.linalg.norm(d, axis=-1)
    live = (r > 0.0) & ~unused_slot_mask(grid_n)
    a = np.zeros_like(r)
    b = np.zeros_like(r)
    c = np.zeros_like(r)
    a[live], b[live], c[live] = kernel_profiles(r[live])
    c[r < epsilon] = 0.0
    tables = KernelTables(
        grid_n=grid_n,
        box_l=box_l,
        epsilon=epsilon,
        beta_spectrum=kernel_spectrum(a),
        smooth_vector_spectrum=kernel_spectrum(b[..., None] * d),
        pv_vector_spectrum=kernel_spectrum(c[..., None] * d),
        beta_lattice_mass=float(np.sum(a) * h**3),
    )
    logger.debug("kernel tables n=%d box=%.3g eps=%.3g mass=%.6f", grid_n, box_l, epsilon, tables.beta_lattice_mass)
    return tables


def _check_kernel_preconditions(f: SpinorField, epsilon: float) -> None:
    h = f.spacing
    if epsilon < h * (1.0 - 1e-12):
        raise PreconditionError(f"epsilon={epsilon:.6g} is below the grid spacing {h:.6g}")
    radius = support_radius(f)
    if radius > 0.25 * f.box_l:
        raise PreconditionError(
            f"support radius {radius:.6g} exceeds box_l/4 = {0.25 * f.box_l:.6g}"
        )


def _vector_convolve(spectrum: ArrayC, data: ArrayC, h: float) -> ArrayC:
    """i sum_k alpha_k (table_k * f)."""
    out = np.zeros_like(data)
    alphas = dirac_matrices().alphas
    for k in range(3):
        conv = lattice_convolve(data, spectrum[..., k], h)
        out += 1j * np.einsum("ab,...b->...a", alphas[k], conv, optimize=True)
    return out


def kernel_parts(f: SpinorField, epsilon: float) -> Tuple[ArrayC, ArrayC]:
    """(epsilon-independent part, principal-value part) of the kernel application."""
    _check_kernel_preconditions(f, epsilon)
    tables = build_kernel_tables(f.grid_n, float(f.box_l), float(epsilon))
    h = f.spacing
    data = np.asarray(f.data)
    beta_sum = lattice_convolve(data, tables.beta_spectrum, h)
    beta_sum += (0.5 - tables.beta_lattice_mass) * data
    regular = 0.5 * data + apply_beta(beta_sum)
    regular += _vector_convolve(tables.smooth_vector_spectrum, data, h)
    principal = _vector_convolve(tables.pv_vector_spectrum, data, h)
    return regular, principal


def apply_lambda_kernel(f: SpinorField, epsilon: float) -> SpinorField:
    """Coordinate-space L+ f with the ball B(epsilon, x) removed from the PV term."""
    regular, principal = kernel_parts(f, epsilon)
    return f.with_data(regular + principal)


def truncated_pv_apply(f: SpinorField, epsilon: float) -> SpinorField:
    """The truncated principal-value convolution T_epsilon f alone."""
    _, principal = kernel_parts(f, epsilon)
    return f.with_data(principal)


def pv_symbol(p: float, epsilon: float = 0.0) -> float:
    """
    Radial symbol of the truncated principal-value convolution on R^3.

    The Fourier multiplier of i/(2 pi^2) alpha.x K1(r)/r^3 restricted to
    r >= epsilon is alpha.p^ h_eps(|p|) (up to a unit factor), with

        h_0(p)   = E/(2p) - asinh(p)/(2p^2)
        h_eps(p) = h_0(p) - (2/pi) int_0^eps K1(r) j1(p r) dr

    so ||T_eps|| on L2(R^3) is sup_p |h_eps(p)| and h_0 increases to 1/2.
    """
    p = float(p)
    if not p > 0.0:
        raise ValueError("pv_symbol needs p > 0")
    energy = np.sqrt(1.0 + p * p)
    full = energy / (2.0 * p) - np.arcsinh(p) / (2.0 * p * p)
    if epsilon <= 0.0:
        return float(full)
    local, _ = integrate.quad(lambda r: bessel_k1(r) * spherical_jn(1, p * r), 0.0, float(epsilon),
                              limit=200, epsabs=1e-13)
    return float(full - 2.0 / np.pi * local)


def pv_operator_norm(epsilon: float, n_points: int = PV_P_POINTS) -> Tuple[float, float]:
    """
    sup_p |h_eps(p)| over p in [0.1, 50/eps]: log grid, then a bounded
    search between the neighbours of the best node. Returns (norm, argmax).
    """
    if not epsilon > 0.0:
        raise ValueError("pv_operator_norm needs epsilon > 0")
    p = np.geomspace(PV_P_MIN, PV_P_SPAN / epsilon, n_points)
    values = np.array([abs(pv_symbol(x, epsilon)) for x in p])
    i = int(np.argmax(values))
    lo, hi = p[max(i - 1, 0)], p[min(i + 1, p.size - 1)]
    found = optimize.minimize_scalar(lambda x: -abs(pv_symbol(x, epsilon)), bounds=(lo, hi), method="bounded",
                                     options={"xatol": 1e-8 * hi})
    if -found.fun > values[i]:
        return float(-found.fun), float(found.x)
    return float(values[i]), float(p[i])


def apply_lambda_kernel_extrapolated(f: SpinorField, epsilons: Sequence[float]) -> SpinorField:
    """
    Linear Richardson extrapolation of the PV piece to epsilon -> 0 from the
    two smallest epsilons (the missing ball contributes O(epsilon)).
    """
    eps = sorted(float(e) for e in epsilons)
    if len(eps) < 2:
        raise ValueError("need at least two epsilon values")
    e1, e2 = eps[0], eps[1]
    regular, pv1 = kernel_parts(f, e1)
    _, pv2 = kernel_parts(f, e2)
    pv0 = (e2 * pv1 - e1 * pv2) / (e2 - e1)
    return f.with_data(regular + pv0)


def _kernel_rows(points: ArrayR, sources: ArrayR, values: ArrayC, weight: float) -> ArrayC:
    d = points[:, None, :] - sources[None, :, :]
    r = np.linalg.norm(d, axis=-1)
    a, b, c = kernel_profiles(r)
    vec = (b + c)[..., None] * d
    beta_part = np.einsum("ms,sa->ma", a, values) * weight
    alphas = dirac_matrices().alphas
    alpha_part = 1j * weight * np.einsum("kab,msk,sb->ma", alphas, vec, values, optimize=True)
    return apply_beta(beta_part) + alpha_part


def kernel_at_points(f: SpinorField, points: ArrayR) -> ArrayC:
    """
    Direct midpoint quadrature of (L+ f)(x) at points outside supp f.

    Targets are split into fixed chunks evaluated on the shared pool and
    concatenated in order, so the result does not depend on scheduling.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    dens = f.density()
    mask = dens > 0.0
    sources = f.coords()[mask]
    values = np.asarray(f.data)[mask]
    if sources.shape[0] == 0:
        return np.zeros((points.shape[0], 4), dtype=np.complex128)
    nearest = np.min(np.linalg.norm(points[:, None, :] - sources[None, :, :], axis=-1), axis=1)
    if np.any(nearest <= 0.0):
        raise PreconditionError("kernel_at_points needs targets off the support nodes")
    chunks = [points[i:i + TARGET_CHUNK] for i in range(0, points.shape[0], TARGET_CHUNK)]
    weight = f.cell_volume
    results = list(get_executor().map(lambda pts: _kernel_rows(pts, sources, values, weight), chunks))
    return np.concatenate(results, axis=0)


def support_geometry(f: SpinorField, points: ArrayR) -> Tuple[ArrayR, float]:
    """
    Distances from points to the support nodes and the support measure
    |Omega| = (number of support cells) h^3.
    """
    mask = f.density() > 0.0
    sources = f.coords()[mask]
    d = np.min(np.linalg.norm(points[:, None, :] - sources[None, :, :], axis=-1), axis=1)
    return d, float(np.count_nonzero(mask) * f.cell_volume)


def decay_bound(f: SpinorField, points: ArrayR) -> ArrayR:
    """G(d) |Omega|^(1/2) ||f|| at each point."""
    d, omega = support_geometry(f, points)
    return g_decay_values(d) * np.sqrt(omega) * f.norm()
