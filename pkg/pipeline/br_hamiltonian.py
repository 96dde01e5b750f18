# pipeline/br_hamiltonian.py
"""
One- and two-particle Brown-Ravenhall quadratic forms on grid fields.

Energies in units of mc^2, lengths in reduced Compton wavelengths, so the
free spectrum is [1, inf).  The Coulomb singularity needs no regularization:
the half-cell grid offset keeps every node away from x = 0.

One particle:   h = L+ (D - alpha Z / |x|) L+
Two particles:  H2 = h (x) 1 + 1 (x) h + alpha / |x1 - x2| on L+ (x) L+ range,
evaluated on low-rank (Slater) states through Gram matrices of the factors.
"""
from dataclasses import dataclass, field
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import fft as sfft
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from backend.errors import ConvergenceError, DomainError
from lab_config import ALPHA_DEFAULT, SEED_DEFAULT, TOL_DEFAULT
from pipeline.field_utils import (
    SpinorField,
    forward_fft,
    grid_spacing,
    inverse_fft,
    radius_grid,
)
from pipeline.lattice import inverse_power_convolve
from pipeline.projector_ops import (
    apply_lambda_fourier,
    cached_energy,
    cached_momenta,
    project_fourier_data,
)

logger = logging.getLogger(__name__)

ArrayR = NDArray[np.float64]
ArrayC = NDArray[np.complex128]

ALPHA_Z_C = 2.0 / (np.pi / 2.0 + 2.0 / np.pi)
SPECTRAL_SHIFT = 2.0
HARTREE_CONVENTIONS = ("isolated", "periodic")


def critical_charge(alpha: float) -> float:
    """Z_c = (2 / (pi/2 + 2/pi)) / alpha."""
    if not alpha > 0.0:
        raise DomainError("alpha must be > 0")
    return ALPHA_Z_C / alpha


class CouplingParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=ALPHA_DEFAULT, gt=0.0)
    z: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def check_critical_coupling(self):
        if self.alpha * self.z >= ALPHA_Z_C:
            raise ValueError(
                f"alpha*Z = {self.alpha * self.z:.6f} must stay below the critical coupling "
                f"alpha*Z_c = 2/(pi/2 + 2/pi) = {ALPHA_Z_C:.6f}"
            )
        return self

    @property
    def alpha_z(self) -> float:
        return self.alpha * self.z

    @property
    def alpha_z_c(self) -> float:
        return ALPHA_Z_C

    @property
    def z_c(self) -> float:
        return critical_charge(self.alpha)


# =============================================================================
# One-particle forms
# =============================================================================

def _radii(f: SpinorField) -> ArrayR:
    return radius_grid(f.grid_n, f.box_l)


def coulomb_form(f: SpinorField, center_charge: float) -> float:
    """<(c/|x|) f, f> by node quadrature."""
    if center_charge == 0.0:
        return 0.0
    return float(center_charge * f.cell_volume * np.sum(f.density() / _radii(f)))


def coulomb_matrix_element(u: SpinorField, v: SpinorField, center_charge: float) -> complex:
    """<u, (c/|x|) v>."""
    weight = center_charge / _radii(u)
    return complex(u.cell_volume * np.sum(np.conj(u.data) * v.data * weight[..., None]))


def abs_momentum_form(f: SpinorField) -> float:
    """<|p| f, f>, the right side of the Kato inequality without pi/2."""
    p_abs = np.linalg.norm(cached_momenta(f.grid_n, f.box_l), axis=-1)
    return f.to_fourier().weighted_norm(p_abs) ** 2


def kinetic_form(f: SpinorField) -> float:
    """<D L+ f, L+ f> = sum sqrt(1+|p|^2) |L+(p) f(p)|^2."""
    g_hat = project_fourier_data(f.to_fourier().data, f.grid_n, f.box_l)
    energy = cached_energy(f.grid_n, f.box_l)
    return float(f.cell_volume * np.sum(energy[..., None] * np.abs(g_hat) ** 2))


def kinetic_matrix_element(u: SpinorField, v: SpinorField) -> complex:
    """<u, |D| v> (equals <u, D v> on the L+ range)."""
    energy = cached_energy(u.grid_n, u.box_l)
    u_hat = u.to_fourier().data
    v_hat = v.to_fourier().data
    return complex(u.cell_volume * np.sum(np.conj(u_hat) * v_hat * energy[..., None]))


def br_one_particle_form(f: SpinorField, params: CouplingParams) -> float:
    """<(D - alpha Z/|x|) L+ f, L+ f>."""
    g = apply_lambda_fourier(f)
    return kinetic_form(g) - coulomb_form(g, params.alpha_z)


def one_particle_matrix_element(u: SpinorField, v: SpinorField, params: CouplingParams) -> complex:
    """<u, (D - alpha Z/|x|) v> for u, v already in the L+ range."""
    return kinetic_matrix_element(u, v) - coulomb_matrix_element(u, v, params.alpha_z)


# =============================================================================
# Ground state
# =============================================================================

@dataclass
class SpectralResult:
    e1: float
    eigenvalues: Tuple[float, ...]
    residual: float
    iters: int
    grid_n: int
    box_l: float
    alpha: float
    z: float
    state: Optional[SpinorField] = field(default=None, repr=False)

    def to_json_dict(self) -> Dict[str, float]:
        return {
            "alpha": self.alpha,
            "z": self.z,
            "grid_n": self.grid_n,
            "box_l": self.box_l,
            "e1": self.e1,
            "residual": self.residual,
            "iters": self.iters,
        }


class _ProjectedHamiltonian:
    """
    Matrix-free v -> L+ H L+ v + sigma (v - L+ v) on momentum-space vectors.

    The shift sigma keeps the L- sector above the positive-energy bottom.
    """

    def __init__(self, params: CouplingParams, grid_n: int, box_l: float, shift: float = SPECTRAL_SHIFT):
        self.params = params
        self.grid_n = grid_n
        self.box_l = box_l
        self.shift = shift
        self.shape = (grid_n,) * 3 + (4,)
        self.energy = cached_energy(grid_n, box_l)[..., None]
        self.potential = (params.alpha_z / radius_grid(grid_n, box_l))[..., None]
        self.matvecs = 0

    def project(self, v_hat: ArrayC) -> ArrayC:
        return project_fourier_data(v_hat, self.grid_n, self.box_l)

    def apply_h(self, w_hat: ArrayC) -> ArrayC:
        """(D - alpha Z/|x|) on a vector already in the L+ range."""
        coulomb = forward_fft(self.potential * inverse_fft(w_hat))
        return self.energy * w_hat - coulomb

    def matvec(self, v: ArrayC) -> ArrayC:
        self.matvecs += 1
        v_hat = np.asarray(v, dtype=np.complex128).reshape(self.shape)
        w_hat = self.project(v_hat)
        out = self.project(self.apply_h(w_hat)) + self.shift * (v_hat - w_hat)
        return out.ravel()

    def operator(self) -> LinearOperator:
        size = int(np.prod(self.shape))
        return LinearOperator((size, size), matvec=self.matvec, dtype=np.complex128)


def hydrogenic_guess(params: CouplingParams, grid_n: int, box_l: float, seed: Optional[int]) -> ArrayC:
    """exp(-alpha Z r) (1,0,0,0) in momentum space plus a small seeded perturbation."""
    r = radius_grid(grid_n, box_l)
    decay = max(params.alpha_z, 4.0 / box_l)
    data = np.zeros((grid_n,) * 3 + (4,), dtype=np.complex128)
    data[..., 0] = np.exp(-decay * r)
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=data.shape) + 1j * rng.normal(size=data.shape)
    v_hat = forward_fft(data)
    v_hat = v_hat / np.linalg.norm(v_hat) + 1e-3 * noise / np.linalg.norm(noise)
    return v_hat.ravel()


def ground_state_one_particle(
    params: CouplingParams,
    grid_n: int,
    box_l: float,
    tol: float = TOL_DEFAULT,
    seed: Optional[int] = SEED_DEFAULT,
    ncv: int = 24,
    max_restarts: int = 4000,
) -> SpectralResult:
    """
    Lowest eigenvalue of L+ (D - alpha Z/|x|) L+ on the grid L+ range.

    ARPACK implicitly restarted Lanczos on a matrix-free operator; the
    projector is re-applied inside every matvec.
    """
    ham = _ProjectedHamiltonian(params, grid_n, box_l)
    v0 = hydrogenic_guess(params, grid_n, box_l, seed)
    try:
        values, vectors = eigsh(
            ham.operator(), k=1, which="SA", v0=v0, ncv=ncv, tol=0.1 * tol, maxiter=max_restarts
        )
    except ArpackNoConvergence as exc:
        raise ConvergenceError(
            "ground-state eigensolver did not converge",
            {"matvecs": ham.matvecs, "ncv": ncv, "grid_n": grid_n, "z": params.z},
        ) from exc

    e1 = float(np.real(values[0]))
    v_hat = vectors[:, 0].reshape(ham.shape)
    v_hat = ham.project(v_hat)
    # unitary DFT: the grid L2 norm carries the cell weight h^3
    v_hat = v_hat / np.linalg.norm(v_hat)
    residual_vec = ham.project(ham.apply_h(v_hat)) - e1 * v_hat
    residual = float(np.linalg.norm(residual_vec))
    if residual > tol:
        raise ConvergenceError(
            "ground-state residual above tolerance",
            {"residual": residual, "tol": tol, "matvecs": ham.matvecs, "e1": e1},
        )
    h3 = grid_spacing(grid_n, box_l) ** 3
    state = SpinorField(grid_n, box_l, inverse_fft(v_hat) / np.sqrt(h3))
    logger.info(
        "ground state Z=%g n=%d box=%.4g: E1=%.12f residual=%.2e matvecs=%d",
        params.z, grid_n, box_l, e1, residual, ham.matvecs,
    )
    return SpectralResult(
        e1=e1,
        eigenvalues=(e1,),
        residual=residual,
        iters=ham.matvecs,
        grid_n=grid_n,
        box_l=float(box_l),
        alpha=params.alpha,
        z=params.z,
        state=state,
    )


def spectral_result_json(result: SpectralResult) -> Dict[str, float]:
    return result.to_json_dict()


# =============================================================================
# Electron-electron interaction
# =============================================================================

def _periodic_potential(density: np.ndarray, box_l: float) -> ArrayC:
    n = density.shape[0]
    p = cached_momenta(n, float(box_l))
    p2 = np.sum(p * p, axis=-1)
    multiplier = np.zeros_like(p2)
    nonzero = p2 > 0.0
    multiplier[nonzero] = 4.0 * np.pi / p2[nonzero]
    # unnormalized pair: the h^3 of the forward sum cancels the 1/L^3 of the inverse
    return sfft.ifftn(sfft.fftn(density) * multiplier)


def coulomb_potential(density: np.ndarray, box_l: float, convention: str = "isolated") -> np.ndarray:
    """
    int density(y) / |x - y| dy for a (possibly complex) grid density.

    isolated: free-space sum over the box with the averaged self cell
    periodic: multiplier 4 pi / |p|^2 with zero box average
    """
    if convention not in HARTREE_CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {HARTREE_CONVENTIONS}")
    h = grid_spacing(density.shape[0], box_l)
    if convention == "isolated":
        out = inverse_power_convolve(density, h, power=1)
    else:
        out = _periodic_potential(density, box_l)
    if np.isrealobj(density):
        return np.real(out)
    return out


def hartree_potential(density: np.ndarray, box_l: float, convention: str = "isolated") -> ArrayR:
    """Coulomb potential of a real non-negative density."""
    density = np.asarray(density)
    if np.iscomplexobj(density) or not np.all(np.isfinite(density)):
        raise DomainError("density must be real and finite")
    scale = float(np.max(np.abs(density))) if density.size else 0.0
    if np.any(density < -1e-14 * scale):
        raise DomainError("density must be non-negative")
    return coulomb_potential(np.asarray(density, dtype=np.float64), box_l, convention)


def coulomb_pair_integral(rho_a: np.ndarray, rho_b: np.ndarray, box_l: float) -> complex:
    """int int rho_a(x) rho_b(y) / |x - y| dx dy (isolated convention)."""
    h = grid_spacing(rho_a.shape[0], box_l)
    potential = coulomb_potential(rho_b, box_l, "isolated")
    return complex(h**3 * np.sum(rho_a * potential))


# =============================================================================
# Two-particle Slater states
# =============================================================================

@dataclass(frozen=True)
class SlaterTerm:
    coefficient: complex
    first: SpinorField
    second: SpinorField


@dataclass(frozen=True)
class SlaterState:
    """
    Psi = sum_i c_i f_i (x) g_i, antisymmetrized on evaluation when requested.

    With antisymmetrize=True the evaluated state is P_A Psi with the
    orthogonal projector P_A = (1 - T)/2, T the particle exchange.
    """
    terms: Tuple[SlaterTerm, ...]
    antisymmetrize: bool = True

    @classmethod
    def product(cls, f: SpinorField, g: SpinorField, antisymmetrize: bool = True) -> "SlaterState":
        return cls((SlaterTerm(1.0, f, g),), antisymmetrize)

    def projected(self) -> "SlaterState":
        """Every factor replaced by its L+ image."""
        terms = tuple(
            SlaterTerm(t.coefficient, apply_lambda_fourier(t.first), apply_lambda_fourier(t.second))
            for t in self.terms
        )
        return SlaterState(terms, self.antisymmetrize)

    def swapped(self) -> "SlaterState":
        terms = tuple(SlaterTerm(t.coefficient, t.second, t.first) for t in self.terms)
        return SlaterState(terms, self.antisymmetrize)

    def expanded_terms(self) -> List[SlaterTerm]:
        """Product terms of the evaluated state (exchange partners included)."""
        if not self.antisymmetrize:
            return list(self.terms)
        out = []
        for t in self.terms:
            out.append(SlaterTerm(0.5 * t.coefficient, t.first, t.second))
            out.append(SlaterTerm(-0.5 * t.coefficient, t.second, t.first))
        return out

    def _gram_sum(self, terms: Sequence[SlaterTerm], pair_value) -> complex:
        total = 0.0 + 0.0j
        for ti in terms:
            for tj in terms:
                total += np.conj(ti.coefficient) * tj.coefficient * pair_value(ti, tj)
        return total

    def norm_squared(self) -> float:
        terms = self.expanded_terms()
        value = self._gram_sum(terms, lambda a, b: a.first.inner(b.first) * a.second.inner(b.second))
        return float(np.real(value))

    def plain_norm_squared(self) -> float:
        """Norm of the state without antisymmetrization."""
        return SlaterState(self.terms, antisymmetrize=False).norm_squared()

    def antisym_norm_squared(self) -> float:
        """||sqrt(2) P_A Psi||^2, the normalization that is isometric on disjoint products."""
        return 2.0 * self.norm_squared() if self.antisymmetrize else self.norm_squared()


def transition_density(u: SpinorField, v: SpinorField) -> ArrayC:
    """sum_c conj(u_c) v_c on the grid."""
    return np.sum(np.conj(u.data) * v.data, axis=-1)


def _interaction_element(a: SlaterTerm, b: SlaterTerm, cache: Dict[Tuple[int, int, int, int], complex]) -> complex:
    key = (id(a.first), id(b.first), id(a.second), id(b.second))
    if key not in cache:
        rho_1 = transition_density(a.first, b.first)
        rho_2 = transition_density(a.second, b.second)
        cache[key] = coulomb_pair_integral(rho_1, rho_2, a.first.box_l)
    return cache[key]


def two_particle_components(state: SlaterState, params: CouplingParams) -> Dict[str, float]:
    """
    Unnormalized pieces of <H2 Psi, Psi>: one-body part, interaction part
    (divided by alpha), |D| part and the squared norm.
    """
    projected = state.projected()
    terms = projected.expanded_terms()
    norm2 = projected.norm_squared()
    cache: Dict[Tuple[int, int, int, int], complex] = {}

    def one_body(a: SlaterTerm, b: SlaterTerm) -> complex:
        return (
            one_particle_matrix_element(a.first, b.first, params) * a.second.inner(b.second)
            + a.first.inner(b.first) * one_particle_matrix_element(a.second, b.second, params)
        )

    def abs_dirac(a: SlaterTerm, b: SlaterTerm) -> complex:
        return (
            kinetic_matrix_element(a.first, b.first) * a.second.inner(b.second)
            + a.first.inner(b.first) * kinetic_matrix_element(a.second, b.second)
        )

    one = projected._gram_sum(terms, one_body)
    inter = projected._gram_sum(terms, lambda a, b: _interaction_element(a, b, cache))
    kin = projected._gram_sum(terms, abs_dirac)
    return {
        "one_body": float(np.real(one)),
        "interaction": float(np.real(inter)),
        "abs_dirac": float(np.real(kin)),
        "norm_squared": norm2,
    }


def two_particle_energy_form(
    state: SlaterState, params: CouplingParams, include_interaction: bool = True
) -> float:
    """<H2 Psi, Psi> / ||Psi||^2 with factors projected onto the L+ range."""
    parts = two_particle_components(state, params)
    norm2 = parts["norm_squared"]
    if not norm2 > 1e-14:
        raise DomainError("two-particle state has zero norm")
    value = parts["one_body"]
    if include_interaction:
        value += params.alpha * parts["interaction"]
    return value / norm2


def control_lemma_ratio(state: SlaterState, params: CouplingParams) -> float:
    """<H2 Psi, Psi> / <(|D1| + |D2|) Psi, Psi>."""
    parts = two_particle_components(state, params)
    if not parts["norm_squared"] > 1e-14:
        raise DomainError("two-particle state has zero norm")
    energy = parts["one_body"] + params.alpha * parts["interaction"]
    return energy / parts["abs_dirac"]


def semibounded_quotients(fields: Sequence[SpinorField], params: CouplingParams) -> List[float]:
    """One-particle Rayleigh quotients of the L+ images of the given fields."""
    quotients = []
    for f in fields:
        g = apply_lambda_fourier(f)
        norm2 = g.norm() ** 2
        if norm2 == 0.0:
            continue
        quotients.append(br_one_particle_form(g, params) / norm2)
    return quotients
