# backend/radial_trial.py
"""
Trial shells for the bound-state construction, in the s-wave reduction.

psi~ = b(|y|) (s, 0, 0) with a quintic power bump b supported in
[N - 2/5, N - 1/5]; psi_m(y) = R_m^{-3/2} psi~(y / R_m), R_m = 2^m R.

For an upper-component radial spinor the projected shell keeps a radial
density:

    (L+ psi)(x) = F(r) (s, 0) + i G(r) (0, sigma.x^ s)
    F = H0[(1 + 1/E) b^ / 2],   G = H1[|p| b^ / (2E)]

with H0, H1 the l = 0, 1 Hankel transforms, so every diagonal piece is a
one-dimensional integral in the scaled variables q = R p, tau = r / R and
scales to shells far beyond any 3D grid.  The electron density of the
one-particle ground state enters through its spherical average.
"""
from dataclasses import dataclass, field, replace
from functools import lru_cache
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import NDArray
from scipy.special import spherical_jn

from backend.errors import DegenerateFamilyError, DomainError
from backend.reports import LemmaReport, make_report
from lemma_presets import get_lemma_info
from models.besselk import g_decay_values
from pipeline.br_hamiltonian import CouplingParams, SpectralResult
from pipeline.field_utils import SpinorField, grid_spacing, radius_grid

logger = logging.getLogger(__name__)

ArrayR = NDArray[np.float64]

BUMP_POWER = 5
PROFILE_PANELS = 16
Q_MAX = 400.0
Q_PANEL = 2.0
TAU_TAIL = 4.0
TAU_PANEL = 0.05
GL_NODES = 16
TAU_NODES = 8
MAX_DOUBLINGS = 40
SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def composite_gauss(a: float, b: float, n_panels: int, n_nodes: int) -> Tuple[ArrayR, ArrayR]:
    """Gauss-Legendre nodes and weights on n_panels equal panels of [a, b]."""
    x, w = leggauss(n_nodes)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


# =============================================================================
# One shell in scaled variables
# =============================================================================

class RadialShell:
    """
    The scale-free profile b and its Hankel data; every method takes the
    physical scale R and works in q = R p, tau = r / R.
    """

    def __init__(self, n_electrons: int):
        self.n_electrons = n_electrons
        self.inner = n_electrons - 0.4
        self.outer = n_electrons - 0.2
        self.center = 0.5 * (self.inner + self.outer)
        self.half_width = 0.5 * (self.outer - self.inner)

        self.r_nodes, r_w = composite_gauss(self.inner, self.outer, PROFILE_PANELS, GL_NODES)
        self.r_weights = 4.0 * np.pi * self.r_nodes**2 * r_w
        raw = self._bump(self.r_nodes)
        self.amplitude = 1.0 / np.sqrt(np.sum(raw**2 * self.r_weights))

        self.q_nodes, q_w = composite_gauss(0.0, Q_MAX, int(Q_MAX / Q_PANEL), GL_NODES)
        self.q_weights = 4.0 * np.pi * self.q_nodes**2 * q_w
        j0 = spherical_jn(0, np.outer(self.q_nodes, self.r_nodes))
        # b^(q) = sqrt(2/pi) int b(r) j0(qr) r^2 dr
        self.b_hat = SQRT_2_OVER_PI * (j0 @ (self.values(self.r_nodes) * self.r_weights)) / (4.0 * np.pi)

        self.tau_out = self.outer + TAU_TAIL
        self.tau_nodes, t_w = composite_gauss(0.0, self.tau_out, int(np.ceil(self.tau_out / TAU_PANEL)), TAU_NODES)
        self.tau_weights = 4.0 * np.pi * self.tau_nodes**2 * t_w
        self._j0_tau = spherical_jn(0, np.outer(self.tau_nodes, self.q_nodes))
        self._j1_tau = spherical_jn(1, np.outer(self.tau_nodes, self.q_nodes))
        self._density_cache: Dict[float, ArrayR] = {}

    def _bump(self, r: ArrayR) -> ArrayR:
        t = (np.asarray(r, dtype=np.float64) - self.center) / self.half_width
        return np.where(np.abs(t) < 1.0, (1.0 - t * t) ** BUMP_POWER, 0.0)

    def values(self, r: ArrayR) -> ArrayR:
        return self.amplitude * self._bump(r)

    def derivative(self, r: ArrayR) -> ArrayR:
        t = (np.asarray(r, dtype=np.float64) - self.center) / self.half_width
        inside = np.abs(t) < 1.0
        d = -2.0 * BUMP_POWER * t * (1.0 - t * t) ** (BUMP_POWER - 1) / self.half_width
        return self.amplitude * np.where(inside, d, 0.0)

    # --- scale-free norms -------------------------------------------------------

    def gradient_norm2(self) -> float:
        """||grad psi~||^2 = ||q psi~^||^2, exact in position space."""
        return float(np.sum(self.derivative(self.r_nodes) ** 2 * self.r_weights))

    def half_norm2(self) -> float:
        """|| |q|^1/2 psi~^ ||^2."""
        return float(np.sum(self.q_nodes * self.b_hat**2 * self.q_weights))

    def _energy(self, scale: float) -> Tuple[ArrayR, ArrayR]:
        p = self.q_nodes / scale
        energy = np.sqrt(1.0 + p * p)
        return p, energy

    def lambda_norm2(self, scale: float) -> float:
        """||L+ psi_m||^2 = int (1 + 1/E) b^^2 / 2."""
        _, energy = self._energy(scale)
        return float(np.sum(0.5 * (1.0 + 1.0 / energy) * self.b_hat**2 * self.q_weights))

    def kinetic_excess(self, scale: float) -> float:
        """<(D - 1) L+ psi_m, L+ psi_m> = int p^2 / (2E) b^^2."""
        p, energy = self._energy(scale)
        return float(np.sum(p * p / (2.0 * energy) * self.b_hat**2 * self.q_weights))

    def kinetic_residual(self, scale: float) -> float:
        """||(D - 1) L+ psi_m|| = (int p^2 (E - 1) / (2E) b^^2)^1/2."""
        p, energy = self._energy(scale)
        e_minus_1 = p * p / (energy + 1.0)
        return float(np.sqrt(np.sum(p * p * e_minus_1 / (2.0 * energy) * self.b_hat**2 * self.q_weights)))

    # --- position space ---------------------------------------------------------

    def components(self, scale: float, tau: Optional[ArrayR] = None) -> Tuple[ArrayR, ArrayR]:
        """Scaled F~(tau), G~(tau): F(r) = R^{-3/2} F~(r/R), likewise G."""
        p, energy = self._energy(scale)
        upper = 0.5 * (1.0 + 1.0 / energy) * self.b_hat * self.q_weights / (4.0 * np.pi)
        lower = p / (2.0 * energy) * self.b_hat * self.q_weights / (4.0 * np.pi)
        if tau is None:
            j0, j1 = self._j0_tau, self._j1_tau
        else:
            qt = np.outer(np.asarray(tau, dtype=np.float64), self.q_nodes)
            j0, j1 = spherical_jn(0, qt), spherical_jn(1, qt)
        return SQRT_2_OVER_PI * (j0 @ upper), SQRT_2_OVER_PI * (j1 @ lower)

    def density(self, scale: float) -> ArrayR:
        """F~^2 + G~^2 on the tau nodes."""
        key = float(scale)
        if key not in self._density_cache:
            f_up, g_low = self.components(scale)
            self._density_cache[key] = f_up**2 + g_low**2
        return self._density_cache[key]

    def mass_where(self, scale: float, mask: ArrayR) -> float:
        """||L+ psi_m||^2 restricted to the tau nodes selected by mask."""
        return float(np.sum((self.density(scale) * self.tau_weights)[mask]))

    def ball_norm(self, scale: float, radius: float) -> float:
        """||L+ psi_m||_{L2(B(radius))} with radius in physical units."""
        return float(np.sqrt(self.mass_where(scale, self.tau_nodes < radius / scale)))

    def capped_ball_norm(self, scale: float, radius: float, cap: float) -> float:
        """||min(cap, 1/|y|) L+ psi_m||_{L2(B(radius))}: a radial potential of unit mass weighting the shell."""
        r = self.tau_nodes * scale
        inside = self.tau_nodes < radius / scale
        weight = np.minimum(cap, 1.0 / r) ** 2
        return float(np.sqrt(np.sum((weight * self.density(scale) * self.tau_weights)[inside])))

    def outside_norm(self, scale: float, radius: float) -> float:
        return float(np.sqrt(self.mass_where(scale, self.tau_nodes >= radius / scale)))

    def annulus_norm(self, scale: float, r_lo: float, r_hi: float) -> float:
        tau = self.tau_nodes * scale
        return float(np.sqrt(self.mass_where(scale, (tau >= r_lo) & (tau <= r_hi))))


@lru_cache(maxsize=4)
def radial_shell(n_electrons: int) -> RadialShell:
    return RadialShell(n_electrons)


# =============================================================================
# Family
# =============================================================================

def density_profile(state: SpinorField, bin_width: Optional[float] = None) -> Tuple[ArrayR, ArrayR]:
    """Spherical binning of |phi|^2: bin-centre radius and mass per bin."""
    r = radius_grid(state.grid_n, state.box_l).ravel()
    mass = (state.density() * state.cell_volume).ravel()
    width = bin_width if bin_width is not None else 0.5 * grid_spacing(state.grid_n, state.box_l)
    index = np.floor(r / width).astype(np.int64)
    masses = np.bincount(index, weights=mass)
    centres = (np.arange(masses.size) + 0.5) * width
    keep = masses > 0.0
    return centres[keep], masses[keep]


@dataclass(frozen=True)
class TrialFamily:
    n_electrons: int
    z: float
    base_r: float
    count: int
    e1: float
    rho_radii: ArrayR = field(repr=False)
    rho_masses: ArrayR = field(repr=False)
    upper_spinor: Tuple[complex, complex] = (1.0, 0.0)

    @property
    def scales(self) -> List[float]:
        return [2.0**m * self.base_r for m in range(1, self.count + 1)]

    @property
    def delta(self) -> float:
        return 1.0 / (10.0 * self.n_electrons - 8.0)

    @property
    def shell(self) -> RadialShell:
        return radial_shell(self.n_electrons)

    def with_base(self, base_r: float) -> "TrialFamily":
        return replace(self, base_r=float(base_r))

    def rho_mass(self, lo: float = 0.0, hi: float = np.inf) -> float:
        sel = (self.rho_radii >= lo) & (self.rho_radii < hi)
        return float(np.sum(self.rho_masses[sel]))

    def potential_max(self) -> float:
        """Newton potential of the averaged density at the origin (its maximum)."""
        return float(np.sum(self.rho_masses / self.rho_radii))

    def materialize(self, m: int, grid_n: int, box_l: float) -> SpinorField:
        """psi_m on a 3D grid (before projection)."""
        scale = self.scales[m - 1]
        r = radius_grid(grid_n, box_l)
        radial = scale**-1.5 * self.shell.values(r / scale)
        data = np.zeros((grid_n,) * 3 + (4,), dtype=np.complex128)
        data[..., 0] = radial * self.upper_spinor[0]
        data[..., 1] = radial * self.upper_spinor[1]
        return SpinorField(grid_n, box_l, data)


def build_trial_family(
    ground: SpectralResult,
    base_r: float,
    count: int = 3,
    n_electrons: int = 2,
    upper_spinor: Sequence[complex] = (1.0, 0.0),
) -> TrialFamily:
    """Family on top of the one-particle ground state (N = 2)."""
    if n_electrons != 2:
        raise DomainError("only N = 2 families are built")
    if ground.z < n_electrons:
        raise DomainError(f"need N <= Z, got N = {n_electrons}, Z = {ground.z}")
    if ground.state is None:
        raise DomainError("ground-state result carries no state")
    if not base_r > 0.0 or count < 1:
        raise DomainError("base scale must be > 0 and count >= 1")
    spinor = np.asarray(upper_spinor, dtype=np.complex128)
    norm = float(np.linalg.norm(spinor))
    if norm < 1e-12:
        raise DegenerateFamilyError("upper spinor vanishes: L+ psi_m is zero")
    spinor = spinor / norm
    radii, masses = density_profile(ground.state)
    return TrialFamily(
        n_electrons=n_electrons,
        z=float(ground.z),
        base_r=float(base_r),
        count=int(count),
        e1=float(ground.e1),
        rho_radii=radii,
        rho_masses=masses / np.sum(masses),
        upper_spinor=(complex(spinor[0]), complex(spinor[1])),
    )


# =============================================================================
# Diagonal terms
# =============================================================================

def diagonal_terms(family: TrialFamily, params: CouplingParams, m: int) -> Tuple[Dict[str, float], Dict[str, float]]:
    """
    Measured pieces of <H~(phi (x) L+ psi_m), phi (x) L+ psi_m> and their bounds.

    The electron-electron term is split by |x| < R/5 and |y| < (N - 3/5) R;
    the angular integral of 1/|x - y| against radial data is 1/max(|x|, |y|).
    """
    shell = family.shell
    n = family.n_electrons
    alpha, z = params.alpha, params.z
    delta = family.delta
    scale = family.scales[m - 1]

    norm2 = shell.lambda_norm2(scale)
    if norm2 < 1e-12:
        raise DegenerateFamilyError(f"||L+ psi_{m}||^2 = {norm2:.3e} is numerically zero")

    dens = shell.density(scale)
    weights = dens * shell.tau_weights
    tau = shell.tau_nodes
    kinetic = shell.kinetic_excess(scale)
    nuclear = -alpha * z / scale * float(np.sum(weights / tau))
    tail2 = float(np.sum(weights[tau >= z]))

    s = family.rho_radii
    kernel = 1.0 / np.maximum(s[:, None], scale * tau[None, :])
    contrib = family.rho_masses[:, None] * weights[None, :] * kernel
    near_x = s < scale / 5.0
    near_y = tau < n - 0.6
    i1 = alpha * float(np.sum(contrib[~near_x]))
    i2 = alpha * float(np.sum(contrib[near_x][:, near_y]))
    i3 = alpha * float(np.sum(contrib[near_x][:, ~near_y]))
    mass_in = float(np.sum(family.rho_masses[near_x]))
    mass_out = 1.0 - mass_in

    support_volume = 4.0 * np.pi / 3.0 * ((n - 0.2) * scale) ** 3
    inner_integral = 2.0 * np.pi * ((n - 0.6) * scale) ** 2
    kinetic_bound = shell.gradient_norm2() / (2.0 * scale**2)
    nuclear_bound = -(1.0 - delta) * alpha / scale * norm2 + (2.0 + 1.0 / delta) * alpha / scale * tail2
    i1_bound = 0.5 * np.pi * alpha / scale * mass_out * shell.half_norm2()
    i2_bound = alpha * float(g_decay_values(scale / 5.0)) ** 2 * support_volume * mass_in * inner_integral
    i3_bound = alpha / ((n - 0.8) * scale) * norm2 * mass_in

    diagonal = kinetic + nuclear + i1 + i2 + i3
    leading = alpha * ((n - 1.0) / (n - 0.8) - 1.0 + delta) * norm2 / scale
    remainder = kinetic_bound + (2.0 + 1.0 / delta) * alpha / scale * tail2 + i1_bound + i2_bound
    measured = {
        "scale": scale,
        "lambda_norm2": norm2,
        "kinetic": kinetic,
        "nuclear": nuclear,
        "i1": i1,
        "i2": i2,
        "i3": i3,
        "diagonal": diagonal,
        "kinetic_residual": shell.kinetic_residual(scale),
        "tail2": tail2,
    }
    bound = {
        "kinetic": kinetic_bound,
        "nuclear": nuclear_bound,
        "i1": i1_bound,
        "i2": i2_bound,
        "i3": i3_bound,
        "leading": leading,
        "remainder": remainder,
        "diagonal": leading + remainder,
        "kinetic_residual": np.sqrt(kinetic_bound),
    }
    return measured, bound


# =============================================================================
# Off-diagonal and exchange terms
# =============================================================================

def separating_radius(family: TrialFamily, m: int, n: int) -> float:
    """Midpoint of the gap between the outer edge of shell m and the inner edge of shell n (m < n)."""
    r_m, r_n = family.scales[m - 1], family.scales[n - 1]
    shell = family.shell
    return 0.5 * (shell.outer * r_m + shell.inner * r_n)


def offdiagonal_terms(family: TrialFamily, params: CouplingParams, m: int, n: int) -> Dict[str, float]:
    """
    Decay-lemma bounds on <H~(phi (x) L+ psi_m), phi (x) L+ psi_n> for m < n,
    plus the exactly computed kinetic cross term.
    """
    if not m < n:
        raise ValueError("need m < n")
    shell = family.shell
    alpha, z = params.alpha, params.z
    r_m, r_n = family.scales[m - 1], family.scales[n - 1]
    radius = separating_radius(family, m, n)
    inner_n = shell.ball_norm(r_n, radius)
    outer_m = shell.outside_norm(r_m, radius)
    support_m = shell.annulus_norm(r_m, shell.inner * r_n, shell.outer * r_n)
    grad_m = np.sqrt(shell.gradient_norm2()) / r_m
    grad_n = np.sqrt(shell.gradient_norm2()) / r_n
    norm_m = np.sqrt(shell.lambda_norm2(r_m))
    norm_n = np.sqrt(shell.lambda_norm2(r_n))

    # <L+ psi_m, (D - 1) psi_n> = -int G_m b_n' over supp psi_n
    ratio = r_n / r_m
    _, g_low = shell.components(r_m, ratio * shell.r_nodes)
    kinetic = -ratio**1.5 / r_n * float(np.sum(g_low * shell.derivative(shell.r_nodes) * shell.r_weights))

    kinetic_bound = support_m * grad_n
    nuclear_bound = alpha * z * 2.0 * (grad_m * inner_n + grad_n * outer_m)
    # V_phi(y) <= min(V_phi(0), 1/|y|) for a spherical density of unit mass
    weighted_m = shell.capped_ball_norm(r_m, radius, family.potential_max())
    electron_bound = alpha * (family.n_electrons - 1) * (weighted_m * inner_n + outer_m * norm_n / radius)
    overlap_bound = inner_n * norm_m + outer_m * norm_n
    return {
        "separating_radius": radius,
        "inner_n": inner_n,
        "outer_m": outer_m,
        "support_m": support_m,
        "kinetic": kinetic,
        "kinetic_bound": kinetic_bound,
        "nuclear_bound": nuclear_bound,
        "electron_bound": electron_bound,
        "total_bound": kinetic_bound + nuclear_bound + electron_bound,
        "overlap_bound": overlap_bound,
    }


def exchange_bound(family: TrialFamily, params: CouplingParams, m: int, n: int) -> float:
    """
    |<H~(phi (x) L+ psi_m), T(phi (x) L+ psi_n)>| <=
    (||(D-1) L+ psi_m|| + 2 alpha (Z + N - 1) ||grad psi_m||)
    (||L+ psi_n||_{B(R_n/2)} + ||phi||_{|x| > R_n/4}).
    """
    shell = family.shell
    r_m, r_n = family.scales[m - 1], family.scales[n - 1]
    first = shell.kinetic_residual(r_m) + 2.0 * params.alpha * (params.z + family.n_electrons - 1) * np.sqrt(
        shell.gradient_norm2()
    ) / r_m
    second = shell.ball_norm(r_n, 0.5 * r_n) + np.sqrt(family.rho_mass(lo=0.25 * r_n))
    return float(first * second)


def phi_overlap_bound(family: TrialFamily, m: int) -> float:
    """|<phi, L+ psi_m>| <= ||phi||_{|x| >= R_m/2} ||L+ psi_m|| + ||L+ psi_m||_{B(R_m/2)}."""
    shell = family.shell
    r_m = family.scales[m - 1]
    return float(
        np.sqrt(family.rho_mass(lo=0.5 * r_m)) * np.sqrt(shell.lambda_norm2(r_m)) + shell.ball_norm(r_m, 0.5 * r_m)
    )


def rayleigh_bounds(family: TrialFamily, params: CouplingParams, diagonals: Sequence[float]) -> Dict[str, float]:
    """
    Upper bounds on <H~ Psi, Psi> / ||Psi||^2 over the antisymmetrized family
    (N = 2): the best single shell, and the whole Q-dimensional span.
    """
    q = family.count
    shell = family.shell
    n_el = family.n_electrons
    pair_n = n_el * (n_el - 1) / 2.0
    effective, norm_lo, norm_hi, singles = [], [], [], []
    offdiag = {}
    for m in range(1, q + 1):
        for n in range(m + 1, q + 1):
            offdiag[(m, n)] = offdiagonal_terms(family, params, m, n)
    for m in range(1, q + 1):
        exch = [exchange_bound(family, params, m, n) for n in range(1, q + 1)]
        direct = sum(offdiag[tuple(sorted((m, n)))]["total_bound"] for n in range(1, q + 1) if n != m)
        overlap = sum(
            phi_overlap_bound(family, m) * phi_overlap_bound(family, n)
            + (offdiag[tuple(sorted((m, n)))]["overlap_bound"] if n != m else 0.0)
            for n in range(1, q + 1)
        )
        g2 = shell.lambda_norm2(family.scales[m - 1])
        effective.append(n_el * diagonals[m - 1] + pair_n * sum(exch) + n_el * direct)
        norm_lo.append(n_el * (g2 - overlap))
        norm_hi.append(n_el * (g2 + overlap))
        single_norm = n_el * (g2 - phi_overlap_bound(family, m) ** 2)
        singles.append((n_el * diagonals[m - 1] + n_el * exch[m - 1]) / single_norm)
    if all(e < 0.0 for e in effective):
        span = max(e / hi for e, hi in zip(effective, norm_hi))
    else:
        span = max(e / lo for e, lo in zip(effective, norm_lo))
    return {
        "best_single": float(min(singles)),
        "span": float(span),
        "effective": [float(e) for e in effective],
        "max_offdiag_bound": float(max((v["total_bound"] for v in offdiag.values()), default=0.0)),
    }


def offdiagonal_envelope(
    family: TrialFamily,
    params: CouplingParams,
    r_fit: Sequence[float] = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
) -> Dict[str, float]:
    """Fit log(total bound) = log C - delta R for the (1, 2) pair across base scales."""
    if family.count < 2:
        raise DomainError("need at least two shells for off-diagonal terms")
    r_fit = np.asarray(sorted(r_fit), dtype=np.float64)
    terms = [offdiagonal_terms(family.with_base(r), params, 1, 2) for r in r_fit]
    totals = np.array([t["total_bound"] for t in terms])
    kinetic = [t["kinetic"] for t in terms]
    slope, intercept = np.polyfit(r_fit, np.log(totals), 1)
    fitted = np.exp(intercept + slope * r_fit)
    return {
        "r_fit": r_fit.tolist(),
        "totals": totals.tolist(),
        "kinetic": [float(k) for k in kinetic],
        "constant": float(np.exp(intercept)),
        "rate": float(-slope),
        "max_log_residual": float(np.max(np.abs(np.log(totals / fitted)))),
    }


# =============================================================================
# Reports
# =============================================================================

def certified_diagonal(family: TrialFamily, params: CouplingParams) -> List[float]:
    return [diagonal_terms(family, params, m)[1]["diagonal"] for m in range(1, family.count + 1)]


def negativity_radius(family: TrialFamily, params: CouplingParams, start: Optional[float] = None) -> float:
    """
    Smallest base R = start * 2^j at which every certified diagonal is negative,
    the span bound is negative and the best single quotient clears -alpha / (24 R_Q).
    """
    r = float(start if start is not None else family.base_r)
    for _ in range(MAX_DOUBLINGS):
        trial = family.with_base(r)
        certified = certified_diagonal(trial, params)
        if all(value < 0.0 for value in certified):
            diagonals = [diagonal_terms(trial, params, m)[0]["diagonal"] for m in range(1, trial.count + 1)]
            rayleigh = rayleigh_bounds(trial, params, diagonals)
            target = -params.alpha / (24.0 * trial.scales[-1])
            if rayleigh["span"] < 0.0 and rayleigh["best_single"] < target:
                logger.info("certified negativity from base R = %.6g (Z = %g)", r, params.z)
                return r
        r *= 2.0
    raise DomainError(f"no negative certified bound up to R = {r:.3e}")


def trial_energy_report(
    family: TrialFamily,
    params: CouplingParams,
    require_negative: bool = False,
    r_fit: Optional[Sequence[float]] = None,
) -> LemmaReport:
    """
    Diagonal pieces against their bounds, the leading 1/R_m coefficient,
    the off-diagonal exponential envelope and (optionally) the negativity of
    the Rayleigh quotient on the family.
    """
    if params.z != family.z:
        raise DomainError(f"family built for Z = {family.z}, params have Z = {params.z}")
    info = get_lemma_info("trial_energy")
    alpha = params.alpha
    rows, margins = [], {}
    diagonals = []
    for m in range(1, family.count + 1):
        measured, bound = diagonal_terms(family, params, m)
        scale = measured["scale"]
        unit = alpha / scale
        diagonals.append(measured["diagonal"])
        for key in ("kinetic", "nuclear", "i1", "i2", "i3", "diagonal", "kinetic_residual"):
            margin = (bound[key] - measured[key]) / unit
            margins[f"{key}_{m}"] = min(margins.get(f"{key}_{m}", np.inf), margin)
        coefficient = measured["diagonal"] / unit
        bound_coefficient = bound["diagonal"] / unit
        margins[f"leading_{m}"] = bound_coefficient - coefficient
        rows.append({"m": m, **measured, "leading": bound["leading"], "leading_coefficient": coefficient,
                     "bound_coefficient": bound_coefficient, "certified": bound["diagonal"]})

    envelope = offdiagonal_envelope(family, params, r_fit) if r_fit is not None else None
    if envelope is not None:
        margins["offdiag_rate"] = envelope["rate"]

    rayleigh = rayleigh_bounds(family, params, diagonals)
    r_top = family.scales[-1]
    target = -alpha / (24.0 * r_top)
    if require_negative:
        margins["span_negative"] = -rayleigh["span"] * r_top / alpha
        margins["best_gap"] = (target - rayleigh["best_single"]) * r_top / alpha

    worst = min(margins, key=margins.get)
    notes = [
        f"tightest: {worst}",
        "off-diagonal balls use the midpoint of the gap between neighbouring shells",
    ]
    report = make_report(
        "trial_energy",
        inputs={"n": family.n_electrons, "z": params.z, "alpha": alpha, "r": family.base_r, "q": family.count,
                "require_negative": require_negative},
        measured={"shells": rows, "rayleigh": rayleigh, "envelope": envelope, "e1": family.e1},
        bound={"target_gap": target},
        measured_value=rayleigh["best_single"],
        bound_value=target,
        margin=margins[worst],
        slack=float(info.get("slack", 0.0)),
        notes=notes,
    )
    logger.info("trial family Z=%g R=%.4g: best quotient %.4e pass=%s", params.z, family.base_r,
                rayleigh["best_single"], report.passed)
    return report
