# models/dirac_core.py
"""
Dirac matrices in the standard representation and the pointwise
momentum-space symbols of the free Dirac operator and of the positive
spectral projector.

UNITS: hbar = c = m = 1; momenta in inverse reduced Compton wavelengths.

    D(p)   = alpha . p + beta                      eigenvalues +-sqrt(1 + |p|^2)
    L+(p)  = 1/2 + (alpha . p + beta) / (2 sqrt(1 + |p|^2))
"""
from dataclasses import dataclass
import logging
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from backend.errors import SamplingError

logger = logging.getLogger(__name__)

ArrayC = NDArray[np.complex128]
ArrayR = NDArray[np.float64]

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)


@dataclass(frozen=True)
class DiracMatrices:
    alpha1: ArrayC
    alpha2: ArrayC
    alpha3: ArrayC
    beta: ArrayC

    @property
    def alphas(self) -> ArrayC:
        """The three alpha matrices stacked along axis 0, shape (3, 4, 4)."""
        return np.stack([self.alpha1, self.alpha2, self.alpha3])


@dataclass(frozen=True)
class MomentumSymbol:
    p: ArrayR
    matrix: ArrayC

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


def dirac_matrices() -> DiracMatrices:
    """
    Exact alpha_k = [[0, sigma_k], [sigma_k, 0]] and beta = diag(1, 1, -1, -1).
    Built once and cached on the function.
    """
    if not hasattr(dirac_matrices, "cached"):
        zero = np.zeros((2, 2), dtype=np.complex128)
        alphas = [np.block([[zero, s], [s, zero]]) for s in PAULI]
        beta = np.diag([1.0, 1.0, -1.0, -1.0]).astype(np.complex128)
        for m in alphas + [beta]:
            m.setflags(write=False)
        dirac_matrices.cached = DiracMatrices(alphas[0], alphas[1], alphas[2], beta)
    return dirac_matrices.cached


def _as_momentum(p) -> ArrayR:
    vec = np.asarray(p, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"momentum must be finite, got {vec}")
    return vec


def dirac_energy(p) -> ArrayR:
    """sqrt(1 + |p|^2) over the last axis of p."""
    p = np.asarray(p, dtype=np.float64)
    return np.sqrt(1.0 + np.sum(p * p, axis=-1))


def free_dirac_symbol(p) -> MomentumSymbol:
    vec = _as_momentum(p)
    mats = dirac_matrices()
    matrix = np.einsum("k,kab->ab", vec, mats.alphas) + mats.beta
    return MomentumSymbol(p=vec, matrix=matrix)


def lambda_symbol(p) -> MomentumSymbol:
    vec = _as_momentum(p)
    free = free_dirac_symbol(vec).matrix
    energy = float(dirac_energy(vec))
    matrix = 0.5 * np.eye(4, dtype=np.complex128) + free / (2.0 * energy)
    return MomentumSymbol(p=vec, matrix=matrix)


def positive_eigenvector(p, seed: Optional[int] = None) -> ArrayC:
    """
    Unit vector u with L+(p) u = u, i.e. (alpha . p + beta) u = sqrt(1+|p|^2) u.

    A seeded random complex 4-vector is projected and normalized, so the
    result is reproducible for a fixed seed.
    """
    projector = lambda_symbol(p).matrix
    rng = np.random.default_rng(seed)
    # rank 2 projector: a random vector has a nonzero image almost surely
    for _ in range(16):
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        u = projector @ v
        norm = np.linalg.norm(u)
        if norm > 1e-8:
            return u / norm
    raise SamplingError("could not draw a vector with nonzero positive-energy part")


# =============================================================================
# Grid-level application (pointwise in momentum space)
# =============================================================================

def apply_free_symbol(p_grid: ArrayR, spinors: ArrayC) -> ArrayC:
    """(alpha . p + beta) v at every point; p_grid (..., 3), spinors (..., 4)."""
    mats = dirac_matrices()
    out = np.einsum("kab,...k,...b->...a", mats.alphas, p_grid, spinors, optimize=True)
    out += np.einsum("ab,...b->...a", mats.beta, spinors, optimize=True)
    return out


def apply_lambda_symbol(p_grid: ArrayR, spinors: ArrayC) -> ArrayC:
    """L+(p) v at every point."""
    energy = dirac_energy(p_grid)[..., None]
    return 0.5 * spinors + apply_free_symbol(p_grid, spinors) / (2.0 * energy)


def apply_beta(spinors: ArrayC) -> ArrayC:
    out = spinors.copy()
    out[..., 2:] *= -1.0
    return out


def symbol_invariant_residuals(n_samples: int = 1000, seed: int = 0, scale: float = 10.0) -> dict:
    """
    Worst residuals of the projector-symbol identities over random momenta:
    idempotency, hermiticity, trace 2, commutation with the free symbol,
    and the +-sqrt(1+|p|^2) spectrum of the free symbol.
    """
    rng = np.random.default_rng(seed)
    worst = {"idempotency": 0.0, "hermiticity": 0.0, "trace": 0.0, "commutator": 0.0, "spectrum": 0.0}
    for _ in range(n_samples):
        p = rng.normal(scale=scale, size=3)
        lam = lambda_symbol(p).matrix
        free = free_dirac_symbol(p).matrix
        energy = float(dirac_energy(p))
        worst["idempotency"] = max(worst["idempotency"], float(np.max(np.abs(lam @ lam - lam))))
        worst["hermiticity"] = max(worst["hermiticity"], float(np.max(np.abs(lam - lam.conj().T))))
        worst["trace"] = max(worst["trace"], abs(complex(np.trace(lam)) - 2.0))
        worst["commutator"] = max(worst["commutator"], float(np.max(np.abs(lam @ free - free @ lam))))
        eig = np.linalg.eigvalsh(free)
        expected = np.array([-energy, -energy, energy, energy])
        worst["spectrum"] = max(worst["spectrum"], float(np.max(np.abs(eig - expected))) / energy)
    logger.debug("symbol residuals over %d momenta: %s", n_samples, worst)
    return worst
