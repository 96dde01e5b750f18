# backend/lemma_jobs.py
"""
Module-level lemma checks and the job runner that executes them.

Each check takes the coupling, a seed and optional overrides of its preset
defaults, and returns a list of LemmaReports.  Unless stated otherwise the
margin is -max(error_k / tolerance_k) * slack, so a report passes exactly
when every error is within its tolerance.
"""
from concurrent.futures import ThreadPoolExecutor
import logging
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from backend.errors import DomainError
from backend.reports import LemmaReport, make_report, merge_reports
from backend.theorem_lab import fourier_mass_check, hard_part_constants, localization_sweep, partition_report
from lab_config import SEED_DEFAULT, calibration_seed, get_num_threads
from lemma_presets import get_lemma_info, get_slack
from models.besselk import bessel_k0, bessel_k1, branch_mismatch, k_integral_oracle
from models.dirac_core import positive_eigenvector, symbol_invariant_residuals
from pipeline.br_hamiltonian import (
    CouplingParams,
    SlaterState,
    SpectralResult,
    abs_momentum_form,
    br_one_particle_form,
    control_lemma_ratio,
    coulomb_form,
    ground_state_one_particle,
    hartree_potential,
    kinetic_form,
    semibounded_quotients,
    two_particle_energy_form,
)
from pipeline.field_utils import (
    SpinorField,
    grid_spacing,
    make_grid,
    plane_wave,
    radius_grid,
    random_compact_field,
    random_smooth_field,
    snap_to_dual_lattice,
)
from pipeline.lattice import difference_vectors, unused_slot_mask
from pipeline.projector_ops import (
    apply_lambda_fourier,
    apply_lambda_kernel,
    apply_lambda_kernel_extrapolated,
    commutator_apply,
    commutator_l2_constant,
    decay_bound,
    estimate_operator_norm,
    h1_norm,
    kernel_at_points,
    kernel_profiles,
    make_cutoff,
    multiplier_ratio,
    pv_operator_norm,
    random_field,
    truncated_pv_apply,
)

logger = logging.getLogger(__name__)

JobFn = Callable[..., List[LemmaReport]]

DERIVATIVE_TOLERANCE = 1e-6
BRANCH_TOLERANCE = 1e-9
SWAP_TOLERANCE = 1e-10
PAIR_TOLERANCE = 1e-8
BINDING_TOLERANCE = 0.10


def _defaults(lemma_id: str, overrides: Dict) -> Dict:
    merged = dict(get_lemma_info(lemma_id).get("defaults", {}))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


def _scaled_margin(errors: Dict[str, float], tolerances: Dict[str, float], slack: float) -> Tuple[float, str]:
    ratios = {key: errors[key] / tolerances[key] for key in errors}
    worst = max(ratios, key=ratios.get)
    return -slack * ratios[worst], worst


def kramers_partner(f: SpinorField) -> SpinorField:
    """(a, b, c, d) -> (-b*, a*, -d*, c*); pointwise orthogonal to f."""
    d = np.asarray(f.data)
    out = np.stack([-np.conj(d[..., 1]), np.conj(d[..., 0]), -np.conj(d[..., 3]), np.conj(d[..., 2])], axis=-1)
    return f.with_data(out)


# =============================================================================
# Symbols and special functions
# =============================================================================

def dirac_symbols_check(params: CouplingParams, seed: Optional[int] = None, **overrides) -> List[LemmaReport]:
    cfg = _defaults("dirac_symbols", overrides)
    seed = cfg.get("seed", 0) if seed is None else seed
    slack = get_slack("dirac_symbols")
    worst = symbol_invariant_residuals(int(cfg["n_samples"]), seed)
    tolerances = {key: slack for key in worst}
    tolerances["spectrum"] = 10.0 * slack
    margin, key = _scaled_margin(worst, tolerances, slack)
    return [make_report(
        "dirac_symbols",
        inputs={"n_samples": cfg["n_samples"], "seed": seed},
        measured=worst,
        bound=tolerances,
        measured_value=worst[key],
        bound_value=tolerances[key],
        margin=margin,
        slack=slack,
        notes=[f"tightest: {key}"],
    )]


def bessel_accuracy_check(params: CouplingParams, seed: Optional[int] = None, **overrides) -> List[LemmaReport]:
    """K0, K1 against the integral oracle; K0' = -K1 and K1' = -K0 - K1/z by central differences."""
    cfg = _defaults("bessel_accuracy", overrides)
    slack = get_slack("bessel_accuracy")
    z = np.geomspace(float(cfg["z_min"]), float(cfg["z_max"]), int(cfg["n_points"]))
    rel0 = max(abs(bessel_k0(x) / k_integral_oracle(0, x) - 1.0) for x in z)
    rel1 = max(abs(bessel_k1(x) / k_integral_oracle(1, x) - 1.0) for x in z)
    deriv = 0.0
    for x in z[z >= 1e-2]:
        step = 1e-5 * x
        d0 = (bessel_k0(x + step) - bessel_k0(x - step)) / (2.0 * step)
        d1 = (bessel_k1(x + step) - bessel_k1(x - step)) / (2.0 * step)
        k0, k1 = bessel_k0(x), bessel_k1(x)
        deriv = max(deriv, abs(d0 + k1) / k1, abs(d1 + k0 + k1 / x) / (k0 + k1 / x))
    errors = {"k0": rel0, "k1": rel1, "derivatives": deriv, "branch": branch_mismatch()}
    tolerances = {"k0": slack, "k1": slack, "derivatives": DERIVATIVE_TOLERANCE, "branch": BRANCH_TOLERANCE}
    margin, key = _scaled_margin(errors, tolerances, slack)
    return [make_report(
        "bessel_accuracy",
        inputs={"z_min": cfg["z_min"], "z_max": cfg["z_max"], "n_points": cfg["n_points"]},
        measured=errors,
        bound=tolerances,
        measured_value=errors[key],
        bound_value=tolerances[key],
        margin=margin,
        slack=slack,
        notes=[f"tightest: {key}"],
    )]


# =============================================================================
# Projector representations
# =============================================================================

def projector_invariants_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """Idempotency, plane-wave eigenstates, norm contraction and Parseval on a small grid."""
    cfg = _defaults("projector_invariants", overrides)
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    slack = get_slack("projector_invariants")
    rng = np.random.default_rng(seed)
    template = SpinorField.zeros(grid_n, box_l)
    f = random_field(template, rng)
    once = apply_lambda_fourier(f)
    twice = apply_lambda_fourier(once)
    k = snap_to_dual_lattice(rng.normal(size=3), box_l)
    wave = plane_wave(grid_n, box_l, k, positive_eigenvector(k, seed))
    errors = {
        "idempotency": (twice - once).norm() / once.norm(),
        "plane_wave": (apply_lambda_fourier(wave) - wave).norm() / wave.norm(),
        "contraction": max(once.norm() - f.norm(), 0.0),
        "parseval": abs(f.to_fourier().norm() - f.norm()) / f.norm(),
        "round_trip": (f.to_fourier().to_spatial() - f).norm() / f.norm(),
    }
    margin, key = _scaled_margin(errors, {name: slack for name in errors}, slack)
    return [make_report(
        "projector_invariants",
        inputs={"grid_n": grid_n, "box_l": box_l, "seed": seed},
        measured=errors,
        bound={"tolerance": slack},
        measured_value=errors[key],
        bound_value=slack,
        margin=margin,
        slack=slack,
        notes=[f"tightest: {key}"],
    )]


def dual_representation_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """
    Kernel vs Fourier application on compact bumps; the Richardson value from
    the two smallest epsilons must be within tolerance and the raw error must
    shrink as epsilon decreases.
    """
    cfg = _defaults("dual_representation", overrides)
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    slack = get_slack("dual_representation")
    h = grid_spacing(grid_n, box_l)
    epsilons = sorted(float(c) * h for c in cfg["epsilon_cells"])
    rng = np.random.default_rng(seed)
    extrapolated, monotone = [], []
    for _ in range(int(cfg["n_bumps"])):
        f = random_compact_field(grid_n, box_l, rng, 0.2 * box_l)
        reference = apply_lambda_fourier(f)
        scale = reference.norm()
        raw = [(apply_lambda_kernel(f, eps) - reference).norm() / scale for eps in epsilons]
        monotone.append(min(b - a for a, b in zip(raw, raw[1:])))
        extrapolated.append((apply_lambda_kernel_extrapolated(f, epsilons) - reference).norm() / scale)
    worst = max(extrapolated)
    margin = -worst if min(monotone) >= 0.0 else min(-worst, min(monotone) - slack)
    return [make_report(
        "dual_representation",
        inputs={"grid_n": grid_n, "box_l": box_l, "n_bumps": cfg["n_bumps"], "epsilons": epsilons, "seed": seed},
        measured={"extrapolated_errors": extrapolated, "monotone_gaps": monotone},
        bound={"tolerance": slack},
        measured_value=worst,
        bound_value=slack,
        margin=margin,
        slack=slack,
        notes=["raw error not monotone in epsilon"] if min(monotone) < 0.0 else [],
    )]


def exterior_points(rng: np.random.Generator, n_points: int, r_lo: float, r_hi: float) -> np.ndarray:
    direction = rng.normal(size=(n_points, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * rng.uniform(r_lo, r_hi, size=(n_points, 1))


def decay_lemma_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """|(L+ f)(x)| <= G(d) |Omega|^1/2 ||f|| at points outside the support."""
    cfg = _defaults("decay_lemma", overrides)
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    slack = get_slack("decay_lemma")
    rng = np.random.default_rng(seed)
    support = 0.15 * box_l
    excess, ratios = [], []
    for _ in range(int(cfg["n_fields"])):
        f = random_compact_field(grid_n, box_l, rng, support)
        points = exterior_points(rng, int(cfg["n_points"]), support + 1.0, 0.45 * box_l)
        values = np.linalg.norm(kernel_at_points(f, points), axis=1)
        bounds = decay_bound(f, points)
        excess.append(float(np.max(values - bounds)))
        ratios.append(float(np.max(values / bounds)))
    worst = max(excess)
    return [make_report(
        "decay_lemma",
        inputs={"grid_n": grid_n, "box_l": box_l, "n_fields": cfg["n_fields"], "n_points": cfg["n_points"], "seed": seed},
        measured={"max_excess": worst, "max_ratio": max(ratios)},
        bound={"absolute_slack": slack},
        measured_value=worst,
        bound_value=0.0,
        margin=-worst,
        slack=slack,
    )]


def young_bound(grid_n: int, h: float, epsilon: float) -> float:
    """h^3 sum_{|d| >= eps} c(|d|) |d|: bound on ||T_eps|| from Young's inequality."""
    d = difference_vectors(grid_n, h)
    r = np.linalg.norm(d, axis=-1)
    live = (r >= epsilon) & ~unused_slot_mask(grid_n)
    _, _, c = kernel_profiles(r[live])
    return float(h**3 * np.sum(c * r[live]))


def truncation_uniform_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """
    Uniform boundedness of the truncated principal-value term.

    Lattice: ||T_eps f|| / ||f|| over a decade of epsilons above the grid
    spacing, each under the Young bound. Continuum: ||T_eps|| = sup |h_eps|
    over a decade of epsilons below the Compton length varies by less than
    max_spread and stays under the uniform constant.
    """
    cfg = _defaults("truncation_uniform", overrides)
    info = get_lemma_info("truncation_uniform")
    uniform = float(info.get("uniform_bound", 1.0))
    max_spread = float(info.get("max_spread", 0.10))
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    h = grid_spacing(grid_n, box_l)
    epsilons = sorted(float(c) * h for c in cfg["epsilon_cells"])
    symbol_epsilons = sorted(float(e) for e in cfg["symbol_epsilons"])
    rng = np.random.default_rng(seed)
    ball = (radius_grid(grid_n, box_l) < 0.22 * box_l).astype(np.float64)
    template = SpinorField.zeros(grid_n, box_l)
    fields = [random_field(template, rng).scale(ball).normalized() for _ in range(2)]
    fields.append(random_compact_field(grid_n, box_l, rng, 0.22 * box_l))
    ratios, youngs = [], []
    for eps in epsilons:
        ratios.append(max(truncated_pv_apply(f, eps).norm() / f.norm() for f in fields))
        youngs.append(young_bound(grid_n, h, eps))
    lattice_spread = (max(ratios) - min(ratios)) / max(ratios)
    norms = [pv_operator_norm(eps)[0] for eps in symbol_epsilons]
    spread = (max(norms) - min(norms)) / max(norms)
    margins = {f"young_{i}": (y - r) / y for i, (r, y) in enumerate(zip(ratios, youngs))}
    margins["uniform"] = uniform - max(max(ratios), max(norms))
    margins["spread"] = max_spread - spread
    worst = min(margins, key=margins.get)
    return [make_report(
        "truncation_uniform",
        inputs={"grid_n": grid_n, "box_l": box_l, "epsilons": epsilons, "symbol_epsilons": symbol_epsilons,
                "seed": seed},
        measured={"ratios": ratios, "lattice_spread": lattice_spread, "operator_norms": norms, "spread": spread},
        bound={"young": youngs, "uniform": uniform, "max_spread": max_spread, "limit": 0.5},
        measured_value=spread,
        bound_value=max_spread,
        margin=margins[worst],
        slack=get_slack("truncation_uniform"),
        notes=[f"tightest: {worst}", f"lattice ratio spread {lattice_spread:.3f} (grid-scale truncation)"],
    )]


# =============================================================================
# Commutator and multiplier
# =============================================================================

def commutator_scaling_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """||[chi(./R), L+]|| halves per doubling of R (within the preset factor) and obeys c ||grad chi||_inf."""
    cfg = _defaults("commutator_scaling", overrides)
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    factor = 1.0 + get_slack("commutator_scaling")
    r_values = sorted(float(r) for r in cfg["r_values"])
    template = SpinorField.zeros(grid_n, box_l)
    c_l2 = commutator_l2_constant()
    norms, references = [], []
    for r in r_values:
        chi = make_cutoff("ball", r, grid_n, box_l)
        op = lambda f, chi=chi: commutator_apply(chi, f)
        adjoint = lambda f, chi=chi: commutator_apply(chi, f).scale(-1.0)
        norms.append(estimate_operator_norm(op, int(cfg["n_probes"]), seed, template, adjoint=adjoint))
        references.append(c_l2 * chi.sup_grad)
    ratios = [a / b for a, b in zip(norms, norms[1:])]
    margins = {
        "halving_low": min(ratios) - 2.0 / factor,
        "halving_high": 2.0 * factor - max(ratios),
        "constant": min((ref - n) / ref for n, ref in zip(norms, references)),
    }
    worst = min(margins, key=margins.get)
    return [make_report(
        "commutator_scaling",
        inputs={"grid_n": grid_n, "box_l": box_l, "r_values": r_values, "n_probes": cfg["n_probes"], "seed": seed},
        measured={"norms": norms, "ratios": ratios},
        bound={"envelope": references, "c": c_l2, "factor": factor},
        measured_value=min(ratios),
        bound_value=2.0 / factor,
        margin=margins[worst],
        notes=[f"tightest: {worst}"],
    )]


def _smoothing_ratios(grid_n: int, box_l: float, n_cases: int, seed: Optional[int]) -> List[float]:
    rng = np.random.default_rng(seed)
    template = SpinorField.zeros(grid_n, box_l)
    scales = np.geomspace(0.08 * box_l, 0.3 * box_l, 5)
    ratios = []
    for i in range(n_cases):
        chi = make_cutoff("ball", float(scales[i % scales.size]), grid_n, box_l)
        f = random_field(template, rng)
        ratios.append(h1_norm(commutator_apply(chi, f)) / ((chi.sup_grad + chi.sup_hess) * f.norm()))
    return ratios


def commutator_smoothing_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """
    ||[chi, L+] f||_{H^1} / ((sup grad + sup hess) ||f||) under one constant C.
    C is the preset frozen_constant, or else the largest ratio of a calibration
    sweep on a disjoint seed stream; every checked case must stay under
    (1 + slack) C.
    """
    cfg = _defaults("commutator_smoothing", overrides)
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    info = get_lemma_info("commutator_smoothing")
    fit_slack = 1.0 + float(info.get("slack", 0.5))
    n_cases = int(cfg["n_cases"])
    frozen = cfg.get("frozen_constant", info.get("frozen_constant"))
    if frozen is None:
        constant = max(_smoothing_ratios(grid_n, box_l, n_cases, calibration_seed(seed)))
        source = "calibration sweep"
    else:
        constant = float(frozen)
        source = "preset"
    ratios = _smoothing_ratios(grid_n, box_l, n_cases, seed)
    limit = fit_slack * constant
    return [make_report(
        "commutator_smoothing",
        inputs={"grid_n": grid_n, "box_l": box_l, "n_cases": n_cases, "seed": seed},
        measured={"ratios": ratios, "max_ratio": max(ratios)},
        bound={"constant": constant, "limit": limit, "constant_source": source},
        measured_value=max(ratios),
        bound_value=limit,
        margin=(limit - max(ratios)) / limit,
        notes=[f"C = {constant:.6g} from {source}"],
    )]


def multiplier_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """||chi f||_{H^1/2} <= (||chi||_inf + ||grad chi||_inf) ||f||_{H^1/2}."""
    cfg = _defaults("multiplier", overrides)
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    rng = np.random.default_rng(seed)
    template = SpinorField.zeros(grid_n, box_l)
    margins, ratios = [], []
    for r in (0.05 * box_l, 0.1 * box_l, 0.2 * box_l):
        for kind in ("ball", "shell"):
            chi = make_cutoff(kind, r, grid_n, box_l)
            for _ in range(int(cfg["n_fields"])):
                ratio, reference = multiplier_ratio(chi, random_field(template, rng))
                ratios.append(ratio)
                margins.append((reference - ratio) / reference)
    return [make_report(
        "multiplier",
        inputs={"grid_n": grid_n, "box_l": box_l, "n_fields": cfg["n_fields"], "seed": seed},
        measured={"max_ratio": max(ratios)},
        bound={"reference": "||chi||_inf + ||grad chi||_inf"},
        measured_value=max(ratios),
        bound_value=1.0,
        margin=min(margins),
        slack=get_slack("multiplier"),
    )]


# =============================================================================
# One-particle forms
# =============================================================================

def kato_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """<|x|^-1 f, f> <= (pi/2) <|p| f, f> on random smooth fields."""
    cfg = _defaults("kato", overrides)
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    rng = np.random.default_rng(seed)
    margins, ratios = [], []
    for _ in range(int(cfg["n_fields"])):
        f = random_smooth_field(grid_n, box_l, rng, 0.1 * box_l, (0.04 * box_l, 0.1 * box_l))
        lhs = coulomb_form(f, 1.0)
        rhs = 0.5 * np.pi * abs_momentum_form(f)
        ratios.append(lhs / rhs)
        margins.append((rhs - lhs) / rhs)
    return [make_report(
        "kato",
        inputs={"grid_n": grid_n, "box_l": box_l, "n_fields": cfg["n_fields"], "seed": seed},
        measured={"ratios": ratios},
        bound={"constant": 0.5 * np.pi},
        measured_value=max(ratios),
        bound_value=1.0,
        margin=min(margins),
        slack=get_slack("kato"),
    )]


def semiboundedness_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """
    Minimum one-particle Rayleigh quotient over random L+-range fields against
    1 - alpha Z, and the form against ((Z_c - Z)/Z_c) <D L+ f, L+ f>; one report per Z.
    """
    cfg = _defaults("semiboundedness", overrides)
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    slack = get_slack("semiboundedness")
    reports = []
    for z in cfg["z_values"]:
        coupling = CouplingParams(alpha=params.alpha, z=float(z))
        rng = np.random.default_rng(seed)
        fields = [
            random_smooth_field(grid_n, box_l, rng, 0.15 * box_l, (0.03 * box_l, 0.2 * box_l))
            for _ in range(int(cfg["n_fields"]))
        ]
        quotients = semibounded_quotients(fields, coupling)
        lower = 1.0 - coupling.alpha_z
        kinetic_margins = []
        for f in fields[:10]:
            g = apply_lambda_fourier(f)
            floor = (coupling.z_c - coupling.z) / coupling.z_c * kinetic_form(g)
            kinetic_margins.append((br_one_particle_form(g, coupling) - floor) / kinetic_form(g))
        margin = min((min(quotients) - lower) / lower, min(kinetic_margins))
        reports.append(make_report(
            "semiboundedness",
            inputs={"z": float(z), "alpha": params.alpha, "grid_n": grid_n, "box_l": box_l,
                    "n_fields": cfg["n_fields"], "seed": seed},
            measured={"min_quotient": min(quotients), "min_kinetic_margin": min(kinetic_margins)},
            bound={"lower": lower},
            measured_value=min(quotients),
            bound_value=lower,
            margin=margin,
            slack=slack,
        ))
    return reports


def ground_state_box(params: CouplingParams, box_orbitals: float) -> float:
    """Box edge in Compton wavelengths from a size in orbital radii 1/(alpha Z)."""
    if not params.z > 0.0:
        raise DomainError("ground state needs Z > 0")
    return float(box_orbitals) / params.alpha_z


def ground_state_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """
    E1 inside [1 - alpha Z, 1) for every Z, monotone in Z, and for Z = 1 the
    binding energy within 10% of alpha^2 / 2. At refine_z the run is repeated
    on the finer refine_grid_n lattice and the drift of E1 is bounded by max_drift.
    """
    cfg = _defaults("ground_state", overrides)
    info = get_lemma_info("ground_state")
    grid_n = int(cfg["grid_n"])
    z_values = sorted(float(z) for z in cfg.get("z_values", [params.z]))
    energies, margins = [], []
    measured: Dict = {}
    for z in z_values:
        coupling = CouplingParams(alpha=params.alpha, z=z)
        result = ground_state_one_particle(coupling, grid_n, ground_state_box(coupling, cfg["box_orbitals"]), seed=seed)
        energies.append(result.e1)
        margins.append(min(result.e1 - (1.0 - coupling.alpha_z), 1.0 - result.e1) / coupling.alpha_z)
        if z == 1.0:
            binding = 1.0 - result.e1
            target = 0.5 * coupling.alpha**2
            margins.append(BINDING_TOLERANCE - abs(binding - target) / target)
    margins.extend(a - b for a, b in zip(energies, energies[1:]))
    measured["e1"] = energies
    refine_z = cfg.get("refine_z")
    refine_n = int(cfg.get("refine_grid_n") or 0)
    max_drift = float(info.get("max_drift", 1e-3))
    if refine_z is not None and float(refine_z) in z_values and refine_n > grid_n:
        coupling = CouplingParams(alpha=params.alpha, z=float(refine_z))
        fine = ground_state_one_particle(coupling, refine_n, ground_state_box(coupling, cfg["box_orbitals"]), seed=seed)
        drift = abs(fine.e1 - energies[z_values.index(float(refine_z))])
        logger.info("ground state at Z=%g drifts %.3e from %d^3 to %d^3", refine_z, drift, grid_n, refine_n)
        measured.update({"refinement_drift": drift, "refined_e1": fine.e1})
        margins.append((max_drift - drift) / max_drift)
    return [make_report(
        "ground_state",
        inputs={"z_values": z_values, "alpha": params.alpha, "grid_n": grid_n,
                "box_orbitals": cfg["box_orbitals"], "seed": seed,
                "refine_z": refine_z, "refine_grid_n": refine_n or None},
        measured=measured,
        bound={"lower": [1.0 - params.alpha * z for z in z_values], "upper": 1.0, "max_drift": max_drift},
        measured_value=min(energies),
        bound_value=1.0 - params.alpha * max(z_values),
        margin=min(margins),
        slack=get_slack("ground_state"),
    )]


def hartree_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """Unit Gaussian charge: potential close to 1/r beyond 5 sigma; non-negative everywhere."""
    cfg = _defaults("hartree", overrides)
    grid_n, box_l, sigma = int(cfg["grid_n"]), float(cfg["box_l"]), float(cfg["sigma"])
    slack = get_slack("hartree")
    x = make_grid(grid_n, box_l)
    r = np.linalg.norm(x, axis=-1)
    density = np.exp(-0.5 * (r / sigma) ** 2)
    density /= np.sum(density) * grid_spacing(grid_n, box_l) ** 3
    potential = hartree_potential(density, box_l)
    far = (r >= 5.0 * sigma) & (r <= 0.45 * box_l)
    far_error = float(np.max(np.abs(potential[far] * r[far] - 1.0)))
    negativity = float(max(-np.min(potential), 0.0) / np.max(potential))
    errors = {"far_field": far_error, "negativity": negativity}
    margin, key = _scaled_margin(errors, {"far_field": slack, "negativity": 1e-12}, slack)
    return [make_report(
        "hartree",
        inputs={"grid_n": grid_n, "box_l": box_l, "sigma": sigma, "convention": "isolated"},
        measured=errors,
        bound={"far_field": slack},
        measured_value=errors[key],
        bound_value=slack,
        margin=margin,
        slack=slack,
        notes=[f"tightest: {key}"],
    )]


# =============================================================================
# Two particles
# =============================================================================

def _two_particle_states(grid_n: int, box_l: float, rng: np.random.Generator, count: int) -> List[SlaterState]:
    states = []
    for _ in range(count):
        f = random_smooth_field(grid_n, box_l, rng, 0.15 * box_l, (0.05 * box_l, 0.15 * box_l))
        g = random_smooth_field(grid_n, box_l, rng, 0.15 * box_l, (0.05 * box_l, 0.15 * box_l))
        states.append(SlaterState.product(f, g))
    return states


def two_particle_check(
    params: CouplingParams,
    seed: Optional[int] = SEED_DEFAULT,
    ground: Optional[SpectralResult] = None,
    **overrides,
) -> List[LemmaReport]:
    """
    Lower bound 2(1 - alpha Z), positivity of the interaction, exchange
    symmetry and (given a ground state) the 2 E1 bound on Kramers pairs.
    """
    cfg = _defaults("two_particle", overrides)
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    slack = get_slack("two_particle")
    rng = np.random.default_rng(seed)
    lower = 2.0 * (1.0 - params.alpha_z)
    values, margins = [], {}
    for state in _two_particle_states(grid_n, box_l, rng, int(cfg.get("n_states", 3))):
        full = two_particle_energy_form(state, params)
        bare = two_particle_energy_form(state, params, include_interaction=False)
        swapped = two_particle_energy_form(state.swapped(), params)
        values.append(full)
        margins["lower"] = min(margins.get("lower", np.inf), (full - lower) / lower)
        margins["interaction"] = min(margins.get("interaction", np.inf), (full - bare) / abs(full))
        margins["swap"] = min(margins.get("swap", np.inf), -slack * abs(swapped - full) / (SWAP_TOLERANCE * abs(full)))
    measured = {"values": values}
    if ground is not None and ground.state is not None:
        coupling = CouplingParams(alpha=ground.alpha, z=ground.z)
        phi = ground.state
        pair = two_particle_energy_form(SlaterState.product(phi, kramers_partner(phi)), coupling)
        measured["kramers_pair"] = pair
        measured["e1"] = ground.e1
        margins["pair"] = slack * (pair - 2.0 * ground.e1) / (PAIR_TOLERANCE * abs(2.0 * ground.e1))
    worst = min(margins, key=margins.get)
    return [make_report(
        "two_particle",
        inputs={"z": params.z, "alpha": params.alpha, "grid_n": grid_n, "box_l": box_l, "seed": seed},
        measured=measured,
        bound={"lower": lower},
        measured_value=min(values),
        bound_value=lower,
        margin=margins[worst],
        slack=slack,
        notes=[f"tightest: {worst}"],
    )]


def control_check(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """
    <H2 Psi, Psi> >= c <(|D1| + |D2|) Psi, Psi> on projected product states,
    checked against the Kato floor c = 1 - (pi/2) alpha Z; the measured
    smallest ratio is published alongside.
    """
    cfg = _defaults("control", overrides)
    grid_n, box_l = int(cfg["grid_n"]), float(cfg["box_l"])
    rng = np.random.default_rng(seed)
    ratios = [control_lemma_ratio(state, params) for state in _two_particle_states(grid_n, box_l, rng, 4)]
    floor = 1.0 - 0.5 * np.pi * params.alpha_z
    if not floor > 0.0:
        raise DomainError(f"Kato floor 1 - (pi/2) alpha Z = {floor:.6f} is not positive")
    measured_c = min(ratios)
    return [make_report(
        "control",
        inputs={"z": params.z, "alpha": params.alpha, "grid_n": grid_n, "box_l": box_l, "seed": seed},
        measured={"ratios": ratios, "measured_c": measured_c},
        bound={"kato_floor": floor},
        measured_value=measured_c,
        bound_value=floor,
        margin=(measured_c - floor) / floor,
        slack=get_slack("control"),
        notes=[f"measured c = {measured_c:.6f}"],
    )]


# =============================================================================
# Theorem-lab wrappers
# =============================================================================

def partition_job(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    cfg = _defaults("partition", overrides)
    return [partition_report(int(cfg["n_particles"]), cfg.get("r_values", [1.0, 2.0, 4.0]), int(cfg["n_samples"]),
                             int(cfg["n_derivative_samples"]), seed)]


def localization_job(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    cfg = _defaults("localization", overrides)
    frozen = cfg.get("frozen_constant", get_lemma_info("localization").get("frozen_constant"))
    return [localization_sweep(params, cfg["r_values"], int(cfg["grid_n"]), int(cfg["n_fields"]), seed, frozen)]


def fourier_mass_job(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    cfg = _defaults("fourier_mass", overrides)
    reports = [fourier_mass_check(int(cfg["dim"]), float(cfg["r"]), float(cfg["m"]), int(cfg["n_random"]), seed)]
    if int(cfg["dim"]) == 1 and cfg.get("with_dim3", True):
        reports.append(fourier_mass_check(3, 0.1, 1.0, 20, seed))
    return reports


def hard_part_job(params: CouplingParams, seed: Optional[int] = SEED_DEFAULT, **overrides) -> List[LemmaReport]:
    """One-electron instance: the previous level is the empty atom, E_0 = 0."""
    cfg = _defaults("hard_part", overrides)
    return [hard_part_constants(params, 0.0, float(cfg["r"]), int(cfg["grid_n"]), float(cfg["box_l"]),
                                int(cfg["n_states"]), float(cfg["epsilon"]), seed=seed)]


LEMMA_JOBS: Dict[str, JobFn] = {
    "dirac_symbols": dirac_symbols_check,
    "bessel_accuracy": bessel_accuracy_check,
    "projector_invariants": projector_invariants_check,
    "dual_representation": dual_representation_check,
    "decay_lemma": decay_lemma_check,
    "truncation_uniform": truncation_uniform_check,
    "commutator_scaling": commutator_scaling_check,
    "commutator_smoothing": commutator_smoothing_check,
    "multiplier": multiplier_check,
    "kato": kato_check,
    "semiboundedness": semiboundedness_check,
    "ground_state": ground_state_check,
    "hartree": hartree_check,
    "two_particle": two_particle_check,
    "control": control_check,
    "partition": partition_job,
    "localization": localization_job,
    "fourier_mass": fourier_mass_job,
    "hard_part": hard_part_job,
}

SELFCHECK_JOBS = ("dirac_symbols", "bessel_accuracy", "projector_invariants")


def run_lemma_jobs(
    names: Iterable[str],
    params: CouplingParams,
    seed: Optional[int] = SEED_DEFAULT,
    overrides: Optional[Dict[str, Dict]] = None,
    max_workers: Optional[int] = None,
) -> List[LemmaReport]:
    """
    Run the named checks concurrently and merge the reports by lemma id.

    Jobs get their own pool: they submit kernel chunks to the shared lattice
    pool themselves.
    """
    names = list(names)
    unknown = [n for n in names if n not in LEMMA_JOBS]
    if unknown:
        raise DomainError(f"unknown lemma ids: {', '.join(unknown)}")
    overrides = overrides or {}
    workers = max_workers or min(len(names), get_num_threads()) or 1

    def run_one(name: str) -> List[LemmaReport]:
        logger.info("lemma %s: start", name)
        reports = LEMMA_JOBS[name](params, seed, **overrides.get(name, {}))
        logger.info("lemma %s: %s", name, "pass" if all(r.passed for r in reports) else "FAIL")
        return reports

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_one, names))
    return merge_reports(report for batch in results for report in batch)
