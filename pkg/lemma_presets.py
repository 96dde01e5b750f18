#!/usr/bin/env python3
"""
Lemma presets: descriptions, default parameters, slacks and frozen constants
"""

# --- one entry per lemma id used in reports ---
LEMMA_DESCRIPTIONS = {
    "dirac_symbols": {
        "description": "Projector symbol is a Hermitian idempotent of trace 2 commuting with alpha.p + beta",
        "defaults": {"n_samples": 1000, "seed": 0},
        "slack": 1e-13,
    },
    "bessel_accuracy": {
        "description": "K0, K1 against the integral-representation oracle; derivative identities",
        "defaults": {"z_min": 1e-4, "z_max": 30.0, "n_points": 40},
        "slack": 1e-10,
    },
    "projector_invariants": {
        "description": "Fourier projector is idempotent, fixes positive plane waves and preserves Parseval",
        "defaults": {"grid_n": 16, "box_l": 10.0},
        "slack": 1e-12,
    },
    "dual_representation": {
        "description": "Kernel and Fourier forms of the positive projector agree on compact bumps",
        "defaults": {"grid_n": 48, "box_l": 40.0, "n_bumps": 10, "epsilon_cells": [1.0, 2.0, 4.0]},
        "slack": 5e-2,
    },
    "decay_lemma": {
        "description": "Projected field outside the support is bounded by G(d)|Omega|^(1/2)||f||",
        "defaults": {"grid_n": 32, "box_l": 40.0, "n_fields": 10, "n_points": 50},
        "slack": 1e-9,
    },
    "truncation_uniform": {
        "description": "Truncated principal-value convolutions stay uniformly bounded in epsilon",
        "defaults": {
            "grid_n": 32,
            "box_l": 24.0,
            "epsilon_cells": [1.0, 2.0, 4.0, 10.0],
            "symbol_epsilons": [1e-3, 2e-3, 5e-3, 1e-2],
        },
        "slack": 0.0,
        "uniform_bound": 1.0,
        "max_spread": 0.10,
    },
    "commutator_scaling": {
        "description": "||[chi(./R), L+]|| decays like 1/R and stays below the kernel-envelope constant",
        "defaults": {"grid_n": 32, "box_l": 80.0, "r_values": [4.0, 8.0, 16.0], "n_probes": 2},
        "slack": 0.5,
    },
    "commutator_smoothing": {
        "description": "H1 norm of the commutator image controlled by (sup grad + sup hess) ||f||",
        "defaults": {"grid_n": 32, "box_l": 40.0, "n_cases": 20},
        "slack": 0.5,
        "frozen_constant": None,
    },
    "multiplier": {
        "description": "Multiplication by a cutoff is bounded on H^(1/2) by ||chi||_inf + ||grad chi||_inf",
        "defaults": {"grid_n": 32, "box_l": 30.0, "n_fields": 5},
        "slack": 0.05,
    },
    "kato": {
        "description": "Kato inequality <|x|^-1 f, f> <= (pi/2) <|p| f, f>",
        "defaults": {"grid_n": 32, "box_l": 20.0, "n_fields": 10},
        "slack": 0.05,
    },
    "semiboundedness": {
        "description": "One-particle Brown-Ravenhall form bounded below by (1 - alpha Z) on the L+ range",
        "defaults": {"grid_n": 24, "box_l": 10.0, "n_fields": 100, "z_values": [20.0, 60.0, 100.0]},
        "slack": 0.01,
    },
    "ground_state": {
        "description": "Lowest eigenvalue of the projected one-particle operator lies in [1 - alpha Z, 1)",
        "defaults": {
            "grid_n": 48,
            "box_orbitals": 12.0,
            "z_values": [1.0, 20.0, 50.0, 90.0],
            "refine_z": 50.0,
            "refine_grid_n": 64,
        },
        "slack": 0.0,
        "max_drift": 1e-3,
    },
    "hartree": {
        "description": "Coulomb potential of a narrow charge approaches 1/|x| and stays non-negative",
        "defaults": {"grid_n": 48, "box_l": 20.0, "sigma": 0.6},
        "slack": 0.02,
    },
    "two_particle": {
        "description": "Two-particle form bounded below by 2(1 - alpha Z); interaction is positive",
        "defaults": {"grid_n": 24, "box_l": 12.0},
        "slack": 0.02,
    },
    "control": {
        "description": "Two-particle form controls the |D| norms of the factors with c >= 1 - (pi/2) alpha Z",
        "defaults": {"grid_n": 24, "box_l": 12.0},
        "slack": 0.0,
    },
    "weyl_residual": {
        "description": "Term-by-term bounds on the Weyl residual at one shell scale",
        "defaults": {"grid_n": 64, "box_l": 160.0, "z": 10.0},
        "slack": 0.05,
        "absolute_slack": 1e-8,
    },
    "weyl_convergence": {
        "description": "Weyl residual proxies shrink under shell doubling; energy approaches E1 + lambda",
        "defaults": {"lambdas": [1.0, 1.2], "r_values": [8.0, 16.0, 32.0], "grid_n": 64, "box_l": 160.0, "z": 10.0},
        "slack": 0.05,
    },
    "antisym_overlap": {
        "description": "Antisymmetrized norm stays bounded away from zero; indicator-split overlap bound",
        "defaults": {"min_norm": 0.9},
        "slack": 1e-12,
    },
    "partition": {
        "description": "Smooth partition with sum chi_a^2 = 1 and derivatives of order 1/R, 1/R^2",
        "defaults": {"n_particles": 2, "n_samples": 10000, "n_derivative_samples": 1500},
        "slack": 1e-10,
        "halving_tolerance": 0.2,
    },
    "localization": {
        "description": "Localization error of the one-particle form decays at least like 1/R",
        "defaults": {"grid_n": 32, "r_values": [0.02, 0.04, 0.08], "n_fields": 4},
        "slack": 0.0,
        "min_ratio": 1.6,
        "max_ratio": 2.6,
        "fit_slack": 1.5,
        "frozen_constant": None,
    },
    "fourier_mass": {
        "description": "Functions orthogonal to the low sine modes keep half their Fourier mass outside W_M",
        "defaults": {"dim": 1, "r": 1.0, "m": 2.0, "n_random": 200},
        "slack": 0.0,
    },
    "hard_part": {
        "description": "Constants M, L of the hard part and the chain inequality on localized states",
        "defaults": {"r": 1.0, "grid_n": 64, "box_l": 8.0, "n_states": 4, "epsilon": 0.1},
        "slack": 0.05,
    },
    "trial_energy": {
        "description": "Trial shells push the two-particle energy below E1 + 1",
        "defaults": {"n": 2, "q": 3, "r_values": [8.0, 16.0, 32.0], "r_fit": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]},
        "slack": 1e-6,
    },
}


def get_lemma_info(lemma_id):
    """Get lemma information including description, defaults and slack"""
    if lemma_id in LEMMA_DESCRIPTIONS:
        return LEMMA_DESCRIPTIONS[lemma_id]
    else:
        # Default for ids without a preset
        return {
            "description": "Custom numerical check",
            "defaults": {},
            "slack": 0.0,
        }


def get_default(lemma_id, key, fallback=None):
    """Default parameter of a lemma, or fallback"""
    return get_lemma_info(lemma_id).get("defaults", {}).get(key, fallback)


def get_slack(lemma_id):
    return float(get_lemma_info(lemma_id).get("slack", 0.0))


def list_lemmas():
    """Lemma ids with their one-line descriptions"""
    return [(name, info["description"]) for name, info in sorted(LEMMA_DESCRIPTIONS.items())]
