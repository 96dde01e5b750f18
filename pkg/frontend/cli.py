#!/usr/bin/env python3
"""
Batch command line for the Brown-Ravenhall lab

    python -m frontend.cli selfcheck
    python -m frontend.cli ground-state --z 50 --grid 48 --box 2.0
    python -m frontend.cli trial --z 2 --n 2 --r-sweep 8,16,32
    python -m frontend.cli lemmas --only kato,hartree
    python -m frontend.cli weyl --z 10 --lambdas 1.0,1.2
    python -m frontend.cli fourier-mass --dim 1 --r 1 --m 2

Every command writes <command>_reports.jsonl and <command>_summary.csv to the
output directory. Exit codes: 0 all checks pass, 2 configuration or usage
error, 3 eigensolver did not converge, 4 a check failed.
"""
import argparse
import csv
import json
import logging
from pathlib import Path
import sys
from typing import Callable, Dict, List, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from backend.errors import ConfigError, ConvergenceError, LabError
from backend.lemma_jobs import LEMMA_JOBS, SELFCHECK_JOBS, ground_state_box, run_lemma_jobs
from backend.radial_trial import build_trial_family, negativity_radius, trial_energy_report
from backend.reports import LemmaReport, all_passed, config_hash, make_report, merge_reports, write_jsonl, write_summary_csv
from backend.theorem_lab import fourier_mass_check, weyl_convergence_report
from lab_config import (
    ALPHA_DEFAULT,
    GRID_N_DEFAULT,
    LIB_VERSION,
    SEED_DEFAULT,
    TOL_DEFAULT,
    get_log_level,
    get_output_dir,
    print_current_config,
)
from lemma_presets import get_default, list_lemmas
from pipeline.br_hamiltonian import ALPHA_Z_C, CouplingParams, SpectralResult, ground_state_one_particle, spectral_result_json
from pipeline.field_utils import write_field

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_CHECK_FAILED = 4

COMMANDS = ("selfcheck", "ground-state", "weyl", "trial", "lemmas", "fourier-mass")

# Z when --z is not given
DEFAULT_Z = {
    "selfcheck": 1.0,
    "ground-state": 1.0,
    "weyl": float(get_default("weyl_convergence", "z", 10.0)),
    "trial": 2.0,
    "lemmas": 10.0,
    "fourier-mass": 1.0,
}

TRIAL_CSV_HEADER = [
    "base_r", "m", "scale", "lambda_norm2", "leading_term", "leading_coefficient",
    "diagonal_measured", "diagonal_bound",
]


class RunConfig(BaseModel):
    """Validated arguments of one CLI invocation; the hash ignores the output directory."""

    model_config = ConfigDict(frozen=True)

    command: str
    alpha: float = Field(default=ALPHA_DEFAULT, gt=0.0)
    z: float = Field(default=1.0, ge=0.0)
    grid_n: Optional[int] = Field(default=None, ge=4)
    box_l: Optional[float] = Field(default=None, gt=0.0)
    tolerance: float = Field(default=TOL_DEFAULT, gt=0.0)
    seed: int = SEED_DEFAULT
    r_values: List[float] = Field(default_factory=list)
    z_values: List[float] = Field(default_factory=list)
    lambdas: List[float] = Field(default_factory=list)
    n_electrons: int = 2
    q: int = Field(default=3, ge=1)
    negativity: bool = False
    dump_state: bool = False
    lemmas: List[str] = Field(default_factory=list)
    dim: int = 1
    cube_r: float = Field(default=1.0, gt=0.0)
    cube_m: float = Field(default=2.0, gt=0.0)
    n_random: int = Field(default=200, ge=1)
    output_dir: str = Field(default_factory=get_output_dir)

    @field_validator("command")
    @classmethod
    def known_command(cls, value: str) -> str:
        if value not in COMMANDS:
            raise ValueError(f"unknown command {value!r}")
        return value

    @field_validator("lemmas")
    @classmethod
    def known_lemmas(cls, names: List[str]) -> List[str]:
        unknown = [n for n in names if n not in LEMMA_JOBS]
        if unknown:
            raise ValueError(f"unknown lemma ids: {', '.join(unknown)}")
        return names

    @model_validator(mode="after")
    def below_critical_coupling(self):
        for z in [self.z, *self.z_values]:
            if self.alpha * z >= ALPHA_Z_C:
                raise ValueError(
                    f"alpha*Z = {self.alpha * z:.6f} violates the critical-coupling condition "
                    f"alpha*Z < 2/(pi/2 + 2/pi) = {ALPHA_Z_C:.6f}"
                )
        return self

    @property
    def params(self) -> CouplingParams:
        return CouplingParams(alpha=self.alpha, z=self.z)

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    def hash(self) -> str:
        return config_hash(self.model_dump(exclude={"output_dir"}))


# =============================================================================
# Argument parsing
# =============================================================================

def float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def name_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


BOX_HELP_ORBITALS = "box edge in orbital radii 1/(alpha Z)"
BOX_HELP_COMPTON = "box edge in Compton wavelengths"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frontend.cli", description="Brown-Ravenhall atom lab")
    parser.add_argument("--version", action="version", version=f"%(prog)s {LIB_VERSION}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=ALPHA_DEFAULT, help="fine-structure constant")
    common.add_argument("--z", type=float, default=None, help="nuclear charge")
    common.add_argument("--grid", dest="grid_n", type=int, default=None, help="grid points per axis")
    common.add_argument("--tol", dest="tolerance", type=float, default=TOL_DEFAULT, help="eigensolver tolerance")
    common.add_argument("--seed", type=int, default=SEED_DEFAULT)
    common.add_argument("--output-dir", default=None, help="report directory (default BR_OUTPUT_DIR)")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("selfcheck", parents=[common], help="symbol, Bessel and projector invariants")

    gs = sub.add_parser("ground-state", parents=[common], help="lowest one-particle eigenvalue")
    gs.add_argument("--box", dest="box_l", type=float, default=None, help=BOX_HELP_ORBITALS)
    gs.add_argument("--dump-state", action="store_true", help="write the eigenvector as a binary field")

    weyl = sub.add_parser("weyl", parents=[common], help="Weyl sequence sweep at E1 + lambda")
    weyl.add_argument("--box", dest="box_l", type=float, default=None, help=BOX_HELP_COMPTON)
    weyl.add_argument("--lambdas", type=float_list, default=None)
    weyl.add_argument("--r-values", type=float_list, default=None)

    trial = sub.add_parser("trial", parents=[common], help="trial shells below E1 + 1")
    trial.add_argument("--box", dest="box_l", type=float, default=None,
                       help="ground-state " + BOX_HELP_ORBITALS)
    trial.add_argument("--n", dest="n_electrons", type=int, default=2)
    trial.add_argument("--q", type=int, default=None, help="shells per family")
    trial.add_argument("--r-sweep", dest="r_values", type=float_list, default=None)
    trial.add_argument("--negativity", action="store_true", help="also certify negativity at the first negative R")

    lemmas = sub.add_parser("lemmas", parents=[common], help="module-level lemma checks")
    lemmas.add_argument("--only", dest="lemmas", type=name_list, default=None, help="comma separated lemma ids")
    lemmas.add_argument("--list", dest="list_only", action="store_true", help="print lemma ids and exit")

    fm = sub.add_parser("fourier-mass", parents=[common], help="Fourier mass outside the low-mode cube")
    fm.add_argument("--dim", type=int, default=None)
    fm.add_argument("--r", dest="cube_r", type=float, default=None)
    fm.add_argument("--m", dest="cube_m", type=float, default=None)
    fm.add_argument("--n-random", type=int, default=None)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if v is not None and k != "list_only"}
    values.setdefault("z", DEFAULT_Z[args.command])
    if args.command == "trial":
        values.setdefault("r_values", get_default("trial_energy", "r_values"))
        values.setdefault("q", get_default("trial_energy", "q"))
    elif args.command == "weyl":
        values.setdefault("r_values", get_default("weyl_convergence", "r_values"))
        values.setdefault("lambdas", get_default("weyl_convergence", "lambdas"))
    elif args.command == "fourier-mass":
        values.setdefault("dim", get_default("fourier_mass", "dim"))
        values.setdefault("cube_r", get_default("fourier_mass", "r"))
        values.setdefault("cube_m", get_default("fourier_mass", "m"))
        values.setdefault("n_random", get_default("fourier_mass", "n_random"))
    return RunConfig(**values)


# =============================================================================
# Commands
# =============================================================================

def solve_ground_state(config: RunConfig, params: CouplingParams, grid_n: int, box_l: float) -> SpectralResult:
    return ground_state_one_particle(params, grid_n, box_l, tol=config.tolerance, seed=config.seed)


def bracket_report(result: SpectralResult) -> LemmaReport:
    alpha_z = result.alpha * result.z
    lower = 1.0 - alpha_z
    return make_report(
        "ground_state",
        inputs={"z": result.z, "alpha": result.alpha, "grid_n": result.grid_n, "box_l": result.box_l},
        measured=spectral_result_json(result),
        bound={"lower": lower, "upper": 1.0},
        measured_value=result.e1,
        bound_value=lower,
        margin=min(result.e1 - lower, 1.0 - result.e1) / max(alpha_z, 1e-300),
    )


def cmd_selfcheck(config: RunConfig) -> List[LemmaReport]:
    print_current_config()
    return run_lemma_jobs(SELFCHECK_JOBS, config.params, config.seed)


def cmd_ground_state(config: RunConfig) -> List[LemmaReport]:
    params = config.params
    grid_n = config.grid_n or GRID_N_DEFAULT
    box_orbitals = config.box_l or float(get_default("ground_state", "box_orbitals", 12.0))
    result = solve_ground_state(config, params, grid_n, ground_state_box(params, box_orbitals))
    out = config.output_path
    out.mkdir(parents=True, exist_ok=True)
    payload = {**spectral_result_json(result), "box_orbitals": box_orbitals,
               "config_hash": config.hash(), "version": LIB_VERSION}
    (out / "ground_state.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    if config.dump_state and result.state is not None:
        write_field(out / "ground_state.bin", result.state, extra=spectral_result_json(result))
    print(f"E1 = {result.e1:.12f}  (1 - alpha Z = {1.0 - params.alpha_z:.12f})")
    return [bracket_report(result)]


def cmd_weyl(config: RunConfig) -> List[LemmaReport]:
    params = config.params
    if not config.lambdas or not config.r_values:
        raise ConfigError("weyl needs at least one lambda and one shell scale")
    grid_n = config.grid_n or int(get_default("weyl_convergence", "grid_n", 64))
    box_l = config.box_l or float(get_default("weyl_convergence", "box_l", 160.0))
    ground = solve_ground_state(config, params, grid_n, box_l)
    reports = [bracket_report(ground)]
    for lam in config.lambdas:
        summary, per_scale = weyl_convergence_report(lam, config.r_values, params, ground, config.seed)
        reports.append(summary)
        reports.extend(per_scale)
    return reports


def write_trial_rows(reports: Sequence[LemmaReport], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIAL_CSV_HEADER)
        for report in reports:
            for row in report.measured["shells"]:
                writer.writerow([
                    repr(report.inputs["r"]), row["m"], repr(row["scale"]), repr(row["lambda_norm2"]),
                    repr(row["leading"]), repr(row["leading_coefficient"]),
                    repr(row["diagonal"]), repr(row["certified"]),
                ])
    return path


def cmd_trial(config: RunConfig) -> List[LemmaReport]:
    params = config.params
    if not config.r_values:
        raise ConfigError("--r-sweep needs at least one base scale")
    grid_n = config.grid_n or int(get_default("ground_state", "grid_n", GRID_N_DEFAULT))
    box_orbitals = config.box_l or float(get_default("ground_state", "box_orbitals", 12.0))
    ground = solve_ground_state(config, params, grid_n, ground_state_box(params, box_orbitals))
    r_fit = get_default("trial_energy", "r_fit")
    family = build_trial_family(ground, config.r_values[0], config.q, config.n_electrons)
    reports = [trial_energy_report(family.with_base(r), params, r_fit=r_fit) for r in config.r_values]
    if config.negativity:
        radius = negativity_radius(family, params)
        reports.append(trial_energy_report(family.with_base(radius), params, require_negative=True))
        print(f"certified negative from R = {radius:.6g}")
    write_trial_rows(reports, config.output_path / "trial_shells.csv")
    return reports


def cmd_lemmas(config: RunConfig) -> List[LemmaReport]:
    names = config.lemmas or sorted(LEMMA_JOBS)
    params = config.params
    overrides: Dict[str, Dict] = {}
    if "two_particle" in names and params.z > 0.0:
        grid_n = config.grid_n or int(get_default("two_particle", "grid_n", 24))
        box = ground_state_box(params, float(get_default("ground_state", "box_orbitals", 12.0)))
        overrides["two_particle"] = {"ground": solve_ground_state(config, params, grid_n, box)}
    if config.grid_n is not None:
        for name in names:
            overrides.setdefault(name, {})["grid_n"] = config.grid_n
    return run_lemma_jobs(names, params, config.seed, overrides)


def cmd_fourier_mass(config: RunConfig) -> List[LemmaReport]:
    return [fourier_mass_check(config.dim, config.cube_r, config.cube_m, config.n_random, config.seed)]


HANDLERS: Dict[str, Callable[[RunConfig], List[LemmaReport]]] = {
    "selfcheck": cmd_selfcheck,
    "ground-state": cmd_ground_state,
    "weyl": cmd_weyl,
    "trial": cmd_trial,
    "lemmas": cmd_lemmas,
    "fourier-mass": cmd_fourier_mass,
}


def write_outputs(config: RunConfig, reports: Sequence[LemmaReport]) -> None:
    stem = config.command.replace("-", "_")
    write_jsonl(reports, config.output_path / f"{stem}_reports.jsonl")
    write_summary_csv(reports, config.output_path / f"{stem}_summary.csv")


def print_summary(reports: Sequence[LemmaReport]) -> None:
    for r in reports:
        mark = "✅" if r.passed else "❌"
        print(f"{mark} {r.lemma:<22} margin {r.margin:+.3e}  measured {r.measured_value:.6g}  bound {r.bound_value:.6g}")


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG

    if getattr(args, "list_only", False):
        for name, description in list_lemmas():
            if name in LEMMA_JOBS:
                print(f"{name:<22} {description}")
        return EXIT_OK

    try:
        config = config_from_args(args)
    except ValidationError as e:
        print(f"❌ Configuration error: {e.errors()[0]['msg']}")
        return EXIT_CONFIG

    config_id = config.hash()
    logger.info("command %s config %s", config.command, config_id)
    try:
        reports = HANDLERS[config.command](config)
    except ConvergenceError as e:
        print(f"❌ Eigensolver failure: {e}")
        return EXIT_CONVERGENCE
    except (LabError, ValidationError) as e:
        print(f"❌ Configuration error: {e}")
        return EXIT_CONFIG

    reports = merge_reports(r.with_config(config_id) for r in reports)
    write_outputs(config, reports)
    print_summary(reports)
    if all_passed(reports):
        print(f"✅ {len(reports)} checks passed ({config.output_path})")
        return EXIT_OK
    failed = sum(not r.passed for r in reports)
    print(f"⚠️ {failed} of {len(reports)} checks failed ({config.output_path})")
    return EXIT_CHECK_FAILED


def main() -> None:
    logging.basicConfig(level=get_log_level(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
