#!/usr/bin/env python3
"""
Global run configuration for the Brown-Ravenhall lab
Defaults live here; environment variables (or a .env file) override them
"""
import logging
import os

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

LIB_VERSION = "0.3.0"

# Natural units: hbar = c = m = 1
ALPHA_DEFAULT = 1.0 / 137.036
GRID_N_DEFAULT = 48
TOL_DEFAULT = 1e-8
SEED_DEFAULT = 42
OUTPUT_DIR_DEFAULT = "lab_reports"
MAX_MODES_DEFAULT = 2_000_000
CALIBRATION_SEED_OFFSET = 1_000_003


def get_num_threads() -> int:
    """Worker threads for FFTs and job pools (BR_NUM_THREADS)"""
    raw = os.getenv("BR_NUM_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        value = os.cpu_count() or 1
    return value


def get_log_level() -> str:
    """Logging level name for the command line (BR_LOG_LEVEL)"""
    return os.getenv("BR_LOG_LEVEL", "INFO").upper()


def get_output_dir() -> str:
    """Default directory for reports (BR_OUTPUT_DIR)"""
    return os.getenv("BR_OUTPUT_DIR", OUTPUT_DIR_DEFAULT)


def calibration_seed(seed):
    """Seed of the calibration stream, disjoint from the checked stream of the same run"""
    return None if seed is None else int(seed) + CALIBRATION_SEED_OFFSET


def get_max_modes() -> int:
    """Memory guard for the low-mode count of the Fourier-mass check (BR_MAX_MODES)"""
    try:
        return int(os.getenv("BR_MAX_MODES", str(MAX_MODES_DEFAULT)))
    except ValueError:
        return MAX_MODES_DEFAULT


def print_current_config():
    """Log the effective configuration for debugging"""
    logger.info("lab version: %s", LIB_VERSION)
    logger.info("alpha default: %.12g", ALPHA_DEFAULT)
    logger.info("grid / tol / seed: %d / %g / %d", GRID_N_DEFAULT, TOL_DEFAULT, SEED_DEFAULT)
    logger.info("threads: %d", get_num_threads())
    logger.info("output dir: %s", get_output_dir())
    logger.info("max low modes: %d", get_max_modes())


if __name__ == "__main__":
    logging.basicConfig(level=get_log_level(), format="%(message)s")
    print_current_config()
