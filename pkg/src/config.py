"""
Configuration management for the MLUFL solver toolkit
"""

import math
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    """Solver configuration"""

    # Mode Configuration
    DEBUG: bool = os.getenv("MLUFL_DEBUG", "false").lower() == "true"
    LOG_LEVEL: str = os.getenv("MLUFL_LOG_LEVEL", "WARNING").upper()

    # Relaxation defaults
    EPSILON: float = float(os.getenv("MLUFL_EPSILON", "0.5"))
    LP_MAX_ITERATIONS: int = int(os.getenv("MLUFL_LP_MAX_ITERATIONS", "50000"))
    CUT_MAX_ROUNDS: int = int(os.getenv("MLUFL_CUT_MAX_ROUNDS", "200"))
    COLGEN_MAX_COLUMNS: int = int(os.getenv("MLUFL_COLGEN_MAX_COLUMNS", "2000"))
    ORIENTEERING_LIMIT: int = int(os.getenv("MLUFL_ORIENTEERING_LIMIT", "10"))

    # Rounding defaults
    ALPHA: float = float(os.getenv("MLUFL_ALPHA", str(8 / 9)))
    BETA: float = float(os.getenv("MLUFL_BETA", "0.5"))
    RETRIES: int = int(os.getenv("MLUFL_RETRIES", "5"))

    # Harness
    WORKERS: int = int(os.getenv("MLUFL_WORKERS", "1"))

    # Paths
    BASE_DIR: Path = Path(__file__).parent.parent
    OUTPUT_DIR: Path = Path(os.getenv("MLUFL_OUTPUT_DIR", str(BASE_DIR / "results")))

    @classmethod
    def validate(cls) -> list[str]:
        """Validate configuration and return list of errors"""
        errors = []

        if not 0 < cls.EPSILON <= 1:
            errors.append(f"MLUFL_EPSILON must lie in (0, 1], got {cls.EPSILON}")
        if not 0 < cls.ALPHA < 1:
            errors.append(f"MLUFL_ALPHA must lie in (0, 1), got {cls.ALPHA}")
        if not 0 < cls.BETA < 1:
            errors.append(f"MLUFL_BETA must lie in (0, 1), got {cls.BETA}")
        if cls.RETRIES < 1:
            errors.append("MLUFL_RETRIES must be at least 1")
        if cls.WORKERS < 1:
            errors.append("MLUFL_WORKERS must be at least 1")
        if cls.LOG_LEVEL not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            errors.append(f"Unknown MLUFL_LOG_LEVEL: {cls.LOG_LEVEL}")

        return errors

    @classmethod
    def print_config(cls):
        """Print current configuration"""
        print("\n" + "=" * 60)
        print("CONFIGURATION")
        print("=" * 60)
        print(f"epsilon: {cls.EPSILON}")
        print(f"alpha / beta: {cls.ALPHA:.6g} / {cls.BETA:.6g}")
        print(f"Rounding retries: {cls.RETRIES}")
        print(f"LP iteration cap: {cls.LP_MAX_ITERATIONS}")
        print(f"Cut rounds cap: {cls.CUT_MAX_ROUNDS}")
        print(f"Workers: {cls.WORKERS}")
        print(f"Output dir: {cls.OUTPUT_DIR}")
        print(f"Debug Mode: {cls.DEBUG}")
        print("=" * 60 + "\n")


class Tolerances:
    """Numerical tolerances shared by solvers and certificate checks"""

    FEASIBILITY = 1e-7
    CUT_VIOLATION = 1e-6
    METRIC = 1e-9
    CERTIFICATE = 1e-6
    PIVOT = 1e-9
    DUAL = 1e-6
    MONOTONE = 1e-9


class RoundingConstants:
    """Constants used by the rounding algorithms and their certificates"""

    # Phased rounding for general instances
    NEIGHBORHOOD_FACTOR = 4.0
    COVERAGE_THRESHOLD = 2.0 / 3.0
    GKR_BUDGET_FACTOR = 40
    GKR_RUNS_FACTOR = 192

    # Related metrics
    RELATED_NEIGHBORHOOD_FACTOR = 3.0
    RELATED_LATENCY_FACTOR = 6.0
    RELATED_CLUSTER_RADIUS = 30.0
    RELATED_FACILITY_BOUND = 1.5
    RELATED_CONNECTION_BOUND = 39.0
    RELATED_LATENCY_BOUND = 384.0
    RELATED_STEINER_BOUND = 4.0
    RELATED_TREE_BOUND = 5.0
    RELATED_AUGMENTED_TREE_BOUND = 8.0

    # Minimum latency
    ML_DET_ALPHA = 0.5
    ML_DET_BOUND = 32.0

    @classmethod
    def log2_clamped(cls, value: float) -> float:
        """log2 clamped to >= 1, used by the GKR run counts"""
        return max(math.log2(value), 1.0) if value > 0 else 1.0
