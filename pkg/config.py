"""Configuration management for the fuzzy decomposition toolkit."""

import os
from pathlib import Path
from typing import Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

# Load environment variables from .env file
load_dotenv()


def _env_int(name: str, default: int) -> int:
    """Read an integer environment variable, falling back to ``default``."""
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


class Tolerances(BaseModel):
    """Numerical tolerances used by validators, checks and verdicts."""
    row_sum: float = 1e-12
    measure_sum: float = 1e-12
    reversibility: float = 1e-10
    marginal: float = 1e-10
    mass: float = 1e-12
    identity: float = 1e-10
    mean: float = 1e-12
    dirichlet: float = 1e-9
    bound_exact: float = 1e-10
    bound_relative: float = 1e-3
    order: float = 1e-3
    eigen_zero: float = 1e-9
    degenerate: float = 1e-12
    underflow: float = 1e-300
    heat_row_sum: float = 1e-9

    @field_validator("*")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("tolerances must be positive")
        return value

    def with_overrides(self, overrides: Optional[Dict[str, float]]) -> "Tolerances":
        """Return a copy with the given entries replaced (re-validated)."""
        if not overrides:
            return self
        return Tolerances(**{**self.model_dump(), **overrides})


class OptimizerConfig(BaseModel):
    """Settings for the multi-start ratio minimizer."""
    restarts: int = Field(default_factory=lambda: _env_int("FUZZY_RESTARTS", 32), ge=1)
    max_iter: int = Field(default_factory=lambda: _env_int("FUZZY_MAX_ITER", 2000), ge=1)
    stall_window: int = 20
    stall_rel: float = 1e-10
    fd_step: float = 1e-6
    seed: int = Field(default_factory=lambda: _env_int("FUZZY_SEED", 0))
    threads: int = Field(default_factory=lambda: _env_int("FUZZY_THREADS", 1), ge=1)


class SpectralConfig(BaseModel):
    """Settings for the symmetric eigensolver."""
    jacobi_max_n: int = Field(default_factory=lambda: _env_int("FUZZY_JACOBI_MAX_N", 64))
    jacobi_max_sweeps: int = 100


class OracleConfig(BaseModel):
    """Settings for the brute-force ratio oracle."""
    grid_points_2: int = 100000
    grid_points_3: int = 600
    grid_points_4: int = 120
    samples: int = 1_000_000
    refine_rounds: int = 60
    refine_samples: int = 2000
    log_range: float = 6.0
    chunk: int = 200_000


class AppConfig(BaseModel):
    """Application configuration settings."""
    version: str = "0.1.0"
    log_level: str = Field(default_factory=lambda: os.getenv("LOG_LEVEL", "WARNING"))


class Config(BaseModel):
    """Main configuration class combining all settings."""
    tolerances: Tolerances = Field(default_factory=Tolerances)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    spectral: SpectralConfig = Field(default_factory=SpectralConfig)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    app: AppConfig = Field(default_factory=AppConfig)


class RunConfig(BaseModel):
    """Parameters of a single CLI run, built from parsed arguments."""
    command: str
    chain: Optional[Path] = None
    partition: Optional[Path] = None
    couplings: Optional[Path] = None
    graph: Optional[Path] = None
    out: Optional[Path] = None
    seed: int = 0
    restarts: int = Field(default_factory=lambda: config.optimizer.restarts, ge=1)
    max_iter: int = Field(default_factory=lambda: config.optimizer.max_iter, ge=1)
    threads: int = Field(default=1, ge=1)
    tolerances: Tolerances = Field(default_factory=lambda: config.tolerances)
    product_couplings: bool = False
    complete_transpose: bool = False
    eps: float = 0.25
    t_max: float = 10.0
    step: float = 0.01
    with_estimates: bool = False

    @model_validator(mode="after")
    def _inputs_exist(self) -> "RunConfig":
        for name in ("chain", "partition", "couplings", "graph"):
            path = getattr(self, name)
            if path is not None and not path.exists():
                raise ValueError(f"{name} file not found at {path}")
        return self


# Create a global configuration instance
config = Config()
