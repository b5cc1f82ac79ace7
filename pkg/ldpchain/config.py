from __future__ import annotations

from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    # ==== App / logging ====
    ldp_debug: bool = Field(default=False, alias="LDP_DEBUG")
    ldp_log_level: str = Field(default="INFO", alias="LDP_LOG_LEVEL")

    # ==== Runner ====
    ldp_workers: int = Field(default=1, alias="LDP_WORKERS")
    # Paths per rng substream. Substreams are keyed by chunk index, never by worker.
    ldp_chunk_size: int = Field(default=4096, alias="LDP_CHUNK_SIZE")
    ldp_output_dir: str = Field(default="./runs", alias="LDP_OUTPUT_DIR")
    ldp_plots: bool = Field(default=True, alias="LDP_PLOTS")

    # ==== Statistics ====
    ldp_ci_level: float = Field(default=0.99, alias="LDP_CI_LEVEL")

    # ==== Numerics ====
    ldp_rk4_step: float = Field(default=1e-3, alias="LDP_RK4_STEP")
    ldp_lp_brute_force_max: int = Field(default=15, alias="LDP_LP_BRUTE_FORCE_MAX")
    # Points this close to a class boundary count as outside (classes are open).
    ldp_boundary_tol: float = Field(default=1e-12, alias="LDP_BOUNDARY_TOL")
    ldp_closure_tol: float = Field(default=1e-9, alias="LDP_CLOSURE_TOL")

    model_config = SettingsConfigDict(env_file=".env", extra="ignore", case_sensitive=False)


settings = Settings()
