from pydantic_settings import BaseSettings
from functools import lru_cache


class Settings(BaseSettings):
    # Finite differences (chart units)
    fd_step: float = 1e-4
    conditioning_limit: float = 1e12

    # Fixed-step integration
    steps_per_unit: int = 512  # RK4 steps per unit arclength
    min_steps: int = 16

    # Log map shooting
    newton_max_iter: int = 50
    newton_tol: float = 1e-10

    # Horizontal lifts
    lift_tracking_tol: float = 1e-6
    lift_steps_per_unit: int = 64  # RK4 steps per unit base length for Φ and trivializations

    # Sampled metric checks
    lcl_sample_budget: int = 512
    lcl_tolerance: float = 0.1  # fraction of r
    hausdorff_samples: int = 10000

    # Bounds lab
    default_bound_constant: float = 2.0  # C of the vertical-component estimate
    bound_tolerance: float = 1e-9
    fd_bound_tolerance: float = 1e-6  # lhs measured by finite differences in s
    invariance_tolerance: float = 1e-6

    # Scenarios
    validate_oracles: bool = True
    oracle_grid_points: int = 100

    # Runner
    lab_jobs: int = 1  # LAB_JOBS overrides the default worker count
    output_dir: str = "reports"

    class Config:
        env_file = "../.env"  # .env is at project root, not backend/


@lru_cache()
def get_settings() -> Settings:
    return Settings()
