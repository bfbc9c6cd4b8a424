"""Monte Carlo study harness for the streaming decision rules."""

from .report import SimReport, write_csv, write_json
from .studies import (
    METHODS,
    SimStudyConfig,
    run_lift_power_study,
    run_mde_misspec_study,
    run_power_study,
    run_rho2_sweep,
    run_stop_quality_study,
    run_type1_study,
)

__all__ = [
    "METHODS",
    "SimReport",
    "SimStudyConfig",
    "run_lift_power_study",
    "run_mde_misspec_study",
    "run_power_study",
    "run_rho2_sweep",
    "run_stop_quality_study",
    "run_type1_study",
    "write_csv",
    "write_json",
]
