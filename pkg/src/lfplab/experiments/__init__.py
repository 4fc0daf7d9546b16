from .config import (
    MaterializedRun,
    ParametrixCaseConfig,
    RunConfig,
    SweepConfig,
    load_config,
    validate_run_config,
)
from .runner import RunArtifacts, figure1, run
from .sweep import scaling_sweep
from .correction import higher_order_correction
from .parametrix_report import parametrix_report

__all__ = [
    "MaterializedRun",
    "ParametrixCaseConfig",
    "RunConfig",
    "RunArtifacts",
    "SweepConfig",
    "figure1",
    "higher_order_correction",
    "load_config",
    "parametrix_report",
    "run",
    "scaling_sweep",
    "validate_run_config",
]
