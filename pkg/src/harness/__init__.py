"""Harness package: scenario engine, controller, fits, calibration, sweeps and persistence."""

from .scenario import (
    Output,
    DEFAULT_OUTPUTS,
    Scenario,
    LoadingLedger,
    EventLog,
    ScenarioResult,
    ScenarioRunner,
    run_scenario,
)
from .controller import ShutterController, single_ion_controller
from .meanfield import LoadingKernel, FractionalLedger, loading_kernel, expected_loading_rate
from .fitting import FitResult, fit_threshold, fit_saturation, linear_r_squared
from .calibration import (
    calibrate_yield,
    calibrate_gas_load,
    rydberg_rate_ceiling,
    depth_scan,
)
from .sweep import Variation, parse_vary, build_sweep_scenarios, run_sweep, write_sweep_csv
from .persistence import write_run, read_manifest, read_csv, report

__all__ = [
    'Output',
    'DEFAULT_OUTPUTS',
    'Scenario',
    'LoadingLedger',
    'EventLog',
    'ScenarioResult',
    'ScenarioRunner',
    'run_scenario',
    'ShutterController',
    'single_ion_controller',
    'LoadingKernel',
    'FractionalLedger',
    'loading_kernel',
    'expected_loading_rate',
    'FitResult',
    'fit_threshold',
    'fit_saturation',
    'linear_r_squared',
    'calibrate_yield',
    'calibrate_gas_load',
    'rydberg_rate_ceiling',
    'depth_scan',
    'Variation',
    'parse_vary',
    'build_sweep_scenarios',
    'run_sweep',
    'write_sweep_csv',
    'write_run',
    'read_manifest',
    'read_csv',
    'report',
]
