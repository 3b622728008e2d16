"""Chamber pressure response to ablation gas load."""

from dataclasses import dataclass, field
from typing import Callable, List, Union

import numpy as np

from config.config import VacuumParams
from src.utils.errors import UnstableTimestepError

GasLoad = Union[float, Callable[[float], float]]


@dataclass
class PressureTrace:
    """Sampled pressure (mbar) of a single pumped volume."""
    vacuum: VacuumParams
    times: List[float] = field(default_factory=list)
    pressures: List[float] = field(default_factory=list)

    @classmethod
    def at_base(cls, vacuum: VacuumParams, t0: float = 0.0) -> "PressureTrace":
        return cls(vacuum, [t0], [vacuum.base_pressure])

    @property
    def time(self) -> float:
        return self.times[-1]

    @property
    def pressure(self) -> float:
        return self.pressures[-1]

    def as_arrays(self):
        return np.asarray(self.times), np.asarray(self.pressures)


def recovery_time_constant(vacuum: VacuumParams) -> float:
    """τ = V/S in seconds."""
    return vacuum.chamber_volume / vacuum.pump_speed


def equilibrium_pressure(vacuum: VacuumParams, gas_load: float) -> float:
    """Steady state base + Q/S for a constant load (mbar·L/s)."""
    return vacuum.base_pressure + gas_load / vacuum.pump_speed


def _derivative(vacuum: VacuumParams, load: float, p: float) -> float:
    return (load + vacuum.pump_speed * (vacuum.base_pressure - p)) / vacuum.chamber_volume


def pressure_step(trace: PressureTrace, gas_load: GasLoad, dt: float) -> PressureTrace:
    """Advance V·dP/dt = Q(t) + S·(P_base − P) by one RK4 step.

    Args:
        trace: Trace to extend; its last sample is the initial state
        gas_load: Constant load or callable Q(t) in mbar·L/s
        dt: Step (s), must be below 2V/S

    Returns:
        The same trace with one more sample
    """
    vacuum = trace.vacuum
    limit = 2.0 * recovery_time_constant(vacuum)
    if dt <= 0 or dt >= limit:
        raise UnstableTimestepError(f"dt = {dt:g} s outside (0, {limit:g}) s")
    load = gas_load if callable(gas_load) else (lambda _t: gas_load)
    t, p = trace.time, trace.pressure
    k1 = _derivative(vacuum, load(t), p)
    k2 = _derivative(vacuum, load(t + 0.5 * dt), p + 0.5 * dt * k1)
    k3 = _derivative(vacuum, load(t + 0.5 * dt), p + 0.5 * dt * k2)
    k4 = _derivative(vacuum, load(t + dt), p + dt * k3)
    trace.times.append(t + dt)
    trace.pressures.append(p + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)
    return trace


def integrate_pressure(vacuum: VacuumParams, gas_load: GasLoad, duration: float,
                       dt: float) -> PressureTrace:
    """Pressure trace from base over ``duration`` at fixed step ``dt``."""
    trace = PressureTrace.at_base(vacuum)
    n_steps = int(np.ceil(duration / dt - 1e-9))
    for _ in range(n_steps):
        pressure_step(trace, gas_load, dt)
    return trace
