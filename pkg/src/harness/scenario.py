"""Time-stepped loading scenarios.

Each step fires the gated pulses, pushes the accepted atoms through
ionization and capture, lets captured ions join the crystal when they reach
the trap center, and advances the chamber pressure.
"""

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from config.config import ControllerMode, RunConfig, config_hash
from src.ablation.gating import GatingSchedule
from src.ablation.source import TargetState, advance_target, contaminant_decay_factor, emit_pulse_train
from src.beam.transport import sample_atoms
from src.core.lasers import capability_shortfall, operating_fluence
from src.diagnostics.fluorescence import (
    FluorescenceTrace,
    LoadingEvent,
    LoadingTimeline,
    RateModel,
    detect_steps,
    single_ion_rate,
    synthesize_trace,
)
from src.diagnostics.pressure import PressureTrace, pressure_step
from src.harness.controller import single_ion_controller
from src.harness.meanfield import FractionalLedger, LoadingKernel, loading_kernel, spread_arrivals
from src.harness.pipeline import LoadingPipeline
from src.trap.dynamics import IonCrystal, NewIon, apply_collision_and_heating_events
from src.utils.errors import AblatronError, ConfigError, DegenerateTraceError, ScenarioError
from src.utils.logging import get_logger
from src.utils.rng import StreamFactory

logger = get_logger(__name__)


class Output(str, Enum):
    EVENTS = "events"
    FLUORESCENCE = "fluorescence"
    PRESSURE = "pressure"
    ION_COUNT = "ion_count_series"
    DEPTH_SCAN = "depth_scan"


DEFAULT_OUTPUTS = frozenset({Output.EVENTS, Output.FLUORESCENCE, Output.PRESSURE, Output.ION_COUNT})


@dataclass(frozen=True)
class Scenario:
    """A named configuration and the outputs wanted from it."""
    name: str
    config: RunConfig
    outputs: FrozenSet[Output] = DEFAULT_OUTPUTS


@dataclass
class LoadingLedger:
    """Integer bookkeeping of every atom and ion in a run."""
    atoms_emitted: int = 0
    atoms_rejected: int = 0
    atoms_unionized: int = 0
    ions_created: int = 0
    ions_captured: int = 0
    ions_lost_at_birth: int = 0

    def add(self, emitted: int, accepted: int, created: int, captured: int):
        self.atoms_emitted += emitted
        self.atoms_rejected += emitted - accepted
        self.atoms_unionized += accepted - created
        self.ions_created += created
        self.ions_captured += captured
        self.ions_lost_at_birth += created - captured

    def is_balanced(self) -> bool:
        return (
            self.atoms_emitted == self.atoms_rejected + self.atoms_unionized + self.ions_created
            and self.ions_created == self.ions_captured + self.ions_lost_at_birth
            and min(self.atoms_rejected, self.atoms_unionized, self.ions_lost_at_birth) >= 0
        )

    def as_dict(self) -> Dict[str, int]:
        return dict(self.__dict__)


@dataclass
class EventLog:
    """What happened during a run, in time order."""
    captures: List[Tuple[float, int]] = field(default_factory=list)
    detected: List[LoadingEvent] = field(default_factory=list)
    gate_edges: List[Tuple[float, str]] = field(default_factory=list)
    shutter_time: Optional[float] = None
    ledger: LoadingLedger = field(default_factory=LoadingLedger)


@dataclass
class ScenarioResult:
    name: str
    config: RunConfig
    events: EventLog
    crystal: IonCrystal
    count_times: np.ndarray
    counts: np.ndarray
    pressure: PressureTrace
    fluorescence: Optional[FluorescenceTrace]
    summary: Dict[str, object]
    outputs: FrozenSet[Output] = DEFAULT_OUTPUTS


class ScenarioRunner:
    """Step-by-step handle on one scenario.

    ``run_scenario`` drives it to the end; the auto-shutter controller steps
    it itself and closes the shutter through :meth:`close_shutter`.
    """

    def __init__(self, scenario: Scenario):
        """Initialize runner.

        Args:
            scenario: Scenario to run
        """
        cfg = scenario.config
        self.scenario = scenario
        self.cfg = cfg
        self.streams = StreamFactory(cfg.rng_seed)
        self.schedule = GatingSchedule.from_config(cfg)
        self.pipeline = LoadingPipeline(cfg)
        self.kernel: Optional[LoadingKernel] = loading_kernel(cfg, self.pipeline) if cfg.mean_field else None
        self.fractional = FractionalLedger()
        self.target = TargetState.fresh(cfg.source)
        self.crystal = IonCrystal.from_trap(cfg.trap, self.pipeline.trap_mass)
        self.pressure = PressureTrace.at_base(cfg.vacuum)
        self.log = EventLog()
        self.rate_model = RateModel(
            per_ion_rate=single_ion_rate(cfg.cooling_laser, cfg.detection.efficiency),
            background_rate=cfg.detection.background_rate,
            suppressed_fraction=cfg.detection.suppressed_fraction,
        )
        self.end_time = cfg.duration
        self.step_index = 0
        self.t = 0.0
        self.count_times: List[float] = [0.0]
        self.counts: List[int] = [0]
        self.trace: Optional[FluorescenceTrace] = None
        self.online_detection = False
        self._pending: List[Tuple[float, int, int]] = []
        self._sequence = 0
        self._decay = contaminant_decay_factor(cfg.ablation, cfg.source)
        self._was_on = False

        shortfall = capability_shortfall(cfg.ablation)
        if shortfall is not None:
            logger.record("fluence-beyond-capability", scenario.name, shortfall)

    @property
    def done(self) -> bool:
        return self.t >= self.end_time - 1e-12

    def enable_online_trace(self):
        """Synthesize one fluorescence bin per step while running."""
        self.trace = FluorescenceTrace(self.cfg.time_step, np.zeros(0, dtype=np.int64), 0.0)

    def close_shutter(self, t_close: float):
        """Gate the ablation laser off from ``t_close`` and stop after the settle time."""
        self.schedule = self.schedule.truncated(t_close)
        self.log.shutter_time = t_close
        settle = self.cfg.controller.settle_time if self.cfg.controller else 0.0
        self.end_time = min(self.cfg.duration, max(self.t, t_close + settle))

    def step(self) -> float:
        """Advance by one time step (shorter at the end of the run).

        Returns:
            The new simulation time
        """
        if self.done:
            return self.t
        cfg = self.cfg
        t0 = self.t
        t1 = min((self.step_index + 1) * cfg.time_step, self.end_time)
        h = t1 - t0
        pulses = self.schedule.pulse_indices(cfg.ablation.rep_rate, t0, t1)
        self._gate_edge(t0, pulses.size > 0)

        coverage_before = self.target.contaminant_coverage
        if pulses.size:
            if self.kernel is not None:
                self._emit_mean_field(pulses)
            else:
                self._emit_stochastic(pulses)

        new_ions = self._release(t1)
        apply_collision_and_heating_events(self.crystal, self.pressure.pressure, h, new_ions,
                                           self.streams.stream("trap"), now=t1)
        pressure_step(self.pressure, self._gas_load(pulses.size, coverage_before, h), h)
        if self.trace is not None:
            self._extend_trace(t0, h)

        self.t = t1
        self.step_index += 1
        self.count_times.append(t1)
        self.counts.append(self.crystal.count_at(t1))
        return t1

    def _gate_edge(self, t: float, firing: bool):
        if firing != self._was_on:
            edge = "on" if firing else "off"
            self.log.gate_edges.append((t, edge))
            logger.debug("Gate edge", {"scenario": self.scenario.name, "t": t, "edge": edge})
            self._was_on = firing

    def _emit_stochastic(self, pulses: np.ndarray):
        cfg = self.cfg
        pipeline = self.pipeline
        beam = self.streams.stream("beam")
        ionization = self.streams.stream("ionization")

        n_emitted, self.target = emit_pulse_train(pulses.size, pipeline.pulse, self.target, cfg,
                                                  self.streams.stream("source"))
        n_emitted = int(n_emitted)
        n_accepted = int(beam.binomial(n_emitted, pipeline.acceptance)) if n_emitted else 0
        atoms = sample_atoms(n_accepted, pipeline.burst.surface_temperature, cfg.species,
                             cfg.geometry, beam)
        emitted_at = pulses[beam.integers(0, pulses.size, size=n_accepted)] / cfg.ablation.rep_rate
        arrival = emitted_at + cfg.geometry.target_trap_distance / atoms.velocity

        probs = pipeline.state_probabilities(atoms, arrival)
        cumulative = np.cumsum(pipeline.state_fractions)
        state = np.minimum(np.searchsorted(cumulative, ionization.uniform(size=n_accepted), side="right"), 2)
        ionized = ionization.uniform(size=n_accepted) < probs[state, np.arange(n_accepted)]

        born = atoms.subset(ionized)
        captured = pipeline.capture(born, self.streams.stream("capture"))
        self.log.ledger.add(n_emitted, n_accepted, int(ionized.sum()), int(captured.sum()))
        for t_arrival, isotope in zip(arrival[ionized][captured], born.isotope[captured]):
            self._push(float(t_arrival), int(isotope))

    def _emit_mean_field(self, pulses: np.ndarray):
        cfg = self.cfg
        pipeline = self.pipeline
        n_mean = pulses.size * pipeline.burst.n_atoms
        self.target = advance_target(self.target, n_mean, pulses.size, pipeline.pulse, cfg)
        increments = self.fractional.advance(n_mean, pipeline.acceptance, self.kernel)
        captured = increments["captured"]
        self.log.ledger.add(increments["emitted"], increments["accepted"], increments["ionized"],
                            int(captured.sum()))
        isotopes = np.repeat(np.arange(captured.size), captured)
        arrivals = spread_arrivals(pulses, cfg.ablation.rep_rate, isotopes.size,
                                   self.kernel.mean_transit_delay)
        for t_arrival, isotope in zip(arrivals, isotopes):
            self._push(float(t_arrival), int(isotope))

    def _push(self, t_arrival: float, isotope: int):
        heapq.heappush(self._pending, (t_arrival, self._sequence, isotope))
        self._sequence += 1

    def _release(self, t1: float) -> List[NewIon]:
        released = []
        while self._pending and self._pending[0][0] < t1:
            t_arrival, _, isotope = heapq.heappop(self._pending)
            released.append(NewIon(t_arrival, isotope))
            self.log.captures.append((t_arrival, isotope))
        return released

    def _gas_load(self, n_pulses: int, coverage: float, h: float) -> float:
        """Mean gas load (mbar·L/s) over a step with ``n_pulses`` pulses."""
        if n_pulses == 0:
            return 0.0
        vacuum = self.cfg.vacuum
        if self._decay < 1.0:
            coverage_sum = coverage * (1.0 - self._decay ** n_pulses) / (1.0 - self._decay)
        else:
            coverage_sum = coverage * n_pulses
        return (n_pulses * vacuum.gas_load_per_pulse
                + vacuum.contaminant_load_per_pulse * coverage_sum) / h

    def _extend_trace(self, t0: float, h: float):
        timeline = LoadingTimeline.from_crystal(self.crystal)
        chunk = synthesize_trace(timeline, self.rate_model, self.cfg.time_step,
                                 self.streams.stream("diagnostics"), h, t0)
        self.trace = self.trace.extend(chunk)

    def finish(self) -> ScenarioResult:
        """Land the ions still in flight and assemble the result."""
        cfg = self.cfg
        leftover = self._release(math.inf)
        if leftover:
            self.crystal.add_ions(leftover)

        wants_trace = {Output.FLUORESCENCE, Output.EVENTS} & self.scenario.outputs
        trace = self.trace
        if trace is None and wants_trace:
            trace = synthesize_trace(LoadingTimeline.from_crystal(self.crystal), self.rate_model,
                                     cfg.time_step, self.streams.stream("diagnostics"), self.end_time)
        if trace is not None and not self.online_detection:
            try:
                self.log.detected = detect_steps(trace, cfg.detection,
                                                 step_height=self.rate_model.per_ion_rate * trace.bin_width)
            except DegenerateTraceError:
                logger.warning("Trace too short for step detection", {"scenario": self.scenario.name})

        return ScenarioResult(
            name=self.scenario.name,
            config=cfg,
            events=self.log,
            crystal=self.crystal,
            count_times=np.asarray(self.count_times),
            counts=np.asarray(self.counts, dtype=np.int64),
            pressure=self.pressure,
            fluorescence=trace,
            summary=self.summary(),
            outputs=self.scenario.outputs,
        )

    def summary(self) -> Dict[str, object]:
        cfg = self.cfg
        on_time = self.schedule.on_time(0.0, self.end_time)
        ledger = self.log.ledger
        captured = self.fractional.expected_captured if self.kernel is not None else ledger.ions_captured
        final_count = self.crystal.count_at(self.end_time)
        labels = [iso.label for iso in cfg.species.isotopes]
        composition = np.bincount(self.crystal.isotope[self.crystal.arrival <= self.end_time],
                                  minlength=len(labels))
        summary: Dict[str, object] = {
            "scenario": self.scenario.name,
            "config_hash": config_hash(cfg),
            "rng_seed": cfg.rng_seed,
            "mode": cfg.mode.value,
            "mean_field": cfg.mean_field,
            "regime": self.pipeline.burst.regime.value,
            "fluence_mJ_cm2": operating_fluence(cfg.ablation) / 10.0,
            "pulse_energy_uJ": self.pipeline.pulse.energy * 1e6,
            "rep_rate_hz": cfg.ablation.rep_rate,
            "surface_temperature_K": self.pipeline.burst.surface_temperature,
            "duration_s": self.end_time,
            "on_time_s": on_time,
            "ions_captured": captured,
            "final_ion_count": final_count,
            "mean_loading_rate": captured / on_time if on_time > 0 else 0.0,
            "detected_events": len(self.log.detected),
            "dark_events": self.crystal.dark_events,
            "peak_pressure_mbar": max(self.pressure.pressures),
            "removed_depth_m": self.target.removed_depth,
            "contaminant_coverage": self.target.contaminant_coverage,
        }
        summary.update({f"isotope_{label}": int(n) for label, n in zip(labels, composition)})
        summary.update({f"ledger_{k}": v for k, v in ledger.as_dict().items()})
        if cfg.mode == ControllerMode.SINGLE_ION_AUTO_SHUTTER:
            target = cfg.controller.target_ion_count
            summary["shutter_time_s"] = self.log.shutter_time
            summary["target_ion_count"] = target
            summary["overshoot"] = max(0, final_count - target) if self.log.shutter_time is not None else 0
        return summary


def run_scenario(scenario: Scenario) -> ScenarioResult:
    """Run one scenario to completion.

    Args:
        scenario: Named configuration

    Returns:
        ScenarioResult with event log, traces and summary
    """
    logger.record("run-started", scenario.name, {
        "config_hash": config_hash(scenario.config),
        "seed": scenario.config.rng_seed,
        "mode": scenario.config.mode.value,
    })
    runner = None
    try:
        runner = ScenarioRunner(scenario)
        if scenario.config.mode == ControllerMode.SINGLE_ION_AUTO_SHUTTER:
            single_ion_controller(runner, scenario.config.controller)
        else:
            while not runner.done:
                runner.step()
        result = runner.finish()
    except ConfigError:
        raise
    except AblatronError as e:
        sim_time = runner.t if runner is not None else None
        logger.error("Scenario failed", {"scenario": scenario.name, "t": sim_time}, exc_info=True)
        raise ScenarioError(scenario.name, sim_time, e) from e

    logger.record("run-finished", scenario.name, {
        "final_ion_count": result.summary["final_ion_count"],
        "mean_loading_rate": result.summary["mean_loading_rate"],
        "balanced": result.events.ledger.is_balanced(),
    })
    return result
