"""Tests for fluorescence synthesis, step detection, pressure and camera frames."""

import math

import numpy as np
import pytest
from scipy import constants

from config.config import DetectionParams, TrapParams, VacuumParams
from src.diagnostics import (
    FluorescenceTrace,
    LoadingTimeline,
    PressureTrace,
    RateModel,
    detect_steps,
    equilibrium_positions,
    equilibrium_pressure,
    expected_counts,
    fluorescence_rate,
    integrate_pressure,
    pressure_step,
    recovery_time_constant,
    render_ccd_frame,
    single_ion_rate,
    synthesize_trace,
)
from src.trap import IonCrystal, NewIon
from src.utils.errors import DegenerateTraceError, UnstableTimestepError

MASS_40 = 40 * constants.atomic_mass
BIN = 0.05
STEP_TIMES = [2.0, 5.0, 8.0, 11.0]


@pytest.fixture
def detection():
    """Default step-detector settings."""
    return DetectionParams()


@pytest.fixture
def crystal():
    """Empty crystal in the default trap."""
    return IonCrystal.from_trap(TrapParams(), MASS_40)


def _saturating(cooling):
    """Cooling beam at s = 1 on resonance."""
    power = cooling.saturation_intensity * math.pi * cooling.waist_at_trap ** 2 / 2.0
    return cooling.model_copy(update={"power": power, "detuning": 0.0})


def test_single_ion_rate_at_saturation(default_config):
    """Test Γ·η/4 at s = 1 and zero detuning."""
    cooling = _saturating(default_config.cooling_laser)

    assert single_ion_rate(cooling, 1e-3) == pytest.approx(3.25e4, rel=0.01)
    with pytest.raises(ValueError):
        single_ion_rate(cooling, 0.0)


def test_fluorescence_rate_additivity(default_config, crystal):
    """Test that N bright cold ions give N times one ion."""
    cooling = default_config.cooling_laser
    one = single_ion_rate(cooling, 1e-4)
    assert fluorescence_rate(crystal, cooling, 1e-4) == 0.0

    crystal.add_ions([NewIon(0.0)] * 5)

    assert fluorescence_rate(crystal, cooling, 1e-4) == pytest.approx(5 * one)
    assert fluorescence_rate(crystal, cooling, 1e-4, t=10.0) == pytest.approx(5 * one)


def test_hot_and_dark_ions_are_suppressed(default_config, crystal):
    """Test the loading transient and the suppressed fraction."""
    cooling = default_config.cooling_laser
    one = single_ion_rate(cooling, 1e-4)
    crystal.add_ions([NewIon(0.0), NewIon(0.0)])
    crystal.add_ions([NewIon(5.0)])

    assert fluorescence_rate(crystal, cooling, 1e-4, t=5.1) == 0.0
    assert fluorescence_rate(crystal, cooling, 1e-4, t=5.1, suppressed_fraction=0.5) == pytest.approx(1.5 * one)
    assert fluorescence_rate(crystal, cooling, 1e-4, t=5.3) == pytest.approx(3 * one)


def test_zero_rate_trace():
    """Test that nothing glowing gives an all-zero trace."""
    trace = synthesize_trace(LoadingTimeline(), RateModel(0.0), BIN, np.random.default_rng(0), 10.0)

    assert len(trace) == 200
    assert not trace.counts.any()


def test_trace_length_and_times():
    """Test ceil(duration/bin_width) bins and the time axis."""
    trace = synthesize_trace(LoadingTimeline(), RateModel(0.0, 10.0), BIN, None, 1.01, t0=3.0)

    assert len(trace) == 21
    assert trace.times[0] == 3.0
    assert trace.times[-1] == pytest.approx(4.0)
    with pytest.raises(ValueError):
        FluorescenceTrace(BIN, [1, -1])


def test_constant_rate_bin_mean():
    """Test the Poisson bin mean at a constant rate over 10⁴ bins."""
    rate = 200.0
    trace = synthesize_trace(LoadingTimeline(), RateModel(0.0, rate), BIN, np.random.default_rng(1), 500.0)
    expected = rate * BIN

    assert len(trace) == 10_000
    assert abs(trace.counts.mean() - expected) < 3 * math.sqrt(expected / len(trace))


def test_three_events_give_four_plateaus():
    """Test the noiseless staircase."""
    timeline = LoadingTimeline.from_arrivals([1.0, 2.0, 3.0])
    trace = synthesize_trace(timeline, RateModel(100.0), BIN, None, 4.0)

    assert np.unique(np.round(trace.counts, 9)).tolist() == [0.0, 5.0, 10.0, 15.0]


def test_expected_counts_integrate_partial_bins():
    """Test that an arrival inside a bin contributes pro rata."""
    timeline = LoadingTimeline.from_arrivals([0.125])
    counts = expected_counts(timeline, RateModel(100.0), 0.1, 3)

    assert counts == pytest.approx([0.0, 7.5, 10.0])


def test_partial_last_bin_integrates_covered_time():
    """Test that a trace ending mid-bin only counts the covered part."""
    trace = synthesize_trace(LoadingTimeline(), RateModel(0.0, 100.0), 0.1, None, 0.25)

    assert trace.counts == pytest.approx([10.0, 10.0, 5.0])


def test_dark_windows_reduce_counts():
    """Test that a dark dwell removes one ion's light."""
    timeline = LoadingTimeline(np.array([0.0, 0.0]), 0.0, np.array([[1.0, 1.5]]))
    counts = expected_counts(timeline, RateModel(100.0), 0.5, 4)

    assert counts == pytest.approx([100.0, 100.0, 50.0, 100.0])


def test_detect_noiseless_staircase(detection):
    """Test four steps found at the true times."""
    timeline = LoadingTimeline.from_arrivals(STEP_TIMES)
    trace = synthesize_trace(timeline, RateModel(4900.0, 200.0), BIN, None, 14.0)

    events = detect_steps(trace, detection)

    assert [e.ion_index for e in events] == [1, 2, 3, 4]
    for event, true_time in zip(events, STEP_TIMES):
        assert abs(event.time - true_time) <= BIN + 1e-9


@pytest.mark.parametrize("factor", [3.5, 5.0, 10.0])
def test_detect_steps_across_heights(detection, factor):
    """Test exact counts for steps of at least 3 bin-noise sigma."""
    background = 400.0
    # height h = factor·sqrt(background + 3h) at the top of three steps
    b = factor ** 2 * 3
    height = 0.5 * (b + math.sqrt(b * b + 4 * factor ** 2 * background))
    timeline = LoadingTimeline.from_arrivals([2.0, 5.0, 8.0])
    model = RateModel(height / BIN, background / BIN)

    events = detect_steps(synthesize_trace(timeline, model, BIN, None, 11.0), detection)

    assert len(events) == 3


def test_dips_before_steps_are_not_events(default_config, detection):
    """Test a noisy staircase where every load blanks the crystal for 200 ms."""
    per_ion = single_ion_rate(default_config.cooling_laser, default_config.detection.efficiency)
    timeline = LoadingTimeline.from_arrivals(STEP_TIMES, heating_time=0.2)
    model = RateModel(per_ion, 200.0)

    for seed in range(20):
        trace = synthesize_trace(timeline, model, BIN, np.random.default_rng(seed), 14.0)
        events = detect_steps(trace, detection)
        assert len(events) == len(STEP_TIMES)
        assert all(b.time > a.time for a, b in zip(events, events[1:]))


@pytest.mark.parametrize("known_height", [True, False])
def test_close_arrivals_counted_by_height(detection, known_height):
    """Test two loads 240 ms apart counted as two from the step height."""
    timeline = LoadingTimeline.from_arrivals([2.0, 2.24, 6.0], heating_time=0.2)
    model = RateModel(4900.0, 200.0)
    trace = synthesize_trace(timeline, model, BIN, None, 10.0)

    events = detect_steps(trace, detection, model.per_ion_rate * BIN if known_height else None)

    assert [e.ion_index for e in events] == [1, 2, 3]
    assert 2.0 <= events[0].time <= events[1].time < 3.0
    assert abs(events[2].time - 6.2) <= 3 * BIN


def test_dark_dwell_recovery_is_not_an_event(default_config, detection):
    """Test that an ion coming back from a short or a long dark dwell adds no event."""
    per_ion = single_ion_rate(default_config.cooling_laser, default_config.detection.efficiency)
    timeline = LoadingTimeline(np.array([0.0, 0.0, 3.0]), 0.0, np.array([[6.0, 6.5], [8.0, 9.5]]))
    model = RateModel(per_ion, 200.0)

    for seed in range(20):
        trace = synthesize_trace(timeline, model, BIN, np.random.default_rng(seed), 14.0)
        events = detect_steps(trace, detection, per_ion * BIN)
        assert len(events) == 1
        assert abs(events[0].time - 3.0) <= 3 * BIN


def test_steps_on_a_bright_crystal(default_config, detection):
    """Test that single-ion steps on top of fifteen bright ions are still counted."""
    per_ion = single_ion_rate(default_config.cooling_laser, default_config.detection.efficiency)
    timeline = LoadingTimeline.from_arrivals([-1.0] * 15 + [3.0, 6.0, 9.0], heating_time=0.2)
    model = RateModel(per_ion, 200.0)

    for seed in range(20):
        trace = synthesize_trace(timeline, model, BIN, np.random.default_rng(seed), 12.0)
        assert len(detect_steps(trace, detection, per_ion * BIN)) == 3


def test_flat_trace_false_positives(default_config, detection):
    """Test that a flat trace almost never yields an event."""
    per_ion = single_ion_rate(default_config.cooling_laser, default_config.detection.efficiency)
    model = RateModel(per_ion, 200.0)
    timeline = LoadingTimeline.from_arrivals([0.0])

    clean = 0
    for seed in range(100):
        trace = synthesize_trace(timeline, model, BIN, np.random.default_rng(seed), 100_000 * BIN)
        clean += not detect_steps(trace, detection)

    assert clean >= 99


def test_degenerate_trace(detection):
    """Test that a trace shorter than two windows is rejected."""
    with pytest.raises(DegenerateTraceError):
        detect_steps(FluorescenceTrace(BIN, np.ones(7)), detection)


def test_pressure_stays_at_base():
    """Test Q = 0."""
    vacuum = VacuumParams()
    trace = integrate_pressure(vacuum, 0.0, 5.0, 0.01)

    assert np.all(np.asarray(trace.pressures) == vacuum.base_pressure)


def test_pressure_equilibrium_and_time_constant():
    """Test ΔP = Q/S and τ = V/S."""
    vacuum = VacuumParams()

    assert equilibrium_pressure(vacuum, 1.5e-8) - vacuum.base_pressure == pytest.approx(1.5e-10)
    assert recovery_time_constant(vacuum) == pytest.approx(0.5)


def test_pressure_matches_closed_form():
    """Test RK4 against the exponential at dt = τ/100."""
    vacuum = VacuumParams()
    tau = recovery_time_constant(vacuum)
    load = 1.5e-8
    times, pressures = integrate_pressure(vacuum, load, 3.0, tau / 100).as_arrays()

    rise = pressures - vacuum.base_pressure
    exact = load / vacuum.pump_speed * (1 - np.exp(-times / tau))
    assert np.allclose(rise[1:], exact[1:], rtol=1e-3)


def test_pressure_recovers_within_two_seconds():
    """Test recovery to within 5% of base after the load stops."""
    vacuum = VacuumParams()
    trace = PressureTrace(vacuum, [0.0], [equilibrium_pressure(vacuum, 1.5e-8)])
    while trace.pressure > 1.05 * vacuum.base_pressure:
        pressure_step(trace, 0.0, 0.01)

    assert trace.time < 2.0
    assert min(trace.pressures) >= vacuum.base_pressure * (1 - 1e-12)


def test_pressure_time_dependent_load():
    """Test a callable load switched off halfway."""
    vacuum = VacuumParams()
    trace = integrate_pressure(vacuum, lambda t: 1.5e-8 if t < 5.0 else 0.0, 10.0, 0.01)
    times, pressures = trace.as_arrays()

    assert pressures[np.searchsorted(times, 4.99)] == pytest.approx(
        equilibrium_pressure(vacuum, 1.5e-8), rel=1e-4)
    assert pressures[-1] == pytest.approx(vacuum.base_pressure, rel=1e-3)


def test_pressure_unstable_timestep():
    """Test the explicit-step stability bound."""
    trace = PressureTrace.at_base(VacuumParams())

    with pytest.raises(UnstableTimestepError):
        pressure_step(trace, 0.0, 1.0)
    with pytest.raises(UnstableTimestepError):
        pressure_step(trace, 0.0, 0.0)


def test_string_positions():
    """Test the two- and three-ion equilibrium strings."""
    trap = TrapParams()
    two = equilibrium_positions(2, trap, MASS_40)
    three = equilibrium_positions(3, trap, MASS_40)
    length = two[1] / 0.25 ** (1 / 3)

    assert two[0] == pytest.approx(-two[1])
    assert three[1] == pytest.approx(0.0, abs=1e-12)
    assert three[2] / length == pytest.approx(1.25 ** (1 / 3), rel=1e-4)
    assert equilibrium_positions(0, trap, MASS_40).size == 0
    with pytest.raises(ValueError):
        equilibrium_positions(101, trap, MASS_40)


def test_ccd_frame(crystal):
    """Test one spot per bright cold ion."""
    trap = TrapParams()
    crystal.add_ions([NewIon(0.0), NewIon(1.0), NewIon(2.0)])

    frame = render_ccd_frame(crystal, trap, MASS_40)
    blanked = render_ccd_frame(crystal, trap, MASS_40, t=2.1)
    settled = render_ccd_frame(crystal, trap, MASS_40, t=5.0)
    noisy = render_ccd_frame(crystal, trap, MASS_40, t=5.0, rng=np.random.default_rng(0))

    assert frame.shape == (64, 256)
    assert frame.sum() == pytest.approx(300.0, rel=1e-3)
    assert blanked.sum() == 0.0
    assert settled.sum() == pytest.approx(300.0, rel=1e-3)
    assert noisy.dtype.kind == "i"
