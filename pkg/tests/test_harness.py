"""Tests for fits, calibration, mean-field bookkeeping, the shutter controller and run output."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from config.config import ControllerParams, DetectionParams, VacuumParams, parse_config, update_config
from src.diagnostics import LoadingTimeline, RateModel, synthesize_trace
from src.diagnostics.fluorescence import FluorescenceTrace
from src.harness import (
    FractionalLedger,
    LoadingKernel,
    LoadingLedger,
    Output,
    Scenario,
    ScenarioRunner,
    ShutterController,
    build_sweep_scenarios,
    calibrate_gas_load,
    calibrate_yield,
    depth_scan,
    expected_loading_rate,
    fit_saturation,
    fit_threshold,
    linear_r_squared,
    parse_vary,
    read_csv,
    read_manifest,
    report,
    run_scenario,
    run_sweep,
    rydberg_rate_ceiling,
    write_run,
    write_sweep_csv,
)
from src.harness import scenario as scenario_module
from src.harness import sweep as sweep_module
from src.harness.calibration import calibration_config
from src.harness.meanfield import spread_arrivals
from src.photoionization import rydberg_loading_rate
from src.utils.errors import (
    DegenerateDataError,
    MalformedDocumentError,
    NonBracketableError,
    ScenarioError,
)
from src.utils.units import from_mj_per_cm2

SCAN_FLUENCES = np.linspace(120.0, 1000.0, 10)
SCAN_PULSES = 4_600_000


@pytest.fixture
def short_config():
    """Two-second continuous run that loads nothing."""
    return parse_config("[run]\nduration = 2 s\nrng_seed = 3\n")


@pytest.fixture
def plasma_config(default_config):
    """700 mJ/cm² at 2 kHz with a Rydberg fraction and the 272 nm laser off."""
    return update_config(default_config, {
        "ablation.fluence": from_mj_per_cm2(700.0),
        "ablation.rep_rate": 2e3,
        "source.rydberg_fraction": 0.01,
        "pi_laser.power": 0.0,
    })


def _hinge_points(threshold=600.0, slope=1e-5, n_pulses=SCAN_PULSES):
    return [(f, n_pulses * max(0.0, slope * (f - threshold))) for f in SCAN_FLUENCES]


def test_fit_threshold_exact():
    """Test exact recovery of a noiseless hinge."""
    result = fit_threshold(_hinge_points(), n_pulses=SCAN_PULSES)

    assert result.parameters["F_th"] == pytest.approx(600.0, rel=1e-6)
    assert result.parameters["slope"] == pytest.approx(1e-5, rel=1e-6)
    assert result.residual_norm == pytest.approx(0.0, abs=1e-9)


def test_fit_threshold_from_depth_scan(default_config):
    """Test threshold recovery from noisy depth scans over 100 seeds."""
    fluences = [from_mj_per_cm2(f) for f in SCAN_FLUENCES]
    errors = []
    for seed in range(100):
        rows = depth_scan(default_config, fluences, SCAN_PULSES, rng=np.random.default_rng(seed), noise=0.05)
        data = np.asarray(rows)
        fit = fit_threshold(data[:, :2], n_pulses=data[:, 2])
        errors.append(abs(fit.parameters["F_th"] - 600.0) / 600.0)

    assert np.percentile(errors, 95) < 0.05


def test_fit_threshold_degenerate():
    """Test scans that cannot locate a threshold."""
    with pytest.raises(DegenerateDataError):
        fit_threshold(_hinge_points()[:3])
    with pytest.raises(DegenerateDataError):
        fit_threshold([(f, 0.0) for f in SCAN_FLUENCES])
    with pytest.raises(DegenerateDataError):
        fit_threshold(_hinge_points(threshold=50.0))


def test_fit_saturation_exact():
    """Test recovery of R_max and P_sat from a noiseless curve."""
    powers = np.array([0.25, 0.5, 1, 2, 5, 10, 20, 40]) * 1e-3
    points = [(p, rydberg_loading_rate(p, 50.0, 5e-3)) for p in powers]

    result = fit_saturation(points)

    assert result.parameters["R_max"] == pytest.approx(50.0, rel=0.05)
    assert result.parameters["P_sat"] == pytest.approx(5e-3, rel=0.05)
    assert result.parameters["linear_slope"] == pytest.approx(1e4, rel=0.05)
    assert not result.unidentifiable


def test_fit_saturation_linear_regime_is_unidentifiable():
    """Test that powers far below saturation only fix the slope."""
    powers = np.array([1e-6, 2e-6, 3e-6, 4e-6])
    points = [(p, rydberg_loading_rate(p, 50.0, 5e-3)) for p in powers]

    result = fit_saturation(points)

    assert result.unidentifiable
    assert result.parameters["linear_slope"] == pytest.approx(1e4, rel=0.01)


def test_fit_saturation_degenerate():
    """Test inputs that cannot be fitted."""
    with pytest.raises(DegenerateDataError):
        fit_saturation([(1e-3, 1.0), (2e-3, 2.0)])
    with pytest.raises(DegenerateDataError):
        fit_saturation([(-1e-3, 1.0), (1e-3, 1.0), (2e-3, 2.0)])
    with pytest.raises(DegenerateDataError):
        fit_saturation([(0.0, 0.0), (1e-3, 0.0), (2e-3, 0.0)])


def test_linear_r_squared():
    """Test R² of straight and curved data."""
    x = np.arange(10.0)

    assert linear_r_squared(x, 3 * x + 1) == pytest.approx(1.0)
    assert linear_r_squared(x, np.ones(10)) == 1.0
    assert linear_r_squared(x, x ** 4) < 0.9


def test_calibrate_gas_load():
    """Test the per-pulse load that raises the pressure by 1.5e-10 mbar."""
    vacuum = VacuumParams()

    assert calibrate_gas_load(1.5e-10, 23e3, vacuum) == pytest.approx(vacuum.gas_load_per_pulse)
    with pytest.raises(ValueError):
        calibrate_gas_load(1e-10, 0.0, vacuum)


def test_calibrate_yield_hits_target(default_config):
    """Test that the calibrated scale reproduces 0.001 ions/s."""
    fluence = from_mj_per_cm2(240.0)
    scale = calibrate_yield(0.001, fluence, 25e3, default_config)
    calibrated = update_config(calibration_config(default_config, fluence, 25e3), {"source.yield_scale": scale})

    assert expected_loading_rate(calibrated) == pytest.approx(0.001, rel=0.01)


def test_calibrated_scale_tracks_acceptance(default_config):
    """Test that doubling the aperture halves the yield scale."""
    fluence = from_mj_per_cm2(240.0)
    wide = update_config(default_config, {"geometry.aperture_width": 2e-3})

    narrow_scale = calibrate_yield(0.01, fluence, 25e3, default_config)
    wide_scale = calibrate_yield(0.01, fluence, 25e3, wide)

    assert wide_scale == pytest.approx(narrow_scale / 2, rel=0.03)


def test_calibration_unreachable(default_config):
    """Test a target no yield can reach."""
    dark = update_config(default_config, {"pi_laser.power": 0.0})

    with pytest.raises(NonBracketableError) as exc:
        calibrate_yield(1.0, from_mj_per_cm2(240.0), 25e3, dark, on_time=1.0)
    assert exc.value.achievable_rate == 0.0
    with pytest.raises(ValueError):
        calibrate_yield(0.0, from_mj_per_cm2(240.0), 25e3, default_config)


def test_rydberg_rate_ceiling(plasma_config):
    """Test that the Rydberg channel follows R_max·P/(P + P_sat)."""
    ceiling = rydberg_rate_ceiling(plasma_config)
    p_sat = plasma_config.photoionization.rydberg_saturation_power

    assert ceiling > 0
    for power in (1e-3, 5e-3, 20e-3):
        cfg = update_config(plasma_config, {"cooling_laser.power": power})
        assert expected_loading_rate(cfg) == pytest.approx(rydberg_loading_rate(power, ceiling, p_sat), rel=1e-6)


def test_depth_scan_rows(default_config):
    """Test depth-scan units and the zero region."""
    rows = depth_scan(default_config, [from_mj_per_cm2(300.0), from_mj_per_cm2(1000.0)], 1000)

    assert rows[0] == (300.0, 0.0, 1000)
    assert rows[1][0] == pytest.approx(1000.0)
    assert rows[1][1] == pytest.approx(1000 * 2.5e-15 * 4000.0 * 1e6)


def test_fractional_ledger_stays_nested():
    """Test integer increments of many small expectations."""
    kernel = LoadingKernel(0.5, (0.3, 0.1), 2e-4, 1)
    fractional = FractionalLedger()
    ledger = LoadingLedger()
    captured = np.zeros(2, dtype=np.int64)

    for _ in range(10_000):
        step = fractional.advance(37.3, 0.013, kernel)
        ledger.add(step["emitted"], step["accepted"], step["ionized"], int(step["captured"].sum()))
        captured += step["captured"]
        assert min(step["emitted"], step["accepted"], step["ionized"]) >= 0
        assert np.all(step["captured"] >= 0)

    assert ledger.is_balanced()
    assert abs(ledger.atoms_emitted - 373_000) <= 1
    assert captured.tolist() == np.floor(fractional.captured).astype(int).tolist()
    assert fractional.expected_captured == pytest.approx(373_000 * 0.013 * 0.4)


def test_spread_arrivals():
    """Test deterministic placement of mean-field ions over a step's pulses."""
    arrivals = spread_arrivals(np.arange(10), 1000.0, 3, 2e-4)

    assert arrivals.tolist() == pytest.approx([0.0012, 0.0052, 0.0082])
    assert spread_arrivals(np.arange(10), 1000.0, 0, 2e-4).size == 0


def _observe_all(controller, trace):
    for n in range(1, len(trace) + 1):
        partial = FluorescenceTrace(trace.bin_width, trace.counts[:n], trace.t0)
        shutter = controller.observe(partial)
        if shutter is not None:
            return shutter, n
    return None, len(trace)


def test_shutter_controller_single_ion():
    """Test that the shutter closes one latency after the first step is seen."""
    params = ControllerParams(mode="SingleIonAutoShutter", target_ion_count=1, shutter_latency=0.05)
    trace = synthesize_trace(LoadingTimeline.from_arrivals([2.0]), RateModel(4900.0, 200.0), 0.05, None, 5.0)
    controller = ShutterController(params, DetectionParams())

    shutter, seen = _observe_all(controller, trace)

    assert len(controller.detected) == 1
    assert abs(controller.detected[0].time - 2.0) <= 4 * 0.05
    assert shutter == pytest.approx(seen * 0.05 + 0.05)
    assert 2.0 < shutter < 2.3


def test_shutter_controller_counts_to_target():
    """Test that one step is one event and the target is respected."""
    params = ControllerParams(mode="SingleIonAutoShutter", target_ion_count=3)
    trace = synthesize_trace(LoadingTimeline.from_arrivals([1.0, 3.0]), RateModel(4900.0, 200.0), 0.05, None, 6.0)
    controller = ShutterController(params, DetectionParams())

    shutter, _ = _observe_all(controller, trace)

    assert shutter is None
    assert [e.ion_index for e in controller.detected] == [1, 2]


def test_unstable_trap_raises_scenario_error(short_config):
    """Test that module errors carry the scenario name."""
    cfg = update_config(short_config, {"trap.rf_amplitude": 800.0})

    with pytest.raises(ScenarioError) as exc:
        run_scenario(Scenario("overdriven", cfg))
    assert exc.value.scenario == "overdriven"
    assert exc.value.cause_kind == "unstable-trap"
    assert exc.value.exit_code == 3


def test_capability_shortfall_recorded_once_per_run(slow_config, short_config, mocker):
    """Test that an unreachable fluence is reported once per run and nowhere else."""
    record = mocker.patch.object(scenario_module.logger, "record")
    beyond = update_config(slow_config, {"duration": 1.0})

    run_scenario(Scenario("beyond", beyond, frozenset()))
    expected_loading_rate(beyond)
    run_scenario(Scenario("within", short_config, frozenset()))

    events = [c.args[0] for c in record.call_args_list]
    assert events.count("fluence-beyond-capability") == 1
    details = record.call_args_list[events.index("fluence-beyond-capability")].args
    assert details[1] == "beyond"
    assert details[2]["required_energy_uJ"] > details[2]["available_energy_uJ"]


def test_beam_stream_draws_atom_samples(short_config, mocker):
    """Test that velocities and isotopes come from the beam stream."""
    runner = ScenarioRunner(Scenario("streams", short_config, frozenset()))
    spy = mocker.spy(scenario_module, "sample_atoms")

    runner.step()

    assert spy.call_count == 1
    assert spy.call_args.args[-1] is runner.streams.stream("beam")
    assert spy.call_args.args[-1] is not runner.streams.stream("source")


def test_online_trace_final_bin_covers_short_step(short_config):
    """Test that a shortened last step gives a proportionally shorter bin."""
    cfg = update_config(short_config, {
        "duration": 1.02,
        "pi_laser.power": 0.0,
        "detection.background_rate": 2e4,
    })
    runner = ScenarioRunner(Scenario("partial", cfg, frozenset()))
    runner.enable_online_trace()
    while not runner.done:
        runner.step()

    counts = runner.trace.counts
    assert len(counts) == 21
    assert 900 < counts[:-1].mean() < 1100
    # 20 ms of a 50 ms bin
    assert 300 < counts[-1] < 500


def test_write_run(short_config, tmp_path):
    """Test the run directory layout."""
    result = run_scenario(Scenario("short", short_config))
    run_dir = write_run(result, tmp_path / "short", depth_rows=[(300.0, 0.0, 10), (900.0, 1.5, 10)])

    for name in ("events", "fluorescence", "pressure", "ion_count", "depth_scan"):
        assert (run_dir / f"{name}.csv").exists()
        assert (run_dir / "plots" / f"{name}.dat").exists()
        assert (run_dir / "plots" / f"{name}.plot").exists()
    assert "yscale = log" in (run_dir / "plots" / "pressure.plot").read_text()

    manifest = read_manifest(run_dir)
    assert manifest["scenario"] == "short"
    assert manifest["rng_seed"] == "3"
    assert "summary.csv" in manifest["files"].split(",")
    assert parse_config((run_dir / "config.ini").read_text()) == short_config

    header, rows = read_csv(run_dir / "ion_count.csv")
    assert header == ["t_s", "ion_count"]
    assert len(rows) == 41
    _, fluorescence = read_csv(run_dir / "fluorescence.csv")
    assert len(fluorescence) == 40

    text = report(run_dir)
    assert "scenario: short" in text
    assert "final_ion_count" in text


def test_write_run_respects_outputs(short_config, tmp_path):
    """Test that only requested series are written."""
    result = run_scenario(Scenario("counts-only", short_config, frozenset({Output.ION_COUNT})))
    run_dir = write_run(result, tmp_path / "counts-only")

    assert (run_dir / "ion_count.csv").exists()
    assert not (run_dir / "fluorescence.csv").exists()
    assert not (run_dir / "pressure.csv").exists()


def test_parse_vary():
    """Test sweep range parsing."""
    variation = parse_vary("ablation.fluence=120 mJ/cm2:600 mJ/cm2:5")

    assert variation.key == "ablation.fluence"
    assert variation.values == pytest.approx((1200.0, 2400.0, 3600.0, 4800.0, 6000.0))
    assert parse_vary("run.rng_seed=7:9:1").values == (7.0,)
    for bad in ("ablation.fluence", "ablation.fluence=1:2", "ablation.fluence=1:2:x",
                "ablation.fluence=1:2:0", "ablation.fluence=a:2:3"):
        with pytest.raises(MalformedDocumentError):
            parse_vary(bad)


def test_build_sweep_scenarios(short_config):
    """Test the cartesian product and its names."""
    variations = [parse_vary("ablation.rep_rate=10 kHz:20 kHz:2"), parse_vary("trap.rf_amplitude=100:300:3")]

    scenarios = build_sweep_scenarios(short_config, variations, prefix="grid")

    assert [s.name for s in scenarios] == [f"grid-{i}" for i in range(6)]
    assert scenarios[4].config.ablation.rep_rate == 20e3
    assert scenarios[4].config.trap.rf_amplitude == 200.0


def test_run_sweep(short_config, tmp_path, mocker):
    """Test a threaded sweep and its merged CSV."""
    spy = mocker.patch.object(sweep_module, "run_scenario", wraps=sweep_module.run_scenario)
    variations = [parse_vary("ablation.rep_rate=10 kHz:20 kHz:3")]
    scenarios = build_sweep_scenarios(short_config, variations, outputs=frozenset({Output.ION_COUNT}))

    results = run_sweep(scenarios, workers=2, run_root=str(tmp_path / "runs"), executor_cls=ThreadPoolExecutor)
    path = write_sweep_csv(tmp_path / "sweep.csv", variations, scenarios, results)

    assert spy.call_count == 3
    assert [name for name, _ in results] == ["sweep-0", "sweep-1", "sweep-2"]
    assert (tmp_path / "runs" / "sweep-1" / "manifest.txt").exists()
    header, rows = read_csv(path)
    assert header[:2] == ["scenario", "ablation.rep_rate"]
    assert "final_ion_count" in header
    with pytest.raises(ValueError):
        run_sweep(scenarios + scenarios[:1], executor_cls=ThreadPoolExecutor)
