"""Run directories: manifest, CSV series and plot files."""

import csv
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from config.config import config_hash, serialize_config
from src.harness.scenario import Output, ScenarioResult
from src.utils import __version__, utcnow
from src.utils.logging import get_logger

logger = get_logger(__name__)

MANIFEST = "manifest.txt"

# dataset name -> (title, x label, y label, plot style)
PLOT_SPECS = {
    "ion_count": ("Trapped ions", "time (s)", "ions", "steps"),
    "fluorescence": ("Fluorescence", "time (s)", "counts per bin", "steps"),
    "pressure": ("Chamber pressure", "time (s)", "pressure (mbar)", "lines"),
    "events": ("Detected loading events", "time (s)", "ion index", "points"),
    "depth_scan": ("Crater depth", "fluence (mJ/cm2)", "depth (um)", "linespoints"),
}


def _number(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_number(v) for v in row])


def read_csv(path: Path) -> Tuple[List[str], List[List[float]]]:
    """Header and numeric rows; a non-numeric first row is taken as the header."""
    with open(path, "r", newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if row and not row[0].startswith("#")]
    header: List[str] = []
    if rows:
        try:
            [float(v) for v in rows[0]]
        except ValueError:
            header, rows = rows[0], rows[1:]
    return header, [[float(v) for v in row] for row in rows]


def write_plot(plots_dir: Path, name: str, header: Sequence[str], rows: Sequence[Sequence]):
    """Write ``name.dat`` (whitespace columns) and its ``name.plot`` description."""
    title, xlabel, ylabel, style = PLOT_SPECS[name]
    with open(plots_dir / f"{name}.dat", "w", encoding="utf-8") as handle:
        handle.write("# " + " ".join(header) + "\n")
        for row in rows:
            handle.write(" ".join(_number(v) for v in row) + "\n")
    spec = [
        f"title = {title}",
        f"data = {name}.dat",
        f"x = 1 {xlabel}",
        f"y = 2 {ylabel}",
        f"style = {style}",
    ]
    if name == "pressure":
        spec.append("yscale = log")
    (plots_dir / f"{name}.plot").write_text("\n".join(spec) + "\n", encoding="utf-8")


def datasets(result: ScenarioResult) -> Dict[str, Tuple[List[str], List[Sequence]]]:
    """CSV-ready tables for the outputs the scenario asked for."""
    tables: Dict[str, Tuple[List[str], List[Sequence]]] = {}
    outputs = result.outputs
    if Output.EVENTS in outputs:
        tables["events"] = (["t_s", "ion_index"],
                            [(e.time, e.ion_index) for e in result.events.detected])
    if Output.FLUORESCENCE in outputs and result.fluorescence is not None:
        trace = result.fluorescence
        tables["fluorescence"] = (["t_s", "counts"],
                                  list(zip(trace.times.tolist(), trace.counts.tolist())))
    if Output.PRESSURE in outputs:
        tables["pressure"] = (["t_s", "pressure_mbar"],
                              list(zip(result.pressure.times, result.pressure.pressures)))
    if Output.ION_COUNT in outputs:
        tables["ion_count"] = (["t_s", "ion_count"],
                               list(zip(result.count_times.tolist(), result.counts.tolist())))
    return tables


def write_run(result: ScenarioResult, run_dir, depth_rows: Optional[Sequence[Sequence]] = None) -> Path:
    """Persist a scenario result.

    Args:
        result: Finished scenario
        run_dir: Output directory (created if missing)
        depth_rows: Optional (fluence_mJ_cm2, depth_um, n_pulses) rows

    Returns:
        Path of the run directory
    """
    run_dir = Path(run_dir)
    plots_dir = run_dir / "plots"
    plots_dir.mkdir(parents=True, exist_ok=True)

    tables = datasets(result)
    if depth_rows is not None:
        tables["depth_scan"] = (["fluence_mJ_cm2", "depth_um", "n_pulses"], list(depth_rows))
    for name, (header, rows) in tables.items():
        write_csv(run_dir / f"{name}.csv", header, rows)
        write_plot(plots_dir, name, header, rows)

    write_csv(run_dir / "summary.csv", ["key", "value"], sorted(result.summary.items()))
    (run_dir / "config.ini").write_text(serialize_config(result.config), encoding="utf-8")

    manifest = {
        "scenario": result.name,
        "config_hash": config_hash(result.config),
        "rng_seed": str(result.config.rng_seed),
        "version": __version__,
        "created": utcnow().isoformat(),
        "files": ",".join(sorted([f"{name}.csv" for name in tables] + ["summary.csv", "config.ini"])),
    }
    (run_dir / MANIFEST).write_text("".join(f"{k} = {v}\n" for k, v in manifest.items()),
                                    encoding="utf-8")
    logger.info("Run written", {"run_dir": str(run_dir), "files": manifest["files"]})
    return run_dir


def read_manifest(run_dir) -> Dict[str, str]:
    path = Path(run_dir) / MANIFEST
    entries = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()
    return entries


def report(run_dir) -> str:
    """Human-readable summary of a run directory."""
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    lines = [f"run: {run_dir}"] + [f"  {k}: {v}" for k, v in manifest.items()]
    summary_path = run_dir / "summary.csv"
    if summary_path.exists():
        with open(summary_path, "r", newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))[1:]
        lines.append("summary:")
        lines += [f"  {key}: {value}" for key, value in rows]
    return "\n".join(lines)
