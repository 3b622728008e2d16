"""Parameter sweeps over a base configuration, run across a process pool."""

import itertools
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Type

import numpy as np

from config.config import RunConfig, update_config
from src.harness.persistence import write_csv, write_run
from src.harness.scenario import DEFAULT_OUTPUTS, Scenario, run_scenario
from src.utils.errors import MalformedDocumentError
from src.utils.logging import get_logger
from src.utils.units import parse_quantity

logger = get_logger(__name__)


@dataclass(frozen=True)
class Variation:
    """One swept key and the values it takes."""
    key: str
    values: Tuple[float, ...]


def parse_vary(text: str) -> Variation:
    """Parse ``section.key=lo:hi:n`` into n evenly spaced values.

    ``lo`` and ``hi`` accept unit suffixes, e.g. ``ablation.fluence=120 mJ/cm2:600 mJ/cm2:5``.
    """
    if "=" not in text:
        raise MalformedDocumentError(text, "expected section.key=lo:hi:n")
    key, _, spec = text.partition("=")
    parts = spec.split(":")
    if len(parts) != 3:
        raise MalformedDocumentError(key.strip(), "range must be lo:hi:n")
    lo = parse_quantity(parts[0], key)
    hi = parse_quantity(parts[1], key)
    try:
        n = int(parts[2])
    except ValueError as e:
        raise MalformedDocumentError(key.strip(), f"point count '{parts[2]}' is not an integer") from e
    if n < 1:
        raise MalformedDocumentError(key.strip(), "point count must be >= 1")
    values = (lo,) if n == 1 else tuple(float(v) for v in np.linspace(lo, hi, n))
    return Variation(key.strip(), values)


def build_sweep_scenarios(base: RunConfig, variations: Sequence[Variation],
                          prefix: str = "sweep", outputs=DEFAULT_OUTPUTS) -> List[Scenario]:
    """Cartesian product of the variations; names sort in generation order."""
    combos = list(itertools.product(*(v.values for v in variations)))
    width = len(str(max(len(combos) - 1, 0)))
    scenarios = []
    for index, combo in enumerate(combos):
        changes = {v.key: value for v, value in zip(variations, combo)}
        scenarios.append(Scenario(f"{prefix}-{index:0{width}d}", update_config(base, changes), outputs))
    return scenarios


def _run_one(scenario: Scenario, run_root: Optional[str]) -> Tuple[str, Dict[str, object]]:
    result = run_scenario(scenario)
    if run_root is not None:
        write_run(result, Path(run_root) / scenario.name)
    return scenario.name, result.summary


def run_sweep(scenarios: Sequence[Scenario], workers: int = 1, run_root: Optional[str] = None,
              executor_cls: Type[Executor] = ProcessPoolExecutor) -> List[Tuple[str, Dict[str, object]]]:
    """Run every scenario and merge the summaries by scenario name.

    Args:
        scenarios: Scenarios with unique names
        workers: Worker processes
        run_root: Directory for per-scenario run directories, if wanted
        executor_cls: Executor type

    Returns:
        (name, summary) pairs sorted by name
    """
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ValueError("scenario names must be unique within a sweep")
    logger.info("Sweep started", {"scenarios": len(scenarios), "workers": workers})
    with executor_cls(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(_run_one, s, run_root) for s in scenarios]
        results = [f.result() for f in futures]
    return sorted(results, key=lambda item: item[0])


def write_sweep_csv(path, variations: Sequence[Variation], scenarios: Sequence[Scenario],
                    results: Sequence[Tuple[str, Dict[str, object]]]) -> Path:
    """One row per scenario: name, swept values, then every summary field."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    by_name = {s.name: s for s in scenarios}
    summary_keys = sorted({k for _, summary in results for k in summary} - {"scenario"})
    header = ["scenario"] + [v.key for v in variations] + summary_keys
    rows = []
    for name, summary in results:
        cfg = by_name[name].config
        swept = [_lookup(cfg, v.key) for v in variations]
        rows.append([name] + swept + [summary.get(k, "") for k in summary_keys])
    write_csv(path, header, rows)
    return path


def _lookup(cfg: RunConfig, dotted: str):
    value = cfg
    for part in dotted.split("."):
        if part == "run":
            continue
        value = getattr(value, part)
    return value
