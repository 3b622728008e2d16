"""Fluorescence signal synthesis and loading-step detection."""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from config.config import DetectionParams, IonLaserSpec
from src.core.constants import CA_ION_397_GAMMA
from src.trap.dynamics import IonCrystal
from src.utils.errors import DegenerateTraceError
from src.utils.logging import get_logger

logger = get_logger(__name__)

# Lower bound (counts per bin) on the reference level used for the noise estimate
NOISE_FLOOR_COUNTS = 1.0
# Variance of a Gaussian sample median relative to the mean
MEDIAN_VARIANCE_FACTOR = math.pi / 2


@dataclass
class FluorescenceTrace:
    """Detected photon counts in consecutive bins starting at ``t0``."""
    bin_width: float
    counts: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if np.any(self.counts < 0):
            raise ValueError("counts must be >= 0")

    def __len__(self) -> int:
        return int(self.counts.size)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.bin_width * np.arange(len(self))

    @property
    def duration(self) -> float:
        return len(self) * self.bin_width

    def extend(self, other: "FluorescenceTrace") -> "FluorescenceTrace":
        """Append a trace that starts where this one ends."""
        return FluorescenceTrace(self.bin_width, np.concatenate([self.counts, other.counts]), self.t0)


@dataclass(frozen=True)
class LoadingEvent:
    time: float
    ion_index: int


@dataclass(frozen=True)
class RateModel:
    """Count rates that turn a loading timeline into a fluorescence signal."""
    per_ion_rate: float
    background_rate: float = 0.0
    suppressed_fraction: float = 0.0


@dataclass
class LoadingTimeline:
    """When ions arrived, when the crystal was hot and when single ions were dark."""
    arrivals: np.ndarray = field(default_factory=lambda: np.empty(0))
    heating_time: float = 0.0
    dark_windows: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    @classmethod
    def from_crystal(cls, crystal: IonCrystal) -> "LoadingTimeline":
        dark = np.array(crystal.dark_windows, dtype=float).reshape(-1, 2)
        return cls(np.sort(crystal.arrival), crystal.heating_time, dark)

    @classmethod
    def from_arrivals(cls, arrivals: Sequence[float], heating_time: float = 0.0) -> "LoadingTimeline":
        return cls(np.sort(np.asarray(arrivals, dtype=float)), heating_time)

    @property
    def hot_windows(self) -> np.ndarray:
        return np.column_stack([self.arrivals, self.arrivals + self.heating_time])


def scattering_rate(cooling: IonLaserSpec, gamma: float = CA_ION_397_GAMMA) -> float:
    """Photons/s scattered by one ion on the cooling-beam axis."""
    s = cooling.peak_intensity / cooling.saturation_intensity
    detuning = 2.0 * (2.0 * math.pi * cooling.detuning) / gamma
    return 0.5 * gamma * s / (1.0 + s + detuning ** 2)


def single_ion_rate(cooling: IonLaserSpec, detection_efficiency: float,
                    gamma: float = CA_ION_397_GAMMA) -> float:
    """Detected counts/s from one bright, cold ion."""
    if not 0 < detection_efficiency <= 1:
        raise ValueError("detection efficiency must be in (0, 1]")
    return scattering_rate(cooling, gamma) * detection_efficiency


def fluorescence_rate(crystal: IonCrystal, cooling: IonLaserSpec, detection_efficiency: float,
                      t: Optional[float] = None, suppressed_fraction: float = 0.0) -> float:
    """Total detected count rate of the crystal at time ``t``.

    With ``t`` None every ion counts as present, bright and cold.
    """
    per_ion = single_ion_rate(cooling, detection_efficiency)
    if crystal.count == 0:
        return 0.0
    if t is None:
        return per_ion * crystal.count
    present = crystal.arrival <= t
    active = crystal.bright_mask(t) & ~crystal.hot_mask(t)
    n_active = int(np.count_nonzero(active))
    n_suppressed = int(np.count_nonzero(present)) - n_active
    return per_ion * (n_active + suppressed_fraction * n_suppressed)


def expected_counts(timeline: LoadingTimeline, model: RateModel, bin_width: float,
                    n_bins: int, t0: float = 0.0, t_end: Optional[float] = None) -> np.ndarray:
    """Exact integral of the piecewise-constant count rate over each bin.

    Bins are clipped at ``t_end``, so a partial last bin only integrates the
    time it covers.
    """
    edges = t0 + bin_width * np.arange(n_bins + 1)
    if t_end is not None:
        edges = np.minimum(edges, t_end)
    t_end = edges[-1]
    arrivals = np.sort(timeline.arrivals)
    hot = timeline.hot_windows if timeline.heating_time > 0 else np.empty((0, 2))
    dark = timeline.dark_windows
    points = np.concatenate([edges, arrivals, hot[:, 1], dark[:, 0], dark[:, 1]])
    points = np.unique(points[(points >= t0) & (points <= t_end)])
    lengths = np.diff(points)
    mids = 0.5 * (points[:-1] + points[1:])

    present = np.searchsorted(arrivals, mids, side="right")
    n_dark = (np.searchsorted(np.sort(dark[:, 0]), mids, side="right")
              - np.searchsorted(np.sort(dark[:, 1]), mids, side="right"))
    n_hot = (np.searchsorted(np.sort(hot[:, 0]), mids, side="right")
             - np.searchsorted(np.sort(hot[:, 1]), mids, side="right"))
    is_hot = (n_hot > 0).astype(float)
    bright = (present - n_dark) * (1.0 - is_hot)
    suppressed = n_dark * (1.0 - is_hot) + present * is_hot
    rate = model.per_ion_rate * (bright + model.suppressed_fraction * suppressed) + model.background_rate

    bins = np.clip(np.floor((mids - t0) / bin_width).astype(np.int64), 0, n_bins - 1)
    return np.bincount(bins, weights=rate * lengths, minlength=n_bins)


def synthesize_trace(timeline: LoadingTimeline, model: RateModel, bin_width: float,
                     rng: Optional[np.random.Generator], duration: float,
                     t0: float = 0.0) -> FluorescenceTrace:
    """Poisson-sample the fluorescence of a loading timeline.

    Args:
        timeline: Ion arrivals, heating and dark windows
        model: Per-ion and background rates
        bin_width: Bin width (s)
        rng: Diagnostics stream; None returns the noiseless expectation
        duration: Trace length (s)
        t0: Start time (s)

    Returns:
        FluorescenceTrace of ceil(duration/bin_width) bins
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    n_bins = max(1, int(math.ceil(duration / bin_width - 1e-9)))
    mean = expected_counts(timeline, model, bin_width, n_bins, t0, t_end=t0 + duration)
    counts = rng.poisson(mean) if rng is not None else mean
    return FluorescenceTrace(bin_width, counts, t0)



def _window_means(counts: np.ndarray, window: int) -> np.ndarray:
    cs = np.concatenate([[0.0], np.cumsum(counts, dtype=float)])
    return (cs[window:] - cs[:-window]) / window


def _lookback_bins(params: DetectionParams, bin_width: float) -> int:
    return max(0, int(round(params.lookback / bin_width)))


def step_scores(trace: FluorescenceTrace, params: DetectionParams) -> Tuple[np.ndarray, np.ndarray]:
    """Step score at every candidate boundary.

    The after-window starts at the boundary. The reference is the median of
    the window means in the lookback that ends at the boundary, so a dip or a
    dark dwell shorter than half the lookback barely moves it. The noise is
    the Poisson spread of both estimates at the reference level.

    Returns:
        Tuple of (boundary indices, scores)
    """
    w = params.window
    n = len(trace)
    if n < 2 * w:
        raise DegenerateTraceError(f"trace of {n} bins is shorter than two windows of {w}")
    means = _window_means(trace.counts, w)
    lookback = _lookback_bins(params, trace.bin_width)
    padded = np.concatenate([np.full(lookback, np.nan), means])
    history = sliding_window_view(padded, lookback + 1)

    boundaries = np.arange(w, n - w + 1)
    rows = history[boundaries - w]
    reference = np.nanmedian(rows, axis=1)
    # the reference window means span this many bins
    covered = np.count_nonzero(~np.isnan(rows), axis=1) + w - 1
    level = np.maximum(reference, NOISE_FLOOR_COUNTS)
    variance = level / w + MEDIAN_VARIANCE_FACTOR * level / covered
    return boundaries, (means[boundaries] - reference) / np.sqrt(variance)


def _exceedance_runs(boundaries: np.ndarray, above: np.ndarray, gap_bins: int) -> List[List[int]]:
    """Contiguous runs of exceedances as [first, stop) index pairs.

    Runs whose boundaries are less than ``gap_bins`` apart are joined.
    """
    change = np.diff(np.concatenate([[0], above.astype(np.int8), [0]]))
    runs: List[List[int]] = []
    for a, b in zip(np.flatnonzero(change == 1), np.flatnonzero(change == -1)):
        if runs and boundaries[a] - boundaries[runs[-1][1] - 1] < gap_bins:
            runs[-1][1] = int(b)
        else:
            runs.append([int(a), int(b)])
    return runs


def plateau_levels(counts: np.ndarray, boundaries: np.ndarray, runs: Sequence[Sequence[int]],
                   span: int) -> np.ndarray:
    """Median count level before the first run and after each run.

    The level after a run is taken from at most ``span`` bins starting at
    its last exceeding boundary and ending before the next run.
    """
    counts = np.asarray(counts, dtype=float)
    first = int(boundaries[runs[0][0]])
    levels = [np.median(counts[max(0, first - span):first])]
    for i, (_, stop) in enumerate(runs):
        lo = int(boundaries[stop - 1])
        hi = int(boundaries[runs[i + 1][0]]) if i + 1 < len(runs) else len(counts)
        levels.append(np.median(counts[lo:max(lo + 1, min(hi, lo + span))]))
    return np.asarray(levels, dtype=float)


def detect_steps(trace: FluorescenceTrace, params: DetectionParams,
                 step_height: Optional[float] = None) -> List[LoadingEvent]:
    """Locate upward fluorescence steps (ion loading events).

    Boundaries scoring above ``threshold_sigma`` form candidate runs, and runs
    closer than ``min_separation`` are joined. Each run then adds
    round(rise / step_height) events, the rise being its following plateau
    above the highest plateau seen so far. Arrivals too close to separate in
    time are counted from the height of their combined step; the recovery
    from a dip or a dark dwell returns to a level already seen and adds none.

    Args:
        trace: Fluorescence trace
        params: window (bins), threshold_sigma, min_separation (s), lookback (s)
        step_height: Counts per bin added by one bright ion; when None it is
            the smallest significant rise

    Returns:
        LoadingEvent list sorted in time with consecutive ion indices
    """
    boundaries, scores = step_scores(trace, params)
    w = params.window
    gap_bins = max(w, int(math.ceil(params.min_separation / trace.bin_width - 1e-9)))
    runs = _exceedance_runs(boundaries, scores > params.threshold_sigma, gap_bins)
    if not runs:
        return []
    span = max(w, _lookback_bins(params, trace.bin_width))
    levels = plateau_levels(trace.counts, boundaries, runs, span)
    tops = np.maximum.accumulate(levels)
    rises = levels[1:] - tops[:-1]

    if step_height is None:
        noise = np.sqrt(np.maximum(tops[:-1], NOISE_FLOOR_COUNTS) / w)
        significant = rises[rises > params.threshold_sigma * noise]
        if significant.size == 0:
            return []
        step_height = float(significant.min())
    if step_height <= 0:
        raise ValueError("step_height must be > 0")

    means = _window_means(trace.counts, w)
    events: List[LoadingEvent] = []
    last_time = -math.inf
    for (a, b), top, rise in zip(runs, tops[:-1], rises):
        candidates = boundaries[a:b]
        for j in range(1, int(round(rise / step_height)) + 1):
            crossed = np.flatnonzero(means[candidates] >= top + (j - 0.5) * step_height)
            boundary = candidates[crossed[0]] if crossed.size else candidates[np.argmax(scores[a:b])]
            # a window mean is halfway up when the step sits at its centre
            time = max(trace.t0 + (boundary + 0.5 * w) * trace.bin_width, last_time)
            events.append(LoadingEvent(time=float(time), ion_index=len(events) + 1))
            last_time = time
    return events
