"""Ablation laser gating schedule."""

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from config.config import ControllerMode, RunConfig

# Pulse times closer than this to an interval edge are treated as on the edge
EDGE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GatingSchedule:
    """Sorted, non-overlapping half-open on-intervals [start, end)."""
    intervals: Tuple[Tuple[float, float], ...]

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "GatingSchedule":
        if cfg.mode == ControllerMode.CONTINUOUS or not cfg.gating_schedule:
            return cls(((0.0, cfg.duration),))
        return cls(tuple(cfg.gating_schedule))

    @classmethod
    def always_on(cls, duration: float = math.inf) -> "GatingSchedule":
        return cls(((0.0, duration),))

    def is_on(self, t: float) -> bool:
        return any(start - EDGE_TOLERANCE <= t < end - EDGE_TOLERANCE for start, end in self.intervals)

    def on_time(self, t0: float = 0.0, t1: float = math.inf) -> float:
        """Total on-time inside [t0, t1)."""
        return sum(max(0.0, min(end, t1) - max(start, t0)) for start, end in self.intervals)

    def off_intervals(self, duration: float) -> List[Tuple[float, float]]:
        gaps = []
        t = 0.0
        for start, end in self.intervals:
            if start > t:
                gaps.append((t, start))
            t = max(t, end)
        if t < duration:
            gaps.append((t, duration))
        return gaps

    def truncated(self, t_stop: float) -> "GatingSchedule":
        """Schedule with everything after ``t_stop`` switched off."""
        kept = tuple((s, min(e, t_stop)) for s, e in self.intervals if s < t_stop)
        return GatingSchedule(kept)

    def pulse_indices(self, rep_rate: float, t0: float, t1: float) -> np.ndarray:
        """Indices k of pulses at k/rep_rate that fire inside [t0, t1)."""
        chunks = []
        for start, end in self.intervals:
            lo, hi = max(start, t0), min(end, t1)
            if hi <= lo:
                continue
            k_lo = math.ceil((lo - EDGE_TOLERANCE) * rep_rate)
            k_hi = math.ceil((hi - EDGE_TOLERANCE) * rep_rate)
            if k_hi > k_lo:
                chunks.append(np.arange(k_lo, k_hi, dtype=np.int64))
        if not chunks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(chunks)

    def pulse_count(self, rep_rate: float, t0: float, t1: float) -> int:
        total = 0
        for start, end in self.intervals:
            lo, hi = max(start, t0), min(end, t1)
            if hi > lo:
                total += max(0, math.ceil((hi - EDGE_TOLERANCE) * rep_rate)
                             - math.ceil((lo - EDGE_TOLERANCE) * rep_rate))
        return total
