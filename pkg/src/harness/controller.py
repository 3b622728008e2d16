"""Closed-loop auto-shutter for loading a set number of ions."""

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional

from config.config import ControllerParams, DetectionParams
from src.diagnostics.fluorescence import FluorescenceTrace, LoadingEvent, step_scores
from src.utils.logging import get_logger

if TYPE_CHECKING:
    from src.harness.scenario import EventLog, ScenarioRunner

logger = get_logger(__name__)


@dataclass
class ShutterController:
    """Online step detector that decides when to close the ablation shutter.

    An event is declared on the first bin whose step score crosses the
    threshold; the score must fall back below it before another event counts.
    """
    params: ControllerParams
    detection: DetectionParams
    detected: List[LoadingEvent] = field(default_factory=list)
    shutter_time: Optional[float] = None
    _in_step: bool = False
    _last_event: float = -math.inf

    def tail_length(self, bin_width: float) -> int:
        lookback = max(0, int(round(self.detection.lookback / bin_width)))
        return lookback + 2 * self.detection.window

    def observe(self, trace: FluorescenceTrace) -> Optional[float]:
        """Look at the newest bin and return the shutter time once the target is reached."""
        if self.shutter_time is not None or len(trace) < 2 * self.detection.window:
            return self.shutter_time
        n_tail = min(len(trace), self.tail_length(trace.bin_width))
        offset = len(trace) - n_tail
        tail = FluorescenceTrace(trace.bin_width, trace.counts[offset:], trace.t0 + offset * trace.bin_width)
        boundaries, scores = step_scores(tail, self.detection)

        if scores[-1] > self.detection.threshold_sigma:
            step_time = tail.t0 + boundaries[-1] * tail.bin_width
            if not self._in_step and step_time - self._last_event >= self.detection.min_separation:
                self.detected.append(LoadingEvent(float(step_time), len(self.detected) + 1))
                self._last_event = step_time
            self._in_step = True
        else:
            self._in_step = False

        if len(self.detected) >= self.params.target_ion_count:
            now = trace.t0 + trace.duration
            self.shutter_time = now + self.params.shutter_latency
        return self.shutter_time


def single_ion_controller(runner: "ScenarioRunner",
                          params: Optional[ControllerParams] = None) -> "EventLog":
    """Drive ``runner`` with the auto-shutter in the loop.

    Args:
        runner: Freshly created scenario runner
        params: Controller settings; defaults to the runner's config

    Returns:
        The runner's EventLog, with detected events and the shutter time
    """
    params = params or runner.cfg.controller or ControllerParams()
    controller = ShutterController(params, runner.cfg.detection)
    runner.enable_online_trace()
    runner.online_detection = True

    while not runner.done:
        runner.step()
        shutter = controller.observe(runner.trace)
        if shutter is not None and runner.log.shutter_time is None:
            runner.close_shutter(shutter)
            logger.record("shutter-closed", runner.scenario.name, {
                "shutter_time": shutter,
                "detected_events": len(controller.detected),
                "ion_count": runner.crystal.count_at(runner.t),
            })

    runner.log.detected = list(controller.detected)
    if runner.log.shutter_time is None:
        logger.info("Target ion count never detected; shutter stayed open", {
            "scenario": runner.scenario.name,
            "detected_events": len(controller.detected),
        })
    return runner.log
