"""Logging utilities with JSON-rendered context."""

import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np

from . import utcnow


class SimulationLogger:
    """Logger that renders structured context next to each message."""

    def __init__(self, name: str, level: Optional[str] = None):
        """Initialize logger.

        Args:
            name: Logger name
            level: Log level name; defaults to ABLATRON_LOG_LEVEL or INFO
        """
        level_name = (level or os.getenv("ABLATRON_LOG_LEVEL", "INFO")).upper()
        self.logger = logging.getLogger(name)
        self.logger.setLevel(getattr(logging, level_name, logging.INFO))

        # One console handler per named logger
        if not self.logger.handlers:
            console_handler = logging.StreamHandler()
            formatter = logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            )
            console_handler.setFormatter(formatter)
            self.logger.addHandler(console_handler)
            self.logger.propagate = False

    def _serialize_extra(self, data: Any) -> Any:
        """Convert numpy values nested in ``data`` to JSON-safe objects.

        Args:
            data: Context to serialize

        Returns:
            JSON-safe structure
        """
        if isinstance(data, dict):
            return {str(k): self._serialize_extra(v) for k, v in data.items()}
        if isinstance(data, (list, tuple)):
            return [self._serialize_extra(v) for v in data]
        if isinstance(data, np.ndarray):
            return data.tolist()
        if isinstance(data, np.generic):
            return data.item()
        return data

    def _render(self, message: str, extra: Optional[Dict]) -> str:
        if not extra:
            return message
        return f"{message} - {json.dumps(self._serialize_extra(extra), default=str)}"

    def info(self, message: str, extra: Optional[Dict] = None):
        """Log info message."""
        if self.logger.isEnabledFor(logging.INFO):
            self.logger.info(self._render(message, extra))

    def error(self, message: str, extra: Optional[Dict] = None, exc_info: bool = False):
        """Log error message."""
        self.logger.error(self._render(message, extra), exc_info=exc_info)

    def warning(self, message: str, extra: Optional[Dict] = None):
        """Log warning message."""
        self.logger.warning(self._render(message, extra))

    def debug(self, message: str, extra: Optional[Dict] = None):
        """Log debug message."""
        if self.logger.isEnabledFor(logging.DEBUG):
            self.logger.debug(self._render(message, extra))

    def record(self, event_type: str, run_id: str, details: Dict):
        """Log a run lifecycle event.

        Args:
            event_type: Type of event (e.g., 'run-started', 'shutter-closed')
            run_id: Scenario or command that produced the event
            details: Event details
        """
        entry = {
            'timestamp': utcnow().isoformat(),
            'event_type': event_type,
            'run_id': run_id,
            'details': self._serialize_extra(details)
        }
        self.logger.info(f"RUN: {json.dumps(entry, default=str)}")


def get_logger(name: str, level: Optional[str] = None) -> SimulationLogger:
    """Get a simulation logger instance.

    Args:
        name: Logger name
        level: Optional level override

    Returns:
        SimulationLogger instance
    """
    return SimulationLogger(name, level)
