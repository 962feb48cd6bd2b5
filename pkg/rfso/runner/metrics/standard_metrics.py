# rfso/runner/metrics/standard_metrics.py
import logging
import time
from collections import defaultdict
from typing import Any, Dict, Optional

from rfso.runner.events import RunEvent
from rfso.runner.metrics.base_metrics import BaseMetric


class TotalTimeMetric(BaseMetric):
    """Wall time between RUN_START and the last RUN_END."""

    def __init__(self, logger: Optional[logging.Logger] = None):
        super().__init__(logger)
        self.run_start_time: Optional[float] = None
        self.run_end_time: Optional[float] = None

    def get_name(self) -> str:
        return "wall_time_seconds"

    def process_event(self, event_type: RunEvent, data: Dict[str, Any]) -> None:
        super().process_event(event_type, data)
        timestamp = data.get('timestamp', time.time())
        if event_type == RunEvent.RUN_START and self.run_start_time is None:
            self.run_start_time = timestamp
        elif event_type == RunEvent.RUN_END:
            self.run_end_time = timestamp

    def get_value(self) -> Optional[float]:
        if self.run_start_time is not None and self.run_end_time is not None:
            return round(self.run_end_time - self.run_start_time, 3)
        self.logger.warning(f"Cannot compute wall time, start: {self.run_start_time}, end: {self.run_end_time}")
        return None

    def reset(self) -> None:
        super().reset()
        self.run_start_time = None
        self.run_end_time = None


class PointCounterMetric(BaseMetric):
    """Evaluated and failed (point, output) cells, per output."""

    def __init__(self, logger: Optional[logging.Logger] = None):
        super().__init__(logger)
        self.evaluated = defaultdict(int)
        self.failed = defaultdict(int)
        self.evaluation_seconds = defaultdict(float)

    def get_name(self) -> str:
        return "point_counts"

    def process_event(self, event_type: RunEvent, data: Dict[str, Any]) -> None:
        super().process_event(event_type, data)
        output = data.get('output', 'unknown')
        if event_type == RunEvent.POINT_EVALUATED:
            self.evaluated[output] += 1
            self.evaluation_seconds[output] += data.get('elapsed', 0.0)
        elif event_type == RunEvent.EVALUATOR_ERROR:
            self.failed[output] += 1

    def get_value(self) -> Dict[str, Any]:
        outputs = sorted(set(self.evaluated) | set(self.failed))
        return {
            output: {
                "evaluated": self.evaluated[output],
                "failed": self.failed[output],
                "evaluation_seconds": round(self.evaluation_seconds[output], 3),
            }
            for output in outputs
        }

    def reset(self) -> None:
        super().reset()
        self.evaluated.clear()
        self.failed.clear()
        self.evaluation_seconds.clear()
