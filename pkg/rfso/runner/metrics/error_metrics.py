# rfso/runner/metrics/error_metrics.py
import logging
from collections import defaultdict
from typing import Any, Dict, Optional

from rfso.runner.events import RunEvent
from rfso.runner.metrics.base_metrics import BaseMetric


class ErrorCounterMetric(BaseMetric):
    """Evaluator failures grouped by the output that raised them."""

    def __init__(self, logger: Optional[logging.Logger] = None):
        super().__init__(logger)
        # {output: {'count': N, 'errors': [...]}}
        self.error_stats = defaultdict(lambda: {'count': 0, 'errors': []})
        self.total_error_count = 0

    def get_name(self) -> str:
        return "error_summary"

    def _record_error(self, source: str, details: Any, timestamp: Optional[float]) -> None:
        self.error_stats[source]['count'] += 1
        self.error_stats[source]['errors'].append({'timestamp': timestamp, 'details': details})
        self.total_error_count += 1

    def process_event(self, event_type: RunEvent, data: Dict[str, Any]) -> None:
        super().process_event(event_type, data)
        timestamp = data.get('timestamp')
        if event_type == RunEvent.EVALUATOR_ERROR:
            self._record_error(
                data.get('output', 'unknown'),
                {
                    "variant": data.get('variant'),
                    "abscissa_db": data.get('abscissa_db'),
                    "error_type": data.get('error_type'),
                    "message": data.get('error'),
                },
                timestamp,
            )
        elif event_type == RunEvent.RUN_END and data.get('status') == 'failure':
            self._record_error('run', {'reason': data.get('reason')}, timestamp)

    def get_value(self) -> Dict[str, Any]:
        return {
            "total_error_count": self.total_error_count,
            "errors_by_output": dict(self.error_stats),
        }

    def reset(self) -> None:
        super().reset()
        self.error_stats.clear()
        self.total_error_count = 0
