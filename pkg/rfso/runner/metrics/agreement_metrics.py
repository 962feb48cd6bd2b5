# rfso/runner/metrics/agreement_metrics.py
import logging
from collections import Counter
from typing import Any, Dict, List, Optional

from rfso.runner.events import RunEvent
from rfso.runner.metrics.base_metrics import BaseMetric


class AgreementMetric(BaseMetric):
    """Tally of validation check outcomes, with the failing quantities listed."""

    def __init__(self, logger: Optional[logging.Logger] = None):
        super().__init__(logger)
        self.status_counts: Counter = Counter()
        self.failures: List[Dict[str, Any]] = []

    def get_name(self) -> str:
        return "agreement"

    def process_event(self, event_type: RunEvent, data: Dict[str, Any]) -> None:
        super().process_event(event_type, data)
        if event_type != RunEvent.CHECK_COMPLETED:
            return
        status = data.get('status', 'UNKNOWN')
        self.status_counts[status] += 1
        if status == 'FAIL':
            self.failures.append({
                'quantity': data.get('quantity'),
                'delta': data.get('delta'),
                'tolerance': data.get('tolerance'),
            })
            self.logger.debug(f"check failed: {data.get('quantity')}")

    def get_value(self) -> Dict[str, Any]:
        return {
            "checks": sum(self.status_counts.values()),
            "by_status": dict(self.status_counts),
            "failures": list(self.failures),
        }

    def reset(self) -> None:
        super().reset()
        self.status_counts.clear()
        self.failures.clear()
