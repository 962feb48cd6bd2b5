# rfso/runner/metrics/base_metrics.py
import abc
import logging
from typing import Any, Dict, Optional

from rfso.runner.events import RunEvent


class BaseMetric(abc.ABC):
    """
    Abstract base for run metrics fed by the result collector's event stream.
    """

    def __init__(self, logger: Optional[logging.Logger] = None):
        self.logger = logger if logger else logging.getLogger(self.__class__.__name__)

    @abc.abstractmethod
    def get_name(self) -> str:
        pass

    @abc.abstractmethod
    def process_event(self, event_type: RunEvent, data: Dict[str, Any]) -> None:
        pass

    @abc.abstractmethod
    def get_value(self) -> Any:
        pass

    def reset(self) -> None:
        # subclasses call super().reset() and clear their own state
        pass
