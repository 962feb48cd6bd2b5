# rfso/runner/result_collector.py
import json
import logging
import os
import threading
import time
from collections import defaultdict
from typing import Any, Dict, List, Optional, Type

from rfso.runner.events import RunEvent
from rfso.runner.metrics.agreement_metrics import AgreementMetric
from rfso.runner.metrics.base_metrics import BaseMetric
from rfso.runner.metrics.error_metrics import ErrorCounterMetric
from rfso.runner.metrics.standard_metrics import PointCounterMetric, TotalTimeMetric

STANDARD_METRICS: List[Type[BaseMetric]] = [
    TotalTimeMetric,
    PointCounterMetric,
    ErrorCounterMetric,
    AgreementMetric,
]


class ResultCollector:
    """
    Collects the raw event stream of a run, dispatches every event to the
    registered metrics and writes the final record as the JSON sidecar.

    Events may arrive from worker threads; recording is serialized.
    """

    def __init__(self, logger: Optional[logging.Logger] = None):
        self.logger = logger if logger else logging.getLogger(self.__class__.__name__)
        # run_id -> {metadata, raw_events, computed_metrics}
        self.results: Dict[str, Dict[str, Any]] = defaultdict(lambda: {
            "metadata": {},
            "raw_events": [],
            "computed_metrics": {},
        })
        self.registered_metrics: Dict[str, List[BaseMetric]] = defaultdict(list)
        self._lock = threading.Lock()

    def _register_metrics(self, run_id: str) -> None:
        if self.registered_metrics.get(run_id):
            self.logger.debug(f"metrics for run {run_id} already registered")
            return
        metrics: List[BaseMetric] = []
        for metric_cls in STANDARD_METRICS:
            try:
                metrics.append(metric_cls(logger=self.logger.getChild(metric_cls.__name__)))
            except Exception as e:
                self.logger.error(f"Failed to register metric {metric_cls.__name__} for run {run_id}: {e}", exc_info=True)
        self.registered_metrics[run_id] = metrics

    def start_session(self, run_id: str, session_data: Dict[str, Any]) -> None:
        """
        Open a run: register metrics and record the starting metadata.

        Args:
            run_id: run identifier
            session_data: initial metadata (resolved config, seed, tool version, ...)
        """
        self._register_metrics(run_id)
        self.results[run_id] = {"metadata": {}, "raw_events": [], "computed_metrics": {}}
        self.reset_metrics(run_id)

        now = time.time()
        self.results[run_id]["metadata"] = {
            "session_start_iso": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(now)),
            "session_start_unix": now,
            **session_data,
        }
        self.logger.info(f"Run started: {run_id}")

    def record_event(self, run_id: str, event_type: RunEvent, data: Dict[str, Any]) -> None:
        """Store one event and hand it to every metric of the run."""
        data = dict(data)
        data.setdefault("timestamp", time.time())
        with self._lock:
            self.results[run_id]["raw_events"].append({"event_type": event_type.name, **data})
            if self.logger.isEnabledFor(logging.DEBUG):
                self.logger.debug(f"event {run_id} - {event_type.name} - {data}")
            metrics = self.registered_metrics.get(run_id)
            if not metrics:
                self.logger.warning(f"Run {run_id} has no registered metrics, event {event_type.name} not dispatched")
                return
            for metric in metrics:
                try:
                    metric.process_event(event_type, data)
                except Exception as e:
                    self.logger.error(
                        f"Metric {metric.get_name()} failed on {event_type.name} (run {run_id}): {e}", exc_info=True
                    )

    def finalize_results(self, run_id: str) -> None:
        if run_id not in self.results:
            self.logger.error(f"Cannot finalize results, run {run_id} does not exist")
            return
        computed: Dict[str, Any] = {}
        for metric in self.registered_metrics.get(run_id, []):
            name = metric.get_name()
            try:
                computed[name] = metric.get_value()
            except Exception as e:
                self.logger.error(f"Failed to read metric {name} (run {run_id}): {e}", exc_info=True)
                computed[name] = f"ERROR_GETTING_VALUE: {e}"
        self.results[run_id]["computed_metrics"] = computed

    def end_session(self, run_id: str, session_data: Optional[Dict[str, Any]] = None) -> None:
        """Close a run: compute the metrics and stamp end time and wall time."""
        if run_id not in self.results:
            self.logger.error(f"Cannot end run {run_id}: it was never started")
            return
        self.finalize_results(run_id)

        now = time.time()
        metadata = self.results[run_id]["metadata"]
        metadata["session_end_iso"] = time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(now))
        metadata["session_end_unix"] = now
        start = metadata.get("session_start_unix")
        duration = round(now - start, 3) if start else None
        metadata["wall_time_seconds"] = duration
        if session_data:
            metadata.update(session_data)
        self.logger.info(f"Run finished: {run_id}, wall time {duration if duration is not None else 'N/A'} s")

    def get_results(self, run_id: Optional[str] = None) -> Dict[str, Any]:
        if run_id is not None:
            return self.results.get(run_id, {})
        return dict(self.results)

    def save_results(self, run_id: str, file_path: str) -> str:
        """
        Write one run's record as JSON.

        Returns:
            str: the path written, or "" on failure
        """
        if run_id not in self.results:
            self.logger.warning(f"Cannot save results, run {run_id} does not exist")
            return ""
        try:
            directory = os.path.dirname(os.path.abspath(file_path))
            os.makedirs(directory, exist_ok=True)
            with open(file_path, "w", encoding="utf-8") as f:
                # default=str covers enums and numpy scalars that reach the metadata
                json.dump(self.results[run_id], f, indent=2, ensure_ascii=False, default=str)
            self.logger.info(f"Run record saved: {file_path}")
            return file_path
        except Exception as e:
            self.logger.error(f"Failed to save run record to {file_path}: {e}", exc_info=True)
            return ""

    def reset_metrics(self, run_id: str) -> None:
        for metric in self.registered_metrics.get(run_id, []):
            try:
                metric.reset()
            except Exception as e:
                self.logger.error(f"Failed to reset metric {metric.get_name()} (run {run_id}): {e}", exc_info=True)
        if run_id in self.results:
            self.results[run_id]["raw_events"] = []
            self.results[run_id]["computed_metrics"] = {}
