"""
Cross-validation of the analytic model against Monte Carlo.

For a scenario's base link: outage probability at each validation threshold
(quadrature vs MC, closed form vs quadrature) and the ergodic capacity
(numeric vs MC, MC against the Jensen bound), plus informational rows for
the moment-ratio approximation and the high-SNR ceilings.
"""

import logging
import math
import os
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence

from rfso.core.analysis import OutageQuery, ec_approx, ec_numeric, ec_upper_bound, op_closed_form, op_quadrature
from rfso.core.errors import ConfigInvalid, InfiniteCeiling, LinkModelError, UnsupportedParameters
from rfso.core.link import LinkConfig, capacity_ceiling, sndr_ceiling
from rfso.core.montecarlo import MIN_TRIALS, estimate_ec, estimate_op
from rfso.runner.events import RunEvent
from rfso.runner.result_collector import ResultCollector
from rfso.runner.sweep_runner import session_metadata
from rfso.utils.scenario import DEFAULT_TRIALS, load_scenario

PASS = "PASS"
FAIL = "FAIL"
SKIPPED = "SKIPPED"
INFO = "INFO"

HALF_WIDTHS = 3.0
OP_SLACK = 1e-7
EC_SLACK = 1e-4
CLOSED_FORM_TOL = 1e-5


@dataclass
class CheckResult:
    quantity: str
    status: str
    value: Optional[float] = None
    reference: Optional[float] = None
    delta: Optional[float] = None
    tolerance: Optional[float] = None
    note: str = ""


@dataclass
class ValidationReport:
    scenario: str
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.status != FAIL for check in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def by_status(self, status: str) -> List[CheckResult]:
        return [check for check in self.checks if check.status == status]

    def format_table(self) -> str:
        def cell(value: Optional[float]) -> str:
            return "" if value is None else f"{value:.6g}"

        header = f"{'quantity':<44} {'status':<8} {'value':>12} {'reference':>12} {'delta':>11} {'tolerance':>10}  note"
        lines = [f"scenario: {self.scenario}", header, "-" * len(header)]
        for check in self.checks:
            lines.append(
                f"{check.quantity:<44} {check.status:<8} {cell(check.value):>12} {cell(check.reference):>12} "
                f"{cell(check.delta):>11} {cell(check.tolerance):>10}  {check.note}"
            )
        verdict = "PASS" if self.passed else f"FAIL ({len(self.by_status(FAIL))} check(s))"
        lines.append(f"overall: {verdict}")
        return "\n".join(lines)


def _agreement(quantity: str, value: float, reference: float, tolerance: float, note: str = "") -> CheckResult:
    delta = value - reference
    status = PASS if abs(delta) <= tolerance else FAIL
    return CheckResult(quantity, status, value, reference, delta, tolerance, note)


class Validator:
    """Runs the agreement checks for one link, reporting each through the collector."""

    def __init__(
        self,
        trials: int = DEFAULT_TRIALS,
        seed: int = 1,
        workers: int = 1,
        collector: Optional[ResultCollector] = None,
        run_id: str = "validate",
        logger: Optional[logging.Logger] = None,
    ):
        if trials < MIN_TRIALS:
            raise ConfigInvalid([f"trials: validation needs at least {MIN_TRIALS}, got {trials}"])
        self.logger = logger if logger else logging.getLogger(self.__class__.__name__)
        self.trials = trials
        self.seed = seed
        self.workers = workers
        self.collector = collector
        self.run_id = run_id
        self.checks: List[CheckResult] = []

    def _add(self, check: CheckResult) -> None:
        self.checks.append(check)
        log = self.logger.warning if check.status == FAIL else self.logger.info
        log(f"{check.quantity}: {check.status}" + (f" (delta {check.delta:.3e})" if check.delta is not None else ""))
        if self.collector is not None:
            self.collector.record_event(self.run_id, RunEvent.CHECK_COMPLETED, {
                "quantity": check.quantity,
                "status": check.status,
                "delta": check.delta,
                "tolerance": check.tolerance,
            })

    def _failed(self, quantity: str, error: LinkModelError) -> None:
        self._add(CheckResult(quantity, FAIL, note=f"{type(error).__name__}: {error}"))

    def check_outage(self, cfg: LinkConfig, mc_cfg: LinkConfig, gamma_th: float, point_index: int) -> None:
        label = f"γ_th={gamma_th:g}"
        query = OutageQuery(gamma_th=gamma_th, cfg=cfg)
        try:
            quad = op_quadrature(query)
        except LinkModelError as e:
            self._failed(f"OP quadrature vs MC @ {label}", e)
            return

        mc = estimate_op(gamma_th, mc_cfg, self.trials, self.seed, point_index, self.workers)
        note = "" if mc.reliable else "few outage events"
        self._add(_agreement(f"OP quadrature vs MC @ {label}", quad, mc.value, HALF_WIDTHS * mc.half_width + OP_SLACK, note))

        quantity = f"OP closed form vs quadrature @ {label}"
        try:
            closed = op_closed_form(query)
        except UnsupportedParameters as e:
            self._add(CheckResult(quantity, SKIPPED, note=str(e)))
            return
        except LinkModelError as e:
            self._failed(quantity, e)
            return
        self._add(_agreement(quantity, closed, quad, CLOSED_FORM_TOL))

    def check_capacity(self, cfg: LinkConfig, mc_cfg: LinkConfig, point_index: int) -> None:
        mc = estimate_ec(mc_cfg, self.trials, self.seed, point_index, self.workers)
        tolerance = HALF_WIDTHS * mc.half_width

        numeric = None
        try:
            numeric = ec_numeric(cfg)
            self._add(_agreement("EC numeric vs MC", numeric, mc.value, tolerance + EC_SLACK))
        except LinkModelError as e:
            self._failed("EC numeric vs MC", e)

        try:
            bound = ec_upper_bound(cfg)
        except UnsupportedParameters as e:
            self._add(CheckResult("EC upper bound ≥ MC", SKIPPED, note=str(e)))
        except LinkModelError as e:
            self._failed("EC upper bound ≥ MC", e)
        else:
            excess = mc.value - bound
            status = PASS if excess <= tolerance else FAIL
            self._add(CheckResult("EC upper bound ≥ MC", status, bound, mc.value, excess, tolerance))

        approx = ec_approx(cfg)
        reference = numeric if numeric is not None else mc.value
        self._add(CheckResult("EC approximation", INFO, approx, reference, approx - reference))

        try:
            ceiling = sndr_ceiling(cfg.impairments)
            capacity = capacity_ceiling(cfg.impairments, cfg.optical.detection)
        except InfiniteCeiling:
            self._add(CheckResult("SNDR ceiling", INFO, note="none (ideal hardware)"))
            self._add(CheckResult("capacity ceiling", INFO, note="none (ideal hardware)"))
        else:
            self._add(CheckResult("SNDR ceiling", INFO, ceiling, note=f"{10.0 * math.log10(ceiling):.2f} dB"))
            self._add(CheckResult("capacity ceiling", INFO, capacity, note="bps/Hz"))

    def run(self, name: str, cfg: LinkConfig, thresholds: Sequence[float], mc_cfg: Optional[LinkConfig] = None) -> ValidationReport:
        """Check ``cfg`` analytically against Monte Carlo on ``mc_cfg`` (``cfg`` itself by default)."""
        mc_cfg = mc_cfg if mc_cfg is not None else cfg
        self.checks = []
        for index, gamma_th in enumerate(thresholds):
            self.check_outage(cfg, mc_cfg, gamma_th, index)
        self.check_capacity(cfg, mc_cfg, len(thresholds))
        return ValidationReport(scenario=name, checks=list(self.checks))


def validate_config(
    cfg: LinkConfig,
    thresholds: Sequence[float],
    trials: int = DEFAULT_TRIALS,
    seed: int = 1,
    mc_cfg: Optional[LinkConfig] = None,
    name: str = "link",
    workers: int = 1,
    logger: Optional[logging.Logger] = None,
) -> ValidationReport:
    return Validator(trials, seed, workers, logger=logger).run(name, cfg, thresholds, mc_cfg)


def validate(
    scenario_path: str,
    trials: int = DEFAULT_TRIALS,
    seed: int = 1,
    out_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    workers: int = 1,
    logger: Optional[logging.Logger] = None,
) -> ValidationReport:
    """Validate a scenario's base link at its validation thresholds.

    Args:
        scenario_path: scenario JSON file
        trials: Monte Carlo trials per estimate
        seed: root seed
        out_path: optional JSON destination for the report and run record
        overrides: document deep-merged into the scenario before validation
        workers: threads per Monte Carlo estimate
        logger: parent logger

    Raises:
        ConfigInvalid: the scenario does not validate or trials is below the minimum
    """
    logger = logger if logger else logging.getLogger(__name__)
    scenario = load_scenario(scenario_path, overrides)
    cfg = scenario.link_config()
    thresholds = scenario.validation.thresholds

    run_id = f"{scenario.name}_validate"
    collector = ResultCollector(logger=logger.getChild("ResultCollector"))
    collector.start_session(run_id, session_metadata(
        "validate", scenario_path, scenario,
        resolved_link=cfg.model_dump(mode="json"), seed=seed, trials=trials, thresholds=list(thresholds),
    ))
    collector.record_event(run_id, RunEvent.RUN_START, {"command": "validate"})
    validator = Validator(trials, seed, workers, collector, run_id, logger.getChild("Validator"))
    report = validator.run(scenario.name, cfg, thresholds)

    collector.record_event(run_id, RunEvent.RUN_END, {"status": "success" if report.passed else "failure",
                                                      "reason": None if report.passed else "agreement check failed"})
    collector.end_session(run_id, {"passed": report.passed, "checks": [asdict(check) for check in report.checks]})
    if out_path:
        collector.save_results(run_id, out_path)
    return report
