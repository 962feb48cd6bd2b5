"""
Sweeps: evaluate the requested outputs over a dB grid for every curve of a
scenario and write the plot-ready CSV plus its JSON metadata sidecar.
"""

import csv
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from rfso import __version__
from rfso.core.analysis import OutageQuery, ec_approx, ec_numeric, ec_upper_bound, op_closed_form, op_quadrature
from rfso.core.errors import ConfigInvalid, InfiniteCeiling, LinkModelError
from rfso.core.link import LinkConfig, capacity_ceiling, sndr_ceiling
from rfso.core.montecarlo import LinkState, chunk_sizes, draw_link_state, estimate_ec, estimate_op, substream
from rfso.runner.events import RunEvent
from rfso.runner.result_collector import ResultCollector
from rfso.utils.scenario import (
    ScenarioFile,
    SweepAxis,
    SweepOutput,
    SweepSpec,
    db_to_linear,
    load_scenario,
    validated,
)

TOOL_NAME = "rfso-relay"
VALUE_FORMAT = ".17g"
SAMPLE_COLUMNS = ("gamma1", "irradiance", "gamma2", "sndr")
# written as 1/0
FLAG_COLUMNS = frozenset({"op_mc_reliable"})

Cell = Union[float, bool, None]

OUTPUT_COLUMNS: Dict[SweepOutput, Tuple[str, ...]] = {
    SweepOutput.OP_CLOSED: ("op_closed",),
    SweepOutput.OP_QUAD: ("op_quad",),
    SweepOutput.OP_MC: ("op_mc", "op_mc_hw", "op_mc_reliable"),
    SweepOutput.EC_BOUND: ("ec_bound",),
    SweepOutput.EC_APPROX: ("ec_approx",),
    SweepOutput.EC_NUMERIC: ("ec_numeric",),
    SweepOutput.EC_MC: ("ec_mc", "ec_mc_hw"),
    SweepOutput.CEILINGS: ("sndr_ceiling", "capacity_ceiling"),
}


@dataclass
class CurvePoint:
    """One grid value of one curve; ``None`` marks a cell whose evaluator failed."""

    variant: str
    abscissa_db: float
    values: Dict[str, Cell]
    errors: Dict[str, str] = field(default_factory=dict)


@dataclass
class SweepResult:
    points: List[CurvePoint]
    columns: List[str]
    csv_path: str
    meta_path: str

    @property
    def failed_cells(self) -> int:
        return sum(len(point.errors) for point in self.points)


def sweep_columns(sweep: SweepSpec) -> List[str]:
    columns = ["variant", "abscissa_db"]
    for output in sweep.outputs:
        columns.extend(OUTPUT_COLUMNS[output])
    return columns


def metadata_path(out_path: str) -> str:
    """``results/fig1.csv`` -> ``results/fig1.meta.json``."""
    return os.path.splitext(out_path)[0] + ".meta.json"


def resolve_sweep(
    scenario: ScenarioFile,
    sweep: Optional[SweepSpec] = None,
    source: Optional[str] = None,
    **overrides: Any,
) -> SweepSpec:
    """Combine the scenario's sweep section, an explicit spec and flag overrides (None = keep).

    Raises:
        ConfigInvalid: no sweep is defined anywhere, or the merged spec is invalid
    """
    base = sweep if sweep is not None else scenario.sweep
    data: Dict[str, Any] = base.model_dump() if base is not None else {}
    data.update({key: value for key, value in overrides.items() if value is not None})
    if not data:
        raise ConfigInvalid(["sweep: the scenario has no sweep section and none was given"], source=source)
    return validated(SweepSpec, data, source=source)


def _point_inputs(cfg: LinkConfig, sweep: SweepSpec, abscissa_db: float) -> Tuple[LinkConfig, float]:
    """Link and linear outage threshold at one grid value.

    On the SNR axis both hops move together (γ̄₁ = γ̄_r).
    """
    if sweep.axis is SweepAxis.AVG_SNR_DB:
        snr = db_to_linear(abscissa_db)
        return cfg.with_snr(avg_snr=snr, avg_elec_snr=snr), db_to_linear(sweep.gamma_th_db)
    return cfg, db_to_linear(abscissa_db)


def _ceilings(cfg: LinkConfig) -> Dict[str, Cell]:
    try:
        return {
            "sndr_ceiling": sndr_ceiling(cfg.impairments),
            "capacity_ceiling": capacity_ceiling(cfg.impairments, cfg.optical.detection),
        }
    except InfiniteCeiling:
        return {"sndr_ceiling": math.inf, "capacity_ceiling": math.inf}


class SweepRunner:
    """
    Evaluates a sweep grid point by point.

    Points run concurrently on a thread pool; rows come back in grid order.
    Every Monte Carlo estimate is seeded by (sweep seed, global point index),
    so the table does not depend on the worker count.
    """

    def __init__(
        self,
        collector: Optional[ResultCollector] = None,
        run_id: str = "sweep",
        workers: int = 1,
        progress: bool = False,
        logger: Optional[logging.Logger] = None,
    ):
        self.logger = logger if logger else logging.getLogger(self.__class__.__name__)
        self.collector = collector
        self.run_id = run_id
        self.workers = max(1, int(workers))
        self.progress = progress

    def _record(self, event_type: RunEvent, data: Dict[str, Any]) -> None:
        if self.collector is not None:
            self.collector.record_event(self.run_id, event_type, data)

    def _evaluators(
        self, cfg: LinkConfig, gamma_th: float, sweep: SweepSpec, point_index: int
    ) -> Dict[SweepOutput, Callable[[], Dict[str, Cell]]]:
        query = OutageQuery(gamma_th=gamma_th, cfg=cfg)

        def op_mc() -> Dict[str, Cell]:
            estimate = estimate_op(gamma_th, cfg, sweep.trials, sweep.seed, point_index)
            return {"op_mc": estimate.value, "op_mc_hw": estimate.half_width, "op_mc_reliable": estimate.reliable}

        def ec_mc() -> Dict[str, Cell]:
            estimate = estimate_ec(cfg, sweep.trials, sweep.seed, point_index)
            return {"ec_mc": estimate.value, "ec_mc_hw": estimate.half_width}

        return {
            SweepOutput.OP_CLOSED: lambda: {"op_closed": op_closed_form(query)},
            SweepOutput.OP_QUAD: lambda: {"op_quad": op_quadrature(query)},
            SweepOutput.OP_MC: op_mc,
            SweepOutput.EC_BOUND: lambda: {"ec_bound": ec_upper_bound(cfg)},
            SweepOutput.EC_APPROX: lambda: {"ec_approx": ec_approx(cfg)},
            SweepOutput.EC_NUMERIC: lambda: {"ec_numeric": ec_numeric(cfg)},
            SweepOutput.EC_MC: ec_mc,
            SweepOutput.CEILINGS: lambda: _ceilings(cfg),
        }

    def evaluate_point(
        self, variant: str, cfg: LinkConfig, sweep: SweepSpec, abscissa_db: float, point_index: int
    ) -> CurvePoint:
        """All requested outputs at one grid value; a failing output leaves null cells and the rest still run."""
        point_cfg, gamma_th = _point_inputs(cfg, sweep, abscissa_db)
        evaluators = self._evaluators(point_cfg, gamma_th, sweep, point_index)
        point = CurvePoint(variant=variant, abscissa_db=abscissa_db, values={})
        for output in sweep.outputs:
            started = time.perf_counter()
            try:
                point.values.update(evaluators[output]())
            except LinkModelError as e:
                point.values.update({column: None for column in OUTPUT_COLUMNS[output]})
                point.errors[output.value] = str(e)
                self.logger.warning(f"{output.value} failed for {variant} at {abscissa_db:g} dB: {e}")
                self._record(RunEvent.EVALUATOR_ERROR, {
                    "variant": variant,
                    "abscissa_db": abscissa_db,
                    "output": output.value,
                    "error_type": type(e).__name__,
                    "error": str(e),
                })
                continue
            self._record(RunEvent.POINT_EVALUATED, {
                "variant": variant,
                "abscissa_db": abscissa_db,
                "output": output.value,
                "elapsed": time.perf_counter() - started,
            })
        return point

    def run(self, curves: Sequence[Tuple[str, LinkConfig]], sweep: SweepSpec) -> List[CurvePoint]:
        """Evaluate every (curve, grid value) pair and return the points curve by curve, in grid order."""
        tasks = [
            (variant, cfg, abscissa)
            for variant, cfg in curves
            for abscissa in sweep.grid
        ]
        self.logger.info(
            f"Sweeping {len(curves)} curve(s) × {len(sweep.grid)} point(s) on {sweep.axis.value}, "
            f"outputs {[o.value for o in sweep.outputs]}, {self.workers} worker(s)"
        )
        points: List[Optional[CurvePoint]] = [None] * len(tasks)
        with tqdm(total=len(tasks), desc="sweep", unit="pt", disable=not self.progress) as bar:
            if self.workers == 1:
                for index, (variant, cfg, abscissa) in enumerate(tasks):
                    points[index] = self.evaluate_point(variant, cfg, sweep, abscissa, index)
                    bar.update(1)
            else:
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    futures = {
                        pool.submit(self.evaluate_point, variant, cfg, sweep, abscissa, index): index
                        for index, (variant, cfg, abscissa) in enumerate(tasks)
                    }
                    for future in as_completed(futures):
                        points[futures[future]] = future.result()
                        bar.update(1)
        return points


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(int(value))
    return format(float(value), VALUE_FORMAT)


def _parse_cell(column: str, text: str) -> Cell:
    if text == "":
        return None
    if column in FLAG_COLUMNS:
        return text == "1"
    return float(text)


def write_curve_csv(points: Sequence[CurvePoint], columns: Sequence[str], path: str) -> str:
    """One row per point, header first; floats with 17 significant digits, empty cells for null."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for point in points:
            row = {"variant": point.variant, "abscissa_db": point.abscissa_db, **point.values}
            writer.writerow([_format_cell(row.get(column)) for column in columns])
    return path


def read_curve_csv(path: str) -> Tuple[List[str], List[CurvePoint]]:
    """Parse a curve table written by write_curve_csv."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        columns = next(reader)
        points = []
        for row in reader:
            cells = dict(zip(columns, row))
            values = {column: _parse_cell(column, cells[column]) for column in columns[2:]}
            points.append(CurvePoint(variant=cells["variant"], abscissa_db=float(cells["abscissa_db"]), values=values))
    return columns, points


def session_metadata(command: str, scenario_path: str, scenario: ScenarioFile, **extra: Any) -> Dict[str, Any]:
    return {
        "tool": TOOL_NAME,
        "tool_version": __version__,
        "command": command,
        "scenario_path": os.path.abspath(scenario_path),
        "scenario": scenario.model_dump(mode="json"),
        **extra,
    }


def run_sweep(
    scenario_path: str,
    out_path: str,
    sweep: Optional[SweepSpec] = None,
    workers: int = 1,
    overrides: Optional[Mapping[str, Any]] = None,
    logger: Optional[logging.Logger] = None,
    progress: bool = False,
    **sweep_overrides: Any,
) -> SweepResult:
    """Load a scenario, run its sweep and write ``out_path`` plus the metadata sidecar.

    Args:
        scenario_path: scenario JSON file
        out_path: CSV destination
        sweep: explicit sweep spec replacing the scenario's sweep section
        workers: grid points evaluated concurrently
        overrides: document deep-merged into the scenario before validation
        logger: parent logger
        progress: show a progress bar
        **sweep_overrides: individual SweepSpec fields (axis, grid, outputs, trials, seed, gamma_th_db)

    Raises:
        ConfigInvalid: the scenario or the sweep does not validate
    """
    logger = logger if logger else logging.getLogger(__name__)
    scenario = load_scenario(scenario_path, overrides)
    spec = resolve_sweep(scenario, sweep, source=scenario_path, **sweep_overrides)
    curves = scenario.variant_configs(spec.variants)

    columns = sweep_columns(spec)
    run_id = f"{scenario.name}_sweep"
    collector = ResultCollector(logger=logger.getChild("ResultCollector"))
    collector.start_session(run_id, session_metadata(
        "sweep",
        scenario_path,
        scenario,
        sweep=spec.model_dump(mode="json"),
        resolved_links={name: cfg.model_dump(mode="json") for name, cfg in curves},
        seed=spec.seed,
        trials=spec.trials,
        columns=columns,
        csv_path=os.path.abspath(out_path),
    ))
    collector.record_event(run_id, RunEvent.RUN_START, {"command": "sweep"})

    runner = SweepRunner(
        collector=collector, run_id=run_id, workers=workers, progress=progress,
        logger=logger.getChild("SweepRunner"),
    )
    try:
        points = runner.run(curves, spec)
        write_curve_csv(points, columns, out_path)
    except Exception as e:
        collector.record_event(run_id, RunEvent.RUN_END, {"status": "failure", "reason": str(e)})
        collector.end_session(run_id)
        collector.save_results(run_id, metadata_path(out_path))
        raise

    failed = sum(len(point.errors) for point in points)
    collector.record_event(run_id, RunEvent.RUN_END, {"status": "success"})
    collector.end_session(run_id, {"failed_cells": failed})
    meta_path = collector.save_results(run_id, metadata_path(out_path))
    logger.info(f"Sweep written to {out_path} ({len(points)} rows, {failed} failed cell(s))")
    return SweepResult(points=points, columns=columns, csv_path=out_path, meta_path=meta_path)


def sample_channels(cfg: LinkConfig, count: int, seed: int) -> LinkState:
    """``count`` raw trials drawn chunk by chunk from the same streams the estimators use."""
    if count < 1:
        raise ConfigInvalid([f"count: must be at least 1, got {count}"])
    states = [
        draw_link_state(cfg, substream(seed, 0, index), size)
        for index, size in enumerate(chunk_sizes(count))
    ]
    return LinkState(*(np.concatenate([getattr(s, name) for s in states]) for name in SAMPLE_COLUMNS))


def write_samples(state: LinkState, path: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    columns = [getattr(state, name) for name in SAMPLE_COLUMNS]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SAMPLE_COLUMNS)
        for row in zip(*columns):
            writer.writerow([format(float(v), VALUE_FORMAT) for v in row])
    return path


def run_sample(
    scenario_path: str,
    out_path: str,
    count: int,
    seed: int = 1,
    overrides: Optional[Mapping[str, Any]] = None,
    logger: Optional[logging.Logger] = None,
) -> str:
    """Dump ``count`` samples of (γ₁, I, γ₂, SNDR) for the scenario's base link as CSV."""
    logger = logger if logger else logging.getLogger(__name__)
    scenario = load_scenario(scenario_path, overrides)
    cfg = scenario.link_config()

    run_id = f"{scenario.name}_sample"
    collector = ResultCollector(logger=logger.getChild("ResultCollector"))
    collector.start_session(run_id, session_metadata(
        "sample", scenario_path, scenario,
        resolved_link=cfg.model_dump(mode="json"), seed=seed, count=count, csv_path=os.path.abspath(out_path),
    ))
    collector.record_event(run_id, RunEvent.RUN_START, {"command": "sample"})
    write_samples(sample_channels(cfg, count, seed), out_path)
    collector.record_event(run_id, RunEvent.RUN_END, {"status": "success"})
    collector.end_session(run_id)
    collector.save_results(run_id, metadata_path(out_path))
    logger.info(f"{count} samples written to {out_path}")
    return out_path
