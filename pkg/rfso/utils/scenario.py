"""
Scenario files: the JSON document a run starts from.

A scenario mirrors LinkConfig section by section, with every dB-valued field
carrying a ``_db`` suffix. The values are converted to linear once, here, and
nothing past this module sees a dB number except sweep abscissas.
"""

import json
import math
from contextlib import contextmanager
from enum import Enum
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple, Type, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from rfso.core.errors import ConfigInvalid, LinkModelError
from rfso.core.fso_hop import Detection, OpticalHopConfig
from rfso.core.link import ImpairmentProfile, LinkConfig
from rfso.core.montecarlo import MIN_TRIALS
from rfso.core.rf_hop import RfHopConfig, jakes_rho

DEFAULT_TRIALS = 1_000_000
DEFAULT_THRESHOLDS = (1.0, 3.0, 10.0)
# grid points closer than this to a multiple of the step are kept
GRID_SLACK = 1e-9

M = TypeVar("M", bound=BaseModel)


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def parse_grid(text: str) -> List[float]:
    """Expand ``"start:stop:step"`` into the inclusive list of grid values.

    Raises:
        ConfigInvalid: malformed text, non-positive step or stop below start
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigInvalid([f"grid: expected start:stop:step, got {text!r}"])
    try:
        start, stop, step = (float(part) for part in parts)
    except ValueError:
        raise ConfigInvalid([f"grid: non-numeric value in {text!r}"]) from None
    if not step > 0:
        raise ConfigInvalid([f"grid: step must be positive, got {step:g}"])
    if stop < start:
        raise ConfigInvalid([f"grid: stop {stop:g} is below start {start:g}"])
    count = int(math.floor((stop - start) / step + GRID_SLACK)) + 1
    return [float(v) for v in np.round(start + step * np.arange(count), 12)]


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``override`` into a copy of ``base``; lists and scalars are replaced."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _field_messages(error: ValidationError, prefix: str = "") -> List[str]:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        if prefix:
            location = f"{prefix}.{location}" if location else prefix
        messages.append(f"{location or '<root>'}: {item['msg']}")
    return messages


@contextmanager
def config_errors(source: Optional[str] = None, prefix: str = "") -> Iterator[None]:
    """Re-raise validation and model-domain failures as ConfigInvalid."""
    try:
        yield
    except ConfigInvalid as e:
        if source and e.source is None:
            raise ConfigInvalid(e.messages, source=source) from e
        raise
    except ValidationError as e:
        raise ConfigInvalid(_field_messages(e, prefix), source=source) from e
    except LinkModelError as e:
        raise ConfigInvalid([f"{prefix or '<root>'}: {e}"], source=source) from e


def validated(model: Type[M], data: Any, source: Optional[str] = None) -> M:
    """``model.model_validate(data)`` with failures reported as ConfigInvalid."""
    with config_errors(source):
        return model.model_validate(data)


class SweepAxis(str, Enum):
    AVG_SNR_DB = "avg_snr_db"
    GAMMA_TH_DB = "gamma_th_db"


class SweepOutput(str, Enum):
    OP_CLOSED = "op_closed"
    OP_QUAD = "op_quad"
    OP_MC = "op_mc"
    EC_BOUND = "ec_bound"
    EC_APPROX = "ec_approx"
    EC_NUMERIC = "ec_numeric"
    EC_MC = "ec_mc"
    CEILINGS = "ceilings"


MC_OUTPUTS = frozenset({SweepOutput.OP_MC, SweepOutput.EC_MC})


class Variant(BaseModel):
    """Partial override of the scenario's link sections; one curve per variant."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(min_length=1)
    rf: Dict[str, Any] = Field(default_factory=dict)
    optical: Dict[str, Any] = Field(default_factory=dict)
    impairments: Dict[str, Any] = Field(default_factory=dict)


class SweepSpec(BaseModel):
    """Grid, requested outputs and Monte Carlo budget of one sweep.

    ``grid`` accepts either a list of dB values or ``"start:stop:step"``.
    ``gamma_th_db`` is the outage threshold used on the SNR axis.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    axis: SweepAxis = SweepAxis.AVG_SNR_DB
    grid: List[float] = Field(min_length=1)
    outputs: List[SweepOutput] = Field(min_length=1)
    trials: int = Field(default=DEFAULT_TRIALS, ge=1)
    seed: int = Field(default=1, ge=0)
    gamma_th_db: float = 0.0
    variants: List[Variant] = Field(default_factory=list)

    @field_validator("grid", mode="before")
    @classmethod
    def _expand_grid(cls, value: Any) -> Any:
        return parse_grid(value) if isinstance(value, str) else value

    @field_validator("grid")
    @classmethod
    def _strictly_increasing(cls, grid: List[float]) -> List[float]:
        for previous, current in zip(grid, grid[1:]):
            if not current > previous:
                raise ValueError(f"grid must be strictly increasing, found {previous:g} then {current:g}")
        return grid

    @field_validator("outputs")
    @classmethod
    def _unique_outputs(cls, outputs: List[SweepOutput]) -> List[SweepOutput]:
        return list(dict.fromkeys(outputs))

    @field_validator("variants")
    @classmethod
    def _unique_variant_names(cls, variants: List[Variant]) -> List[Variant]:
        names = [variant.name for variant in variants]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ValueError(f"duplicate variant names: {', '.join(duplicates)}")
        return variants

    @model_validator(mode="after")
    def _enough_trials(self) -> "SweepSpec":
        if self.mc_requested and self.trials < MIN_TRIALS:
            raise ValueError(f"Monte Carlo outputs need trials ≥ {MIN_TRIALS}, got {self.trials}")
        return self

    @property
    def mc_requested(self) -> bool:
        return any(output in MC_OUTPUTS for output in self.outputs)


class RfSection(BaseModel):
    """First hop as written in a scenario: ρ directly, or Doppler and delay for the Jakes model."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    n_relays: int = Field(ge=1)
    rank: int = Field(ge=1)
    rho: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    doppler_hz: Optional[float] = Field(default=None, ge=0.0)
    delay_s: Optional[float] = Field(default=None, ge=0.0)
    avg_snr_db: float

    @model_validator(mode="after")
    def _one_correlation_source(self) -> "RfSection":
        jakes = (self.doppler_hz, self.delay_s)
        if self.rho is not None and any(v is not None for v in jakes):
            raise ValueError("give either rho or doppler_hz and delay_s, not both")
        if self.rho is None and any(v is None for v in jakes):
            raise ValueError("rho is required unless both doppler_hz and delay_s are given")
        return self

    def to_config(self) -> RfHopConfig:
        rho = self.rho if self.rho is not None else jakes_rho(self.doppler_hz, self.delay_s)
        return RfHopConfig(n_relays=self.n_relays, rank=self.rank, rho=rho, avg_snr=db_to_linear(self.avg_snr_db))


class OpticalSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    beta1: float = Field(gt=0.0)
    beta2: float = Field(gt=0.0)
    k: Optional[int] = Field(default=None, ge=1)
    l: Optional[int] = Field(default=None, ge=1)
    omega1: Optional[float] = Field(default=None, gt=0.0)
    omega2: Optional[float] = Field(default=None, gt=0.0)
    detection: Detection = Detection.HETERODYNE
    avg_elec_snr_db: float

    def to_config(self) -> OpticalHopConfig:
        fields = self.model_dump(exclude={"avg_elec_snr_db"}, exclude_none=True)
        return OpticalHopConfig(**fields, avg_elec_snr=db_to_linear(self.avg_elec_snr_db))


class ValidationSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    thresholds: List[float] = Field(default_factory=lambda: list(DEFAULT_THRESHOLDS), min_length=1)

    @field_validator("thresholds")
    @classmethod
    def _positive(cls, thresholds: List[float]) -> List[float]:
        if any(not value > 0 for value in thresholds):
            raise ValueError("outage thresholds are linear SNDR values and must be positive")
        return thresholds


class ScenarioFile(BaseModel):
    """One scenario document."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(min_length=1)
    label: str = "representative"
    description: str = ""
    rf: RfSection
    optical: OpticalSection
    impairments: ImpairmentProfile = ImpairmentProfile()
    sweep: Optional[SweepSpec] = None
    validation: ValidationSection = ValidationSection()

    def link_config(self) -> LinkConfig:
        return LinkConfig(rf=self.rf.to_config(), optical=self.optical.to_config(), impairments=self.impairments)

    def _apply_variant(self, variant: Variant) -> "ScenarioFile":
        rf = self.rf.model_dump(exclude_none=True)
        if "rho" in variant.rf:
            rf.pop("doppler_hz", None)
            rf.pop("delay_s", None)
        elif {"doppler_hz", "delay_s"} & variant.rf.keys():
            rf.pop("rho", None)
        optical = self.optical.model_dump(exclude_none=True)
        # new shapes re-derive whatever the variant leaves unset
        if {"beta1", "beta2"} & variant.optical.keys():
            for derived in ("k", "l", "omega1", "omega2"):
                if derived not in variant.optical:
                    optical.pop(derived, None)
        data = self.model_dump(exclude={"sweep"})
        data["rf"] = {**rf, **variant.rf}
        data["optical"] = {**optical, **variant.optical}
        data["impairments"] = {**self.impairments.model_dump(), **variant.impairments}
        return ScenarioFile.model_validate(data)

    def variant_scenarios(self, variants: Optional[List[Variant]] = None) -> List[Tuple[str, "ScenarioFile"]]:
        """(curve name, scenario) for every variant, or the scenario itself when there are none.

        ``variants`` defaults to those of the scenario's own sweep section.
        """
        if variants is None:
            variants = self.sweep.variants if self.sweep else []
        if not variants:
            return [(self.name, self)]
        resolved = []
        for variant in variants:
            with config_errors(prefix=f"sweep.variants[{variant.name}]"):
                resolved.append((variant.name, self._apply_variant(variant)))
        return resolved

    def variant_configs(self, variants: Optional[List[Variant]] = None) -> List[Tuple[str, LinkConfig]]:
        configs = []
        for name, scenario in self.variant_scenarios(variants):
            with config_errors(prefix=f"sweep.variants[{name}]" if scenario is not self else ""):
                configs.append((name, scenario.link_config()))
        return configs


def load_scenario(path: str, overrides: Optional[Mapping[str, Any]] = None) -> ScenarioFile:
    """Read, merge overrides into and fully validate a scenario file.

    Every link and variant is resolved once so that invariant violations
    surface here rather than mid-run.

    Raises:
        ConfigInvalid: unreadable file, malformed JSON or any field-level violation
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigInvalid([f"cannot read scenario file: {e.strerror or e}"], source=path) from e
    except json.JSONDecodeError as e:
        raise ConfigInvalid([f"line {e.lineno} column {e.colno}: {e.msg}"], source=path) from e
    if not isinstance(data, dict):
        raise ConfigInvalid(["<root>: a scenario must be a JSON object"], source=path)
    if overrides:
        data = deep_merge(data, overrides)

    scenario = validated(ScenarioFile, data, source=path)
    with config_errors(source=path):
        scenario.link_config()
        scenario.variant_configs()
    return scenario
