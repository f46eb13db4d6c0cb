"""Scenario files: schema, validation, presets and derived transition tables.

A scenario is a single YAML document with an explicit ``schema_version``.
Every section is validated on load; unknown keys are rejected and all
defaults are filled in, so a loaded :class:`ScenarioConfig` is complete and
immutable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Literal, Optional

import numpy as np
import yaml
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, model_validator

from .states import Phase

SCHEMA_VERSION = 1

DATA_DIR = Path(__file__).parent / "data"
PRESET_DIR = DATA_DIR / "scenarios"
PRESETS = ("scenario1", "scenario2", "scenario3", "scenario3a", "scenario3b")

WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")


class ScenarioError(Exception):
    """Base class for scenario loading problems."""


class ScenarioNotFoundError(ScenarioError, FileNotFoundError):
    pass


class ScenarioParseError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError, ValueError):
    """Raised with one message per violated field."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _probability(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError("out of [0,1]")
    return x


def _days(x: int) -> int:
    if x < 1:
        raise ValueError("must be >= 1 day")
    return x


def _non_negative(x):
    if x < 0:
        raise ValueError("must be >= 0")
    return x


Probability = Annotated[float, AfterValidator(_probability)]
DayCount = Annotated[int, AfterValidator(_days)]
NonNegInt = Annotated[int, AfterValidator(_non_negative)]
NonNegFloat = Annotated[float, AfterValidator(_non_negative)]


class ScenarioKind(str, Enum):
    NO_MEASURES = "NoMeasures"
    LOCKDOWN = "Lockdown"
    PREVENTIVE = "PreventiveMeasures"


class DayKind(str, Enum):
    WORKING = "Working"
    NON_WORKING = "NonWorking"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class VirusParams(_Section):
    """Transition probabilities and stage durations of the virus.

    ``days_ih``, ``days_hicu``, ``days_icud`` and ``days_icur`` have no
    published source and are calibration-sensitive.
    """

    p_se: Probability = 0.07
    p_se_quarantine_scenario: Optional[Probability] = 0.05
    p_se_accepting: Optional[Probability] = 0.02
    p_se_non_essential: Optional[Probability] = 0.04
    p_id: Probability = 0.005
    p_ih: Probability = 0.07
    p_hd: Probability = 0.005
    p_hicu: Probability = 0.08
    p_icud: Probability = 0.31
    days_ih: DayCount = 5
    days_id: DayCount = 10
    days_ir: DayCount = 10
    days_hicu: DayCount = 3
    days_hd: DayCount = 10
    days_hr: DayCount = 10
    days_icud: DayCount = 7
    days_icur: DayCount = 7
    incubation_mu: float = 1.621
    incubation_sigma: float = 0.418
    days_rs: DayCount = 180
    quarantine_delay_days: Optional[DayCount] = 3
    asymptomatic_fraction: Optional[Probability] = 0.4

    @model_validator(mode="after")
    def _branch_sums(self):
        problems = []
        if self.p_id + self.p_ih > 1:
            problems.append("p_id + p_ih exceeds 1")
        if self.p_hd + self.p_hicu > 1:
            problems.append("p_hd + p_hicu exceeds 1")
        if not self.incubation_sigma > 0:
            problems.append("incubation_sigma must be > 0")
        if problems:
            raise ValueError("; ".join(problems))
        return self


class Calendar(_Section):
    horizon_days: DayCount = 150
    anchor_weekday: Literal[WEEKDAYS] = "Monday"  # type: ignore[valid-type]
    leisure_probability: Probability = 0.25


class NetworkParams(_Section):
    social_reach: NonNegInt = 1
    num_friends: NonNegInt = 5
    random_friend: Probability = 0.05
    age_band_width: DayCount = 10
    meet_friend_probability: Probability = 1.0


class HumatParams(_Section):
    alpha: float = 0.4
    overall_threshold: NonNegFloat = 0.2
    dissonance_threshold: NonNegFloat = 0.1
    hedonic_threshold: NonNegFloat = 0.2
    dissonance_tolerance: Probability = 0.5
    random_chat_probability: Probability = 0.1
    critical_node_factor: Probability = 0.2

    @model_validator(mode="after")
    def _alpha_range(self):
        if not 0.0 <= self.alpha <= 0.5:
            raise ValueError("alpha out of [0,0.5]")
        return self


class CriticalNode(_Section):
    id: str
    network_size: NonNegInt


class CriticalNodePlan(_Section):
    node_id: str
    orientation: Literal["ProMeasures", "AntiMeasures"]
    start_day: NonNegInt
    end_day: NonNegInt
    frequency_days: DayCount
    reach: Probability
    secondary_node_id: Optional[str] = None

    @model_validator(mode="after")
    def _window(self):
        if self.start_day > self.end_day:
            raise ValueError("start_day after end_day")
        return self

    def broadcasts_on(self, day: int) -> bool:
        return self.start_day <= day <= self.end_day and (day - self.start_day) % self.frequency_days == 0


class PopulationSource(_Section):
    tract_map: str
    census: str
    survey: str
    profile_tree: str
    target_size: DayCount
    hedonic_need: str = "hedonism"
    belonging_need: str = "belonging"


class ScenarioConfig(_Section):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "scenario"
    scenario_kind: ScenarioKind
    virus: VirusParams
    calendar: Calendar = Calendar()
    network: NetworkParams = NetworkParams()
    humat: HumatParams = HumatParams()
    critical_nodes: tuple[CriticalNode, ...] = ()
    critical_node_plans: tuple[CriticalNodePlan, ...] = ()
    population: PopulationSource
    initial_infected_fraction: Probability
    replicates: DayCount = 1
    rng_seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _cross_checks(self):
        problems = []
        v = self.virus
        if self.scenario_kind is ScenarioKind.PREVENTIVE:
            for name in ("p_se_accepting", "p_se_non_essential", "quarantine_delay_days", "asymptomatic_fraction"):
                if getattr(v, name) is None:
                    problems.append(f"virus.{name} is required for PreventiveMeasures")
        if self.scenario_kind is ScenarioKind.LOCKDOWN and v.p_se_quarantine_scenario is None:
            problems.append("virus.p_se_quarantine_scenario is required for Lockdown")
        ids = [n.id for n in self.critical_nodes]
        if len(set(ids)) != len(ids):
            problems.append("critical_nodes: duplicate node id")
        for i, plan in enumerate(self.critical_node_plans):
            for ref in (plan.node_id, plan.secondary_node_id):
                if ref is not None and ref not in ids:
                    problems.append(f"critical_node_plans.{i}: unknown node {ref!r}")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def node(self, node_id: str) -> CriticalNode:
        for n in self.critical_nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


def _format_errors(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        msg = e["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        if e["type"] == "missing":
            msg = "missing required section" if not loc or "." not in loc else "missing required field"
        if e["type"] == "extra_forbidden":
            msg = "unknown key"
        out.append(f"{loc}: {msg}" if loc else msg)
    return out


def _resolve_paths(raw: dict, base: Path) -> dict:
    pop = raw.get("population")
    if isinstance(pop, dict):
        pop = dict(pop)
        for key in ("tract_map", "census", "survey", "profile_tree"):
            val = pop.get(key)
            if isinstance(val, str) and not Path(val).is_absolute():
                pop[key] = str((base / val).resolve())
        raw = {**raw, "population": pop}
    return raw


def parse_scenario(raw, base_dir: Path | str = ".") -> ScenarioConfig:
    """Validate an already-parsed mapping; relative file references resolve against ``base_dir``."""
    if not isinstance(raw, dict):
        raise ScenarioParseError("scenario document must be a mapping")
    if "schema_version" in raw and raw["schema_version"] != SCHEMA_VERSION:
        raise ScenarioValidationError([f"schema_version: unsupported version {raw['schema_version']!r}"])
    raw = _resolve_paths(raw, Path(base_dir))
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as err:
        raise ScenarioValidationError(_format_errors(err)) from None


def load_scenario(path) -> ScenarioConfig:
    """Load and validate a scenario file."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioNotFoundError(f"scenario file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as err:
        raise ScenarioParseError(f"{path}: {err}") from None
    return parse_scenario(raw, path.parent)


def serialize_scenario(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False)


def save_scenario(config: ScenarioConfig, path) -> Path:
    path = Path(path)
    path.write_text(serialize_scenario(config), encoding="utf-8")
    return path


def config_hash(config: ScenarioConfig) -> str:
    blob = json.dumps(config.model_dump(mode="json"), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ScenarioNotFoundError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return PRESET_DIR / f"{name}.yaml"


def resolve_scenario(ref) -> Path:
    """A path to an existing file, or the name of a shipped preset."""
    p = Path(ref)
    if p.is_file():
        return p
    if str(ref) in PRESETS:
        return preset_path(str(ref))
    raise ScenarioNotFoundError(f"scenario file not found: {ref}")


def with_population_size(config: ScenarioConfig, size: int) -> ScenarioConfig:
    """Copy of ``config`` with a different target population.

    Critical-node network sizes are rescaled proportionally so the share of
    the population a node can reach stays the same.
    """
    old = config.population.target_size
    nodes = tuple(
        n.model_copy(update={"network_size": int(round(n.network_size * size / old))})
        for n in config.critical_nodes
    )
    pop = config.population.model_copy(update={"target_size": size})
    return config.model_copy(update={"population": pop, "critical_nodes": nodes})


# --- calendar ---------------------------------------------------------------

def day_kind(calendar: Calendar, day_index: int) -> DayKind:
    if not 0 <= day_index < calendar.horizon_days:
        raise IndexError(f"day {day_index} outside horizon [0, {calendar.horizon_days})")
    weekday = (WEEKDAYS.index(calendar.anchor_weekday) + day_index) % 7
    return DayKind.WORKING if weekday < 5 else DayKind.NON_WORKING


# --- transition table -------------------------------------------------------

def _exact(x: float) -> Fraction:
    # decimal literal as written in the config, not the binary float
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class Branch:
    outcome: Phase
    probability: Fraction
    days: int


@dataclass(frozen=True)
class TransitionTable:
    """Resolved outcome distributions for the branching infectious phases."""

    branches: dict
    incubation_mu: float
    incubation_sigma: float
    days_rs: int

    def outcomes(self, phase: Phase) -> tuple[Branch, ...]:
        return self.branches[phase]

    def sample_outcomes(self, phase: Phase, rng: np.random.Generator, size: int):
        """Draw ``size`` outcomes; returns (outcome phases, durations) arrays."""
        bs = self.branches[phase]
        cum = np.cumsum([float(b.probability) for b in bs])
        cum[-1] = 1.0
        idx = np.searchsorted(cum, rng.random(size), side="right")
        outcomes = np.array([int(b.outcome) for b in bs], dtype=np.int8)[idx]
        days = np.array([b.days for b in bs], dtype=np.int32)[idx]
        return outcomes, days

    def sample_incubation(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Incubation in whole days: lognormal rounded half-up, floored at one day."""
        raw = rng.lognormal(self.incubation_mu, self.incubation_sigma, size)
        return np.maximum(np.floor(raw + 0.5), 1).astype(np.int32)


def derive_transition_table(v: VirusParams) -> TransitionTable:
    one = Fraction(1)
    p_id, p_ih = _exact(v.p_id), _exact(v.p_ih)
    p_hd, p_hicu = _exact(v.p_hd), _exact(v.p_hicu)
    p_icud = _exact(v.p_icud)
    branches = {
        Phase.INFECTIOUS: (
            Branch(Phase.DEAD, p_id, v.days_id),
            Branch(Phase.HOSPITALIZED, p_ih, v.days_ih),
            Branch(Phase.RECOVERED, one - (p_id + p_ih), v.days_ir),
        ),
        Phase.HOSPITALIZED: (
            Branch(Phase.DEAD, p_hd, v.days_hd),
            Branch(Phase.ICU, p_hicu, v.days_hicu),
            Branch(Phase.RECOVERED, one - (p_hd + p_hicu), v.days_hr),
        ),
        Phase.ICU: (
            Branch(Phase.DEAD, p_icud, v.days_icud),
            Branch(Phase.RECOVERED, one - p_icud, v.days_icur),
        ),
    }
    return TransitionTable(branches, v.incubation_mu, v.incubation_sigma, v.days_rs)
