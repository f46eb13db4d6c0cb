"""Agent population: survey respondents plus census-driven simulated agents.

Real agents are read verbatim from a survey file. Simulated agents are
generated in three steps: age and gender per census tract follow the census
marginals, the remaining sociodemographic fields are drawn from the survey
conditioned on gender and the profile tree's age clusters, and the needs are
copied from a real donor classified into the same profile leaf.
"""

from __future__ import annotations

import bisect
import csv
import json
from collections import defaultdict
from dataclasses import dataclass, fields
from functools import cached_property
from pathlib import Path
from typing import Optional, Union

import numpy as np

GENDERS = ("man", "woman")
FAMILIES = (
    "one-person",
    "single-parent",
    "single-parent-plus",
    "couple-children",
    "couple-children-plus",
    "couple-no-children",
    "other",
)
ECONOMIC_ACTIVITIES = (
    "employee",
    "unemployed",
    "autonomous",
    "civil_servant",
    "executive",
    "college_student",
    "retired",
)
SALARY_BANDS = ("none", "<1000", "1000-1500", "1501-3000", "3001-4500", "4501-6000", ">6000")

# activities that come with a work location
WORKING_ACTIVITIES = frozenset({"employee", "autonomous", "civil_servant", "executive"})

MIN_AGE, MAX_AGE = 18, 100

REAL, SIMULATED = "Real", "Simulated"


class PopulationError(ValueError):
    pass


def _check_choice(name, value, options):
    if value not in options:
        raise PopulationError(f"{name}={value!r} not one of {', '.join(options)}")


@dataclass(frozen=True)
class AgentAttributes:
    gender: str
    age: int
    family: str
    rural_house: bool
    economic_activity: str
    essential_worker: bool
    salary_band: str
    census_tract: str

    def __post_init__(self):
        if not MIN_AGE <= self.age <= MAX_AGE:
            raise PopulationError(f"age={self.age} outside [{MIN_AGE},{MAX_AGE}]")
        _check_choice("gender", self.gender, GENDERS)
        _check_choice("family", self.family, FAMILIES)
        _check_choice("economic_activity", self.economic_activity, ECONOMIC_ACTIVITIES)
        _check_choice("salary_band", self.salary_band, SALARY_BANDS)

    @property
    def works(self) -> bool:
        return self.economic_activity in WORKING_ACTIVITIES

    @property
    def studies(self) -> bool:
        return self.economic_activity == "college_student"


@dataclass(frozen=True)
class Need:
    need_id: str
    importance: float
    satisfaction_accept: float
    satisfaction_reject: float

    def __post_init__(self):
        if not 0.0 <= self.importance <= 1.0:
            raise PopulationError(f"importance of {self.need_id} outside [0,1]")
        for s in (self.satisfaction_accept, self.satisfaction_reject):
            if not -1.0 <= s <= 1.0:
                raise PopulationError(f"satisfaction of {self.need_id} outside [-1,1]")


@dataclass(frozen=True)
class NeedProfile:
    needs: tuple[Need, ...]
    hedonic_need_id: str
    belonging_need_id: str

    def __post_init__(self):
        ids = [n.need_id for n in self.needs]
        if len(ids) < 2:
            raise PopulationError("a need profile requires at least two needs")
        if len(set(ids)) != len(ids):
            raise PopulationError("duplicate need ids")
        if self.hedonic_need_id == self.belonging_need_id:
            raise PopulationError("hedonic and belonging needs must differ")
        for nid in (self.hedonic_need_id, self.belonging_need_id):
            if nid not in ids:
                raise PopulationError(f"unknown need {nid!r}")

    @property
    def N(self) -> int:
        return len(self.needs)

    @property
    def need_ids(self) -> tuple[str, ...]:
        return tuple(n.need_id for n in self.needs)

    def index(self, need_id: str) -> int:
        return self.need_ids.index(need_id)


@dataclass(frozen=True)
class SurveyRecord:
    """One survey respondent: a real agent."""

    respondent_id: str
    attributes: AgentAttributes
    profile: NeedProfile
    accepts_measures: bool


_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


def _parse_bool(text: str, name: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise PopulationError(f"{name}={text!r} is not a yes/no value")


_ATTR_COLUMNS = ("gender", "age", "family", "rural_house", "economic_activity",
                 "essential_worker", "salary_band", "census_tract")


def ingest_real_agents(path, hedonic_need: str = "hedonism",
                       belonging_need: str = "belonging") -> list[SurveyRecord]:
    """Read survey records, one real agent per row.

    Need columns come in triples ``importance_<need>``, ``sat_accept_<need>``
    and ``sat_reject_<need>``; the need order follows the header.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ("id", *_ATTR_COLUMNS, "accepts_measures") if c not in header]
        if missing:
            raise PopulationError(f"{path}: missing columns {', '.join(missing)}")
        need_ids = [c[len("importance_"):] for c in header if c.startswith("importance_")]
        for nid in need_ids:
            for prefix in ("sat_accept_", "sat_reject_"):
                if prefix + nid not in header:
                    raise PopulationError(f"{path}: missing column {prefix}{nid}")
        records = []
        for row_no, row in enumerate(reader, start=2):
            try:
                attrs = AgentAttributes(
                    gender=row["gender"].strip(),
                    age=int(row["age"]),
                    family=row["family"].strip(),
                    rural_house=_parse_bool(row["rural_house"], "rural_house"),
                    economic_activity=row["economic_activity"].strip(),
                    essential_worker=_parse_bool(row["essential_worker"], "essential_worker"),
                    salary_band=row["salary_band"].strip(),
                    census_tract=row["census_tract"].strip(),
                )
                needs = tuple(
                    Need(nid, float(row["importance_" + nid]), float(row["sat_accept_" + nid]),
                         float(row["sat_reject_" + nid]))
                    for nid in need_ids
                )
                profile = NeedProfile(needs, hedonic_need, belonging_need)
                accepts = _parse_bool(row["accepts_measures"], "accepts_measures")
            except (PopulationError, ValueError, TypeError, AttributeError) as err:
                raise PopulationError(f"{path}: row {row_no}: {err}") from None
            records.append(SurveyRecord(row["id"].strip(), attrs, profile, accepts))
    if not records:
        raise PopulationError(f"{path}: no agents")
    return records


# --- profile tree -----------------------------------------------------------

_ATTRIBUTE_NAMES = {f.name for f in fields(AgentAttributes)}
_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "in": lambda a, b: a in b,
}


@dataclass(frozen=True)
class Leaf:
    profile_id: str
    accept_fraction: float
    members: tuple[str, ...]


@dataclass(frozen=True)
class Split:
    attribute: str
    op: str
    value: object
    if_true: "Node"
    if_false: "Node"

    def test(self, attrs: AgentAttributes) -> bool:
        return _OPS[self.op](getattr(attrs, self.attribute), self.value)


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class ProfileTree:
    root: Node

    def leaves(self) -> list[Leaf]:
        out, stack = [], [self.root]
        while stack:
            n = stack.pop()
            if isinstance(n, Leaf):
                out.append(n)
            else:
                stack.extend((n.if_false, n.if_true))
        return out

    @cached_property
    def _leaf_index(self) -> dict[str, Leaf]:
        return {lf.profile_id: lf for lf in self.leaves()}

    def leaf(self, profile_id: str) -> Leaf:
        return self._leaf_index[profile_id]

    @cached_property
    def _boundaries(self) -> list[int]:
        return self.age_boundaries()

    def age_boundaries(self) -> list[int]:
        """Ages at which an age predicate changes value, ascending."""
        bounds, stack = set(), [self.root]
        while stack:
            n = stack.pop()
            if isinstance(n, Split):
                if n.attribute == "age":
                    v = int(n.value)
                    bounds.add(v + 1 if n.op in ("<=", ">") else v)
                stack.extend((n.if_true, n.if_false))
        return sorted(bounds)

    def age_cluster(self, age: int) -> int:
        return bisect.bisect_right(self._boundaries, age)


def _build_node(obj, where: str) -> Node:
    if not isinstance(obj, dict):
        raise PopulationError(f"{where}: node must be an object")
    if "leaf" in obj:
        frac = float(obj.get("accept_fraction", -1))
        if not 0.0 <= frac <= 1.0:
            raise PopulationError(f"{where}: accept_fraction outside [0,1]")
        members = tuple(str(m) for m in obj.get("members", ()))
        if not members:
            raise PopulationError(f"{where}: leaf {obj['leaf']!r} has no real-agent members")
        return Leaf(str(obj["leaf"]), frac, members)
    try:
        attribute, op, value = obj["attribute"], obj["op"], obj["value"]
        t, f = obj["true"], obj["false"]
    except KeyError as err:
        raise PopulationError(f"{where}: split missing {err}") from None
    if attribute not in _ATTRIBUTE_NAMES:
        raise PopulationError(f"{where}: unknown attribute {attribute!r}")
    if op not in _OPS:
        raise PopulationError(f"{where}: unknown operator {op!r}")
    if op == "in":
        value = tuple(value)
    return Split(attribute, op, value, _build_node(t, where + ".true"), _build_node(f, where + ".false"))


def profile_tree_from_dict(obj) -> ProfileTree:
    tree = ProfileTree(_build_node(obj.get("root", obj) if isinstance(obj, dict) else obj, "root"))
    ids = [lf.profile_id for lf in tree.leaves()]
    if len(set(ids)) != len(ids):
        raise PopulationError("duplicate leaf ids in profile tree")
    return tree


def load_profile_tree(path) -> ProfileTree:
    with Path(path).open(encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as err:
            raise PopulationError(f"{path}: {err}") from None
    return profile_tree_from_dict(obj)


def classify_profile(attrs: AgentAttributes, tree: ProfileTree) -> str:
    node = tree.root
    while isinstance(node, Split):
        node = node.if_true if node.test(attrs) else node.if_false
    return node.profile_id


# --- census -----------------------------------------------------------------

@dataclass(frozen=True)
class MarginalCell:
    tract: str
    age_low: int
    age_high: int
    gender: str
    count: int


def _parse_band(text: str) -> tuple[int, int]:
    t = text.strip()
    if t.endswith("+"):
        return int(t[:-1]), MAX_AGE
    lo, hi = t.split("-")
    return int(lo), int(hi)


def load_census(path) -> list[MarginalCell]:
    """Census marginals: rows of ``tract,age_band,gender,count`` (bands like ``30-39`` or ``85+``)."""
    cells = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row_no, row in enumerate(reader, start=2):
            try:
                lo, hi = _parse_band(row["age_band"])
                cell = MarginalCell(row["tract"].strip(), lo, hi, row["gender"].strip(), int(row["count"]))
            except (KeyError, ValueError, AttributeError) as err:
                raise PopulationError(f"{path}: row {row_no}: {err}") from None
            if not MIN_AGE <= lo <= hi <= MAX_AGE:
                raise PopulationError(f"{path}: row {row_no}: age band outside [{MIN_AGE},{MAX_AGE}]")
            if cell.gender not in GENDERS or cell.count < 0:
                raise PopulationError(f"{path}: row {row_no}: bad gender or negative count")
            cells.append(cell)
    if not cells or sum(c.count for c in cells) == 0:
        raise PopulationError(f"{path}: empty census marginals")
    return cells


def largest_remainder(weights, total: int) -> np.ndarray:
    """Apportion ``total`` units proportionally to ``weights``.

    Each share differs from its exact quota by less than one. Ties in the
    fractional parts go to the earlier entry, so the result is deterministic.
    """
    w = np.asarray(weights, dtype=float)
    if total == 0 or w.sum() == 0:
        return np.zeros(len(w), dtype=np.int64)
    quota = w * total / w.sum()
    base = np.floor(quota).astype(np.int64)
    short = int(total - base.sum())
    order = np.argsort(-(quota - base), kind="stable")
    base[order[:short]] += 1
    return base


# --- synthesis --------------------------------------------------------------

@dataclass(frozen=True)
class Agent:
    agent_id: int
    attributes: AgentAttributes
    profile: NeedProfile
    origin: str
    profile_id: str
    donor: Optional[str] = None  # respondent whose needs were copied


@dataclass
class Population:
    agents: list[Agent]

    def __post_init__(self):
        if not self.agents:
            raise PopulationError("empty population")

    @property
    def size(self) -> int:
        return len(self.agents)

    def __len__(self):
        return len(self.agents)

    def __iter__(self):
        return iter(self.agents)

    def __getitem__(self, i) -> Agent:
        return self.agents[i]

    def tracts(self) -> set[str]:
        return {a.attributes.census_tract for a in self.agents}


_DRAWN_FIELDS = ("family", "rural_house", "economic_activity", "salary_band")


class _Conditional:
    """Empirical survey distributions keyed on (gender, age cluster)."""

    def __init__(self, survey: list[SurveyRecord], tree: ProfileTree):
        self.tree = tree
        self.by_group = defaultdict(list)
        self.by_gender = defaultdict(list)
        for r in survey:
            a = r.attributes
            self.by_group[(a.gender, tree.age_cluster(a.age))].append(a)
            self.by_gender[a.gender].append(a)
        self.everyone = [r.attributes for r in survey]

        self._columns = {}

    def pool(self, gender: str, cluster: int) -> list[AgentAttributes]:
        return self.by_group.get((gender, cluster)) or self.by_gender.get(gender) or self.everyone

    def _pool_columns(self, gender, cluster):
        key = (gender, cluster)
        if key not in self._columns:
            pool = self.pool(gender, cluster)
            cols = {name: [getattr(a, name) for a in pool] for name in _DRAWN_FIELDS}
            cols["essential_worker"] = [a.essential_worker for a in pool if a.works] or [False]
            self._columns[key] = cols
        return self._columns[key]

    def draw(self, gender, cluster, rng, n) -> list[dict]:
        """``n`` field dicts, each field drawn independently from its conditional distribution."""
        cols = self._pool_columns(gender, cluster)
        out = [dict() for _ in range(n)]
        for name in (*_DRAWN_FIELDS, "essential_worker"):
            values = cols[name]
            for d, k in zip(out, rng.integers(0, len(values), size=n)):
                d[name] = values[k]
        for d in out:
            # only people with a job can hold an essential one
            d["essential_worker"] = bool(d["essential_worker"]) and d["economic_activity"] in WORKING_ACTIVITIES
        return out


def synthesize_population(census: list[MarginalCell], survey: list[SurveyRecord], tree: ProfileTree,
                          target_size: int, rng: np.random.Generator,
                          known_tracts: Optional[set] = None) -> Population:
    """Real agents verbatim, then simulated agents up to ``target_size``."""
    if not census:
        raise PopulationError("census marginals are empty")
    if target_size < len(survey):
        raise PopulationError(f"target_size {target_size} is below the {len(survey)} real agents")
    if known_tracts is not None:
        unknown = sorted({c.tract for c in census} - set(known_tracts))
        if unknown:
            raise PopulationError(f"census tracts missing from the tract map: {', '.join(unknown[:5])}")

    by_id = {r.respondent_id: r for r in survey}
    donors: dict[str, tuple[list[SurveyRecord], list[SurveyRecord]]] = {}
    for lf in tree.leaves():
        acc, rej = [], []
        for m in lf.members:
            if m not in by_id:
                raise PopulationError(f"leaf {lf.profile_id!r} lists unknown respondent {m!r}")
            (acc if by_id[m].accepts_measures else rej).append(by_id[m])
        donors[lf.profile_id] = (acc, rej)

    agents = [
        Agent(i, r.attributes, r.profile, REAL, classify_profile(r.attributes, tree))
        for i, r in enumerate(survey)
    ]

    n_sim = target_size - len(survey)
    counts = largest_remainder([c.count for c in census], n_sim)
    cond = _Conditional(survey, tree)
    for cell, k in zip(census, counts):
        if k == 0:
            continue
        ages = [int(a) for a in rng.integers(cell.age_low, cell.age_high + 1, size=k)]
        clusters = [tree.age_cluster(a) for a in ages]
        extras = [None] * k
        for cl in sorted(set(clusters)):
            idx = [i for i, c in enumerate(clusters) if c == cl]
            for i, extra in zip(idx, cond.draw(cell.gender, cl, rng, len(idx))):
                extras[i] = extra
        for age, extra in zip(ages, extras):
            attrs = AgentAttributes(gender=cell.gender, age=age, census_tract=cell.tract, **extra)
            leaf_id = classify_profile(attrs, tree)
            acc, rej = donors[leaf_id]
            frac = tree.leaf(leaf_id).accept_fraction
            pool = acc if rng.random() < frac else rej
            pool = pool or acc or rej
            if not pool:
                raise PopulationError(f"leaf {leaf_id!r} has no donors")
            donor = pool[int(rng.integers(len(pool)))]
            agents.append(Agent(len(agents), attrs, donor.profile, SIMULATED, leaf_id, donor.respondent_id))
    return Population(agents)
