"""Tract grid, activity locations, home placement and daily destinations.

Tract map text format (comma separated, ``#`` starts a comment)::

    size,50,50
    cell,<x>,<y>,<tract>            one row per grid cell
    location,<kind>,<x>,<y>,<id>    kind: work | college | essential | leisure

Every cell must be listed exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Optional

import numpy as np

from .config import DayKind, ScenarioKind

LOCATION_KINDS = ("work", "college", "essential", "leisure")


class Dest(IntEnum):
    """Where an agent spends the day."""

    NONE = -1  # dead, hospitalized, ICU or quarantined: not in any roster
    HOME = 0
    WORK = 1
    COLLEGE = 2
    ESSENTIAL = 3
    LEISURE = 4


_KIND_TO_DEST = {"work": Dest.WORK, "college": Dest.COLLEGE, "essential": Dest.ESSENTIAL, "leisure": Dest.LEISURE}


class TractMapError(ValueError):
    pass


@dataclass
class TractGrid:
    width: int
    height: int
    tract_of_cell: np.ndarray  # (width, height) of tract index
    tract_codes: list[str]
    loc_kind: np.ndarray  # Dest value per location
    loc_x: np.ndarray
    loc_y: np.ndarray
    loc_ids: list[str]

    def __post_init__(self):
        self._cells = {}
        xs, ys = np.nonzero(self.tract_of_cell >= 0)
        t = self.tract_of_cell[xs, ys]
        for k, code in enumerate(self.tract_codes):
            sel = t == k
            self._cells[code] = np.stack([xs[sel], ys[sel]], axis=1)

    def cells(self, tract: str) -> np.ndarray:
        """(n, 2) array of the cells belonging to ``tract``."""
        if tract not in self._cells:
            raise TractMapError(f"tract {tract!r} is not on the grid")
        return self._cells[tract]

    def tract_at(self, x: int, y: int) -> str:
        return self.tract_codes[self.tract_of_cell[x, y]]

    def locations(self, kind: str) -> np.ndarray:
        return np.flatnonzero(self.loc_kind == _KIND_TO_DEST[kind])

    @property
    def n_locations(self) -> int:
        return len(self.loc_ids)


def load_tract_map(path) -> TractGrid:
    path = Path(path)
    size = None
    cells: dict[tuple[int, int], str] = {}
    locs = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            where = f"{path}:{line_no}"
            try:
                if parts[0] == "size" and len(parts) == 3:
                    size = (int(parts[1]), int(parts[2]))
                    if size[0] < 1 or size[1] < 1:
                        raise TractMapError(f"{where}: grid dimensions must be positive")
                elif parts[0] == "cell" and len(parts) == 4:
                    if size is None:
                        raise TractMapError(f"{where}: cell row before size header")
                    x, y = int(parts[1]), int(parts[2])
                    _check_bounds(x, y, size, where)
                    if (x, y) in cells:
                        raise TractMapError(f"{where}: cell ({x},{y}) listed twice")
                    cells[(x, y)] = parts[3]
                elif parts[0] == "location" and len(parts) == 5:
                    if size is None:
                        raise TractMapError(f"{where}: location row before size header")
                    kind, x, y = parts[1], int(parts[2]), int(parts[3])
                    if kind not in LOCATION_KINDS:
                        raise TractMapError(f"{where}: unknown location kind {kind!r}")
                    _check_bounds(x, y, size, where)
                    locs.append((kind, x, y, parts[4]))
                else:
                    raise TractMapError(f"{where}: malformed row {line!r}")
            except ValueError as err:
                if isinstance(err, TractMapError):
                    raise
                raise TractMapError(f"{where}: malformed row {line!r}") from None
    if size is None:
        raise TractMapError(f"{path}: missing size header")
    w, h = size
    if len(cells) != w * h:
        raise TractMapError(f"{path}: {w * h - len(cells)} cells have no tract (expected {w}x{h})")
    ids = [l[3] for l in locs]
    if len(set(ids)) != len(ids):
        raise TractMapError(f"{path}: duplicate location id")
    codes = sorted(set(cells.values()))
    index = {c: i for i, c in enumerate(codes)}
    grid = np.full((w, h), -1, dtype=np.int32)
    for (x, y), code in cells.items():
        grid[x, y] = index[code]
    return TractGrid(
        width=w,
        height=h,
        tract_of_cell=grid,
        tract_codes=codes,
        loc_kind=np.array([_KIND_TO_DEST[l[0]] for l in locs], dtype=np.int8),
        loc_x=np.array([l[1] for l in locs], dtype=np.int32),
        loc_y=np.array([l[2] for l in locs], dtype=np.int32),
        loc_ids=ids,
    )


def _check_bounds(x, y, size, where):
    if not (0 <= x < size[0] and 0 <= y < size[1]):
        raise TractMapError(f"{where}: cell ({x},{y}) outside [0,{size[0]})x[0,{size[1]})")


@dataclass(frozen=True)
class AgentPlacement:
    home: tuple[int, int]
    work_or_college: Optional[int]
    essential_commerce: int
    leisure: int


@dataclass
class Placements:
    """Per-agent placement arrays; location references index into the grid's locations."""

    home_x: np.ndarray
    home_y: np.ndarray
    work: np.ndarray  # work or college location, -1 when none
    essential: np.ndarray
    leisure: np.ndarray

    def __len__(self):
        return len(self.home_x)

    def get(self, i: int) -> AgentPlacement:
        w = int(self.work[i])
        return AgentPlacement((int(self.home_x[i]), int(self.home_y[i])), None if w < 0 else w,
                              int(self.essential[i]), int(self.leisure[i]))


def assign_placements(pop, grid: TractGrid, rng: np.random.Generator) -> Placements:
    n = len(pop)
    home_x = np.empty(n, dtype=np.int32)
    home_y = np.empty(n, dtype=np.int32)
    work = np.full(n, -1, dtype=np.int32)
    pools = {k: grid.locations(k) for k in LOCATION_KINDS}
    for kind in ("essential", "leisure"):
        if len(pools[kind]) == 0:
            raise TractMapError(f"tract map has no {kind} locations")
    tracts = [a.attributes.census_tract for a in pop]
    works = np.array([a.attributes.works for a in pop])
    studies = np.array([a.attributes.studies for a in pop])
    if works.any() and len(pools["work"]) == 0:
        raise TractMapError("tract map has no work locations")
    if studies.any() and len(pools["college"]) == 0:
        raise TractMapError("tract map has no college locations")

    u = rng.random(n)
    for i, tract in enumerate(tracts):
        cells = grid.cells(tract)
        if len(cells) == 0:
            raise TractMapError(f"tract {tract!r} has no cells")
        x, y = cells[int(u[i] * len(cells))]
        home_x[i], home_y[i] = x, y
    w_idx = np.flatnonzero(works)
    work[w_idx] = rng.choice(pools["work"], size=len(w_idx)) if len(w_idx) else []
    s_idx = np.flatnonzero(studies)
    work[s_idx] = rng.choice(pools["college"], size=len(s_idx)) if len(s_idx) else []
    essential = rng.choice(pools["essential"], size=n).astype(np.int32)
    leisure = rng.choice(pools["leisure"], size=n).astype(np.int32)
    return Placements(home_x, home_y, work, essential, leisure)


@dataclass(frozen=True)
class DailyDestination:
    kind: Dest
    location: Optional[int]  # grid location index, None at home or when excluded


def daily_destinations(placements: Placements, works: np.ndarray, studies: np.ndarray,
                       essential_worker: np.ndarray, in_community: np.ndarray, day: DayKind,
                       scenario: ScenarioKind, leisure_probability: float,
                       rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Destination kind and location index (-1 for none) for every agent.

    ``in_community`` marks agents that are alive and not hospitalized, in ICU
    or in quarantine; everybody else gets :attr:`Dest.NONE`.
    """
    n = len(placements)
    kind = np.full(n, Dest.HOME, dtype=np.int8)
    loc = np.full(n, -1, dtype=np.int32)
    commuter = works | studies
    # one draw per agent every day keeps the stream aligned across day kinds
    leisure = rng.random(n) < leisure_probability
    lockdown = scenario is ScenarioKind.LOCKDOWN

    if day is DayKind.WORKING:
        go = commuter & essential_worker if lockdown else commuter
        kind[go & works] = Dest.WORK
        kind[go & studies] = Dest.COLLEGE
        loc[go] = placements.work[go]
        shop = ~commuter
        kind[shop] = Dest.ESSENTIAL
        loc[shop] = placements.essential[shop]
    else:
        fun = leisure
        if lockdown:
            # non-essential commerce is closed; would-be leisure trips stay home
            kind[~leisure] = Dest.ESSENTIAL
            loc[~leisure] = placements.essential[~leisure]
        else:
            kind[fun] = Dest.LEISURE
            loc[fun] = placements.leisure[fun]
            kind[~fun] = Dest.ESSENTIAL
            loc[~fun] = placements.essential[~fun]

    kind[~in_community] = Dest.NONE
    loc[~in_community] = -1
    return kind, loc


def daily_destination(placement: AgentPlacement, attrs, day: DayKind, scenario: ScenarioKind,
                      leisure_probability: float, rng: np.random.Generator) -> DailyDestination:
    """Single-agent form of :func:`daily_destinations` for a living community agent."""
    w = -1 if placement.work_or_college is None else placement.work_or_college
    p = Placements(np.array([placement.home[0]]), np.array([placement.home[1]]), np.array([w], dtype=np.int32),
                   np.array([placement.essential_commerce], dtype=np.int32),
                   np.array([placement.leisure], dtype=np.int32))
    kind, loc = daily_destinations(p, np.array([attrs.works]), np.array([attrs.studies]),
                                   np.array([attrs.essential_worker]), np.array([True]), day, scenario,
                                   leisure_probability, rng)
    return DailyDestination(Dest(int(kind[0])), None if loc[0] < 0 else int(loc[0]))


def rosters(loc: np.ndarray) -> dict[int, np.ndarray]:
    """Agents present at each location (home and excluded agents are omitted)."""
    present = np.flatnonzero(loc >= 0)
    order = present[np.argsort(loc[present], kind="stable")]
    keys, starts = np.unique(loc[order], return_index=True)
    return {int(k): grp for k, grp in zip(keys, np.split(order, starts[1:]))}
