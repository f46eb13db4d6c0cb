"""Directed, trust-weighted social networks: neighbours and friends.

Links are stored as flat arrays sorted by (source, kind, target). Every link
has a partner in the opposite direction with the same kind, so link
existence is symmetric while trust (drawn independently per direction) is
not.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

NEIGHBOR, FRIEND = 0, 1
KIND_NAMES = ("neighbor", "friend")


@dataclass(frozen=True)
class SocialLink:
    source: int
    target: int
    kind: int
    trust: float
    persuasion_attempts: int = 0
    persuasion_successes: int = 0


class SocialGraph:
    def __init__(self, n_agents: int, src=(), dst=(), kind=(), trust=()):
        self.n = int(n_agents)
        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        self.kind = np.asarray(kind, dtype=np.int8)
        self.trust = np.asarray(trust, dtype=np.float64)
        self.attempts = np.zeros(len(self.src), dtype=np.int64)
        self.successes = np.zeros(len(self.src), dtype=np.int64)
        if np.any(self.src == self.dst):
            raise ValueError("self-links are not allowed")
        self._rebuild()

    def __len__(self):
        return len(self.src)

    def _keys(self, s, d, k):
        return (s * self.n + d) * 2 + k

    def _rebuild(self):
        keys = self._keys(self.src, self.dst, self.kind.astype(np.int64))
        order = np.argsort((self.src * 2 + self.kind) * self.n + self.dst, kind="stable")
        for name in ("src", "dst", "kind", "trust", "attempts", "successes"):
            setattr(self, name, getattr(self, name)[order])
        keys = keys[order]
        self.indptr = np.searchsorted(self.src, np.arange(self.n + 1))
        by_key = np.argsort(keys, kind="stable")
        sorted_keys = keys[by_key]
        if len(sorted_keys) and np.any(sorted_keys[1:] == sorted_keys[:-1]):
            raise ValueError("duplicate link")
        want = self._keys(self.dst, self.src, self.kind.astype(np.int64))
        pos = np.searchsorted(sorted_keys, want)
        pos = np.minimum(pos, max(len(sorted_keys) - 1, 0))
        if len(want) and not np.array_equal(sorted_keys[pos], want):
            raise ValueError("every link needs a reverse link of the same kind")
        self.reverse = by_key[pos] if len(want) else np.zeros(0, dtype=np.int64)

    def add(self, src, dst, kind, trust):
        self.src = np.concatenate([self.src, np.asarray(src, dtype=np.int64)])
        self.dst = np.concatenate([self.dst, np.asarray(dst, dtype=np.int64)])
        self.kind = np.concatenate([self.kind, np.asarray(kind, dtype=np.int8)])
        self.trust = np.concatenate([self.trust, np.asarray(trust, dtype=np.float64)])
        m = len(np.atleast_1d(src))
        self.attempts = np.concatenate([self.attempts, np.zeros(m, dtype=np.int64)])
        self.successes = np.concatenate([self.successes, np.zeros(m, dtype=np.int64)])
        self._rebuild()

    def prune(self, alive: np.ndarray) -> int:
        """Drop every link touching a dead agent; returns the number removed."""
        keep = alive[self.src] & alive[self.dst]
        removed = int((~keep).sum())
        if removed:
            for name in ("src", "dst", "kind", "trust", "attempts", "successes"):
                setattr(self, name, getattr(self, name)[keep])
            self._rebuild()
        return removed

    def links(self, agent: int) -> slice:
        return slice(int(self.indptr[agent]), int(self.indptr[agent + 1]))

    def targets(self, agent: int, kind: int | None = None) -> np.ndarray:
        sl = self.links(agent)
        if kind is None:
            return self.dst[sl]
        return self.dst[sl][self.kind[sl] == kind]

    def link(self, i: int) -> SocialLink:
        return SocialLink(int(self.src[i]), int(self.dst[i]), int(self.kind[i]), float(self.trust[i]),
                          int(self.attempts[i]), int(self.successes[i]))

    def find(self, source: int, target: int, kind: int) -> int:
        sl = self.links(source)
        hit = np.flatnonzero((self.dst[sl] == target) & (self.kind[sl] == kind))
        if len(hit) == 0:
            raise KeyError((source, target, kind))
        return sl.start + int(hit[0])

    def degree(self, kind: int, alive: np.ndarray | None = None) -> np.ndarray:
        sel = self.kind == kind
        if alive is not None:
            sel &= alive[self.dst]
        return np.bincount(self.src[sel], minlength=self.n)

    def edges(self, kind: int) -> tuple[np.ndarray, np.ndarray]:
        sel = self.kind == kind
        return self.src[sel], self.dst[sel]

    def contact_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct (source, target) pairs over both kinds."""
        key = np.unique(self.src * self.n + self.dst)
        return key // self.n, key % self.n

    def dump(self, path) -> None:
        """Write the edge list as ``source,target,kind,trust``."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("source,target,kind,trust\n")
            for s, d, k, t in zip(self.src, self.dst, self.kind, self.trust):
                fh.write(f"{s},{d},{KIND_NAMES[k]},{t:.6f}\n")


def neighbor_pairs(home_x: np.ndarray, home_y: np.ndarray, reach: int, width: int, height: int):
    """All ordered pairs (i, j), i != j, whose homes are within Chebyshev distance ``reach``."""
    n = len(home_x)
    cell = home_x.astype(np.int64) * height + home_y
    order = np.argsort(cell, kind="stable")
    sorted_cells = cell[order]
    srcs, dsts = [], []
    for dx in range(-reach, reach + 1):
        for dy in range(-reach, reach + 1):
            nx, ny = home_x + dx, home_y + dy
            ok = (nx >= 0) & (nx < width) & (ny >= 0) & (ny < height)
            agents = np.flatnonzero(ok)
            target = nx[ok].astype(np.int64) * height + ny[ok]
            lo = np.searchsorted(sorted_cells, target, side="left")
            hi = np.searchsorted(sorted_cells, target, side="right")
            cnt = hi - lo
            s = np.repeat(agents, cnt)
            # offsets into each [lo, hi) run
            starts = np.repeat(lo - np.concatenate([[0], np.cumsum(cnt)[:-1]]), cnt)
            d = order[starts + np.arange(cnt.sum())]
            srcs.append(s)
            dsts.append(d)
    s = np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64)
    d = np.concatenate(dsts) if dsts else np.zeros(0, dtype=np.int64)
    keep = s != d
    s, d = s[keep], d[keep]
    o = np.lexsort((d, s))
    return s[o], d[o]


def build_neighbor_network(home_x, home_y, reach: int, width: int, height: int, rng: np.random.Generator):
    """Social circles: links to everyone living within ``reach`` cells."""
    s, d = neighbor_pairs(np.asarray(home_x), np.asarray(home_y), reach, width, height)
    return s, d, np.full(len(s), NEIGHBOR, dtype=np.int8), rng.random(len(s))


def age_bands(ages: np.ndarray, width: int) -> np.ndarray:
    return (np.asarray(ages) - 18) // width


class _FriendPicker:
    """Homophilous draws of new friends for one population."""

    def __init__(self, bands: np.ndarray, alive: np.ndarray, random_friend: float, rng):
        self.bands = bands
        self.alive = alive
        self.random_friend = random_friend
        self.rng = rng
        self.everyone = np.flatnonzero(alive)
        self.by_band = {int(b): np.flatnonzero(alive & (bands == b)) for b in np.unique(bands[alive])}

    def _draw(self, pool, i, taken, tries=32):
        if len(pool) == 0:
            return None
        for _ in range(tries):
            j = int(pool[int(self.rng.integers(len(pool)))])
            if j != i and j not in taken:
                return j
        rest = [int(j) for j in pool if j != i and int(j) not in taken]
        if not rest:
            return None
        return rest[int(self.rng.integers(len(rest)))]

    def pick(self, i: int, taken: set) -> int | None:
        if self.rng.random() < self.random_friend:
            return self._draw(self.everyone, i, taken)
        j = self._draw(self.by_band.get(int(self.bands[i]), ()), i, taken)
        if j is None:
            log.info("age band %d exhausted for agent %d; drawing from any band", self.bands[i], i)
            j = self._draw(self.everyone, i, taken)
        return j


def build_friend_network(ages, num_friends: int, random_friend: float, band_width: int,
                         rng: np.random.Generator, alive=None):
    """Random friendships with at least ``num_friends`` ties per agent, mostly within an age band."""
    ages = np.asarray(ages)
    n = len(ages)
    alive = np.ones(n, dtype=bool) if alive is None else np.asarray(alive)
    picker = _FriendPicker(age_bands(ages, band_width), alive, random_friend, rng)
    friends = [set() for _ in range(n)]
    pairs = []
    for i in rng.permutation(np.flatnonzero(alive)):
        i = int(i)
        while len(friends[i]) < num_friends:
            j = picker.pick(i, friends[i])
            if j is None:
                break
            friends[i].add(j)
            friends[j].add(i)
            pairs.append((i, j))
    p = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    s = np.concatenate([p[:, 0], p[:, 1]])
    d = np.concatenate([p[:, 1], p[:, 0]])
    return s, d, np.full(len(s), FRIEND, dtype=np.int8), rng.random(len(s))


def build_graph(n_agents: int, *parts) -> SocialGraph:
    s = np.concatenate([p[0] for p in parts])
    d = np.concatenate([p[1] for p in parts])
    k = np.concatenate([p[2] for p in parts])
    t = np.concatenate([p[3] for p in parts])
    return SocialGraph(n_agents, s, d, k, t)


def repair_network(graph: SocialGraph, alive: np.ndarray, ages, num_friends: int, random_friend: float,
                   band_width: int, rng: np.random.Generator) -> int:
    """Remove links to the dead and top living agents back up to ``num_friends`` friends.

    Neighbour circles are tied to homes and are not replenished. Returns the
    number of friendships created.
    """
    graph.prune(alive)
    deficit = np.flatnonzero(alive & (graph.degree(FRIEND) < num_friends))
    if len(deficit) == 0:
        return 0
    picker = _FriendPicker(age_bands(ages, band_width), alive, random_friend, rng)
    extra: dict[int, set] = {}

    def current(i):
        if i not in extra:
            extra[i] = set(int(j) for j in graph.targets(i, FRIEND))
        return extra[i]

    pairs = []
    for i in deficit:
        i = int(i)
        mine = current(i)
        while len(mine) < num_friends:
            j = picker.pick(i, mine)
            if j is None:
                break
            mine.add(j)
            current(j).add(i)
            pairs.append((i, j))
    if not pairs:
        return 0
    p = np.array(pairs, dtype=np.int64)
    s = np.concatenate([p[:, 0], p[:, 1]])
    d = np.concatenate([p[:, 1], p[:, 0]])
    graph.add(s, d, np.full(len(s), FRIEND, dtype=np.int8), rng.random(len(s)))
    return len(pairs)
