"""World initialization, the five-phase daily loop, and replicate execution.

Each day runs, in order: movement, HUMAT decisions (with any due critical
node broadcasts), epidemic transitions, contagion, and repair of social
networks broken by deaths.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geo, network, population
from .config import ScenarioConfig, TransitionTable, day_kind, derive_transition_table
from .humat import HumatState, critical_broadcast, humat_daily_cycle
from .rng import Streams, replicate_seed
from .seird import ContagionContext, EpidemicStates, contagion_step
from .states import PHASE_COLUMNS, Phase

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("day", *PHASE_COLUMNS, "new_infections", "communications", "acceptance_level")


class ReplicateError(RuntimeError):
    def __init__(self, seed: int, cause: BaseException):
        self.seed = seed
        super().__init__(f"replicate with seed {seed} failed: {cause!r}")


@dataclass(frozen=True)
class DailyMetrics:
    day: int
    counts: tuple[int, ...]  # in Phase order
    new_infections: int
    communications: int
    acceptance_level: float

    def row(self) -> list:
        return [self.day, *self.counts, self.new_infections, self.communications, self.acceptance_level]

    def count(self, phase: Phase) -> int:
        return self.counts[int(phase)]


@dataclass
class World:
    config: ScenarioConfig
    table: TransitionTable
    grid: geo.TractGrid
    population: population.Population
    placements: geo.Placements
    graph: network.SocialGraph
    epi: EpidemicStates
    humat: HumatState
    node_networks: dict
    node_trust: dict
    order: np.ndarray
    streams: Streams
    ages: np.ndarray
    works: np.ndarray
    studies: np.ndarray
    essential_worker: np.ndarray
    day: int = 0
    dest_kind: np.ndarray = None
    dest_loc: np.ndarray = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        self._refresh_edges()

    def _refresh_edges(self):
        self.contact_src, self.contact_dst = self.graph.contact_pairs()
        self.friend_src, self.friend_dst = self.graph.edges(network.FRIEND)

    @property
    def size(self) -> int:
        return self.population.size


def _seed_count(fraction: float, n: int) -> int:
    return int(np.floor(fraction * n + 0.5))


def init_world(config: ScenarioConfig, seed: int | None = None) -> World:
    """Build the board, population, networks and initial infections from one seed."""
    streams = Streams(config.rng_seed if seed is None else seed)
    src = config.population
    grid = geo.load_tract_map(src.tract_map)
    survey = population.ingest_real_agents(src.survey, src.hedonic_need, src.belonging_need)
    tree = population.load_profile_tree(src.profile_tree)
    census = population.load_census(src.census)
    pop = population.synthesize_population(census, survey, tree, src.target_size, streams["population"],
                                           known_tracts=set(grid.tract_codes))
    missing = pop.tracts() - set(grid.tract_codes)
    if missing:
        raise population.PopulationError(f"agent tracts missing from the tract map: {sorted(missing)[:5]}")
    placements = geo.assign_placements(pop, grid, streams["placement"])

    n = pop.size
    attrs = [a.attributes for a in pop]
    ages = np.array([a.age for a in attrs])
    net = config.network
    rng = streams["network"]
    neighbors = network.build_neighbor_network(placements.home_x, placements.home_y, net.social_reach,
                                               grid.width, grid.height, rng)
    friends = network.build_friend_network(ages, net.num_friends, net.random_friend, net.age_band_width, rng)
    graph = network.build_graph(n, neighbors, friends)

    rng = streams["critical"]
    node_networks, node_trust = {}, {}
    for node in config.critical_nodes:
        size = min(node.network_size, n)
        node_networks[node.id] = np.sort(rng.choice(n, size=size, replace=False))
        node_trust[node.id] = rng.random(n)

    humat = HumatState([a.profile for a in pop], config.humat)
    humat.evaluate(streams["humat"])
    order = streams["humat"].permutation(n)

    table = derive_transition_table(config.virus)
    epi = EpidemicStates(n, config.virus, table, config.scenario_kind)
    k = _seed_count(config.initial_infected_fraction, n)
    if k:
        seeds = np.sort(streams["seeding"].choice(n, size=k, replace=False))
        epi.seed_infectious(seeds, 0, streams["epidemic"])

    return World(
        config=config, table=table, grid=grid, population=pop, placements=placements, graph=graph,
        epi=epi, humat=humat, node_networks=node_networks, node_trust=node_trust, order=order,
        streams=streams, ages=ages,
        works=np.array([a.works for a in attrs]),
        studies=np.array([a.studies for a in attrs]),
        essential_worker=np.array([a.essential_worker for a in attrs]),
    )


_OUT_OF_COMMUNITY = np.array([Phase.HOSPITALIZED, Phase.ICU, Phase.QUARANTINE, Phase.DEAD], dtype=np.int8)


def run_day(world: World) -> DailyMetrics:
    cfg = world.config
    d = world.day
    if d >= cfg.calendar.horizon_days:
        raise IndexError(f"day {d} is past the horizon")
    epi, humat, graph = world.epi, world.humat, world.graph
    s = world.streams

    # 1. movement
    in_comm = ~np.isin(epi.phase, _OUT_OF_COMMUNITY)
    world.dest_kind, world.dest_loc = geo.daily_destinations(
        world.placements, world.works, world.studies, world.essential_worker, in_comm,
        day_kind(cfg.calendar, d), cfg.scenario_kind, cfg.calendar.leisure_probability, s["mobility"])

    # 2. HUMAT decisions
    alive = epi.alive
    rng = s["humat"]
    humat.update_belonging(world.contact_src, world.contact_dst, alive)
    for plan in cfg.critical_node_plans:
        critical_broadcast(plan, d, humat, world.node_networks, world.node_trust, alive, s["critical"],
                           cfg.humat.critical_node_factor)
    humat.evaluate(rng)
    communications = 0
    for a in world.order[alive[world.order]]:
        communications += humat_daily_cycle(humat, graph, int(a), alive, rng)

    # 3. epidemic transitions
    result = epi.step(d, humat.accepting, s["epidemic"])

    # 4. contagion
    ctx = ContagionContext(epi.phase, world.dest_kind, world.dest_loc, humat.accepting, world.friend_src,
                           world.friend_dst, cfg.virus, cfg.scenario_kind, cfg.network.meet_friend_probability)
    newly = contagion_step(ctx, s["contagion"])
    if len(newly):
        epi.expose(newly, d, s["epidemic"])

    # 5. network repair
    if len(result["died"]):
        net = cfg.network
        network.repair_network(graph, epi.alive, world.ages, net.num_friends, net.random_friend,
                               net.age_band_width, s["repair"])
        world._refresh_edges()

    counts = epi.counts()
    if counts.sum() != world.size:
        raise AssertionError(f"day {d}: state counts sum to {counts.sum()}, not {world.size}")
    alive = epi.alive
    acceptance = float(humat.accepting[alive].mean()) if alive.any() else 0.0
    m = DailyMetrics(d, tuple(int(c) for c in counts), int(len(newly)), communications, acceptance)
    world.history.append(m)
    world.day += 1
    return m


def _check_series(rows: np.ndarray, size: int) -> None:
    states = rows[:, 1:1 + len(PHASE_COLUMNS)]
    if not np.all(states.sum(1) == size):
        raise AssertionError("state counts do not sum to the population size")
    dead = states[:, int(Phase.DEAD)]
    if np.any(np.diff(dead) < 0):
        raise AssertionError("dead count decreased")


def run_simulation(config: ScenarioConfig, seed: int | None = None) -> np.ndarray:
    """One replicate; returns a (horizon, len(METRIC_COLUMNS)) array."""
    world = init_world(config, seed)
    rows = [run_day(world).row() for _ in range(config.calendar.horizon_days)]
    out = np.array(rows, dtype=float)
    _check_series(out, world.size)
    return out


@dataclass
class RunResult:
    seeds: list[int]
    replicates: list[np.ndarray]
    population_size: int

    @property
    def mean(self) -> np.ndarray:
        return np.mean(np.stack(self.replicates), axis=0)

    def column(self, name: str) -> np.ndarray:
        """(replicates, days) array of one metric."""
        j = METRIC_COLUMNS.index(name)
        return np.stack([r[:, j] for r in self.replicates])


def _run_one(args):
    config, seed = args
    try:
        return run_simulation(config, seed)
    except Exception as err:  # noqa: BLE001 - reported with the seed
        raise ReplicateError(seed, err) from err


def run_replicates(config: ScenarioConfig, n: int | None = None, root_seed: int | None = None,
                   workers: int = 1) -> RunResult:
    """``n`` independent replicates seeded ``root_seed + i``; output does not depend on ``workers``."""
    n = config.replicates if n is None else n
    if n < 1:
        raise ValueError("need at least one replicate")
    root = config.rng_seed if root_seed is None else root_seed
    seeds = [replicate_seed(root, i) for i in range(n)]
    jobs = [(config, s) for s in seeds]
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            series = list(pool.map(_run_one, jobs))
    else:
        series = [_run_one(j) for j in jobs]
    return RunResult(seeds, series, int(series[0][0, 1:1 + len(PHASE_COLUMNS)].sum()))
