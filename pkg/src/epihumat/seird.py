"""Epidemic state of every agent, scheduled transitions and daily contagion.

States are kept as parallel arrays. A branching state (infectious,
hospitalized, ICU) draws its outcome and schedules it the moment it is
entered, which lets quarantine inherit the outcome drawn at infection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ScenarioKind, TransitionTable, VirusParams
from .geo import Dest
from .states import Phase

NO_DAY = -1


@dataclass(frozen=True)
class EpidemicState:
    phase: Phase
    scheduled: Optional[tuple[Phase, int]]
    asymptomatic: bool
    infected_on: Optional[int]
    infectious_since: Optional[int]


class EpidemicStates:
    def __init__(self, n: int, virus: VirusParams, table: TransitionTable, scenario: ScenarioKind):
        self.n = n
        self.virus = virus
        self.table = table
        self.scenario = scenario
        self.phase = np.full(n, Phase.SUSCEPTIBLE, dtype=np.int8)
        self.next_phase = np.full(n, -1, dtype=np.int8)
        self.due_day = np.full(n, NO_DAY, dtype=np.int32)
        self.asymptomatic = np.zeros(n, dtype=bool)
        self.infected_on = np.full(n, NO_DAY, dtype=np.int32)
        self.infectious_since = np.full(n, NO_DAY, dtype=np.int32)
        self.ever_infected = np.zeros(n, dtype=bool)

    def get(self, i: int) -> EpidemicState:
        sched = None if self.next_phase[i] < 0 else (Phase(int(self.next_phase[i])), int(self.due_day[i]))
        return EpidemicState(
            Phase(int(self.phase[i])),
            sched,
            bool(self.asymptomatic[i]),
            None if self.infected_on[i] == NO_DAY else int(self.infected_on[i]),
            None if self.infectious_since[i] == NO_DAY else int(self.infectious_since[i]),
        )

    def counts(self) -> np.ndarray:
        return np.bincount(self.phase, minlength=len(Phase))

    @property
    def alive(self) -> np.ndarray:
        return self.phase != Phase.DEAD

    def _schedule(self, ids, target, days, day):
        self.next_phase[ids] = target
        self.due_day[ids] = day + days

    def expose(self, ids, day: int, rng: np.random.Generator) -> None:
        """Move susceptible agents to Exposed and schedule the end of incubation."""
        ids = np.atleast_1d(np.asarray(ids, dtype=np.int64))
        if np.any(self.phase[ids] != Phase.SUSCEPTIBLE):
            raise ValueError("expose() called on a non-susceptible agent")
        self.phase[ids] = Phase.EXPOSED
        self.infected_on[ids] = day
        self.ever_infected[ids] = True
        incubation = self.table.sample_incubation(rng, len(ids))
        self._schedule(ids, Phase.INFECTIOUS, incubation, day)
        if self.scenario is ScenarioKind.PREVENTIVE:
            self.asymptomatic[ids] = rng.random(len(ids)) < self.virus.asymptomatic_fraction
        else:
            self.asymptomatic[ids] = False

    def seed_infectious(self, ids, day: int, rng: np.random.Generator) -> None:
        """Start agents directly in the infectious phase (initial cases)."""
        ids = np.atleast_1d(np.asarray(ids, dtype=np.int64))
        self.infected_on[ids] = day
        self.ever_infected[ids] = True
        if self.scenario is ScenarioKind.PREVENTIVE:
            self.asymptomatic[ids] = rng.random(len(ids)) < self.virus.asymptomatic_fraction
        self._enter(ids, Phase.INFECTIOUS, day, rng)

    def _enter(self, ids, phase: Phase, day: int, rng) -> None:
        if len(ids) == 0:
            return
        self.phase[ids] = phase
        if phase in (Phase.INFECTIOUS, Phase.HOSPITALIZED, Phase.ICU):
            if phase is Phase.INFECTIOUS:
                self.infectious_since[ids] = day
            outcome, days = self.table.sample_outcomes(phase, rng, len(ids))
            self._schedule(ids, outcome, days, day)
        elif phase is Phase.RECOVERED:
            self._schedule(ids, Phase.SUSCEPTIBLE, self.table.days_rs, day)
        else:
            self.next_phase[ids] = -1
            self.due_day[ids] = NO_DAY
            if phase is Phase.SUSCEPTIBLE:
                self.infectious_since[ids] = NO_DAY
                self.asymptomatic[ids] = False

    def step(self, day: int, accepting: np.ndarray, rng: np.random.Generator) -> dict:
        """Apply every transition due today, then the quarantine rules.

        Returns a dict with the ids that died today under ``"died"``.
        """
        due = np.flatnonzero((self.next_phase >= 0) & (self.due_day <= day) & (self.phase != Phase.DEAD))
        targets = self.next_phase[due].copy()
        died = due[targets == Phase.DEAD]
        for target in (Phase.INFECTIOUS, Phase.HOSPITALIZED, Phase.ICU, Phase.RECOVERED,
                       Phase.SUSCEPTIBLE, Phase.DEAD):
            self._enter(due[targets == target], target, day, rng)
        if self.scenario is ScenarioKind.PREVENTIVE:
            leaving = (self.phase == Phase.QUARANTINE) & ~accepting
            self.phase[leaving] = Phase.INFECTIOUS
            entering = self.quarantine_mask(day, accepting)
            self.phase[entering] = Phase.QUARANTINE
        return {"died": died}

    def quarantine_mask(self, day: int, accepting: np.ndarray) -> np.ndarray:
        if self.scenario is not ScenarioKind.PREVENTIVE:
            return np.zeros(self.n, dtype=bool)
        return ((self.phase == Phase.INFECTIOUS) & ~self.asymptomatic & accepting
                & (day - self.infectious_since >= self.virus.quarantine_delay_days))


def expose(states: EpidemicStates, agent: int, day: int, rng) -> EpidemicState:
    states.expose([agent], day, rng)
    return states.get(agent)


def step_epidemic(states: EpidemicStates, day: int, accepting, rng) -> EpidemicStates:
    states.step(day, np.asarray(accepting, dtype=bool), rng)
    return states


def quarantine_entry_check(states: EpidemicStates, agent: int, day: int, accepting: bool) -> bool:
    acc = np.zeros(states.n, dtype=bool)
    acc[agent] = accepting
    return bool(states.quarantine_mask(day, acc)[agent])


@dataclass
class ContagionContext:
    """Everything contagion needs for one day, read at the start of the phase."""

    phase: np.ndarray
    dest_kind: np.ndarray
    dest_loc: np.ndarray
    accepting: np.ndarray
    friend_src: np.ndarray
    friend_dst: np.ndarray
    virus: VirusParams
    scenario: ScenarioKind
    meet_friend_probability: float = 1.0

    def susceptible_probability(self, place: np.ndarray, ids: np.ndarray) -> np.ndarray:
        """Per-contact probability for susceptible ``ids`` meeting at places of kind ``place``.

        ``place`` holds :class:`Dest` values; friend contacts use ``Dest.NONE``.
        """
        v = self.virus
        p = np.full(len(ids), v.p_se, dtype=float)
        if self.scenario is ScenarioKind.PREVENTIVE:
            comply = self.accepting[ids]
            p[comply] = v.p_se_non_essential
            p[comply & (place == Dest.ESSENTIAL)] = v.p_se_accepting
        return p


def contagion_step(ctx: ContagionContext, rng: np.random.Generator) -> np.ndarray:
    """Ids of susceptible agents infected today (sorted, each at most once).

    Every infectious-susceptible contact is an independent Bernoulli trial.
    At a location the trials only depend on the susceptible agent, so its
    escape probability is ``(1 - p) ** k`` for ``k`` infectious roster-mates.
    """
    infectious = ctx.phase == Phase.INFECTIOUS
    susceptible = ctx.phase == Phase.SUSCEPTIBLE
    hit = np.zeros(len(ctx.phase), dtype=bool)

    if ctx.scenario is not ScenarioKind.LOCKDOWN:
        at_loc = ctx.dest_loc >= 0
        n_loc = int(ctx.dest_loc.max()) + 1 if at_loc.any() else 0
        k = np.bincount(ctx.dest_loc[infectious & at_loc], minlength=n_loc)
        cand = np.flatnonzero(susceptible & at_loc)
        cand = cand[k[ctx.dest_loc[cand]] > 0]
        if len(cand):
            p = ctx.susceptible_probability(ctx.dest_kind[cand], cand)
            p_inf = 1.0 - (1.0 - p) ** k[ctx.dest_loc[cand]]
            hit[cand[rng.random(len(cand)) < p_inf]] = True

    s, d = ctx.friend_src, ctx.friend_dst
    pair = infectious[s] & susceptible[d]
    if ctx.scenario is ScenarioKind.LOCKDOWN:
        # only friends who both reject the measures still meet
        pair &= ~ctx.accepting[s] & ~ctx.accepting[d]
    s, d = s[pair], d[pair]
    if len(d):
        if ctx.scenario is ScenarioKind.LOCKDOWN:
            p = np.full(len(d), ctx.virus.p_se_quarantine_scenario)
        else:
            p = ctx.susceptible_probability(np.full(len(d), Dest.NONE), d)
        p = p * ctx.meet_friend_probability
        hit[d[rng.random(len(d)) < p]] = True
    return np.flatnonzero(hit)
