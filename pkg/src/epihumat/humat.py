"""HUMAT decision cycle over the accept/reject alternatives, and critical nodes.

Each day every living agent evaluates both alternatives from its needs,
picks one, and, when the chosen alternative leaves it with a dilemma,
communicates with someone in its social network. Institutions (critical
nodes) periodically broadcast for or against the measures.

The scalar functions (``evaluate_alternatives``, ``dissonance_and_dilemmas``,
``choose_alternative`` ...) define the rules; :class:`HumatState` applies the
same rules to arrays of agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import CriticalNodePlan, HumatParams
from .network import SocialGraph
from .population import Need, NeedProfile
from .states import Alternative

ACCEPT, REJECT = int(Alternative.ACCEPT), int(Alternative.REJECT)


class Action(Enum):
    INQUIRING = "Inquiring"
    SIGNALING = "Signaling"


class DilemmaKind(Enum):
    BELONGINGNESS = "Belongingness"
    NON_BELONGINGNESS = "NonBelongingness"


@dataclass(frozen=True)
class AlternativeEvaluation:
    evaluations: tuple[float, ...]
    overall: float
    positive_sum: float
    negative_sum: float


@dataclass(frozen=True)
class DissonanceTerms:
    d: float
    c: float
    D: float


@dataclass(frozen=True)
class Dilemma:
    need_id: str
    kind: DilemmaKind


# --- formulas shared by the scalar and array paths -----------------------------

def dissonance_level(pos_sum, neg_sum):
    """2d / (d + c) with d, c the smaller and larger of |sum E+|, |sum E-|; 0 when both vanish."""
    a, b = np.abs(pos_sum), np.abs(neg_sum)
    d, c = np.minimum(a, b), np.maximum(a, b)
    tot = d + c
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, 2.0 * d / np.where(tot > 0, tot, 1.0), 0.0)


def dilemma_mask(evaluations: np.ndarray) -> np.ndarray:
    """True for needs whose evaluation sign is opposite to that of every other need (last axis)."""
    s = np.sign(evaluations)
    k = s.shape[-1]
    pos = (s > 0).sum(-1, keepdims=True)
    neg = (s < 0).sum(-1, keepdims=True)
    return ((s > 0) & (neg == k - 1)) | ((s < 0) & (pos == k - 1))


def similarity(imp_e, imp_o, eval_e, eval_o):
    """1 - |I_e - I_o| where both evaluations share a sign, else 0."""
    same = np.sign(eval_e) == np.sign(eval_o)
    return np.where(same, 1.0 - np.abs(np.asarray(imp_e) - np.asarray(imp_o)), 0.0)


def persuasion(alpha, trust, sim):
    return alpha * trust * sim


def new_satisfaction(sat_e, sat_o, p):
    return (1.0 - p) * sat_e + p * sat_o


def critical_persuasion(trust, factor=0.2):
    return trust * factor


def _decide(o_a, o_r, d_a, d_r, h_a, h_r, u, params: HumatParams):
    """Decision rule on arrays; ``u`` are uniforms used only for full ties."""
    choice = np.where(u < 0.5, ACCEPT, REJECT)
    hed = np.abs(h_a - h_r) >= params.hedonic_threshold
    choice = np.where(hed, np.where(h_a > h_r, ACCEPT, REJECT), choice)
    dis = np.abs(d_a - d_r) > params.dissonance_threshold
    choice = np.where(dis, np.where(d_a < d_r, ACCEPT, REJECT), choice)
    ovr = np.abs(o_a - o_r) >= params.overall_threshold
    choice = np.where(ovr, np.where(o_a > o_r, ACCEPT, REJECT), choice)
    return choice.astype(np.int8)


# --- scalar API -------------------------------------------------------------

def _profile_arrays(profile: NeedProfile):
    imp = np.array([n.importance for n in profile.needs])
    sat = np.array([[n.satisfaction_accept for n in profile.needs],
                    [n.satisfaction_reject for n in profile.needs]])
    return imp, sat


def _evaluation(e: np.ndarray) -> AlternativeEvaluation:
    return AlternativeEvaluation(tuple(float(x) for x in e), float(e.sum() / len(e)),
                                 float(e[e > 0].sum()), float(e[e < 0].sum()))


def evaluate_alternatives(profile: NeedProfile) -> tuple[AlternativeEvaluation, AlternativeEvaluation]:
    """Per-need evaluations S*I and their mean, for accept and for reject."""
    imp, sat = _profile_arrays(profile)
    e = sat * imp
    return _evaluation(e[ACCEPT]), _evaluation(e[REJECT])


def dissonance_and_dilemmas(ev: AlternativeEvaluation, profile: NeedProfile,
                            tolerance: float = 0.5) -> tuple[DissonanceTerms, list[Dilemma]]:
    a, b = abs(ev.positive_sum), abs(ev.negative_sum)
    d, c = min(a, b), max(a, b)
    terms = DissonanceTerms(d, c, float(dissonance_level(ev.positive_sum, ev.negative_sum)))
    if terms.D <= tolerance:
        return terms, []
    mask = dilemma_mask(np.array(ev.evaluations))
    out = []
    for need, flag in zip(profile.needs, mask):
        if flag:
            kind = (DilemmaKind.BELONGINGNESS if need.need_id == profile.belonging_need_id
                    else DilemmaKind.NON_BELONGINGNESS)
            out.append(Dilemma(need.need_id, kind))
    return terms, out


def choose_alternative(accept: AlternativeEvaluation, reject: AlternativeEvaluation, hedonic_index: int,
                       params: HumatParams, rng: np.random.Generator) -> Alternative:
    """Pick by overall satisfaction, then lower dissonance, then hedonic need, then at random."""
    d_a = dissonance_level(accept.positive_sum, accept.negative_sum)
    d_r = dissonance_level(reject.positive_sum, reject.negative_sum)
    c = _decide(np.float64(accept.overall), np.float64(reject.overall), d_a, d_r,
                np.float64(accept.evaluations[hedonic_index]), np.float64(reject.evaluations[hedonic_index]),
                rng.random(), params)
    return Alternative(int(c))


def apply_communication(influenced: NeedProfile, influencer: NeedProfile, trust: float,
                        alpha: float = 0.4) -> NeedProfile:
    """Updated needs of ``influenced`` after hearing ``influencer`` (both alternatives, every need)."""
    imp_e, sat_e = _profile_arrays(influenced)
    imp_o, sat_o = _profile_arrays(influencer)
    p = persuasion(alpha, trust, similarity(imp_e, imp_o, sat_e * imp_e, sat_o * imp_o))
    new = new_satisfaction(sat_e, sat_o, p)
    needs = tuple(Need(n.need_id, n.importance, float(new[ACCEPT, k]), float(new[REJECT, k]))
                  for k, n in enumerate(influenced.needs))
    return NeedProfile(needs, influenced.hedonic_need_id, influenced.belonging_need_id)


# --- population state -------------------------------------------------------

class HumatState:
    """Needs, evaluations and current choice of every agent."""

    def __init__(self, profiles: list[NeedProfile], params: HumatParams):
        first = profiles[0]
        self.need_ids = first.need_ids
        for p in profiles:
            if p.need_ids != self.need_ids:
                raise ValueError("all agents must share the same needs")
        self.params = params
        self.n = len(profiles)
        self.k = len(self.need_ids)
        self.hedonic = first.index(first.hedonic_need_id)
        self.belonging = first.index(first.belonging_need_id)
        self.importance = np.array([[nd.importance for nd in p.needs] for p in profiles], dtype=float)
        self.sat = np.array([[[nd.satisfaction_accept for nd in p.needs],
                              [nd.satisfaction_reject for nd in p.needs]] for p in profiles], dtype=float)
        self.choice = np.zeros(self.n, dtype=np.int8)
        self.overall = np.zeros((self.n, 2))
        self.dissonance = np.zeros((self.n, 2))
        self.belong_dilemma = np.zeros(self.n, dtype=bool)
        self.other_dilemma = np.zeros(self.n, dtype=bool)

    def profile(self, i: int) -> NeedProfile:
        needs = tuple(Need(nid, float(self.importance[i, k]), float(self.sat[i, ACCEPT, k]),
                           float(self.sat[i, REJECT, k])) for k, nid in enumerate(self.need_ids))
        return NeedProfile(needs, self.need_ids[self.hedonic], self.need_ids[self.belonging])

    @property
    def accepting(self) -> np.ndarray:
        return self.choice == ACCEPT

    def evaluate(self, rng: np.random.Generator, ids=None) -> None:
        """Re-evaluate both alternatives, choose, and flag dilemmas of the chosen one."""
        ids = np.arange(self.n) if ids is None else np.atleast_1d(ids)
        e = self.sat[ids] * self.importance[ids][:, None, :]
        o = e.mean(-1)
        pos = np.where(e > 0, e, 0).sum(-1)
        neg = np.where(e < 0, e, 0).sum(-1)
        dis = dissonance_level(pos, neg)
        u = rng.random(len(ids))
        ch = _decide(o[:, 0], o[:, 1], dis[:, 0], dis[:, 1], e[:, 0, self.hedonic], e[:, 1, self.hedonic],
                     u, self.params)
        rows = np.arange(len(ids))
        chosen = e[rows, ch]
        dil = dilemma_mask(chosen) & (dis[rows, ch] > self.params.dissonance_tolerance)[:, None]
        self.overall[ids] = o
        self.dissonance[ids] = dis
        self.choice[ids] = ch
        self.belong_dilemma[ids] = dil[:, self.belonging]
        dil[:, self.belonging] = False
        self.other_dilemma[ids] = dil.any(-1)

    def evaluate_one(self, i: int, rng: np.random.Generator) -> None:
        """Same as ``evaluate(rng, [i])`` with plain floats; much faster for a single agent."""
        prm = self.params
        imp = self.importance[i].tolist()
        sat_a, sat_r = self.sat[i].tolist()
        e = ([s * w for s, w in zip(sat_a, imp)], [s * w for s, w in zip(sat_r, imp)])
        k = self.k
        o = [sum(x) / k for x in e]
        dis = []
        for x in e:
            pos = sum(v for v in x if v > 0)
            neg = sum(v for v in x if v < 0)
            a, b = abs(pos), abs(neg)
            tot = a + b
            dis.append(2.0 * min(a, b) / tot if tot > 0 else 0.0)
        u = rng.random()
        h_a, h_r = e[0][self.hedonic], e[1][self.hedonic]
        if abs(o[0] - o[1]) >= prm.overall_threshold:
            ch = ACCEPT if o[0] > o[1] else REJECT
        elif abs(dis[0] - dis[1]) > prm.dissonance_threshold:
            ch = ACCEPT if dis[0] < dis[1] else REJECT
        elif abs(h_a - h_r) >= prm.hedonic_threshold:
            ch = ACCEPT if h_a > h_r else REJECT
        else:
            ch = ACCEPT if u < 0.5 else REJECT
        chosen = e[ch]
        belong = other = False
        if dis[ch] > prm.dissonance_tolerance:
            n_pos = sum(1 for v in chosen if v > 0)
            n_neg = sum(1 for v in chosen if v < 0)
            for j, v in enumerate(chosen):
                if (v > 0 and n_neg == k - 1) or (v < 0 and n_pos == k - 1):
                    if j == self.belonging:
                        belong = True
                    else:
                        other = True
        self.overall[i] = o
        self.dissonance[i] = dis
        self.choice[i] = ch
        self.belong_dilemma[i] = belong
        self.other_dilemma[i] = other

    def update_belonging(self, src: np.ndarray, dst: np.ndarray, alive: np.ndarray) -> None:
        """Belonging satisfaction from the share of living contacts that accept.

        accept: 2f - 1, reject: 1 - 2f. Agents without living contacts keep
        their previous values.
        """
        live = alive[dst]
        s, d = src[live], dst[live]
        total = np.bincount(s, minlength=self.n)
        acc = np.bincount(s, weights=(self.choice[d] == ACCEPT).astype(float), minlength=self.n)
        has = (total > 0) & alive
        f = acc[has] / total[has]
        self.sat[has, ACCEPT, self.belonging] = 2 * f - 1
        self.sat[has, REJECT, self.belonging] = 1 - 2 * f

    def communicate(self, influenced: int, influencer: int, trust: float) -> None:
        imp_e, imp_o = self.importance[influenced], self.importance[influencer]
        sat_e, sat_o = self.sat[influenced], self.sat[influencer]
        p = persuasion(self.params.alpha, trust, similarity(imp_e, imp_o, sat_e * imp_e, sat_o * imp_o))
        self.sat[influenced] = new_satisfaction(sat_e, sat_o, p)

    def push(self, ids: np.ndarray, p: np.ndarray, target: np.ndarray) -> None:
        """Convex update of every need of ``ids`` toward ``target`` (shape (2,)) with weights ``p``."""
        p = p[:, None, None]
        self.sat[ids] = new_satisfaction(self.sat[ids], target[None, :, None], p)


def select_interlocutor(state: HumatState, graph: SocialGraph, agent: int, action: Action,
                        alive: np.ndarray, rng: np.random.Generator):
    """Choose whom to talk to; returns the index of the link agent -> interlocutor, or None.

    Inquiring prefers contacts with the same behaviour, signaling those with
    the opposite one; when nobody qualifies every living contact is eligible.
    Weights are the influenced side's trust times its past persuasion rate
    (1 + successes) / (1 + attempts).
    """
    sl = graph.links(agent)
    if sl.start == sl.stop:
        return None
    idx = np.arange(sl.start, sl.stop)
    idx = idx[alive[graph.dst[idx]]]
    if len(idx) == 0:
        return None
    mine = state.choice[agent]
    theirs = state.choice[graph.dst[idx]]
    want = theirs == mine if action is Action.INQUIRING else theirs != mine
    if want.any():
        idx = idx[want]
    scored = idx if action is Action.INQUIRING else graph.reverse[idx]
    w = graph.trust[scored] * (1.0 + graph.successes[scored]) / (1.0 + graph.attempts[scored])
    total = w.sum()
    if total <= 0:
        return int(idx[int(rng.integers(len(idx)))])
    cum = np.cumsum(w)
    j = int(np.searchsorted(cum, rng.random() * total, side="right"))
    return int(idx[min(j, len(idx) - 1)])


def communicate(state: HumatState, graph: SocialGraph, agent: int, link: int, action: Action,
                rng: np.random.Generator) -> bool:
    """Run one exchange over ``link`` (agent -> other); returns True if the influenced agent changed its mind."""
    other = int(graph.dst[link])
    if action is Action.INQUIRING:
        influenced, influencer, used = agent, other, link
    else:
        influenced, influencer, used = other, agent, int(graph.reverse[link])
    before = state.choice[influenced]
    state.communicate(influenced, influencer, graph.trust[used])
    state.evaluate_one(influenced, rng)
    graph.attempts[used] += 1
    flipped = state.choice[influenced] != before
    if flipped:
        graph.successes[used] += 1
    return bool(flipped)


def humat_daily_cycle(state: HumatState, graph: SocialGraph, agent: int, alive: np.ndarray,
                      rng: np.random.Generator) -> int:
    """Act on the agent's current dilemmas (plus an occasional chat); returns communications made.

    The agent's evaluation and choice must be current (see :meth:`HumatState.evaluate`).
    """
    actions = []
    if state.belong_dilemma[agent]:
        actions.append(Action.SIGNALING)
    if state.other_dilemma[agent]:
        actions.append(Action.INQUIRING)
    if rng.random() < state.params.random_chat_probability:
        actions.append(Action.SIGNALING)
    done = 0
    for action in actions:
        link = select_interlocutor(state, graph, agent, action, alive, rng)
        if link is None:
            continue
        communicate(state, graph, agent, link, action, rng)
        done += 1
    return done


# --- critical nodes ---------------------------------------------------------

def broadcast_size(reach: float, network_size: int) -> int:
    return int(math.ceil(round(reach * network_size, 9)))


def critical_broadcast(plan: CriticalNodePlan, day: int, state: HumatState, networks: dict,
                       node_trust: dict, alive: np.ndarray, rng: np.random.Generator,
                       factor: float = 0.2) -> np.ndarray:
    """Deliver a plan's message if one is due today; returns the ids that received it.

    The message travels through the secondary node's network when one is
    set. Persuasion is the receiver's trust in the originating node times
    ``factor``; the promoted alternative is pulled toward +1, the other
    toward -1.
    """
    if not plan.broadcasts_on(day):
        return np.zeros(0, dtype=np.int64)
    network = networks[plan.secondary_node_id or plan.node_id]
    k = min(broadcast_size(plan.reach, len(network)), len(network))
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    picked = np.sort(rng.choice(network, size=k, replace=False))
    picked = picked[alive[picked]]
    p = critical_persuasion(node_trust[plan.node_id][picked], factor)
    target = np.array([1.0, -1.0]) if plan.orientation == "ProMeasures" else np.array([-1.0, 1.0])
    state.push(picked, p, target)
    return picked
