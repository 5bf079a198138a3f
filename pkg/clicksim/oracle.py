# -*- coding: utf-8 -*-

"""
oracle.py: Synthetic Ground-Truth Users and the Tiny-MDP Audit Harness

This module provides
  * `OracleSpec` / `Oracle.synth_generate`: click logs drawn from a known PBM or SDBN user, with the
    oracle's own perplexity as the achievable floor;
  * `TinyMdp`, `TabularPolicy` and `Oracle`: exact occupancy measures, KL / JS divergences and
    utility gaps on enumerable search sessions;
  * `TheoryAudit`: randomized checks of the behaviour-cloning and adversarial imitation bounds and the
    compounding-error scaling instance.
"""

import logging
logging.basicConfig(level=logging.INFO)

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import rel_entr

from clicksim.data_processor import Dataset, RelevanceAnnotation, SerpSplit, Vocab
from clicksim.metrics import Metrics
from clicksim.pgm import PbmModel, PgmModel, SdbnModel
from clicksim.utils import Utils

__all__ = ["OracleSpec", "TinyMdp", "TabularPolicy", "OccupancyMeasure", "BoundCheck", "Oracle", "TheoryAudit"]

FAMILIES = ("pbm", "sdbn")
MAX_STATES = 10 ** 6
BOUND_SLACK = 1e-12

# (query, documents shown up to and including the current rank, clicks before the current rank)
State = Tuple[int, Tuple[int, ...], Tuple[int, ...]]


# ---------------------------------------------------------------- click oracles
@dataclass
class OracleSpec:
    """
    A ground-truth user. `attractiveness` (and `satisfaction` for SDBN) are indexed by
    (query index, doc index); the generated vocabularies are `q<i>`, `d<j>` and `v<k>`.
    """
    family: str
    serp_length: int
    attractiveness: np.ndarray
    exam: Optional[np.ndarray] = None
    satisfaction: Optional[np.ndarray] = None
    n_verticals: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        self.family = self.family.lower()
        if self.family not in FAMILIES:
            raise ValueError(f"unknown oracle family {self.family!r}; choose from {', '.join(FAMILIES)}")
        self.attractiveness = np.atleast_2d(np.asarray(self.attractiveness, dtype=np.float64))
        tables = {"attractiveness": self.attractiveness}
        if self.family == "pbm":
            if self.exam is None:
                raise ValueError("a PBM oracle needs an examination table")
            self.exam = np.asarray(self.exam, dtype=np.float64)
            if self.exam.shape != (self.serp_length,):
                raise ValueError(f"exam must have {self.serp_length} entries, got {self.exam.shape}")
            tables["exam"] = self.exam
        else:
            if self.satisfaction is None:
                raise ValueError("an SDBN oracle needs a satisfaction table")
            self.satisfaction = np.asarray(self.satisfaction, dtype=np.float64)
            if self.satisfaction.shape != self.attractiveness.shape:
                raise ValueError("satisfaction and attractiveness tables must have the same shape")
            tables["satisfaction"] = self.satisfaction
        for name, table in tables.items():
            if np.any(table < 0.0) or np.any(table > 1.0):
                raise ValueError(f"{name} values must lie in [0, 1]")
        if self.n_verticals < 1:
            raise ValueError("n_verticals must be >= 1")

    @property
    def n_queries(self) -> int:
        return self.attractiveness.shape[0]

    @property
    def n_docs(self) -> int:
        return self.attractiveness.shape[1]

    @classmethod
    def random(cls, family: str, serp_length: int, n_queries: int, n_docs: int, seed: int = 0,
               exam: Optional[Sequence[float]] = None, n_verticals: int = 1) -> "OracleSpec":
        """Tables drawn uniformly from [0, 1]; PBM examination defaults to a linear decay from 1."""
        rng = np.random.default_rng(seed)
        attractiveness = rng.random((n_queries, n_docs))
        if family.lower() == "pbm":
            if exam is None:
                exam = 1.0 - np.arange(serp_length) / serp_length
            return cls("pbm", serp_length, attractiveness, exam=np.asarray(exam, dtype=np.float64),
                       n_verticals=n_verticals, seed=seed)
        return cls(family, serp_length, attractiveness, satisfaction=rng.random((n_queries, n_docs)),
                   n_verticals=n_verticals, seed=seed)

    def vocabs(self) -> Tuple[Vocab, Vocab, Vocab]:
        return (Vocab("query", [f"q{i}" for i in range(self.n_queries)]).freeze(),
                Vocab("doc", [f"d{j}" for j in range(self.n_docs)]).freeze(),
                Vocab("vertical", [f"v{k}" for k in range(self.n_verticals)]).freeze())

    def _keys(self) -> np.ndarray:
        q, d = np.meshgrid(np.arange(self.n_queries), np.arange(self.n_docs), indexing="ij")
        return ((q + 2).astype(np.int64) << 32) + (d + 2).astype(np.int64)

    def to_model(self) -> PgmModel:
        """The oracle as an unclamped PGM over the generated vocabulary ids."""
        keys = self._keys().ravel()
        if self.family == "pbm":
            model = PbmModel(self.serp_length)
            model.exam = self.exam.copy()
        else:
            model = SdbnModel(self.serp_length)
            model.set_satisfaction(keys, self.satisfaction.ravel())
        model.set_attractiveness(keys, self.attractiveness.ravel())
        model.clamp = False
        return model

    def annotations(self, max_grade: int = 4) -> RelevanceAnnotation:
        """Grades proportional to attractiveness, so NDCG can be read against the oracle."""
        grades = {(i + 2, j + 2): int(round(self.attractiveness[i, j] * max_grade))
                  for i in range(self.n_queries) for j in range(self.n_docs)}
        return RelevanceAnnotation(grades, max_grade)


# ------------------------------------------------------------------ tiny MDPs
@dataclass
class TinyMdp:
    """
    An enumerable search session. Each query has a fixed document schedule; the state at rank t is
    (query, docs up to rank t, clicks before rank t) and the action is skip (0) or click (1).

    Attributes:
        schedules (dict): query -> document per rank.
        query_probs (dict): query -> probability of starting with it.
        rewards (dict): (state, action) -> reward; missing pairs earn 0.
        r_max (float): Declared bound on |reward|.
        gamma (float): Discount.
    """
    schedules: Dict[int, Tuple[int, ...]]
    query_probs: Dict[int, float]
    n_docs: int
    rewards: Dict[Tuple[State, int], float] = field(default_factory=dict)
    r_max: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        self.schedules = {int(q): tuple(int(d) for d in docs) for q, docs in self.schedules.items()}
        lengths = {len(docs) for docs in self.schedules.values()}
        if len(lengths) != 1:
            raise ValueError("every schedule must have the same horizon")
        self.horizon = lengths.pop()
        if not 1 <= self.horizon <= 4:
            raise ValueError(f"horizon must be in 1..4, got {self.horizon}")
        if not 1 <= self.n_docs <= 3:
            raise ValueError(f"document vocabulary must be in 1..3, got {self.n_docs}")
        if any(not 0 <= d < self.n_docs for docs in self.schedules.values() for d in docs):
            raise ValueError("schedule uses a document outside the vocabulary")
        if set(self.query_probs) - set(self.schedules):
            raise ValueError("query without a schedule")
        if abs(sum(self.query_probs.values()) - 1.0) > 1e-9 or min(self.query_probs.values()) < 0:
            raise ValueError("query probabilities must form a distribution")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if any(abs(r) > self.r_max + 1e-12 for r in self.rewards.values()):
            raise ValueError(f"reward magnitude exceeds r_max = {self.r_max}")
        n_states = len(self.query_probs) * (2 ** self.horizon - 1)
        if n_states > MAX_STATES:
            raise ValueError(f"{n_states} states exceed the enumeration limit {MAX_STATES}")

    def initial_states(self) -> List[Tuple[State, float]]:
        return [((q, self.schedules[q][:1], ()), p) for q, p in sorted(self.query_probs.items()) if p > 0]

    def next_state(self, s: State, action: int) -> Optional[State]:
        """None once the last rank has been acted on."""
        query, docs, clicks = s
        t = len(clicks) + 1
        if t >= self.horizon:
            return None
        return query, self.schedules[query][:t + 1], clicks + (int(action),)

    def states(self) -> List[State]:
        out = []
        for (query, _, _), _ in self.initial_states():
            for t in range(self.horizon):
                for prefix in itertools.product((0, 1), repeat=t):
                    out.append((query, self.schedules[query][:t + 1], prefix))
        return out

    def reward(self, s: State, action: int) -> float:
        return self.rewards.get((s, int(action)), 0.0)

    def normalizer(self) -> float:
        """sum_{t < T} gamma^t"""
        return float(sum(self.gamma ** t for t in range(self.horizon)))

    @classmethod
    def random(cls, rng: np.random.Generator, horizon: int, n_docs: int = 3, n_queries: int = 2,
               r_max: float = 1.0, gamma: Optional[float] = None) -> "TinyMdp":
        schedules = {q: tuple(int(d) for d in rng.integers(n_docs, size=horizon)) for q in range(n_queries)}
        probs = rng.dirichlet(np.ones(n_queries))
        gamma = float(rng.uniform(0.5, 1.0)) if gamma is None else gamma
        mdp = cls(schedules, {q: float(p) for q, p in enumerate(probs)}, n_docs, r_max=r_max, gamma=gamma)
        mdp.rewards = {(s, a): float(rng.uniform(-r_max, r_max)) for s in mdp.states() for a in (0, 1)}
        return mdp


@dataclass
class TabularPolicy:
    """state -> (P(skip), P(click)); states missing from the table use `default`."""
    table: Dict[State, np.ndarray] = field(default_factory=dict)
    default: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))

    def __post_init__(self) -> None:
        self.default = np.asarray(self.default, dtype=np.float64)
        self.table = {s: np.asarray(row, dtype=np.float64) for s, row in self.table.items()}
        for row in list(self.table.values()) + [self.default]:
            if row.shape != (2,) or np.any(row < 0) or abs(row.sum() - 1.0) > 1e-9:
                raise ValueError(f"policy rows must be distributions over 2 actions, got {row}")

    def probs(self, s: State) -> np.ndarray:
        return self.table.get(s, self.default)

    @classmethod
    def from_function(cls, mdp: TinyMdp, click_prob: Callable[[State], float]) -> "TabularPolicy":
        return cls({s: np.array([1.0 - click_prob(s), click_prob(s)]) for s in mdp.states()})

    @classmethod
    def random(cls, mdp: TinyMdp, rng: np.random.Generator, concentration: float = 1.0) -> "TabularPolicy":
        return cls({s: rng.dirichlet([concentration, concentration]) for s in mdp.states()})

    def mixed(self, other: "TabularPolicy", weight: float, mdp: TinyMdp) -> "TabularPolicy":
        """(1 - weight) * self + weight * other, state by state."""
        return TabularPolicy({s: (1.0 - weight) * self.probs(s) + weight * other.probs(s) for s in mdp.states()})


@dataclass
class OccupancyMeasure:
    masses: Dict[Tuple[State, int], float]

    def total(self) -> float:
        return float(sum(self.masses.values()))

    def support(self) -> set:
        return {key for key, mass in self.masses.items() if mass > 0}

    def aligned(self, other: "OccupancyMeasure") -> Tuple[np.ndarray, np.ndarray]:
        keys = sorted(set(self.masses) | set(other.masses))
        return (np.array([self.masses.get(k, 0.0) for k in keys]),
                np.array([other.masses.get(k, 0.0) for k in keys]))


@dataclass
class BoundCheck:
    kind: str
    gap: float
    epsilon: float
    bound: float
    holds: bool
    tight_bound: float = float("nan")

    @property
    def margin(self) -> float:
        return self.bound - self.gap


class Oracle:
    """
    Exact computations on oracles and tiny MDPs.
    """

    # ------------------------------------------------------------ click data
    @staticmethod
    def synth_generate(spec: OracleSpec, n_sessions: int, rng: np.random.Generator,
                       split_ratio: Tuple[int, int, int] = (8, 1, 1)) -> Dataset:
        """
        Sample queries uniformly, documents without replacement per list and clicks from the oracle;
        records are split train/valid/test in `split_ratio` order.
        """
        if spec.n_docs < spec.serp_length:
            raise ValueError(f"document vocabulary ({spec.n_docs}) is smaller than the SERP length ({spec.serp_length})")
        if n_sessions < 0:
            raise ValueError("n_sessions must be >= 0")
        queries = rng.integers(spec.n_queries, size=n_sessions) + 2
        docs = np.argsort(rng.random((n_sessions, spec.n_docs)), axis=1)[:, :spec.serp_length] + 2
        verticals = rng.integers(spec.n_verticals, size=(n_sessions, spec.serp_length)) + 2
        split = SerpSplit([f"s{i}" for i in range(n_sessions)], queries, docs, verticals,
                          np.zeros_like(docs), spec.serp_length)
        split = split.with_clicks(spec.to_model().sample_split(split, rng))

        total = sum(split_ratio)
        n_train = n_sessions * split_ratio[0] // total
        n_valid = n_sessions * split_ratio[1] // total
        index = np.arange(n_sessions)
        query_vocab, doc_vocab, vertical_vocab = spec.vocabs()
        logging.info(f" > Generated {n_sessions} sessions from the {spec.family.upper()} oracle")
        return Dataset(split.subset(index[:n_train]), split.subset(index[n_train:n_train + n_valid]),
                       split.subset(index[n_train + n_valid:]), query_vocab, doc_vocab, vertical_vocab,
                       annotations=spec.annotations(), serp_length=spec.serp_length)

    @staticmethod
    def oracle_ppl(spec: OracleSpec, data: Union[Dataset, SerpSplit], split: str = "test") -> Tuple[np.ndarray, float]:
        """(PPL@t, averaged PPL) of the oracle's true conditional probabilities on `data`."""
        records = data.split(split) if isinstance(data, Dataset) else data
        return Metrics.perplexity(spec.to_model().predict_split(records), records.clicks)

    # ---------------------------------------------------------- enumeration
    @staticmethod
    def _rollout_tree(policy: TabularPolicy, mdp: TinyMdp):
        """Yield (t, state, action, probability) over every reachable prefix, rank by rank."""
        frontier: Dict[State, float] = {}
        for s, p in mdp.initial_states():
            frontier[s] = frontier.get(s, 0.0) + p
        visited = 0
        for t in range(mdp.horizon):
            following: Dict[State, float] = {}
            for s in sorted(frontier):
                p_s = frontier[s]
                visited += 1
                if visited > MAX_STATES:
                    raise ValueError(f"more than {MAX_STATES} states enumerated")
                for a, p_a in enumerate(policy.probs(s)):
                    mass = p_s * p_a
                    if mass <= 0.0:
                        continue
                    yield t, s, a, mass
                    nxt = mdp.next_state(s, a)
                    if nxt is not None:
                        following[nxt] = following.get(nxt, 0.0) + mass
            frontier = following

    @staticmethod
    def enumerate_occupancy(policy: TabularPolicy, mdp: TinyMdp) -> OccupancyMeasure:
        """rho(s, a) = sum_t gamma^t P(s_t = s, a_t = a) / sum_t gamma^t"""
        z = mdp.normalizer()
        masses: Dict[Tuple[State, int], float] = {}
        for t, s, a, mass in Oracle._rollout_tree(policy, mdp):
            masses[(s, a)] = masses.get((s, a), 0.0) + mdp.gamma ** t * mass / z
        return OccupancyMeasure(masses)

    @staticmethod
    def state_visitation(policy: TabularPolicy, mdp: TinyMdp) -> Dict[State, float]:
        visits: Dict[State, float] = {}
        for _, s, _, mass in Oracle._rollout_tree(policy, mdp):
            visits[s] = visits.get(s, 0.0) + mass
        return visits

    @staticmethod
    def utility(policy: TabularPolicy, mdp: TinyMdp) -> float:
        """J(pi) = E[sum_t gamma^t R(s_t, a_t)] over the T ranks."""
        return float(sum(mdp.gamma ** t * mass * mdp.reward(s, a)
                         for t, s, a, mass in Oracle._rollout_tree(policy, mdp)))

    @staticmethod
    def utility_gap(pi: TabularPolicy, pi_e: TabularPolicy, mdp: TinyMdp) -> float:
        return abs(Oracle.utility(pi, mdp) - Oracle.utility(pi_e, mdp))

    @staticmethod
    def monte_carlo_utility(policy: TabularPolicy, mdp: TinyMdp, n_rollouts: int,
                            rng: np.random.Generator) -> Tuple[float, float]:
        """(mean, standard error) of sampled discounted returns."""
        starts = mdp.initial_states()
        start_probs = np.array([p for _, p in starts])
        first = rng.choice(len(starts), size=n_rollouts, p=start_probs / start_probs.sum())
        uniforms = rng.random((n_rollouts, mdp.horizon))
        returns = np.zeros(n_rollouts)
        for i in range(n_rollouts):
            s, t = starts[first[i]][0], 0
            while s is not None:
                a = int(uniforms[i, t] < policy.probs(s)[1])
                returns[i] += mdp.gamma ** t * mdp.reward(s, a)
                s, t = mdp.next_state(s, a), t + 1
        return float(returns.mean()), float(returns.std(ddof=1) / np.sqrt(n_rollouts)) if n_rollouts > 1 else 0.0

    # ---------------------------------------------------------- divergences
    @staticmethod
    def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
        """KL(p || q) in nats; infinite when q misses mass of p."""
        return float(np.sum(rel_entr(np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64))))

    @staticmethod
    def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
        """1/2 KL(p || m) + 1/2 KL(q || m) with m the midpoint; in [0, ln 2]."""
        p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
        m = 0.5 * (p + q)
        return 0.5 * Oracle.kl_divergence(p, m) + 0.5 * Oracle.kl_divergence(q, m)

    @staticmethod
    def eps_bc(pi: TabularPolicy, pi_e: TabularPolicy, mdp: TinyMdp) -> float:
        """max KL(pi_E(.|s) || pi(.|s)) over states the expert visits."""
        visits = Oracle.state_visitation(pi_e, mdp)
        return max((Oracle.kl_divergence(pi_e.probs(s), pi.probs(s)) for s, p in visits.items() if p > 0),
                   default=0.0)

    @staticmethod
    def eps_gail(pi: TabularPolicy, pi_e: TabularPolicy, mdp: TinyMdp) -> float:
        rho, rho_e = Oracle.enumerate_occupancy(pi, mdp).aligned(Oracle.enumerate_occupancy(pi_e, mdp))
        return Oracle.js_divergence(rho, rho_e)

    @staticmethod
    def check_bc_bound(pi: TabularPolicy, pi_e: TabularPolicy, mdp: TinyMdp) -> BoundCheck:
        """gap <= 2 T (T + 1) R_max sqrt(eps_bc); the sqrt(2) T (T + 1) constant is reported alongside."""
        gap = Oracle.utility_gap(pi, pi_e, mdp)
        eps = Oracle.eps_bc(pi, pi_e, mdp)
        horizon = mdp.horizon
        root = np.sqrt(eps) if np.isfinite(eps) else np.inf
        bound = 2.0 * horizon * (horizon + 1) * mdp.r_max * root
        tight = np.sqrt(2.0) * horizon * (horizon + 1) * mdp.r_max * root
        return BoundCheck("bc", gap, eps, float(bound), bool(gap <= bound + BOUND_SLACK), float(tight))

    @staticmethod
    def check_gail_bound(pi: TabularPolicy, pi_e: TabularPolicy, mdp: TinyMdp) -> BoundCheck:
        """gap <= 2 sqrt(2) R_max (T + 1) sqrt(JS(rho_pi, rho_E))"""
        gap = Oracle.utility_gap(pi, pi_e, mdp)
        eps = Oracle.eps_gail(pi, pi_e, mdp)
        bound = 2.0 * np.sqrt(2.0) * mdp.r_max * (mdp.horizon + 1) * np.sqrt(max(eps, 0.0))
        return BoundCheck("gail", gap, eps, float(bound), bool(gap <= bound + BOUND_SLACK))


class TheoryAudit:
    """
    Randomized and constructed instances for the imitation bounds.
    """
    COLUMNS = ("instance", "horizon", "gap", "eps_bc", "bc_bound", "bc_tight_bound", "bc_margin",
               "eps_gail", "gail_bound", "gail_margin", "holds")
    SCALING_COLUMNS = ("horizon", "eta", "off_path_click", "gap", "eps_bc", "gap_over_sqrt_eps", "bc_bound",
                       "eps_gail", "gail_bound", "mixture_gap", "mixture_eps_gail", "mixture_gail_bound")

    @staticmethod
    def random_instance(rng: np.random.Generator, horizon: int) -> Tuple[TabularPolicy, TabularPolicy, TinyMdp]:
        """A random MDP, a random expert and a learner mixed from the expert and a random policy."""
        mdp = TinyMdp.random(rng, horizon, n_docs=int(rng.integers(1, 4)), n_queries=int(rng.integers(1, 3)))
        expert = TabularPolicy.random(mdp, rng, concentration=float(rng.choice([0.3, 1.0, 3.0])))
        other = TabularPolicy.random(mdp, rng)
        learner = expert.mixed(other, float(rng.uniform()), mdp)
        return learner, expert, mdp

    @staticmethod
    def run(instances: int, horizon: int, seed: int = 0) -> List[List]:
        """One row per instance (see COLUMNS)."""
        rows = []
        for i, rng in enumerate(Utils.spawn_rngs(seed, instances)):
            learner, expert, mdp = TheoryAudit.random_instance(rng, horizon)
            bc = Oracle.check_bc_bound(learner, expert, mdp)
            gail = Oracle.check_gail_bound(learner, expert, mdp)
            rows.append([i, horizon, bc.gap, bc.epsilon, bc.bound, bc.tight_bound, bc.margin,
                         gail.epsilon, gail.bound, gail.margin, int(bc.holds and gail.holds)])
        held = sum(row[-1] for row in rows)
        logging.info(f" > Audit T={horizon}: {held}/{instances} instances satisfy both bounds")
        return rows

    @staticmethod
    def compounding_instance(horizon: int, eta: float, off_path_click: float = 0.0):
        """
        Every click earns 1. The expert always clicks; the learner clicks with probability 1 - eta
        while it is on the expert's path and with `off_path_click` after its first skip.
        """
        schedule = tuple(t % 3 for t in range(horizon))
        mdp = TinyMdp({0: schedule}, {0: 1.0}, n_docs=3, r_max=1.0, gamma=1.0)
        mdp.rewards = {(s, 1): 1.0 for s in mdp.states()}
        expert = TabularPolicy.from_function(mdp, lambda s: 1.0)
        learner = TabularPolicy.from_function(mdp, lambda s: 1.0 - eta if all(s[2]) else off_path_click)
        return learner, expert, mdp

    @staticmethod
    def bc_scaling_audit(horizons: Sequence[int] = (2, 3, 4), eta: float = 0.01,
                         grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0)) -> List[List]:
        """
        For each horizon, the off-path behaviour maximizing the utility gap at a fixed on-path error
        eta (grid search), with both bounds (see SCALING_COLUMNS). The mixture columns describe a
        learner that errs with the same eta at every state, on the expert's path or off it; its
        occupancy error does not compound, so its gap is T * eta.
        """
        rows = []
        for horizon in horizons:
            worst = None
            for off_path in grid:
                learner, expert, mdp = TheoryAudit.compounding_instance(horizon, eta, off_path)
                gap = Oracle.utility_gap(learner, expert, mdp)
                if worst is None or gap > worst[0]:
                    worst = (gap, off_path, learner, expert, mdp)
            gap, off_path, learner, expert, mdp = worst
            bc = Oracle.check_bc_bound(learner, expert, mdp)
            gail = Oracle.check_gail_bound(learner, expert, mdp)
            mixture = TabularPolicy.from_function(mdp, lambda s: 1.0 - eta)
            matched = Oracle.check_gail_bound(mixture, expert, mdp)
            rows.append([horizon, eta, off_path, gap, bc.epsilon, gap / np.sqrt(bc.epsilon), bc.bound,
                         gail.epsilon, gail.bound, matched.gap, matched.epsilon, matched.bound])
            logging.info(f" > T={horizon}: worst gap {gap:.8f} (off-path click {off_path}), "
                         f"BC bound {bc.bound:.6f}, GAIL bound {gail.bound:.6f}, mixture gap {matched.gap:.8f}")
        return rows

    @staticmethod
    def grows_superlinearly(values: Sequence[float]) -> bool:
        """Strictly increasing increments over consecutive horizons."""
        steps = np.diff(np.asarray(values, dtype=np.float64))
        return bool(np.all(steps > 0) and np.all(np.diff(steps) > 0))

    @staticmethod
    def grows_at_most_linearly(values: Sequence[float], tol: float = 1e-9) -> bool:
        """Increments over consecutive horizons never increase (beyond `tol`)."""
        steps = np.diff(np.asarray(values, dtype=np.float64))
        return bool(np.all(np.diff(steps) <= tol))

    @staticmethod
    def write(path: Union[str, Path], rows: List[List], columns: Sequence[str] = COLUMNS) -> None:
        Utils.write_tsv(path, columns, rows)
