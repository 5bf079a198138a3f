# -*- coding: utf-8 -*-

"""
clicksim Policy Module
The generator click policy: query/document/vertical/interaction embeddings feed a GRU state
tracker whose hidden state drives a 2-way softmax head over {skip, click}.

Step layout for a SERP of T ranks (GRU steps s = 0..T):
    s = 0      x_0 = v_q + 0_d + 0_v + 0_c                 (initial state from the query)
    s = 1      x_1 = v_q + v_d1 + v_v1 + 0_c               (no previous interaction)
    s = t >= 2 x_t = v_q + v_dt + v_vt + v_c(a_{t-1})      (previous action)
where + is concatenation and row 0 of every embedding table is the pinned zero vector.
"""

import logging
logging.basicConfig(level=logging.INFO)

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from clicksim.data_processor import SerpRecord, SerpSplit, Vocab
from clicksim.numkernel import (DTYPE, GRU_FIELDS, GruCellParams, ParamStore, ShapeError, affine, dropout_mask,
                                gru_backward, gru_forward, softmax)

__all__ = ["RecurrentClickNet", "ClickPolicy", "PolicyState", "Trajectory", "TrajectoryBatch", "CLICK_OFFSET"]

# interaction id of action a is CLICK_OFFSET + a (0 = padding, 1 = out-of-vocabulary)
CLICK_OFFSET = 2
EMBEDDINGS = ("emb_q", "emb_d", "emb_v", "emb_c")


@dataclass
class _ForwardCache:
    ids: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    gru_caches: list
    hidden: np.ndarray
    head_inputs: np.ndarray
    masks: Optional[np.ndarray]


class RecurrentClickNet:
    """
    Embeddings + GRU + linear head over a SERP, shared by the generator and the discriminator.

    Subclasses choose the head width and which interaction id enters each step.
    """
    head_size = 2

    def __init__(self, store: ParamStore, vocab_sizes: Tuple[int, int, int, int], embedding_size: int,
                 hidden_size: int, serp_length: int) -> None:
        self.store = store
        self.vocab_sizes = tuple(int(n) for n in vocab_sizes)
        self.embedding_size = embedding_size
        self.hidden_size = hidden_size
        self.serp_length = serp_length
        for name, (shape, _) in self.param_shapes(self.vocab_sizes, embedding_size, hidden_size).items():
            if store.value(name).shape != shape:
                raise ShapeError(f"{name}: expected {shape}, store holds {store.value(name).shape}")

    @classmethod
    def param_shapes(cls, vocab_sizes, embedding_size: int, hidden_size: int) -> Dict[str, Tuple[tuple, tuple]]:
        """name -> (shape, pinned rows)"""
        shapes = {name: ((n, embedding_size), (0,)) for name, n in zip(EMBEDDINGS, vocab_sizes)}
        input_size = 4 * embedding_size
        for name, shape in GruCellParams.shapes(input_size, hidden_size).items():
            shapes[f"gru.{name}"] = (shape, ())
        shapes["head.W"] = ((cls.head_size, hidden_size), ())
        shapes["head.b"] = ((cls.head_size,), ())
        return shapes

    @property
    def gru(self) -> GruCellParams:
        return GruCellParams.from_store(self.store, "gru")

    def check_ids(self, queries: np.ndarray, docs: np.ndarray, verticals: np.ndarray) -> None:
        for name, ids, size in (("query", queries, self.vocab_sizes[0]), ("doc", docs, self.vocab_sizes[1]),
                                ("vertical", verticals, self.vocab_sizes[2])):
            ids = np.asarray(ids)
            if ids.size and (ids.min() < 0 or ids.max() >= size):
                raise ValueError(f"{name} id out of range [0, {size})")

    def embed(self, q: np.ndarray, d: np.ndarray, v: np.ndarray, c: np.ndarray) -> np.ndarray:
        return np.concatenate([self.store.value("emb_q")[q], self.store.value("emb_d")[d],
                               self.store.value("emb_v")[v], self.store.value("emb_c")[c]], axis=-1)

    def _embed_backward(self, q, d, v, c, dx: np.ndarray) -> None:
        l_e = self.embedding_size
        for k, (name, ids) in enumerate(zip(EMBEDDINGS, (q, d, v, c))):
            self.store.accumulate_rows(name, ids, dx[:, k * l_e:(k + 1) * l_e])

    def step_inputs(self, queries: np.ndarray, docs: np.ndarray, verticals: np.ndarray,
                    interactions: np.ndarray) -> Tuple[np.ndarray, ...]:
        """Prefix the padded step 0 to (B, T) id arrays, giving (B, T + 1) arrays."""
        b = queries.shape[0]
        pad = np.zeros((b, 1), dtype=np.int64)
        q = np.repeat(queries[:, None], docs.shape[1] + 1, axis=1)
        return (q, np.concatenate([pad, docs], axis=1), np.concatenate([pad, verticals], axis=1),
                np.concatenate([pad, interactions], axis=1))

    def forward(self, queries, docs, verticals, interactions, dropout: float = 0.0,
                rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, _ForwardCache]:
        """
        Run the GRU over T + 1 steps and apply the head to steps 1..T.

        Parameters:
        queries (np.ndarray): (B,) query ids.
        docs, verticals (np.ndarray): (B, T) ids.
        interactions (np.ndarray): (B, T) interaction ids entering each rank.
        dropout (float): Inverted-dropout rate on the head input; needs `rng` when > 0.

        Returns:
        tuple: logits (B, T, head_size) and the cache for `backward`.
        """
        queries = np.asarray(queries, dtype=np.int64)
        docs = np.asarray(docs, dtype=np.int64)
        verticals = np.asarray(verticals, dtype=np.int64)
        interactions = np.asarray(interactions, dtype=np.int64)
        self.check_ids(queries, docs, verticals)
        ids = self.step_inputs(queries, docs, verticals, interactions)
        b, steps = ids[0].shape
        gru = self.gru
        h = np.zeros((b, self.hidden_size), dtype=DTYPE)
        hidden = np.empty((b, steps, self.hidden_size), dtype=DTYPE)
        caches = []
        for s in range(steps):
            x = self.embed(ids[0][:, s], ids[1][:, s], ids[2][:, s], ids[3][:, s])
            h, cache = gru_forward(gru, x, h)
            hidden[:, s] = h
            caches.append(cache)

        head_inputs = hidden[:, 1:]
        masks = None
        if dropout > 0.0:
            if rng is None:
                raise ValueError("dropout needs an rng")
            masks = dropout_mask(head_inputs.shape, dropout, rng)
            head_inputs = head_inputs * masks
        logits = affine(self.store.value("head.W"), head_inputs.reshape(-1, self.hidden_size),
                        self.store.value("head.b")).reshape(b, steps - 1, self.head_size)
        return logits, _ForwardCache(ids, caches, hidden, head_inputs, masks)

    def backward(self, cache: _ForwardCache, dlogits: np.ndarray) -> None:
        """Accumulate parameter gradients of a loss whose gradient w.r.t. the logits is `dlogits`."""
        b, t, _ = dlogits.shape
        flat = dlogits.reshape(-1, self.head_size)
        self.store.accumulate("head.W", flat.T @ cache.head_inputs.reshape(-1, self.hidden_size))
        self.store.accumulate("head.b", flat.sum(axis=0))
        dh_head = (flat @ self.store.value("head.W")).reshape(b, t, self.hidden_size)
        if cache.masks is not None:
            dh_head = dh_head * cache.masks

        dh_next = np.zeros((b, self.hidden_size), dtype=DTYPE)
        for s in range(len(cache.gru_caches) - 1, -1, -1):
            dh = dh_next + (dh_head[:, s - 1] if s >= 1 else 0.0)
            dx, dh_next, dparams = gru_backward(cache.gru_caches[s], dh)
            for name in GRU_FIELDS:
                self.store.accumulate(f"gru.{name}", dparams[name])
            self._embed_backward(*(ids[:, s] for ids in cache.ids), dx)

    def hidden_states(self, split: SerpSplit, batch_size: int = 512) -> np.ndarray:
        """(N, T, l_h) hidden states h_1..h_T under the net's own interaction convention."""
        out = np.empty((len(split), split.serp_length, self.hidden_size), dtype=DTYPE)
        for index in split.minibatches(batch_size):
            _, cache = self.forward(split.queries[index], split.docs[index], split.verticals[index],
                                    self.interactions(split.clicks[index]))
            out[index] = cache.hidden[:, 1:]
        return out

    def interactions(self, clicks: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass
class PolicyState:
    """Hidden vector after the last step, the interaction id for the next step and the current rank."""
    hidden: np.ndarray
    query: int
    prev_interaction: int = Vocab.PAD_ID
    rank: int = 0

    def commit(self, action: int) -> "PolicyState":
        """Record the chosen action as the next step's previous interaction."""
        return PolicyState(self.hidden, self.query, CLICK_OFFSET + int(action), self.rank)


@dataclass
class Trajectory:
    """One sampled click sequence with per-rank log-probabilities, rewards and returns."""
    record: SerpRecord
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray = None
    returns: np.ndarray = None

    def __post_init__(self) -> None:
        t = self.actions.shape[0]
        if self.rewards is None:
            self.rewards = np.full(t, np.nan)
        if self.returns is None:
            self.returns = np.full(t, np.nan)


@dataclass
class TrajectoryBatch:
    """
    A batch of trajectories stored column-wise. `split` carries the SERPs with the sampled actions as
    clicks, so it can be scored by the discriminator directly.
    """
    split: SerpSplit
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.actions.shape[0]

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(self.split.record(i), self.actions[i].copy(), self.log_probs[i].copy(),
                          None if self.rewards is None else self.rewards[i].copy(),
                          None if self.returns is None else self.returns[i].copy())

    @classmethod
    def from_trajectories(cls, trajectories: List[Trajectory]) -> "TrajectoryBatch":
        if not trajectories:
            raise ValueError("empty trajectory batch")
        records = [tr.record.with_clicks(tr.actions) for tr in trajectories]
        rewards = np.stack([tr.rewards for tr in trajectories])
        returns = np.stack([tr.returns for tr in trajectories])
        return cls(SerpSplit.from_records(records), np.stack([tr.actions for tr in trajectories]),
                   np.stack([tr.log_probs for tr in trajectories]),
                   None if np.isnan(rewards).all() else rewards, None if np.isnan(returns).all() else returns)


class ClickPolicy(RecurrentClickNet):
    """
    The generator pi_theta(a | s) over actions {0: skip, 1: click}.
    """
    head_size = 2

    def interactions(self, clicks: np.ndarray) -> np.ndarray:
        """Previous-action ids per rank: padding at rank 1, CLICK_OFFSET + c_{t-1} afterwards."""
        clicks = np.asarray(clicks, dtype=np.int64)
        out = np.zeros_like(clicks)
        out[:, 1:] = CLICK_OFFSET + clicks[:, :-1]
        return out

    # ------------------------------------------------------------ step API
    def init_state(self, query: int) -> PolicyState:
        """h_0 = GRU(0, v_q + 0 + 0 + 0)."""
        if not 0 <= query < self.vocab_sizes[0]:
            raise ValueError(f"query id {query} out of range [0, {self.vocab_sizes[0]})")
        x0 = self.embed(np.array([query]), np.array([0]), np.array([0]), np.array([0]))[0]
        h0, _ = gru_forward(self.gru, x0, np.zeros(self.hidden_size))
        return PolicyState(hidden=h0, query=query)

    def step(self, s: PolicyState, doc: int, vertical: int) -> Tuple[np.ndarray, PolicyState]:
        """
        Advance one rank.

        Returns:
        tuple: probs [p_skip, p_click] and the next state (rank + 1, hidden h_t); the caller commits
        the chosen action into the returned state.
        """
        if s.rank >= self.serp_length:
            raise ValueError(f"cannot step past rank {self.serp_length}")
        self.check_ids(np.array([s.query]), np.array([doc]), np.array([vertical]))
        x = self.embed(np.array([s.query]), np.array([doc]), np.array([vertical]), np.array([s.prev_interaction]))[0]
        h, _ = gru_forward(self.gru, x, s.hidden)
        probs = softmax(affine(self.store.value("head.W"), h, self.store.value("head.b")))
        return probs, PolicyState(hidden=h, query=s.query, prev_interaction=s.prev_interaction, rank=s.rank + 1)

    def sample_sequence(self, r: SerpRecord, rng: np.random.Generator) -> Trajectory:
        """Sample actions rank by rank; each drawn action (not the logged click) feeds the next state."""
        state = self.init_state(r.query)
        actions = np.zeros(r.length, dtype=np.int64)
        log_probs = np.zeros(r.length)
        for t in range(r.length):
            probs, state = self.step(state, int(r.docs[t]), int(r.verticals[t]))
            action = int(rng.random() < probs[1])
            actions[t] = action
            log_probs[t] = np.log(probs[action])
            state = state.commit(action)
        return Trajectory(record=r, actions=actions, log_probs=log_probs)

    def teacher_forced_probs(self, r: SerpRecord) -> np.ndarray:
        """P(click) at each rank with the record's true clicks feeding the state."""
        state = self.init_state(r.query)
        out = np.zeros(r.length)
        for t in range(r.length):
            probs, state = self.step(state, int(r.docs[t]), int(r.verticals[t]))
            out[t] = probs[1]
            state = state.commit(int(r.clicks[t]))
        return out

    def relevance_score(self, query: int, doc: int, vertical: int) -> float:
        """p_click of the document shown at rank 1 with an empty history."""
        probs, _ = self.step(self.init_state(query), doc, vertical)
        return float(probs[1])

    def score_list(self, query: int, docs: np.ndarray, verticals: np.ndarray) -> np.ndarray:
        """Relevance scores for one result list; out-of-vocabulary documents get the mean of the others."""
        scores = np.array([self.relevance_score(query, int(d), int(v)) for d, v in zip(docs, verticals)])
        oov = np.asarray(docs) == Vocab.OOV_ID
        if oov.any():
            scores[oov] = scores[~oov].mean() if (~oov).any() else 0.5
        return scores

    # ----------------------------------------------------------- batch API
    def probs(self, queries, docs, verticals, clicks) -> np.ndarray:
        """(B, T, 2) action distributions with `clicks` as the history."""
        logits, _ = self.forward(queries, docs, verticals, self.interactions(clicks))
        return softmax(logits)

    def predict_split(self, split: SerpSplit, batch_size: int = 512) -> np.ndarray:
        """Teacher-forced (N, T) click probabilities, batched."""
        out = np.empty((len(split), split.serp_length))
        for index in split.minibatches(batch_size):
            out[index] = self.probs(split.queries[index], split.docs[index], split.verticals[index],
                                    split.clicks[index])[..., 1]
        return out

    def sample_batch(self, split: SerpSplit, rng: np.random.Generator) -> TrajectoryBatch:
        """Vectorized `sample_sequence` over every record of `split`."""
        b, serp_length = split.docs.shape
        gru = self.gru
        zeros = np.zeros(b, dtype=np.int64)
        h, _ = gru_forward(gru, self.embed(split.queries, zeros, zeros, zeros), np.zeros((b, self.hidden_size)))
        prev = zeros.copy()
        actions = np.zeros((b, serp_length), dtype=np.int64)
        log_probs = np.zeros((b, serp_length))
        for t in range(serp_length):
            x = self.embed(split.queries, split.docs[:, t], split.verticals[:, t], prev)
            h, _ = gru_forward(gru, x, h)
            probs = softmax(affine(self.store.value("head.W"), h, self.store.value("head.b")))
            a = (rng.random(b) < probs[:, 1]).astype(np.int64)
            actions[:, t] = a
            log_probs[:, t] = np.log(probs[np.arange(b), a])
            prev = CLICK_OFFSET + a
        return TrajectoryBatch(split.with_clicks(actions), actions, log_probs)

    # -------------------------------------------------------------- losses
    def nll_loss(self, split: SerpSplit, index: Optional[np.ndarray] = None, dropout: float = 0.0,
                 rng: Optional[np.random.Generator] = None, accumulate: bool = True) -> float:
        """
        Teacher-forced negative log-likelihood averaged over positions; gradients are accumulated into
        the store when `accumulate` is set.
        """
        index = np.arange(len(split)) if index is None else index
        if len(index) == 0:
            raise ValueError("empty batch")
        clicks = split.clicks[index]
        logits, cache = self.forward(split.queries[index], split.docs[index], split.verticals[index],
                                     self.interactions(clicks), dropout=dropout, rng=rng)
        p = softmax(logits)
        onehot = np.stack([1 - clicks, clicks], axis=-1).astype(DTYPE)
        n = clicks.size
        loss = -float(np.sum(onehot * np.log(np.clip(p, 1e-300, None)))) / n
        if accumulate:
            self.backward(cache, (p - onehot) / n)
        return loss

    def ppo_loss(self, batch: TrajectoryBatch, advantages: np.ndarray, clip: float, lambda_entropy: float,
                 accumulate: bool = True) -> Dict[str, float]:
        """
        Negated clipped surrogate plus entropy bonus, averaged over positions:
            loss = -mean(min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)) - lambda * mean(H)
        A position whose clipped branch is active (A > 0 and rho > 1 + eps, or A < 0 and rho < 1 - eps)
        contributes no surrogate gradient.
        """
        if len(batch) == 0:
            raise ValueError("empty batch")
        s = batch.split
        logits, cache = self.forward(s.queries, s.docs, s.verticals, self.interactions(batch.actions))
        p = softmax(logits)
        a = batch.actions
        onehot = np.stack([1 - a, a], axis=-1).astype(DTYPE)
        log_p = np.log(np.clip(p, 1e-300, None))
        new_log_probs = np.sum(onehot * log_p, axis=-1)
        ratio = np.exp(new_log_probs - batch.log_probs)
        surrogate = np.minimum(ratio * advantages, np.clip(ratio, 1 - clip, 1 + clip) * advantages)
        entropy = -np.sum(p * log_p, axis=-1)
        n = a.size
        loss = -float(surrogate.sum()) / n - lambda_entropy * float(entropy.sum()) / n

        if accumulate:
            clipped = ((advantages > 0) & (ratio > 1 + clip)) | ((advantages < 0) & (ratio < 1 - clip))
            weight = np.where(clipped, 0.0, ratio * advantages)
            dlogits = -weight[..., None] * (onehot - p) / n
            dlogits += lambda_entropy * p * (log_p + entropy[..., None]) / n
            self.backward(cache, dlogits)
        return {"loss": loss, "surrogate": float(surrogate.mean()), "entropy": float(entropy.mean()),
                "clip_fraction": float(np.mean(np.abs(ratio - 1) > clip))}
