# -*- coding: utf-8 -*-

"""
clicksim Critic Module
The discriminator D_w(s, a): a GRU over (query, doc, vertical, current interaction) with a sigmoid
head that scores every state-action pair of a SERP. D is trained toward 1 on generated pairs and
toward 0 on logged (expert) pairs.
"""

import logging
logging.basicConfig(level=logging.INFO)

from typing import Dict, Tuple

import numpy as np

from clicksim.data_processor import SerpRecord, SerpSplit
from clicksim.numkernel import sigmoid
from clicksim.policy import CLICK_OFFSET, RecurrentClickNet

__all__ = ["ClickDiscriminator"]


class ClickDiscriminator(RecurrentClickNet):
    """
    Separate embeddings and GRU from the generator. At rank t the step input carries the click
    c_t taken at that rank, so h'_t encodes both the state and the action.
    """
    head_size = 1

    def interactions(self, clicks: np.ndarray) -> np.ndarray:
        return CLICK_OFFSET + np.asarray(clicks, dtype=np.int64)

    def score_split(self, split: SerpSplit, clicks: np.ndarray = None, batch_size: int = 512) -> np.ndarray:
        """(N, T) scores D_t in (0, 1); `clicks` defaults to the split's own clicks."""
        clicks = split.clicks if clicks is None else np.asarray(clicks, dtype=np.int64)
        if clicks.shape != split.docs.shape:
            raise ValueError(f"clicks shape {clicks.shape} does not match the SERPs {split.docs.shape}")
        out = np.empty(clicks.shape)
        for index in split.minibatches(batch_size):
            logits, _ = self.forward(split.queries[index], split.docs[index], split.verticals[index],
                                     self.interactions(clicks[index]))
            out[index] = sigmoid(logits[..., 0])
        return out

    def score_sequence(self, r: SerpRecord, clicks) -> np.ndarray:
        """Array of T values D_w(s_t, c_t) in (0, 1)."""
        clicks = np.asarray(clicks, dtype=np.int64)
        if clicks.shape != (r.length,):
            raise ValueError(f"expected {r.length} clicks, got {clicks.shape}")
        logits, _ = self.forward(np.array([r.query]), r.docs[None, :], r.verticals[None, :],
                                 self.interactions(clicks[None, :]))
        return sigmoid(logits[0, :, 0])

    def disc_grads(self, real: Tuple[SerpSplit, np.ndarray], fake: Tuple[SerpSplit, np.ndarray],
                   accumulate: bool = True) -> Dict[str, float]:
        """
        Gradients of loss = -(mean_fake log D + mean_real log(1 - D)), each mean taken over positions.

        Parameters:
        real (tuple): (SERPs, clicks) from the log.
        fake (tuple): (SERPs, clicks) sampled from the generator.
        accumulate (bool): Add the gradients into the store.

        Returns:
        dict: loss, mean D on real pairs and mean D on fake pairs.
        """
        stats = {}
        loss = 0.0
        for label, (split, clicks) in (("fake", fake), ("real", real)):
            clicks = np.asarray(clicks, dtype=np.int64)
            if clicks.size == 0:
                raise ValueError(f"empty {label} batch")
            logits, cache = self.forward(split.queries, split.docs, split.verticals, self.interactions(clicks))
            d = np.clip(sigmoid(logits[..., 0]), 1e-12, 1 - 1e-12)
            n = clicks.size
            if label == "fake":
                loss -= float(np.sum(np.log(d))) / n
                dlogits = -(1.0 - d) / n
            else:
                loss -= float(np.sum(np.log(1.0 - d))) / n
                dlogits = d / n
            if accumulate:
                self.backward(cache, dlogits[..., None])
            stats[f"d_{label}"] = float(d.mean())
        stats["loss"] = loss
        return stats
