# -*- coding: utf-8 -*-

"""
metrics.py: Click Model Evaluation Metrics

This module provides the evaluation metrics of click models: log-likelihood, per-rank and averaged
perplexity, NDCG@k over human relevance annotations, synthetic click generation and the
Reverse/Forward PPL coverage metrics, plus a paired sign test over per-query scores.
"""

import logging
logging.basicConfig(level=logging.INFO)

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy import stats

from clicksim.data_processor import DataProcessor, Dataset, RelevanceAnnotation, SerpSplit
from clicksim.utils import Utils

__all__ = ["Metrics", "MetricReport", "NdcgResult", "PROB_CLAMP", "NDCG_CUTOFFS"]

PROB_CLAMP = 1e-6
NDCG_CUTOFFS = (1, 3, 5, 10)


@dataclass
class NdcgResult:
    value: float
    k: int
    per_query: Dict[int, float] = field(default_factory=dict)
    skipped: int = 0

    @property
    def evaluated(self) -> int:
        return len(self.per_query)


@dataclass
class MetricReport:
    """Every field is optional; `as_dict` lists only what a run computed."""
    ll: Optional[float] = None
    ppl_overall: Optional[float] = None
    ppl_at: Optional[np.ndarray] = None
    ndcg_at: Dict[int, float] = field(default_factory=dict)
    reverse_ppl: Optional[float] = None
    forward_ppl: Optional[float] = None
    extra: Dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, float]:
        values = {}
        if self.ll is not None:
            values["ll"] = self.ll
        if self.ppl_overall is not None:
            values["ppl"] = self.ppl_overall
        if self.ppl_at is not None:
            for t, value in enumerate(self.ppl_at, start=1):
                values[f"ppl@{t}"] = float(value)
        for k, value in sorted(self.ndcg_at.items()):
            values[f"ndcg@{k}"] = value
        if self.reverse_ppl is not None:
            values["reverse_ppl"] = self.reverse_ppl
        if self.forward_ppl is not None:
            values["forward_ppl"] = self.forward_ppl
        values.update(self.extra)
        return values

    def write(self, text_path: Union[str, Path], tsv_path: Union[str, Path] = None) -> None:
        """`key = value` text and, optionally, a one-row TSV with a header."""
        values = self.as_dict()
        Utils.write_key_values(text_path, values)
        if tsv_path is not None:
            Utils.write_tsv(tsv_path, list(values), [list(values.values())])


class Metrics:
    """
    A class containing the click model metrics.

    Methods:
        log_likelihood(preds, clicks): Mean natural-log likelihood per position.
        perplexity(preds, clicks): PPL@t (base 2) and the arithmetic mean over ranks.
        perplexity_click_skip(preds, clicks): PPL@t over clicked and over skipped positions.
        ndcg_at_k(scores, annotations, k): Mean NDCG@k over annotated queries.
        generate_synthetic(model, dataset, repeats, rng, permutation_mode): Sampled click logs.
        reverse_forward_ppl(synth, real, surrogate_kind): Distributional coverage.
        paired_sign_test(a, b): Two-sided sign test over paired per-query values.
    """

    @staticmethod
    def clamp(preds: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(preds, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)

    @staticmethod
    def _check(preds, clicks) -> Tuple[np.ndarray, np.ndarray]:
        preds = np.asarray(preds, dtype=np.float64)
        clicks = np.asarray(clicks, dtype=np.float64)
        if preds.shape != clicks.shape:
            raise ValueError(f"predictions {preds.shape} and clicks {clicks.shape} differ in shape")
        if preds.size == 0:
            raise ValueError("no predictions to evaluate")
        if not np.all(np.isfinite(preds)) or preds.min() < 0.0 or preds.max() > 1.0:
            raise ValueError("click probabilities must lie in [0, 1]")
        return Metrics.clamp(preds), clicks

    @staticmethod
    def log_likelihood(preds, clicks) -> float:
        """
        Mean over all positions of c ln p + (1 - c) ln(1 - p), with p clamped to [1e-6, 1 - 1e-6].

        Args:
            preds: (N, T) predicted click probabilities.
            clicks: (N, T) observed clicks.

        Returns:
            float: The log-likelihood (<= 0).
        """
        p, c = Metrics._check(preds, clicks)
        return float(np.mean(c * np.log(p) + (1.0 - c) * np.log(1.0 - p)))

    @staticmethod
    def perplexity(preds, clicks) -> Tuple[np.ndarray, float]:
        """
        PPL@t = 2 ** (-(1/N) sum_i [c log2 p + (1 - c) log2(1 - p)]) and its arithmetic mean over t.
        """
        p, c = Metrics._check(preds, clicks)
        log2_lik = c * np.log2(p) + (1.0 - c) * np.log2(1.0 - p)
        ppl_at = np.power(2.0, -log2_lik.mean(axis=0))
        return ppl_at, float(ppl_at.mean())

    @staticmethod
    def perplexity_click_skip(preds, clicks) -> Tuple[np.ndarray, np.ndarray]:
        """PPL@t restricted to clicked and to skipped positions; NaN where a rank has none."""
        p, c = Metrics._check(preds, clicks)
        out = []
        for target in (1.0, 0.0):
            mask = c == target
            log2_lik = np.where(mask, c * np.log2(p) + (1.0 - c) * np.log2(1.0 - p), 0.0)
            counts = mask.sum(axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                out.append(np.where(counts > 0, np.power(2.0, -log2_lik.sum(axis=0) / np.maximum(counts, 1)), np.nan))
        return out[0], out[1]

    @staticmethod
    def dcg(grades: np.ndarray, k: int) -> float:
        grades = np.asarray(grades, dtype=np.float64)[:k]
        return float(np.sum((np.power(2.0, grades) - 1.0) / np.log2(np.arange(2, grades.size + 2))))

    @staticmethod
    def ndcg_at_k(scores: Dict[int, Tuple[np.ndarray, np.ndarray]], annotations: RelevanceAnnotation,
                  k: int) -> NdcgResult:
        """
        Mean NDCG@k with gain 2^grade - 1 and discount 1 / log2(rank + 1).

        Args:
            scores: query id -> (doc ids, scores) in the original display order.
            annotations: Relevance grades; queries without any grade are left out, documents
                without a grade count as grade 0.
            k: Truncation level.

        Returns:
            NdcgResult: Mean value, per-query values and the number of queries skipped because their
            ideal DCG is 0.
        """
        by_query = annotations.by_query()
        result = NdcgResult(value=0.0, k=k)
        for query, (docs, doc_scores) in scores.items():
            graded = by_query.get(int(query))
            if not graded:
                continue
            grades = np.array([graded.get(int(d), 0) for d in docs], dtype=np.float64)
            ideal = Metrics.dcg(np.sort(grades)[::-1], k)
            if ideal == 0.0:
                result.skipped += 1
                continue
            order = np.argsort(-np.asarray(doc_scores, dtype=np.float64), kind="stable")
            result.per_query[int(query)] = Metrics.dcg(grades[order], k) / ideal
        if result.per_query:
            result.value = float(np.mean(list(result.per_query.values())))
        return result

    @staticmethod
    def document_scores(model, split: SerpSplit) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
        """
        Score every distinct document shown for each query in `split` (first-seen order) with the
        model's relevance estimate.
        """
        lists: Dict[int, Tuple[list, list]] = {}
        for i in range(len(split)):
            docs, verticals = lists.setdefault(int(split.queries[i]), ([], []))
            for d, v in zip(split.docs[i], split.verticals[i]):
                if int(d) not in docs:
                    docs.append(int(d))
                    verticals.append(int(v))
        scores = {}
        for query, (docs, verticals) in lists.items():
            docs, verticals = np.array(docs), np.array(verticals)
            if hasattr(model, "score_list"):
                values = model.score_list(query, docs, verticals)
            else:
                values = np.array([model.relevance_score(query, d, v) for d, v in zip(docs, verticals)])
            scores[query] = (docs, values)
        return scores

    @staticmethod
    def evaluate(model, split: SerpSplit, annotations: Optional[RelevanceAnnotation] = None,
                 cutoffs: Iterable[int] = NDCG_CUTOFFS) -> MetricReport:
        """LL, PPL (overall, per rank, click/skip split) and, with annotations, NDCG@k."""
        preds = model.predict_split(split)
        report = MetricReport()
        report.ll = Metrics.log_likelihood(preds, split.clicks)
        report.ppl_at, report.ppl_overall = Metrics.perplexity(preds, split.clicks)
        ppl_click, ppl_skip = Metrics.perplexity_click_skip(preds, split.clicks)
        for t in range(split.serp_length):
            report.extra[f"ppl_click@{t + 1}"] = float(ppl_click[t])
            report.extra[f"ppl_skip@{t + 1}"] = float(ppl_skip[t])
        if annotations is not None and len(annotations):
            scores = Metrics.document_scores(model, split)
            for k in cutoffs:
                result = Metrics.ndcg_at_k(scores, annotations, k)
                report.ndcg_at[k] = result.value
                report.extra[f"ndcg_queries@{k}"] = result.evaluated
                report.extra[f"ndcg_skipped@{k}"] = result.skipped
        logging.info(f" > LL {report.ll:.6f}, PPL {report.ppl_overall:.6f}"
                     + "".join(f", NDCG@{k} {v:.4f}" for k, v in sorted(report.ndcg_at.items())))
        return report

    @staticmethod
    def sample_clicks(model, split: SerpSplit, rng: np.random.Generator) -> np.ndarray:
        """Clicks sampled by a PGM (`sample_split`) or by the generator policy (`sample_batch`)."""
        if hasattr(model, "sample_batch"):
            return model.sample_batch(split, rng).actions
        return model.sample_split(split, rng)

    @staticmethod
    def generate_synthetic(model, dataset: Dataset, repeats: int, rng: np.random.Generator,
                           permutation_mode: str = "none", split: str = "test") -> Dataset:
        """
        Sample `repeats` click sequences for every record of `dataset.<split>` (each record permuted
        once first when `permutation_mode` is half or full). The result is a dataset whose train split
        holds len(split) * repeats records with session ids `<session_id>#r<k>`.
        """
        if repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {repeats}")
        source = DataProcessor.permute_split(dataset.split(split), permutation_mode, rng)
        n = len(source)
        tiled = source.subset(np.repeat(np.arange(n), repeats))
        tiled.session_ids = [f"{sid}#r{k}" for sid in source.session_ids for k in range(repeats)]
        synthetic = tiled.with_clicks(Metrics.sample_clicks(model, tiled, rng) if n else tiled.clicks)
        logging.info(f" > Generated {len(synthetic)} synthetic records ({n} x {repeats}, permutation {permutation_mode})")
        empty = SerpSplit.empty(source.serp_length)
        return Dataset(synthetic, empty, empty, dataset.query_vocab, dataset.doc_vocab, dataset.vertical_vocab,
                       dataset.click_vocab, dataset.annotations, dataset.serp_length)

    @staticmethod
    def fit_surrogate(kind: str, split: SerpSplit, vocab_sizes, cfg):
        if kind == "ubm":
            from clicksim.pgm import ClickModels
            return ClickModels.fit("ubm", split, cfg)
        if kind == "neural":
            from clicksim.model_trainer import ModelTrainer
            return ModelTrainer.fit_surrogate(split, vocab_sizes, cfg)
        raise ValueError(f"unknown surrogate {kind!r}; choose ubm or neural")

    @staticmethod
    def surrogate_ppl(kind: str, train_split: SerpSplit, eval_split: SerpSplit, vocab_sizes, cfg) -> float:
        """Fit a fresh surrogate on `train_split` and return its averaged PPL on `eval_split`."""
        if len(train_split) == 0 or len(eval_split) == 0:
            raise ValueError("surrogate PPL needs non-empty training and evaluation data")
        surrogate = Metrics.fit_surrogate(kind, train_split, vocab_sizes, cfg)
        _, ppl = Metrics.perplexity(surrogate.predict_split(eval_split), eval_split.clicks)
        return ppl

    @staticmethod
    def reverse_forward_ppl(synth: Union[Dataset, SerpSplit], real_heldout: Union[Dataset, SerpSplit],
                            surrogate_kind: str, vocab_sizes=None, cfg=None) -> Tuple[float, float]:
        """
        Reverse PPL: surrogate trained on generated data, evaluated on held-out real data.
        Forward PPL: surrogate trained on held-out real data, evaluated on generated data.

        Args:
            synth: Generated records (the train split of a Dataset, or a split).
            real_heldout: Real records (the test split of a Dataset, or a split).
            surrogate_kind: "ubm" or "neural".
            vocab_sizes: Embedding table sizes for the neural surrogate.
            cfg: TrainConfig; fixes the surrogate budget identically for both directions.

        Returns:
            tuple: (reverse, forward)
        """
        synth_split = synth.train if isinstance(synth, Dataset) else synth
        real_split = real_heldout.test if isinstance(real_heldout, Dataset) else real_heldout
        if vocab_sizes is None and isinstance(synth, Dataset):
            vocab_sizes = synth.vocab_sizes
        reverse = Metrics.surrogate_ppl(surrogate_kind, synth_split, real_split, vocab_sizes, cfg)
        forward = Metrics.surrogate_ppl(surrogate_kind, real_split, synth_split, vocab_sizes, cfg)
        logging.info(f" > {surrogate_kind.upper()} surrogate: reverse PPL {reverse:.6f}, forward PPL {forward:.6f}")
        return reverse, forward

    @staticmethod
    def paired_sign_test(a: Iterable[float], b: Iterable[float]) -> Dict[str, float]:
        """
        Two-sided sign test on paired values (ties dropped).

        Returns:
            dict: wins (a > b), losses (a < b), ties and the binomial p-value.
        """
        a = np.asarray(list(a), dtype=np.float64)
        b = np.asarray(list(b), dtype=np.float64)
        if a.shape != b.shape:
            raise ValueError("paired samples must have the same length")
        wins = int(np.sum(a > b))
        losses = int(np.sum(a < b))
        ties = int(a.size - wins - losses)
        p_value = 1.0 if wins + losses == 0 else float(stats.binomtest(wins, wins + losses, 0.5).pvalue)
        return {"wins": wins, "losses": losses, "ties": ties, "p_value": p_value}
