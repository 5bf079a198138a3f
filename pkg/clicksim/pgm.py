# -*- coding: utf-8 -*-

"""
clicksim PGM Click Models Module
Classic probabilistic-graphical-model click models used as baselines and as the PGM surrogate for
the Reverse/Forward PPL metrics:

* PBM  - position-based model, fit by expectation-maximization over latent examination.
* UBM  - user browsing model; examination depends on the rank and the distance to the last click.
* DCM  - dependent click model; per-rank continuation after a click, fit by counting.
* SDBN - simplified dynamic Bayesian network; per-(query, doc) satisfaction, fit by counting.

All models predict the probability of a click at rank t conditioned on the observed clicks before t.
"""

import logging
logging.basicConfig(level=logging.INFO)

from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from clicksim.data_processor import ClickLogError, Dataset, SerpRecord, SerpSplit

__all__ = ["PgmModel", "PbmModel", "UbmModel", "DcmModel", "SdbnModel", "ClickModels", "PROB_FLOOR"]

PROB_FLOOR = 1e-6
_KEY_SHIFT = np.int64(1 << 32)


def _clamp(values: np.ndarray) -> np.ndarray:
    return np.clip(values, PROB_FLOOR, 1.0 - PROB_FLOOR)


def _pair_keys(queries: np.ndarray, docs: np.ndarray) -> np.ndarray:
    """One int64 key per (query, doc) position, broadcast to the shape of `docs`."""
    queries = np.asarray(queries, dtype=np.int64)
    docs = np.asarray(docs, dtype=np.int64)
    return queries.reshape(queries.shape + (1,) * (docs.ndim - queries.ndim)) * _KEY_SHIFT + docs


def _previous_click(clicks: np.ndarray) -> np.ndarray:
    """prev[i, t] = rank of the last click before t in row i, or -1."""
    n, serp_length = clicks.shape
    prev = np.full((n, serp_length), -1, dtype=np.int64)
    for t in range(1, serp_length):
        prev[:, t] = np.where(clicks[:, t - 1] == 1, t - 1, prev[:, t - 1])
    return prev


def _single_row(query: int, docs, verticals, clicks=None) -> SerpSplit:
    docs = np.asarray(docs, dtype=np.int64)
    clicks = np.zeros_like(docs) if clicks is None else np.asarray(clicks, dtype=np.int64)
    return SerpSplit(["_"], np.array([query]), docs[None, :], np.asarray(verticals)[None, :], clicks[None, :],
                     docs.shape[0])


class PgmModel:
    """
    Base class: attractiveness table, conditional prediction, sampling and text persistence.

    Attractiveness is stored as sorted (query, doc) keys with a parallel value array; pairs missing
    from the table back off to the global mean.
    """
    kind = "base"

    def __init__(self, serp_length: int = 10) -> None:
        self.serp_length = serp_length
        self.attr_keys = np.zeros(0, dtype=np.int64)
        self.attr_values = np.zeros(0, dtype=np.float64)
        self.global_attr = 0.5
        self.ll_history = []
        self.clamp = True

    # ---------------------------------------------------------------- lookup
    def set_attractiveness(self, keys: np.ndarray, values: np.ndarray) -> None:
        order = np.argsort(keys, kind="stable")
        self.attr_keys = np.asarray(keys, dtype=np.int64)[order]
        self.attr_values = np.asarray(values, dtype=np.float64)[order]
        self.global_attr = float(self.attr_values.mean()) if self.attr_values.size else 0.5

    def attractiveness(self, queries: np.ndarray, docs: np.ndarray) -> np.ndarray:
        keys = _pair_keys(queries, docs)
        if self.attr_keys.size == 0:
            return np.full(keys.shape, self.global_attr)
        pos = np.clip(np.searchsorted(self.attr_keys, keys), 0, self.attr_keys.size - 1)
        found = self.attr_keys[pos] == keys
        return np.where(found, self.attr_values[pos], self.global_attr)

    def relevance_score(self, query: int, doc: int, vertical: int = 0) -> float:
        """Attractiveness of the pair, the model's position-free relevance estimate."""
        return float(self.attractiveness(np.array([query]), np.array([[doc]]))[0, 0])

    # ------------------------------------------------------------ prediction
    def conditional_probs(self, queries: np.ndarray, docs: np.ndarray, clicks: np.ndarray) -> np.ndarray:
        """(N, T) click probabilities at each rank given the clicks before it."""
        raise NotImplementedError

    def predict_split(self, split: SerpSplit) -> np.ndarray:
        probs = self.conditional_probs(split.queries, split.docs, split.clicks)
        return _clamp(probs) if self.clamp else probs

    def predict(self, r: SerpRecord) -> np.ndarray:
        """Array of T conditional click probabilities for one record."""
        return self.predict_split(_single_row(r.query, r.docs, r.verticals, r.clicks))[0]

    def sample_split(self, split: SerpSplit, rng: np.random.Generator) -> np.ndarray:
        """Sample clicks rank by rank; each rank conditions on the clicks already drawn."""
        n, serp_length = split.docs.shape
        clicks = np.zeros((n, serp_length), dtype=np.int64)
        for t in range(serp_length):
            p_t = self.conditional_probs(split.queries, split.docs, clicks)[:, t]
            clicks[:, t] = (rng.random(n) < p_t).astype(np.int64)
        return clicks

    def sample(self, query: int, docs, verticals, rng: np.random.Generator) -> np.ndarray:
        return self.sample_split(_single_row(query, docs, verticals), rng)[0]

    def log_likelihood(self, split: SerpSplit) -> float:
        p = _clamp(self.conditional_probs(split.queries, split.docs, split.clicks))
        c = split.clicks
        return float(np.mean(c * np.log(p) + (1 - c) * np.log(1.0 - p)))

    # ----------------------------------------------------------- persistence
    def _tables(self) -> Dict[str, np.ndarray]:
        return {}

    def save(self, path: Union[str, Path]) -> None:
        """
        Text format, one parameter per line: `name<TAB>index...<TAB>value`.
        """
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"kind\t{self.kind}\n")
            f.write(f"serp_length\t{self.serp_length}\n")
            f.write(f"global_attr\t{self.global_attr!r}\n")
            for key, value in zip(self.attr_keys, self.attr_values):
                f.write(f"attr\t{int(key // _KEY_SHIFT)}\t{int(key % _KEY_SHIFT)}\t{float(value)!r}\n")
            for name, table in self._tables().items():
                for index, value in np.ndenumerate(table):
                    f.write(name + "\t" + "\t".join(str(i) for i in index) + f"\t{float(value)!r}\n")
            for i, ll in enumerate(self.ll_history):
                f.write(f"ll_history\t{i}\t{float(ll)!r}\n")

    def _load_table(self, name: str, entries) -> None:
        raise KeyError(f"{self.kind} has no table {name!r}")

    def __repr__(self) -> str:
        return f"{type(self).__name__}(serp_length={self.serp_length}, pairs={self.attr_keys.size})"


class _EmModel(PgmModel):
    """PBM and UBM share the E/M steps; they differ only in how examination is indexed."""

    def _exam_index(self, clicks: np.ndarray):
        raise NotImplementedError

    def exam_probs(self, clicks: np.ndarray) -> np.ndarray:
        return self.exam[self._exam_index(clicks)]

    def conditional_probs(self, queries, docs, clicks):
        return self.exam_probs(np.asarray(clicks)) * self.attractiveness(queries, docs)

    def fit(self, split: SerpSplit, max_iterations: int = 50, tolerance: float = 1e-4) -> "_EmModel":
        """
        Expectation-maximization over latent examination. For a skip the posteriors are
        P(E=1|C=0) = e(1-a)/(1-ae) and P(A=1|C=0) = a(1-e)/(1-ae); a click fixes both to 1.
        Stops when the largest parameter change falls below `tolerance`.
        """
        if len(split) == 0:
            raise ValueError("cannot fit a click model on an empty split")
        clicks = split.clicks.astype(np.float64)
        keys = _pair_keys(split.queries, split.docs)
        unique_keys, pair_index = np.unique(keys.ravel(), return_inverse=True)
        pair_index = pair_index.reshape(keys.shape)
        exam_index = self._exam_index(split.clicks)
        flat_exam = np.ravel_multi_index(exam_index, self.exam.shape) if isinstance(exam_index, tuple) \
            else np.broadcast_to(exam_index, clicks.shape)

        attr = np.full(unique_keys.size, 0.5)
        self.exam[...] = 0.5
        exam_counts = np.bincount(np.ravel(flat_exam), minlength=self.exam.size).reshape(self.exam.shape)
        pair_counts = np.bincount(pair_index.ravel(), minlength=unique_keys.size)
        self.ll_history = []

        for iteration in range(1, max_iterations + 1):
            a = attr[pair_index]
            e = self.exam.ravel()[flat_exam]
            p = a * e
            ll = float(np.mean(clicks * np.log(p) + (1 - clicks) * np.log(1 - p)))
            if self.ll_history and ll < self.ll_history[-1] - 1e-9:
                logging.warning(f" > {self.kind.upper()} EM log-likelihood decreased: {self.ll_history[-1]:.9f} -> {ll:.9f}")
            self.ll_history.append(ll)

            post_e = np.where(clicks == 1, 1.0, e * (1 - a) / (1 - p))
            post_a = np.where(clicks == 1, 1.0, a * (1 - e) / (1 - p))

            new_attr = _clamp(np.bincount(pair_index.ravel(), weights=post_a.ravel(), minlength=unique_keys.size)
                              / np.maximum(pair_counts, 1))
            exam_sum = np.bincount(np.ravel(flat_exam), weights=post_e.ravel(), minlength=self.exam.size)
            new_exam = np.where(exam_counts.ravel() > 0, exam_sum / np.maximum(exam_counts.ravel(), 1),
                                self.exam.ravel())
            new_exam = _clamp(new_exam).reshape(self.exam.shape)

            change = max(float(np.max(np.abs(new_attr - attr))), float(np.max(np.abs(new_exam - self.exam))))
            attr, self.exam = new_attr, new_exam
            logging.info(f" > {self.kind.upper()} EM iteration {iteration}: LL {ll:.6f}, max change {change:.2e}")
            if change < tolerance:
                break

        a = attr[pair_index]
        e = self.exam.ravel()[flat_exam]
        self.ll_history.append(float(np.mean(clicks * np.log(a * e) + (1 - clicks) * np.log(1 - a * e))))
        self.set_attractiveness(unique_keys, attr)
        return self


class PbmModel(_EmModel):
    """Position-based model: P(C_t = 1) = exam[t] * attr(q, d_t)."""
    kind = "pbm"

    def __init__(self, serp_length: int = 10) -> None:
        super().__init__(serp_length)
        self.exam = np.full(serp_length, 0.5)

    def _exam_index(self, clicks):
        return np.broadcast_to(np.arange(self.serp_length), np.shape(clicks))

    def normalized_exam(self) -> np.ndarray:
        """Examination scaled so that exam[rank 1] = 1 (fixes the exam * attr scale ambiguity)."""
        return self.exam / self.exam[0]

    def _tables(self):
        return {"exam": self.exam}

    def _load_table(self, name, entries):
        if name != "exam":
            super()._load_table(name, entries)
        for index, value in entries:
            self.exam[index] = value


class UbmModel(_EmModel):
    """
    User browsing model: P(C_t = 1 | clicks before t) = exam[t, t - prev - 1] * attr(q, d_t), where prev is
    the rank of the last click before t (-1 when there is none, which gives the column t).
    """
    kind = "ubm"

    def __init__(self, serp_length: int = 10) -> None:
        super().__init__(serp_length)
        self.exam = np.full((serp_length, serp_length), 0.5)

    def _exam_index(self, clicks):
        clicks = np.asarray(clicks, dtype=np.int64)
        ranks = np.broadcast_to(np.arange(self.serp_length), clicks.shape)
        return ranks, ranks - _previous_click(clicks) - 1

    def _tables(self):
        return {"exam": self.exam}

    def _load_table(self, name, entries):
        if name != "exam":
            super()._load_table(name, entries)
        for index, value in entries:
            self.exam[index] = value


class _CascadeModel(PgmModel):
    """
    DCM and SDBN: the user scans top-down and examines every rank up to the first click. After a
    click at rank l the user continues with probability cont(l); if ranks l+1..t-1 were then
    skipped, P(E_t = 1 | history) = cont * prod(1 - a_k) / (cont * prod(1 - a_k) + 1 - cont).
    """

    def _continuation(self, queries: np.ndarray, docs: np.ndarray, t: int) -> np.ndarray:
        raise NotImplementedError

    def conditional_probs(self, queries, docs, clicks):
        clicks = np.asarray(clicks, dtype=np.int64)
        attr = self.attractiveness(queries, docs)
        n, serp_length = clicks.shape
        probs = np.empty((n, serp_length))
        clicked = np.zeros(n, dtype=bool)
        cont = np.ones(n)
        skipped = np.ones(n)
        for t in range(serp_length):
            num = cont * skipped
            exam = np.where(clicked, num / np.maximum(num + (1.0 - cont), 1e-300), 1.0)
            probs[:, t] = exam * attr[:, t]
            is_click = clicks[:, t] == 1
            cont = np.where(is_click, self._continuation(queries, docs, t), cont)
            skipped = np.where(is_click, 1.0, skipped * (1.0 - attr[:, t]))
            clicked |= is_click
        return probs

    @staticmethod
    def _last_click(clicks: np.ndarray) -> np.ndarray:
        """Index of the last click per row, T-1 when the row has no click."""
        serp_length = clicks.shape[1]
        has_click = clicks.any(axis=1)
        last = serp_length - 1 - np.argmax(clicks[:, ::-1], axis=1)
        return np.where(has_click, last, serp_length - 1)

    def _count_attractiveness(self, split: SerpSplit, observed: np.ndarray):
        """Add-one smoothed click ratio over the observed (examined) impressions."""
        keys = _pair_keys(split.queries, split.docs)[observed]
        unique_keys, index = np.unique(keys, return_inverse=True)
        clicks = np.bincount(index, weights=split.clicks[observed], minlength=unique_keys.size)
        shown = np.bincount(index, minlength=unique_keys.size)
        self.set_attractiveness(unique_keys, _clamp((clicks + 1.0) / (shown + 2.0)))


class DcmModel(_CascadeModel):
    """Dependent click model with per-rank continuation probabilities after a click."""
    kind = "dcm"

    def __init__(self, serp_length: int = 10) -> None:
        super().__init__(serp_length)
        self.continuation = np.full(serp_length, 0.5)

    def _continuation(self, queries, docs, t):
        return np.full(np.shape(queries)[0], self.continuation[t])

    def fit(self, split: SerpSplit, max_iterations: int = 50, tolerance: float = 1e-4) -> "DcmModel":
        """Counting up to the last click; continuation(r) = (non-final clicks at r + 1) / (clicks at r + 2)."""
        if len(split) == 0:
            raise ValueError("cannot fit a click model on an empty split")
        last = self._last_click(split.clicks)
        ranks = np.arange(self.serp_length)
        observed = ranks[None, :] <= last[:, None]
        self._count_attractiveness(split, observed)
        clicked = split.clicks == 1
        final = clicked & (ranks[None, :] == last[:, None])
        self.continuation = _clamp((clicked.sum(axis=0) - final.sum(axis=0) + 1.0) / (clicked.sum(axis=0) + 2.0))
        self.ll_history = [self.log_likelihood(split)]
        logging.info(f" > DCM fitted: LL {self.ll_history[-1]:.6f}")
        return self

    def stop_probs(self) -> np.ndarray:
        """Probability of stopping after a click, per rank."""
        return 1.0 - self.continuation

    def _tables(self):
        return {"continuation": self.continuation}

    def _load_table(self, name, entries):
        if name != "continuation":
            super()._load_table(name, entries)
        for index, value in entries:
            self.continuation[index] = value


class SdbnModel(_CascadeModel):
    """Simplified DBN: after clicking d the user is satisfied (and stops) with probability sat(q, d)."""
    kind = "sdbn"

    def __init__(self, serp_length: int = 10) -> None:
        super().__init__(serp_length)
        self.sat_keys = np.zeros(0, dtype=np.int64)
        self.sat_values = np.zeros(0, dtype=np.float64)
        self.global_sat = 0.5

    def set_satisfaction(self, keys: np.ndarray, values: np.ndarray) -> None:
        order = np.argsort(keys, kind="stable")
        self.sat_keys = np.asarray(keys, dtype=np.int64)[order]
        self.sat_values = np.asarray(values, dtype=np.float64)[order]
        self.global_sat = float(self.sat_values.mean()) if self.sat_values.size else 0.5

    def satisfaction(self, queries: np.ndarray, docs: np.ndarray) -> np.ndarray:
        keys = _pair_keys(queries, docs)
        if self.sat_keys.size == 0:
            return np.full(keys.shape, self.global_sat)
        pos = np.clip(np.searchsorted(self.sat_keys, keys), 0, self.sat_keys.size - 1)
        return np.where(self.sat_keys[pos] == keys, self.sat_values[pos], self.global_sat)

    def _continuation(self, queries, docs, t):
        return 1.0 - self.satisfaction(queries, np.asarray(docs)[:, t:t + 1])[:, 0]

    def fit(self, split: SerpSplit, max_iterations: int = 50, tolerance: float = 1e-4) -> "SdbnModel":
        """Counting up to the last click; sat(q, d) = (final clicks on d + 1) / (clicks on d + 2)."""
        if len(split) == 0:
            raise ValueError("cannot fit a click model on an empty split")
        last = self._last_click(split.clicks)
        ranks = np.arange(self.serp_length)
        observed = ranks[None, :] <= last[:, None]
        self._count_attractiveness(split, observed)
        clicked = split.clicks == 1
        final = clicked & (ranks[None, :] == last[:, None])
        keys = _pair_keys(split.queries, split.docs)[clicked]
        unique_keys, index = np.unique(keys, return_inverse=True)
        finals = np.bincount(index, weights=final[clicked], minlength=unique_keys.size)
        totals = np.bincount(index, minlength=unique_keys.size)
        self.set_satisfaction(unique_keys, _clamp((finals + 1.0) / (totals + 2.0)))
        self.ll_history = [self.log_likelihood(split)]
        logging.info(f" > SDBN fitted: LL {self.ll_history[-1]:.6f}")
        return self

    def _tables(self):
        return {}

    def save(self, path):
        super().save(path)
        with open(path, "a", encoding="utf-8") as f:
            f.write(f"global_sat\t{self.global_sat!r}\n")
            for key, value in zip(self.sat_keys, self.sat_values):
                f.write(f"sat\t{int(key // _KEY_SHIFT)}\t{int(key % _KEY_SHIFT)}\t{float(value)!r}\n")


class ClickModels:
    """
    Factory for the PGM click models: fitting by kind and loading from the text format.
    """
    KINDS = {"pbm": PbmModel, "ubm": UbmModel, "dcm": DcmModel, "sdbn": SdbnModel}

    @staticmethod
    def create(model_kind: str, serp_length: int = 10) -> PgmModel:
        kind = model_kind.lower()
        if kind not in ClickModels.KINDS:
            raise ValueError(f"unknown click model {model_kind!r}; choose from {', '.join(ClickModels.KINDS)}")
        return ClickModels.KINDS[kind](serp_length)

    @staticmethod
    def fit(model_kind: str, data: Union[Dataset, SerpSplit], cfg=None) -> PgmModel:
        """
        Fit a PGM on the train split of `data` (or on `data` itself when it is a split).

        Parameters:
        model_kind (str): pbm, ubm, dcm or sdbn.
        data (Dataset | SerpSplit): Training data.
        cfg (TrainConfig, optional): Supplies pgm_max_iterations and pgm_tolerance.

        Returns:
        PgmModel: The fitted model.
        """
        split = data.train if isinstance(data, Dataset) else data
        max_iterations = getattr(cfg, "pgm_max_iterations", 50)
        tolerance = getattr(cfg, "pgm_tolerance", 1e-4)
        logging.info(f" > Fitting {model_kind.upper()} on {len(split)} records")
        model = ClickModels.create(model_kind, split.serp_length)
        return model.fit(split, max_iterations=max_iterations, tolerance=tolerance)

    @staticmethod
    def load(path: Union[str, Path]) -> PgmModel:
        """Read a model written by `PgmModel.save`; malformed content raises ClickLogError."""
        header: Dict[str, str] = {}
        attr, sat, tables = [], [], {}
        history = []
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                parts = line.rstrip("\n").split("\t")
                name = parts[0]
                if not name:
                    continue
                try:
                    if name in ("kind", "serp_length", "global_attr", "global_sat"):
                        header[name] = parts[1]
                    elif name in ("attr", "sat"):
                        if len(parts) != 4:
                            raise ValueError(f"expected 4 fields, got {len(parts)}")
                        (attr if name == "attr" else sat).append((int(parts[1]), int(parts[2]), float(parts[3])))
                    elif name == "ll_history":
                        history.append(float(parts[2]))
                    else:
                        if len(parts) < 3:
                            raise ValueError(f"expected an index and a value, got {len(parts)} fields")
                        index = tuple(int(i) for i in parts[1:-1])
                        tables.setdefault(name, []).append((index, float(parts[-1])))
                except (ValueError, IndexError) as err:
                    raise ClickLogError(f"{path}:{lineno}: malformed {name!r} line: {err}") from err
        missing = [key for key in ("kind", "serp_length") if key not in header]
        if missing:
            raise ClickLogError(f"{path}: no {' / '.join(missing)} line")
        try:
            model = ClickModels.create(header["kind"], int(header["serp_length"]))
            if attr:
                q, d, v = (np.array(col) for col in zip(*attr))
                model.set_attractiveness(q.astype(np.int64) * _KEY_SHIFT + d.astype(np.int64), v)
            model.global_attr = float(header.get("global_attr", model.global_attr))
            if sat:
                if not isinstance(model, SdbnModel):
                    raise KeyError(f"{model.kind} has no satisfaction table")
                q, d, v = (np.array(col) for col in zip(*sat))
                model.set_satisfaction(q.astype(np.int64) * _KEY_SHIFT + d.astype(np.int64), v)
            if "global_sat" in header:
                model.global_sat = float(header["global_sat"])
            for name, entries in tables.items():
                model._load_table(name, entries)
        except (KeyError, IndexError, ValueError) as err:
            raise ClickLogError(f"{path}: {err}") from err
        model.ll_history = history
        return model
