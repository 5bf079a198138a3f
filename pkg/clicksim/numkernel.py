# -*- coding: utf-8 -*-

"""
clicksim Numerical Kernel Module
Dense float64 arithmetic for the neural click models: affine maps, activations, the GRU cell with its
hand-derived backward pass, a named parameter store, the Adam optimizer and finite-difference
gradient checking.

Batched inputs follow the row convention: a batch of vectors is a (B, n) matrix and
`affine(W, x, b)` returns `x @ W.T + b`, which equals `W x + b` for a single vector.
"""

import logging
logging.basicConfig(level=logging.INFO)

import copy
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Tuple

import numpy as np
from scipy import special

__all__ = [
    "ShapeError", "affine", "affine_backward", "sigmoid", "softmax", "tanh",
    "GruCellParams", "GruCache", "gru_forward", "gru_backward",
    "ParamStore", "AdamState", "adam_step", "GradCheckReport", "grad_check",
    "dropout_mask", "uniform_init", "GRU_FIELDS",
]

DTYPE = np.float64
GRU_FIELDS = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")


class ShapeError(ValueError):
    """Raised on shape mismatches and stale caches."""


def _as_batch(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise ShapeError(f"expected a vector or a batch of vectors, got shape {x.shape}")


def affine(W: np.ndarray, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Compute Wx + b for a vector, or row-wise for a batch.

    Parameters:
    W (np.ndarray): (l_out, l_in) weights.
    x (np.ndarray): (l_in,) or (B, l_in) input.
    b (np.ndarray): (l_out,) bias.

    Returns:
    np.ndarray: (l_out,) or (B, l_out).
    """
    W = np.asarray(W, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    x = np.asarray(x, dtype=DTYPE)
    if W.ndim != 2 or b.shape != (W.shape[0],) or x.shape[-1:] != (W.shape[1],):
        raise ShapeError(f"affine: W {W.shape}, x {x.shape}, b {b.shape} do not conform")
    return x @ W.T + b


def affine_backward(W: np.ndarray, x: np.ndarray, dy: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dW, db) of `affine` for the upstream gradient `dy`."""
    xb, single = _as_batch(x)
    dyb, _ = _as_batch(dy)
    if dyb.shape != (xb.shape[0], W.shape[0]):
        raise ShapeError(f"affine_backward: dy {np.shape(dy)} does not match x {np.shape(x)} and W {W.shape}")
    dx = dyb @ W
    return (dx[0] if single else dx), dyb.T @ xb, dyb.sum(axis=0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return special.expit(np.asarray(x, dtype=DTYPE))


def softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-shifted softmax along `axis` (finite for inputs of any magnitude)."""
    return special.softmax(np.asarray(v, dtype=DTYPE), axis=axis)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=DTYPE))


@dataclass
class GruCellParams:
    """
    Weights of one GRU cell. Input matrices are (l_h, l_x), recurrent matrices (l_h, l_h) and biases
    (l_h,). The arrays may be views into a ParamStore, so optimizer steps are seen immediately.
    """
    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    def __post_init__(self) -> None:
        l_h, l_x = np.shape(self.W_z)
        for name in ("W_z", "W_r", "W_h"):
            if np.shape(getattr(self, name)) != (l_h, l_x):
                raise ShapeError(f"{name} must be ({l_h}, {l_x}), got {np.shape(getattr(self, name))}")
        for name in ("U_z", "U_r", "U_h"):
            if np.shape(getattr(self, name)) != (l_h, l_h):
                raise ShapeError(f"{name} must be ({l_h}, {l_h}), got {np.shape(getattr(self, name))}")
        for name in ("b_z", "b_r", "b_h"):
            if np.shape(getattr(self, name)) != (l_h,):
                raise ShapeError(f"{name} must be ({l_h},), got {np.shape(getattr(self, name))}")

    @property
    def input_size(self) -> int:
        return self.W_z.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.W_z.shape[0]

    @staticmethod
    def shapes(l_x: int, l_h: int) -> Dict[str, Tuple[int, ...]]:
        return {"W_z": (l_h, l_x), "W_r": (l_h, l_x), "W_h": (l_h, l_x),
                "U_z": (l_h, l_h), "U_r": (l_h, l_h), "U_h": (l_h, l_h),
                "b_z": (l_h,), "b_r": (l_h,), "b_h": (l_h,)}

    @classmethod
    def zeros(cls, l_x: int, l_h: int) -> "GruCellParams":
        return cls(**{name: np.zeros(shape, dtype=DTYPE) for name, shape in cls.shapes(l_x, l_h).items()})

    @classmethod
    def from_store(cls, store: "ParamStore", prefix: str) -> "GruCellParams":
        return cls(**{name: store.value(f"{prefix}.{name}") for name in GRU_FIELDS})


@dataclass
class GruCache:
    params: GruCellParams
    x: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    h_tilde: np.ndarray
    h_new: np.ndarray
    single: bool


def gru_forward(p: GruCellParams, x: np.ndarray, h_prev: np.ndarray) -> Tuple[np.ndarray, GruCache]:
    """
    One GRU step, h_new = (1 - z) * h_prev + z * h_tilde.

    Parameters:
    p (GruCellParams): The cell weights.
    x (np.ndarray): (l_x,) or (B, l_x) input.
    h_prev (np.ndarray): (l_h,) or (B, l_h) previous hidden state.

    Returns:
    tuple: h_new with the shape of h_prev, and the cache for `gru_backward`.
    """
    xb, single = _as_batch(x)
    hb, single_h = _as_batch(h_prev)
    if single != single_h or xb.shape[0] != hb.shape[0]:
        raise ShapeError(f"gru_forward: x {np.shape(x)} and h_prev {np.shape(h_prev)} disagree on batch")
    if xb.shape[1] != p.input_size or hb.shape[1] != p.hidden_size:
        raise ShapeError(f"gru_forward: expected x (*, {p.input_size}) and h (*, {p.hidden_size}), "
                         f"got {np.shape(x)} and {np.shape(h_prev)}")

    z = sigmoid(xb @ p.W_z.T + hb @ p.U_z.T + p.b_z)
    r = sigmoid(xb @ p.W_r.T + hb @ p.U_r.T + p.b_r)
    h_tilde = tanh(xb @ p.W_h.T + (r * hb) @ p.U_h.T + p.b_h)
    h_new = (1.0 - z) * hb + z * h_tilde

    cache = GruCache(params=p, x=xb, h_prev=hb, z=z, r=r, h_tilde=h_tilde, h_new=h_new, single=single)
    return (h_new[0] if single else h_new), cache


def gru_backward(cache: GruCache, dh_new: np.ndarray) -> Tuple[np.ndarray, np.ndarray, Dict[str, np.ndarray]]:
    """
    Reverse-mode gradients of `gru_forward`.

    Returns:
    tuple: (dx, dh_prev, dparams) where dparams maps the GRU_FIELDS names to gradients.
    """
    dh, single = _as_batch(dh_new)
    if single != cache.single or dh.shape != cache.h_new.shape:
        raise ShapeError(f"gru_backward: dh_new {np.shape(dh_new)} does not match the cached step {cache.h_new.shape}")
    p = cache.params
    x, h, z, r, ht = cache.x, cache.h_prev, cache.z, cache.r, cache.h_tilde

    dh_tilde = dh * z
    dz = dh * (ht - h)
    dh_prev = dh * (1.0 - z)

    da_h = dh_tilde * (1.0 - ht ** 2)
    d_rh = da_h @ p.U_h
    dr = d_rh * h
    dh_prev += d_rh * r

    da_r = dr * r * (1.0 - r)
    da_z = dz * z * (1.0 - z)

    dx = da_z @ p.W_z + da_r @ p.W_r + da_h @ p.W_h
    dh_prev += da_z @ p.U_z + da_r @ p.U_r

    dparams = {
        "W_z": da_z.T @ x, "W_r": da_r.T @ x, "W_h": da_h.T @ x,
        "U_z": da_z.T @ h, "U_r": da_r.T @ h, "U_h": da_h.T @ (r * h),
        "b_z": da_z.sum(axis=0), "b_r": da_r.sum(axis=0), "b_h": da_h.sum(axis=0),
    }
    if single:
        return dx[0], dh_prev[0], dparams
    return dx, dh_prev, dparams


class ParamStore:
    """
    Named parameters paired with gradient buffers of identical shape.

    Rows listed as pinned (embedding padding rows) are held at zero: `pin` re-zeroes them in values
    and gradients and the optimizer skips them.
    """
    def __init__(self) -> None:
        self._values: Dict[str, np.ndarray] = {}
        self._grads: Dict[str, np.ndarray] = {}
        self._pinned: Dict[str, Tuple[int, ...]] = {}

    def add(self, name: str, value: np.ndarray, pinned_rows: Iterable[int] = ()) -> np.ndarray:
        if name in self._values:
            raise KeyError(f"parameter {name!r} already exists")
        value = np.array(value, dtype=DTYPE)
        self._values[name] = value
        self._grads[name] = np.zeros_like(value)
        self._pinned[name] = tuple(pinned_rows)
        self.pin()
        return value

    def names(self) -> List[str]:
        return list(self._values)

    def value(self, name: str) -> np.ndarray:
        return self._values[name]

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def pinned_rows(self, name: str) -> Tuple[int, ...]:
        return self._pinned[name]

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __getitem__(self, name: str) -> np.ndarray:
        return self._values[name]

    def __len__(self) -> int:
        return len(self._values)

    def num_parameters(self) -> int:
        return int(sum(v.size for v in self._values.values()))

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        if np.shape(grad) != self._grads[name].shape:
            raise ShapeError(f"gradient for {name!r} has shape {np.shape(grad)}, expected {self._grads[name].shape}")
        self._grads[name] += grad

    def accumulate_rows(self, name: str, rows: np.ndarray, grad: np.ndarray) -> None:
        """Scatter-add row gradients (embedding lookups may repeat rows)."""
        np.add.at(self._grads[name], np.asarray(rows, dtype=np.int64), grad)

    def zero_grad(self) -> None:
        for grad in self._grads.values():
            grad.fill(0.0)

    def pin(self) -> None:
        for name, rows in self._pinned.items():
            if rows:
                self._values[name][list(rows)] = 0.0
                self._grads[name][list(rows)] = 0.0

    def scale_grads(self, factor: float) -> None:
        for grad in self._grads.values():
            grad *= factor

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self._values.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Copy values in place so views held elsewhere stay valid."""
        missing = set(self._values) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for name, value in self._values.items():
            if np.shape(state[name]) != value.shape:
                raise ShapeError(f"{name}: stored shape {np.shape(state[name])} != {value.shape}")
            value[...] = state[name]
        self.pin()

    def copy(self) -> "ParamStore":
        return copy.deepcopy(self)

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self._values.values())


@dataclass
class AdamState:
    """First and second moments per parameter plus the global step counter."""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_store(cls, store: ParamStore) -> "AdamState":
        return cls(m={n: np.zeros_like(store.value(n)) for n in store.names()},
                   v={n: np.zeros_like(store.value(n)) for n in store.names()})


def adam_step(s: AdamState, store: ParamStore, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, l2: float = 0.0) -> None:
    """
    Bias-corrected Adam update applied in place. The L2 term l2 * value is added to the gradient
    before the moment update. Pinned rows stay zero.
    """
    if lr <= 0:
        raise ValueError(f"lr must be > 0, got {lr}")
    s.t += 1
    correction1 = 1.0 - beta1 ** s.t
    correction2 = 1.0 - beta2 ** s.t
    for name in store.names():
        value = store.value(name)
        grad = store.grad(name) + l2 * value if l2 else store.grad(name).copy()
        rows = store.pinned_rows(name)
        if rows:
            grad[list(rows)] = 0.0
        if name not in s.m:
            s.m[name] = np.zeros_like(value)
            s.v[name] = np.zeros_like(value)
        s.m[name] = beta1 * s.m[name] + (1.0 - beta1) * grad
        s.v[name] = beta2 * s.v[name] + (1.0 - beta2) * grad ** 2
        m_hat = s.m[name] / correction1
        v_hat = s.v[name] / correction2
        value -= lr * m_hat / (np.sqrt(v_hat) + eps)
    store.pin()


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    probes: List[Tuple[str, Tuple[int, ...], float, float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol

    def worst(self) -> Tuple[str, Tuple[int, ...], float, float, float]:
        return max(self.probes, key=lambda probe: probe[-1])


def grad_check(loss_fn: Callable[[], float], store: ParamStore, n_probes: int = 20, tol: float = 1e-4,
               rng: np.random.Generator = None, step: float = 1e-5, names: Iterable[str] = None) -> GradCheckReport:
    """
    Compare analytic gradients with central finite differences.

    `loss_fn()` must return the loss for the current values of `store` and accumulate its analytic
    gradient into the store. Pinned entries are never probed.

    Parameters:
    loss_fn (callable): Deterministic loss closure.
    store (ParamStore): The parameters to probe.
    n_probes (int): Number of randomly chosen entries.
    tol (float): Relative error threshold for `passed`.
    rng (np.random.Generator, optional): Probe selection stream.
    step (float): Finite-difference step.
    names (iterable, optional): Restrict probing to these parameters.

    Returns:
    GradCheckReport: Per-probe comparisons and the maximum relative error.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    store.zero_grad()
    loss_fn()
    analytic = {name: store.grad(name).copy() for name in store.names()}

    candidates = []
    for name in (names if names is not None else store.names()):
        pinned = set(store.pinned_rows(name))
        for flat in range(store.value(name).size):
            index = np.unravel_index(flat, store.value(name).shape)
            if pinned and index[0] in pinned:
                continue
            candidates.append((name, index))
    if not candidates:
        return GradCheckReport(max_rel_error=0.0, tol=tol)
    picks = rng.choice(len(candidates), size=min(n_probes, len(candidates)), replace=False)

    report = GradCheckReport(max_rel_error=0.0, tol=tol)
    for pick in sorted(picks):
        name, index = candidates[pick]
        value = store.value(name)
        original = value[index]
        value[index] = original + step
        loss_plus = loss_fn()
        value[index] = original - step
        loss_minus = loss_fn()
        value[index] = original
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        a = float(analytic[name][index])
        rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-6)
        report.probes.append((name, tuple(int(i) for i in index), a, float(numeric), rel))
        report.max_rel_error = max(report.max_rel_error, rel)
    store.zero_grad()
    return report


def dropout_mask(shape: Tuple[int, ...], rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 with probability `rate`, else 1 / (1 - rate)."""
    if rate <= 0.0:
        return np.ones(shape, dtype=DTYPE)
    keep = rng.random(shape) >= rate
    return keep.astype(DTYPE) / (1.0 - rate)


def uniform_init(shape: Tuple[int, ...], rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape).astype(DTYPE)
