"""Desk-scale linear training against the loss families in this package.

A linear model maps features (with a bias column) to action vectors; a
family adapter supplies per-sample loss values and subgradients in the
action, either a scoring rule through the softmax link or a hinge loss on
its native margin slice.  Training is full-batch subgradient descent with
a c/sqrt(t) schedule and averaged iterates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .hinge import (
    HingeLoss,
    complete_affine_rows,
    complete_clipped_rows,
)
from .scoring import ScoringRule, composite_gradient, softmax_rows
from .simplex import InvalidInputError, TrainingFailure

DIVERGENCE_CAP = 1e6


# ---------------------------------------------------------------------------
# Synthetic data.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Feature rows, integer labels and the generator metadata."""

    features: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.features, dtype=float))
        y = np.asarray(self.labels, dtype=int)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if len(X) != len(y):
            raise InvalidInputError("features and labels must align")
        if y.size and y.min() < 0:
            raise InvalidInputError("labels must be nonnegative")
        m = self.m
        if y.size and y.max() >= m:
            raise InvalidInputError("labels out of range")
        if len(X) < m:
            raise InvalidInputError("need at least one row per class")

    @property
    def m(self) -> int:
        if "m" in self.meta:
            return int(self.meta["m"])
        return int(self.labels.max()) + 1

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        return self.features.shape[1]


def simplex_frame(m: int, d: int) -> np.ndarray:
    """m centered points with unit pairwise distance, embedded in d dims.

    The frame lives in an (m-1)-dimensional subspace; extra dimensions are
    zero-padded and, when d < m-1, trailing coordinates are dropped (the
    points are then no longer equidistant).
    """
    if m < 1 or d < 1:
        raise InvalidInputError("m and d must be positive")
    centered = np.eye(m) - 1.0 / m
    # orthonormal basis of the centered hyperplane
    q, _ = np.linalg.qr(centered.T)
    coords = centered @ q[:, : m - 1] / math.sqrt(2.0)
    out = np.zeros((m, d))
    k = min(d, m - 1)
    out[:, :k] = coords[:, :k]
    return out


def synth_gaussians(m: int, d: int, n: int, separation: float, seed: int) -> Dataset:
    """Equal-prior Gaussian classes, unit noise, means separation apart."""
    if min(m, d, n) < 1:
        raise InvalidInputError("m, d and n must be positive")
    if separation < 0:
        raise InvalidInputError("separation must be nonnegative")
    rng = np.random.default_rng(seed)
    means = simplex_frame(m, d) * separation
    labels = rng.integers(0, m, size=n)
    X = means[labels] + rng.standard_normal((n, d))
    meta = {"seed": int(seed), "means": means.tolist(), "noise": 1.0, "m": int(m)}
    return Dataset(X, labels, meta)


def class_posteriors(means, X) -> np.ndarray:
    """Posterior class probabilities of the unit-noise equal-prior mixture."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    logits = X @ means.T - 0.5 * (means ** 2).sum(axis=1)[None, :]
    return softmax_rows(logits)


def nearest_mean_predictions(means, X) -> np.ndarray:
    return np.argmax(class_posteriors(means, X), axis=1)


def save_dataset(data: Dataset, path) -> None:
    header = ",".join([f"x{i + 1}" for i in range(data.d)] + ["y"])
    rows = np.column_stack([data.features, data.labels.astype(float)])
    np.savetxt(path, rows, delimiter=",", header=header, comments="",
               fmt="%.17g")


def load_dataset(path, meta: Optional[dict] = None) -> Dataset:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Dataset(rows[:, :-1], rows[:, -1].astype(int), meta or {})


# ---------------------------------------------------------------------------
# Models.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearModel:
    """Affine map from features to action vectors (last weight column is bias)."""

    weights: np.ndarray
    family: str
    link: str
    history: tuple = ()

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if not np.all(np.isfinite(W)):
            raise InvalidInputError("weights must be finite")
        object.__setattr__(self, "weights", W)

    def actions(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ self.weights[:, :-1].T + self.weights[:, -1][None, :]

    def to_json(self) -> str:
        return json.dumps({
            "weights": self.weights.tolist(),
            "family": self.family,
            "link": self.link,
            "history": list(self.history),
        })

    @staticmethod
    def from_json(text: str) -> "LinearModel":
        blob = json.loads(text)
        return LinearModel(np.asarray(blob["weights"], dtype=float),
                           blob["family"], blob["link"],
                           tuple(blob.get("history", ())))


def init_model(action_dim: int, d: int, family: str, link: str) -> LinearModel:
    return LinearModel(np.zeros((action_dim, d + 1)), family, link)


# ---------------------------------------------------------------------------
# Family adapters: per-sample values and subgradients in the action.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainableFamily:
    label: str
    action_dim: int
    link: str
    values: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grads: Callable[[np.ndarray, np.ndarray], np.ndarray]
    predict: Callable[[np.ndarray], np.ndarray]


def composite_family(rule: ScoringRule, m: Optional[int] = None) -> TrainableFamily:
    """A proper scoring rule trained through the softmax link on m scores."""
    m = m if m is not None else rule.m
    if m is None:
        raise InvalidInputError("cannot infer m; pass it explicitly")

    def values(Y, A):
        V = rule.values(softmax_rows(A))
        return V[np.arange(len(Y)), Y]

    if rule.label == "log_loss":
        def grads(Y, A):
            G = softmax_rows(A)
            G[np.arange(len(Y)), Y] -= 1.0
            return G
    else:
        def grads(Y, A):
            return np.stack([composite_gradient(rule, int(j), a)
                             for j, a in zip(Y, A)])

    return TrainableFamily(f"composite_{rule.label}", m, "softmax",
                           values, grads, predict_argmax)


def hinge_family(loss: HingeLoss) -> TrainableFamily:
    """A hinge loss trained directly on its native margin slice."""
    grads = _hinge_grads(loss)

    def values(Y, A):
        V = loss.values(A)
        return V[np.arange(len(Y)), Y]

    return TrainableFamily(loss.label, loss.action_dim, "margins",
                           values, grads, predict_by_score(loss))


def _hinge_grads(loss: HingeLoss) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    label = loss.label
    m = loss.m
    if label == "binary_hinge":
        def grads(Y, T):
            tau = T[:, 0]
            g = np.where(Y == 0, -(1.0 - tau > 0.0).astype(float),
                         (tau > 0.0).astype(float))
            return g[:, None]
        return grads

    if label == "sum_hinge":
        def grads(Y, T):
            n = len(T)
            tilde = complete_affine_rows(T)
            G = (tilde > 0.0).astype(float)
            G[np.arange(n), Y] = 0.0
            return G[:, : m - 1] - G[:, m - 1:]
        return grads

    if label == "max_hinge":
        def grads(Y, T):
            pos = (T > 0.0).astype(float)
            G = np.zeros_like(T)
            last = Y == m - 1
            G[last] = pos[last]
            idx = np.where(~last)[0]
            j = Y[idx]
            tj = T[idx, j]
            rival = (np.maximum(T[idx], 0.0).sum(axis=1)
                     - np.maximum(T[idx, j], 0.0))
            first = 1.0 - tj >= rival
            hit = idx[first]
            G[hit, Y[hit]] = -1.0
            soft = idx[~first]
            if soft.size:
                mask = (T[soft] > 0.0).astype(float)
                mask[np.arange(soft.size), Y[soft]] = 0.0
                G[soft] = mask
            return G
        return grads

    if label == "sorted_hinge":
        def grads(Y, T):
            n = len(T)
            tilde = complete_affine_rows(T)
            order = np.argsort(-tilde, axis=1, kind="stable")
            v = np.take_along_axis(tilde, order, axis=1)
            P = np.zeros((n, m + 1))
            P[:, 1:] = v.cumsum(axis=1)
            posn = np.empty_like(order)
            np.put_along_axis(posn, order,
                              np.broadcast_to(np.arange(m), (n, m)).copy(), axis=1)
            rows = np.arange(n)
            tj = tilde[rows, Y]
            pj = posn[rows, Y]
            i = np.arange(1, m)
            in_prefix = pj[:, None] <= i[None, :] - 2
            rivsum = np.where(in_prefix, P[:, i] - tj[:, None], P[:, i - 1])
            cand = (tj[:, None] + rivsum - 1.0) / i[None, :]
            best = np.argmax(cand, axis=1)
            cmax = cand[rows, best]
            i_star = best + 1
            G = np.zeros((n, m))
            G[rows, Y] -= 1.0
            act = cmax > 0.0
            inpref = pj <= i_star - 2
            cut = np.where(inpref, i_star, i_star - 1)
            N = (posn < cut[:, None]).astype(float)
            N[rows, Y] = np.where(inpref, N[rows, Y], 1.0)
            G += act[:, None] * N / i_star[:, None]
            return G[:, : m - 1] - G[:, m - 1:]
        return grads

    if label == "sorted_hinge_global":
        def grads(Y, T):
            n = len(T)
            tilde = complete_affine_rows(T)
            order = np.argsort(-tilde, axis=1, kind="stable")
            v = np.take_along_axis(tilde, order, axis=1)
            posn = np.empty_like(order)
            np.put_along_axis(posn, order,
                              np.broadcast_to(np.arange(m), (n, m)).copy(), axis=1)
            i = np.arange(1, m + 1)
            cand = (v.cumsum(axis=1) - 1.0) / i[None, :]
            i_star = np.argmax(cand, axis=1) + 1
            rows = np.arange(n)
            G = (posn < i_star[:, None]).astype(float) / i_star[:, None]
            G[rows, Y] -= 1.0
            return G[:, : m - 1] - G[:, m - 1:]
        return grads

    if label == "cost_hinge":
        C = loss.cost
        head = C.c[: m - 1, : m - 1]
        ref_col = C.c[: m - 1, m - 1]
        tail_row = C.c[m - 1, : m - 1]

        def grads(Y, T):
            pos = (T > 0.0).astype(float)
            R = np.maximum(T, 0.0)
            rest = R.sum(axis=1, keepdims=True) - R
            G = np.zeros_like(T)
            last = Y == m - 1
            G[last] = pos[last] * tail_row[None, :]
            idx = np.where(~last)[0]
            if idx.size:
                j = Y[idx]
                G[idx] = pos[idx] * head[j]
                slack_open = (1.0 - T[idx, j] - rest[idx, j]) > 0.0
                sub = idx[slack_open]
                if sub.size:
                    js = Y[sub]
                    coef = ref_col[js][:, None]
                    bump = pos[sub].copy()
                    bump[np.arange(sub.size), js] = 1.0
                    G[sub] -= coef * bump
            return G
        return grads

    raise InvalidInputError(f"no training subgradient for {label!r}")


# ---------------------------------------------------------------------------
# Prediction maps.
# ---------------------------------------------------------------------------

def predict_argmax(A: np.ndarray) -> np.ndarray:
    return np.argmax(np.atleast_2d(A), axis=1)


def predict_affine(A: np.ndarray) -> np.ndarray:
    return np.argmax(complete_affine_rows(A), axis=1)


def predict_clipped(A: np.ndarray) -> np.ndarray:
    return np.argmax(complete_clipped_rows(A), axis=1)


def predict_by_score(loss: HingeLoss) -> Callable[[np.ndarray], np.ndarray]:
    def predict(A: np.ndarray) -> np.ndarray:
        return np.argmax(-loss.values(A), axis=1)
    return predict


# ---------------------------------------------------------------------------
# Fitting and evaluation.
# ---------------------------------------------------------------------------

def fit(model: LinearModel, data: Dataset, family: TrainableFamily,
        steps: int, step_scale: float = 1.0, ridge: float = 0.0) -> LinearModel:
    """Full-batch subgradient descent with averaged iterates.

    The returned model carries the per-step objective trace; a blown-up
    objective raises a training failure with diagnostics.
    """
    if steps < 0:
        raise InvalidInputError("steps must be nonnegative")
    if model.weights.shape != (family.action_dim, data.d + 1):
        raise InvalidInputError("model shape does not match family and data")
    if steps == 0:
        return model
    X = np.hstack([data.features, np.ones((data.n, 1))])
    Y = data.labels
    W = model.weights.copy()
    avg = np.zeros_like(W)
    history = []
    for t in range(1, steps + 1):
        A = X @ W.T
        obj = float(family.values(Y, A).mean())
        if ridge > 0.0:
            obj += 0.5 * ridge * float((W[:, :-1] ** 2).sum())
        if not math.isfinite(obj) or obj > DIVERGENCE_CAP:
            raise TrainingFailure(
                f"objective {obj:.3e} at step {t} with step scale {step_scale}")
        history.append(obj)
        G = family.grads(Y, A)
        grad = G.T @ X / data.n
        if ridge > 0.0:
            grad[:, :-1] += ridge * W[:, :-1]
        W -= (step_scale / math.sqrt(t)) * grad
        avg += (W - avg) / t
    return LinearModel(avg, family.label, family.link, tuple(history))


def training_objective(model: LinearModel, data: Dataset,
                       family: TrainableFamily) -> float:
    A = model.actions(data.features)
    return float(family.values(data.labels, A).mean())


def evaluate_zero_one(model: LinearModel, data: Dataset,
                      prediction_map: Callable[[np.ndarray], np.ndarray]) -> float:
    picked = prediction_map(model.actions(data.features))
    return float(np.mean(picked != data.labels))
