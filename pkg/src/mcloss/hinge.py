"""Hinge-like convex surrogate losses on margin actions, with the prediction
maps that send margins back to class scores.

Margin actions come in two sizes: length m-1 slices completed internally to a
full vector, and length m vectors used directly.  Completions:

  clipped:  append 1 - sum of positive parts (components may sum below one)
  affine:   append 1 - sum (components always sum to one)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .simplex import CostMatrix, InvalidInputError, as_array, cost_zero_one

SUM_ZERO_TOL = 1e-9


def _rows(A, dim: int, what: str) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != dim:
        raise InvalidInputError(f"{what} expects actions of length {dim}")
    return A


def complete_clipped(tau) -> np.ndarray:
    """Append one minus the sum of positive parts."""
    tau = as_array(tau)
    return np.append(tau, 1.0 - np.maximum(tau, 0.0).sum())


def complete_affine(tau) -> np.ndarray:
    """Append one minus the sum; the result always sums to one."""
    tau = as_array(tau)
    return np.append(tau, 1.0 - tau.sum())


def complete_clipped_rows(T: np.ndarray) -> np.ndarray:
    T = np.atleast_2d(np.asarray(T, dtype=float))
    return np.hstack([T, 1.0 - np.maximum(T, 0.0).sum(axis=1, keepdims=True)])


def complete_affine_rows(T: np.ndarray) -> np.ndarray:
    T = np.atleast_2d(np.asarray(T, dtype=float))
    return np.hstack([T, 1.0 - T.sum(axis=1, keepdims=True)])


@dataclass(frozen=True)
class HingeLoss:
    """A convex loss over margin (or probability) actions."""

    label: str
    m: int
    action_dim: int
    table: Callable[[np.ndarray], np.ndarray]
    cost: Optional[CostMatrix] = None

    def values(self, A) -> np.ndarray:
        return self.table(_rows(A, self.action_dim, self.label))

    def value(self, j: int, action) -> float:
        return float(self.values(as_array(action)[None, :])[0, j])

    def score(self, action) -> np.ndarray:
        """Negated loss vector; its argmax is the predicted class."""
        return -self.values(as_array(action)[None, :])[0]


def score_by_loss(loss: HingeLoss, action) -> np.ndarray:
    return loss.score(action)


def binary_hinge() -> HingeLoss:
    def table(T):
        tau = T[:, 0]
        return np.column_stack([np.maximum(0.0, 1.0 - tau), np.maximum(0.0, tau)])

    return HingeLoss("binary_hinge", m=2, action_dim=1, table=table)


def cost_linear(C: CostMatrix) -> HingeLoss:
    """Expected-cost loss on probability actions; linear, hence not proper."""
    c = C.c

    def table(L):
        return L @ c.T

    return HingeLoss("cost_linear", m=C.m, action_dim=C.m, table=table, cost=C)


def cost_hinge(C: CostMatrix) -> HingeLoss:
    """Cost-weighted hinge on margin slices.

    Convex whenever each row's cost against the reference class is no larger
    than its other costs; arbitrary nonnegative matrices are accepted and the
    simplex restriction still matches the linear expected cost.
    """
    c = C.c
    m = C.m
    head = c[: m - 1, : m - 1]
    ref_col = c[: m - 1, m - 1]
    tail_row = c[m - 1, : m - 1]

    def table(T):
        R = np.maximum(T, 0.0)
        rest = R.sum(axis=1, keepdims=True) - R
        slack = np.maximum(1.0 - T - rest, 0.0)
        lead = R @ head.T + slack * ref_col
        tail = R @ tail_row
        return np.hstack([lead, tail[:, None]])

    return HingeLoss("cost_hinge", m=m, action_dim=m - 1, table=table, cost=C)


def max_hinge(m: int) -> HingeLoss:
    """Unit-cost case of the cost hinge: max(1 - tau_j, sum of rival positive parts)."""

    def table(T):
        R = np.maximum(T, 0.0)
        total = R.sum(axis=1, keepdims=True)
        lead = np.maximum(1.0 - T, total - R)
        return np.hstack([lead, total])

    return HingeLoss("max_hinge", m=m, action_dim=m - 1, table=table,
                     cost=cost_zero_one(m))


def sum_hinge(m: int) -> HingeLoss:
    """Sum of rival positive parts of the affine completion."""

    def table(T):
        G = np.maximum(complete_affine_rows(T), 0.0)
        return G.sum(axis=1, keepdims=True) - G

    return HingeLoss("sum_hinge", m=m, action_dim=m - 1, table=table)


def sum_hinge_margin(m: int) -> HingeLoss:
    """Same family on sum-zero margin vectors of length m."""

    def table(G):
        if np.abs(G.sum(axis=1)).max() > SUM_ZERO_TOL:
            raise InvalidInputError("margin vectors must sum to zero")
        P = np.maximum(1.0 + G, 0.0)
        return P.sum(axis=1, keepdims=True) - P

    return HingeLoss("sum_hinge_margin", m=m, action_dim=m, table=table)


def _sorted_prefix_maxima(V: np.ndarray) -> np.ndarray:
    """max_i (sum of i largest entries - 1) / i, for each row of V."""
    vals = -np.sort(-V, axis=1)
    i = np.arange(1, V.shape[1] + 1)
    return ((vals.cumsum(axis=1) - 1.0) / i).max(axis=1)


def sorted_hinge(m: int) -> HingeLoss:
    """Per-label maximum of running rival averages over the affine completion.

    One stable descending sort serves all labels: a label's rival prefix either
    avoids its own sorted position or swallows it, so global prefix sums with
    exclusion bookkeeping recover every per-label scan.
    """

    def table(T):
        tilde = complete_affine_rows(T)
        n = len(tilde)
        order = np.argsort(-tilde, axis=1, kind="stable")
        v = np.take_along_axis(tilde, order, axis=1)
        pos = np.empty_like(order)
        np.put_along_axis(pos, order, np.broadcast_to(np.arange(m), (n, m)).copy(), axis=1)
        padded = np.zeros((n, m + 1))
        padded[:, 1:] = v.cumsum(axis=1)
        i = np.arange(1, m)  # prefix lengths
        own = (tilde[:, :, None] + padded[:, None, i - 1] - 1.0) / i
        merged = (padded[:, None, i] - 1.0) / i
        cand = np.where(pos[:, :, None] >= i - 1, own, merged)
        S = np.maximum(cand.max(axis=2), 0.0)
        return 1.0 - tilde + S

    return HingeLoss("sorted_hinge", m=m, action_dim=m - 1, table=table)


def sorted_hinge_margin(m: int) -> HingeLoss:
    """Translation-invariant variant on full margin vectors: one global scan."""

    def table(G):
        S = _sorted_prefix_maxima(G)
        return 1.0 - G + S[:, None]

    return HingeLoss("sorted_hinge_margin", m=m, action_dim=m, table=table)


def sorted_hinge_global(m: int) -> HingeLoss:
    """Global-scan variant on margin slices via the affine completion."""
    inner = sorted_hinge_margin(m)

    def table(T):
        return inner.table(complete_affine_rows(T))

    return HingeLoss("sorted_hinge_global", m=m, action_dim=m - 1, table=table)


_HINGE_BUILDERS = {
    "binary_hinge": lambda m, C: binary_hinge(),
    "cost_linear": lambda m, C: cost_linear(C if C is not None else cost_zero_one(m)),
    "cost_hinge": lambda m, C: cost_hinge(C if C is not None else cost_zero_one(m)),
    "max_hinge": lambda m, C: max_hinge(m),
    "sum_hinge": lambda m, C: sum_hinge(m),
    "sum_hinge_margin": lambda m, C: sum_hinge_margin(m),
    "sorted_hinge": lambda m, C: sorted_hinge(m),
    "sorted_hinge_margin": lambda m, C: sorted_hinge_margin(m),
    "sorted_hinge_global": lambda m, C: sorted_hinge_global(m),
}


def hinge_loss(label: str, m: int, cost: Optional[CostMatrix] = None) -> HingeLoss:
    """Build a hinge family by name; cost matrices default to unit costs."""
    try:
        builder = _HINGE_BUILDERS[label]
    except KeyError:
        raise InvalidInputError(f"unknown hinge family {label!r}") from None
    return builder(m, cost)
