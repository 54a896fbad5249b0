"""Generalized entropies, dissimilarity functions and the maps between them.

A concave entropy on the probability simplex and a convex dissimilarity
function on the nonnegative orthant determine each other through a
homogeneous change of variables.  This module implements both directions,
the named closed forms, Bregman divergences, convex conjugates, and the
numeric route from a loss back to the entropy it induces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .simplex import (
    CostMatrix,
    InvalidInputError,
    argmax_lowest,
    argmin_lowest,
    as_array,
    box_grid,
    simplex_grid,
)

# Surrogate for evaluating 0 * f(x / 0) at the simplex boundary: the factor
# 0 is replaced by this constant, approximating the recession limit.
BOUNDARY_EPS = 1e-10

# Dispatch window for the special power-mean indices 0 and 1.
LIMIT_TOL = 1e-8


@dataclass(frozen=True)
class EntropySpec:
    """A concave entropy on the simplex with a fixed supergradient selection."""

    value: Callable[[np.ndarray], float]
    supergradient: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"
    batch_value: Optional[Callable[[np.ndarray], np.ndarray]] = None
    batch_supergradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def values(self, Q) -> np.ndarray:
        Q = np.asarray(Q, dtype=float)
        if self.batch_value is not None:
            return np.asarray(self.batch_value(Q), dtype=float)
        return np.array([self.value(q) for q in Q], dtype=float)

    def supergradients(self, Q) -> np.ndarray:
        Q = np.asarray(Q, dtype=float)
        if self.batch_supergradient is not None:
            return np.asarray(self.batch_supergradient(Q), dtype=float)
        return np.array([self.supergradient(q) for q in Q], dtype=float)


@dataclass(frozen=True)
class DissimilaritySpec:
    """A convex function on the nonnegative orthant with a fixed subgradient."""

    value: Callable[[np.ndarray], float]
    subgradient: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"
    batch_value: Optional[Callable[[np.ndarray], np.ndarray]] = None
    batch_subgradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def values(self, T) -> np.ndarray:
        T = np.asarray(T, dtype=float)
        if self.batch_value is not None:
            return np.asarray(self.batch_value(T), dtype=float)
        return np.array([self.value(t) for t in T], dtype=float)

    def subgradients(self, T) -> np.ndarray:
        T = np.asarray(T, dtype=float)
        if self.batch_subgradient is not None:
            return np.asarray(self.batch_subgradient(T), dtype=float)
        return np.array([self.subgradient(t) for t in T], dtype=float)


def entropy_from_dissimilarity(f: DissimilaritySpec) -> EntropySpec:
    """Entropy induced by a convex dissimilarity via probability ratios.

    The last class plays the reference role; a zero reference probability is
    evaluated through the recession surrogate BOUNDARY_EPS.
    """

    def value(eta) -> float:
        eta = as_array(eta)
        c = eta[-1] if eta[-1] > 0 else BOUNDARY_EPS
        return -c * float(f.value(eta[:-1] / c))

    def supergradient(eta) -> np.ndarray:
        eta = as_array(eta)
        c = eta[-1] if eta[-1] > 0 else BOUNDARY_EPS
        u = eta[:-1] / c
        g = np.asarray(f.subgradient(u), dtype=float)
        return np.concatenate([-g, [float(u @ g) - float(f.value(u))]])

    batch = None
    if f.batch_value is not None:
        def batch(Q):
            Q = np.asarray(Q, dtype=float)
            c = np.where(Q[:, -1] > 0, Q[:, -1], BOUNDARY_EPS)
            return -c * f.values(Q[:, :-1] / c[:, None])

    return EntropySpec(value, supergradient, label="from_" + f.label, batch_value=batch)


def dissimilarity_from_entropy(H: EntropySpec) -> DissimilaritySpec:
    """Dissimilarity induced by an entropy; inverse of entropy_from_dissimilarity."""

    def _to_simplex(t):
        t = as_array(t)
        tdot = 1.0 + float(t.sum())
        return np.append(t, 1.0) / tdot, tdot

    def value(t) -> float:
        q, tdot = _to_simplex(t)
        return -tdot * float(H.value(q))

    def subgradient(t) -> np.ndarray:
        q, tdot = _to_simplex(t)
        g = np.asarray(H.supergradient(q), dtype=float)
        return (float(q @ g) - float(H.value(q))) - g[:-1]

    batch = None
    if H.batch_value is not None:
        def batch(T):
            T = np.asarray(T, dtype=float)
            tdot = 1.0 + T.sum(axis=1)
            Q = np.hstack([T, np.ones((len(T), 1))]) / tdot[:, None]
            return -tdot * H.values(Q)

    return DissimilaritySpec(value, subgradient, label="from_" + H.label, batch_value=batch)


def entropy_zero_one(eta) -> float:
    """One minus the largest class probability."""
    eta = as_array(eta)
    return float(1.0 - eta.max())


def zero_one_entropy() -> EntropySpec:
    def grad(q) -> np.ndarray:
        q = as_array(q)
        g = np.zeros(q.size)
        g[argmax_lowest(q)] = -1.0
        return g

    def batch(Q):
        return 1.0 - np.asarray(Q, dtype=float).max(axis=1)

    def batch_grad(Q):
        Q = np.asarray(Q, dtype=float)
        G = np.zeros_like(Q)
        G[np.arange(len(Q)), Q.argmax(axis=1)] = -1.0
        return G

    return EntropySpec(entropy_zero_one, grad, "zero_one", batch, batch_grad)


def entropy_cost_weighted(eta, C) -> float:
    """Smallest expected cost over reports."""
    eta = as_array(eta)
    c = as_array(C)
    if eta.size != c.shape[0]:
        raise InvalidInputError("probability and cost dimensions differ")
    return float((eta @ c).min())


def cost_weighted_entropy(C) -> EntropySpec:
    c = as_array(C)

    def value(eta) -> float:
        return entropy_cost_weighted(eta, c)

    def grad(q) -> np.ndarray:
        q = as_array(q)
        return c[:, argmin_lowest(q @ c)].copy()

    def batch(Q):
        return (np.asarray(Q, dtype=float) @ c).min(axis=1)

    def batch_grad(Q):
        idx = (np.asarray(Q, dtype=float) @ c).argmin(axis=1)
        return c[:, idx].T

    return EntropySpec(value, grad, "cost_weighted", batch, batch_grad)


def shannon_entropy() -> EntropySpec:
    def value(q) -> float:
        q = as_array(q)
        pos = q[q > 0]
        return float(-(pos * np.log(pos)).sum())

    def grad(q) -> np.ndarray:
        q = np.maximum(as_array(q), 1e-300)
        return -np.log(q) - 1.0

    def batch(Q):
        Q = np.asarray(Q, dtype=float)
        safe = np.where(Q > 0, Q, 1.0)
        return -(safe * np.log(safe)).sum(axis=1)

    def batch_grad(Q):
        return -np.log(np.maximum(np.asarray(Q, dtype=float), 1e-300)) - 1.0

    return EntropySpec(value, grad, "shannon", batch, batch_grad)


def _power_kind(beta: float) -> str:
    if np.isinf(beta):
        return "max"
    if abs(beta) < LIMIT_TOL:
        return "geometric"
    if abs(beta - 1.0) < LIMIT_TOL:
        return "shannon"
    if beta < 0:
        raise InvalidInputError("power index must be nonnegative")
    return "power"


def power_entropy(eta, beta: float, rescaled: bool = True) -> float:
    """Power-mean entropy of index beta.

    The raw form is the beta-power sum norm, negated above index one so it
    stays concave.  The rescaled form is pinned to 1 at uniform and 0 at the
    vertices, and extends continuously to the indices 0, 1 and infinity.
    """
    eta = as_array(eta)
    m = eta.size
    kind = _power_kind(beta)
    if kind != "power":
        if not rescaled:
            raise InvalidInputError("indices 0, 1 and infinity exist only rescaled")
        if kind == "max":
            return float((1.0 - eta.max()) / (1.0 - 1.0 / m))
        if kind == "geometric":
            return float(m * np.prod(eta) ** (1.0 / m))
        pos = eta[eta > 0]
        return float(-(pos * np.log(pos)).sum() / np.log(m))
    if rescaled and beta < 1 and (1.0 / beta - 1.0) * np.log(m) > 300:
        # Deep in the geometric regime both numerator and denominator
        # overflow; their ratio stays stable in log space.
        lognorm = np.log((eta ** beta).sum()) / beta
        return float(np.exp(lognorm - (1.0 / beta - 1.0) * np.log(m)))
    norm = float((eta ** beta).sum() ** (1.0 / beta))
    if not rescaled:
        return norm if beta < 1 else -norm
    return (norm - 1.0) / (m ** (1.0 / beta - 1.0) - 1.0)


def power_entropy_spec(beta: float, rescaled: bool = True) -> EntropySpec:
    kind = _power_kind(beta)
    if kind != "power" and not rescaled:
        raise InvalidInputError("indices 0, 1 and infinity exist only rescaled")

    def value(q) -> float:
        return power_entropy(q, beta, rescaled)

    def batch(Q):
        Q = np.asarray(Q, dtype=float)
        m = Q.shape[1]
        if kind == "max":
            return (1.0 - Q.max(axis=1)) / (1.0 - 1.0 / m)
        if kind == "geometric":
            return m * np.prod(Q, axis=1) ** (1.0 / m)
        if kind == "shannon":
            safe = np.where(Q > 0, Q, 1.0)
            return -(safe * np.log(safe)).sum(axis=1) / np.log(m)
        norm = (Q ** beta).sum(axis=1) ** (1.0 / beta)
        if not rescaled:
            return norm if beta < 1 else -norm
        return (norm - 1.0) / (m ** (1.0 / beta - 1.0) - 1.0)

    def batch_grad(Q):
        Q = np.asarray(Q, dtype=float)
        m = Q.shape[1]
        if kind == "max":
            G = np.zeros_like(Q)
            G[np.arange(len(Q)), Q.argmax(axis=1)] = -1.0 / (1.0 - 1.0 / m)
            return G
        if kind == "geometric":
            geo = np.prod(Q, axis=1) ** (1.0 / m)
            return geo[:, None] / Q
        if kind == "shannon":
            return (-np.log(np.maximum(Q, 1e-300)) - 1.0) / np.log(m)
        norm = (Q ** beta).sum(axis=1) ** (1.0 / beta)
        core = (Q / norm[:, None]) ** (beta - 1.0)
        if not rescaled:
            return core if beta < 1 else -core
        return core / (m ** (1.0 / beta - 1.0) - 1.0)

    def grad(q) -> np.ndarray:
        return batch_grad(as_array(q)[None, :])[0]

    name = {"max": "power_max", "geometric": "power_geometric",
            "shannon": "power_shannon"}.get(kind, "power")
    return EntropySpec(value, grad, name, batch, batch_grad)


def entropy_of_loss(loss, actions, eta) -> float:
    """Numeric infimum over the sampled actions of the expected loss at eta.

    `loss` maps an (K, d) action block to a (K, m) table of per-label values;
    refining the action sample can only lower the result.
    """
    return float(entropy_of_loss_many(loss, actions, as_array(eta)[None, :])[0])


def entropy_of_loss_many(loss, actions, etas, chunk: int = 256) -> np.ndarray:
    """Vectorized entropy_of_loss for an (N, m) block of probability rows."""
    A = np.asarray(actions, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.size == 0:
        raise InvalidInputError("empty action sample")
    table = np.asarray(loss(A) if callable(loss) else loss, dtype=float)
    finite = np.isfinite(table)
    safe = np.where(finite, table, 0.0)
    blocked = (~finite).astype(float)
    etas = np.asarray(etas, dtype=float)
    out = np.empty(len(etas))
    for a in range(0, len(etas), chunk):
        block = etas[a:a + chunk]
        risks = block @ safe.T
        risks[(block > 0) @ blocked.T > 0] = np.inf
        out[a:a + chunk] = risks.min(axis=1)
    return out


def _dissimilarity_values(f: DissimilaritySpec, T: np.ndarray) -> np.ndarray:
    vals = f.values(T)
    return np.where(np.isnan(vals), np.inf, vals)


def conjugate_numeric(f: DissimilaritySpec, s, box: float = 8.0,
                      points: int = 33, rounds: int = 2, zoom: float = 8.0) -> float:
    """Convex conjugate sup_t <s, t> - f(t) over the orthant, by grid search.

    The box doubles when the maximizer lands on its outer boundary; still
    being there after two doublings declares the supremum infinite.  Each
    refinement round recenters a window on the best point found so far,
    shrinking it by `zoom` whenever that point is interior to the window
    (recentering without shrinking otherwise, which lets the search walk
    along flat ridges).
    """
    s = as_array(s)
    dims = s.size
    hi = float(box)
    for _ in range(3):
        T = box_grid(0.0, hi, points, dims)
        vals = T @ s - _dissimilarity_values(f, T)
        k = int(np.argmax(vals))
        best_t, best_v = T[k], float(vals[k])
        if np.all(best_t < hi - 1e-12):
            break
        hi *= 2.0
    else:
        return np.inf
    width = hi / zoom
    unit = box_grid(0.0, 1.0, points, dims)
    for _ in range(rounds):
        lo = np.maximum(best_t - width / 2.0, 0.0)
        T = lo[None, :] + unit * width
        vals = T @ s - _dissimilarity_values(f, T)
        k = int(np.argmax(vals))
        if vals[k] > best_v:
            best_t, best_v = T[k], float(vals[k])
        step = width / (points - 1)
        at_low = (T[k] <= lo + 0.5 * step) & (lo > 0)
        at_high = T[k] >= lo + width - 0.5 * step
        if not (at_low.any() or at_high.any()):
            width /= zoom
    return best_v


def conjugate_cost_weighted(C, s) -> float:
    """Conjugate of the cost-weighted dissimilarity at score vector s.

    Minimizes the expected cost of the last report over simplex points whose
    first m-1 expected costs dominate -s, by enumerating basic feasible
    points for small m and by grid refinement otherwise; infeasible scores
    give +inf.
    """
    c = as_array(C)
    m = c.shape[0]
    s = as_array(s)
    if s.size != m - 1:
        raise InvalidInputError("score dimension must be m - 1")
    # Inequalities a_i . lam >= b_i: simplex nonnegativity plus score caps.
    ineq_a = np.vstack([np.eye(m), -c[: m - 1]])
    ineq_b = np.concatenate([np.zeros(m), s])
    if m <= 6:
        best = np.inf
        for idx in itertools.combinations(range(2 * m - 1), m - 1):
            rows = list(idx)
            A = np.vstack([np.ones(m), ineq_a[rows]])
            b = np.concatenate([[1.0], ineq_b[rows]])
            try:
                lam = np.linalg.solve(A, b)
            except np.linalg.LinAlgError:
                continue
            if np.any(ineq_a @ lam - ineq_b < -1e-9):
                continue
            best = min(best, float(c[m - 1] @ lam))
        return best
    grid = simplex_grid(m, 24)
    feas = np.all(grid @ ineq_a.T - ineq_b >= -1e-9, axis=1)
    if not feas.any():
        return np.inf
    return float((grid[feas] @ c[m - 1]).min())


def bregman(H: EntropySpec, eta, q) -> float:
    """Divergence of eta from the reference q under the entropy's gradient at q."""
    eta = as_array(eta)
    q = as_array(q)
    g = np.asarray(H.supergradient(q), dtype=float)
    return float(H.value(q)) - float(H.value(eta)) - float((q - eta) @ g)


def bregman_many(H: EntropySpec, etas, qs) -> np.ndarray:
    """Row-wise bregman for (N, m) blocks."""
    etas = np.asarray(etas, dtype=float)
    qs = np.asarray(qs, dtype=float)
    G = H.supergradients(qs)
    return H.values(qs) - H.values(etas) - ((qs - etas) * G).sum(axis=1)


_MESH_STEPS = {2: 840, 3: 210, 4: 60}


@dataclass(frozen=True)
class EntropyLoss:
    """Loss built from an entropy by best response over the simplex.

    The action is a full-length score vector; adding a constant to every
    coordinate does not change the loss.
    """

    H: EntropySpec
    m: int
    steps: Optional[int] = None

    def __post_init__(self):
        steps = self.steps if self.steps is not None else _MESH_STEPS.get(self.m, 30)
        mesh = simplex_grid(self.m, steps)
        object.__setattr__(self, "_mesh", mesh)
        object.__setattr__(self, "_hvals", self.H.values(mesh))

    def support(self, gammas) -> np.ndarray:
        """max over the simplex of <gamma, eta> + H(eta), one row per gamma."""
        G = np.atleast_2d(np.asarray(gammas, dtype=float))
        mesh = self._mesh
        out = np.empty(len(G))
        chunk = max(1, (1 << 22) // max(1, len(mesh)))
        for a in range(0, len(G), chunk):
            block = G[a:a + chunk] @ mesh.T + self._hvals
            out[a:a + chunk] = block.max(axis=1)
        return out

    def values(self, gammas) -> np.ndarray:
        """Loss table, one row per action, one column per label."""
        G = np.atleast_2d(np.asarray(gammas, dtype=float))
        if G.shape[1] != self.m:
            raise InvalidInputError("action dimension must be m")
        return self.support(G)[:, None] - G


def loss_from_entropy(H: EntropySpec, j: int, gamma, steps: Optional[int] = None) -> float:
    """Single-point evaluation of the best-response loss above."""
    gamma = as_array(gamma)
    rule = EntropyLoss(H, gamma.size, steps)
    return float(rule.values(gamma[None, :])[0, j])
