"""Core vector types, tolerances, norms and grid helpers.

Downstream modules operate on plain float arrays; the wrapper types here
validate once at the API boundary.  Every value is immutable after
construction and every function is pure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

# Centralized tolerances.
TOL_CONSTRUCT = 1e-12  # identities that must hold to construction precision
TOL_SLACK = 1e-9       # inequality slack: anything below -TOL_SLACK is a violation
TOL_NUMERIC = 1e-3     # agreement between closed forms and numeric infima


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class ConfigurationError(RuntimeError):
    """Requested components cannot be combined as asked."""


class TrainingFailure(RuntimeError):
    """Optimization did not produce a usable model."""


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


def as_array(x) -> np.ndarray:
    """Unwrap the value types below, or coerce an array-like to floats."""
    if isinstance(x, ProbVector):
        return x.p
    if isinstance(x, Margin):
        return x.v
    if isinstance(x, CostMatrix):
        return x.c
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class ProbVector:
    """A point of the probability simplex over m >= 2 classes."""

    p: np.ndarray

    def __post_init__(self):
        p = _frozen(self.p)
        if p.ndim != 1 or p.size < 2:
            raise InvalidInputError("need a 1-d vector with m >= 2 entries")
        if np.any(p < 0):
            raise InvalidInputError("negative probability entry")
        if abs(float(p.sum()) - 1.0) > TOL_CONSTRUCT:
            raise InvalidInputError("entries must sum to 1")
        object.__setattr__(self, "p", p)

    @property
    def m(self) -> int:
        return self.p.size


@dataclass(frozen=True)
class Margin:
    """A finite action vector; dimension is m or m-1 depending on the loss."""

    v: np.ndarray

    def __post_init__(self):
        v = _frozen(self.v)
        if v.ndim != 1 or v.size < 1:
            raise InvalidInputError("need a 1-d action vector")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("margin entries must be finite")
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.v.size


@dataclass(frozen=True)
class CostMatrix:
    """Nonnegative m x m misclassification costs with a zero diagonal."""

    c: np.ndarray

    def __post_init__(self):
        c = _frozen(self.c)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 2:
            raise InvalidInputError("need a square cost matrix with m >= 2")
        if np.any(c < 0):
            raise InvalidInputError("costs must be nonnegative")
        if np.any(np.diag(c) != 0):
            raise InvalidInputError("diagonal costs must be zero")
        if np.any(c.max(axis=1) <= 0):
            raise InvalidInputError("every row needs a positive off-diagonal cost")
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.c.shape[0]

    def row_max(self) -> np.ndarray:
        """Worst cost per true class."""
        return self.c.max(axis=1)

    def complement(self) -> np.ndarray:
        """Row max minus cost, entrywise; the savings matrix used by cost bounds."""
        return self.row_max()[:, None] - self.c


def cost_zero_one(m: int) -> CostMatrix:
    """Unit cost for every mistake."""
    return CostMatrix(np.ones((m, m)) - np.eye(m))


def cost_class_weighted(weights) -> CostMatrix:
    """Cost w_j for misreporting true class j, whatever the report."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 2 or np.any(w <= 0):
        raise InvalidInputError("need positive per-class weights")
    c = np.tile(w[:, None], (1, w.size))
    np.fill_diagonal(c, 0.0)
    return CostMatrix(c)


def norm_top2(b) -> float:
    """Sum of the two largest absolute entries: max over pairs j != k of |b_j| + |b_k|."""
    a = np.abs(as_array(b))
    if a.ndim != 1 or a.size < 2:
        raise InvalidInputError("need at least two entries")
    return float(np.partition(a, a.size - 2)[-2:].sum())


def norm_l1(b) -> float:
    """Sum of absolute entries."""
    return float(np.abs(as_array(b)).sum())


def argmax_lowest(b) -> int:
    """Index of the maximum; ties go to the lowest index."""
    return int(np.argmax(as_array(b)))


def argmin_lowest(b) -> int:
    """Index of the minimum; ties go to the lowest index."""
    return int(np.argmin(as_array(b)))


def make_prob(v, eps: float = 1e-12) -> ProbVector:
    """Validate and lightly repair a probability vector.

    Entries may undershoot zero by at most 1e-12 and the total may be off by
    1e-9; anything worse raises.  Entries are clamped to [eps, 1] and the
    result renormalized.  Passing eps=0 keeps exact zeros.
    """
    a = np.asarray(v, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise InvalidInputError("need a 1-d vector with m >= 2 entries")
    if np.any(a < -1e-12):
        raise InvalidInputError("negative entry")
    if abs(float(a.sum()) - 1.0) > 1e-9:
        raise InvalidInputError("entries must sum to 1 within 1e-9")
    p = np.clip(a, eps, 1.0)
    return ProbVector(p / p.sum())


def uniform_prob(m: int) -> ProbVector:
    return make_prob(np.full(m, 1.0 / m))


def expected_value(weights, values) -> float:
    """Weighted sum where zero weight kills an infinite value."""
    w = np.asarray(weights, dtype=float)
    x = np.asarray(values, dtype=float)
    nz = w != 0.0
    return float(w[nz] @ x[nz])


def expected_rows(values, weights) -> np.ndarray:
    """Row-wise weighted sums of an (N, m) table, zero weight killing infinities."""
    table = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    nz = w != 0.0
    return table[:, nz] @ w[nz]


def simplex_grid(m: int, steps: int) -> np.ndarray:
    """All barycentric lattice points k/steps on the m-simplex, shape (K, m)."""
    if m < 2 or steps < 1:
        raise InvalidInputError("need m >= 2 and steps >= 1")
    if m == 2:
        i = np.arange(steps + 1, dtype=float)
        return np.column_stack([i, steps - i]) / steps
    if m == 3:
        i, j = np.where(np.add.outer(np.arange(steps + 1), np.arange(steps + 1)) <= steps)
        return np.column_stack([i, j, steps - i - j]).astype(float) / steps
    cuts = np.array(list(itertools.combinations(range(steps + m - 1), m - 1)))
    padded = np.hstack([
        np.full((len(cuts), 1), -1),
        cuts,
        np.full((len(cuts), 1), steps + m - 1),
    ])
    return (np.diff(padded, axis=1) - 1).astype(float) / steps


def box_grid(low: float, high: float, points: int, dims: int) -> np.ndarray:
    """Uniform product mesh over [low, high]^dims, shape (points**dims, dims)."""
    if points < 2 or dims < 1:
        raise InvalidInputError("need points >= 2 and dims >= 1")
    axis = np.linspace(low, high, points)
    mesh = np.meshgrid(*([axis] * dims), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def sample_simplex(rng: np.random.Generator, m: int, n: int, alpha: float = 1.0) -> np.ndarray:
    """n Dirichlet(alpha) draws on the m-simplex, one per row."""
    return rng.dirichlet(np.full(m, alpha), size=n)
