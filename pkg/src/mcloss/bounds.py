"""Regret machinery and numerical verification of the comparison bounds.

Everything here measures one-sided inequalities between a classification
regret (zero-one or cost-weighted) and the regret of a richer loss.  Checks
return a BoundReport with the worst signed slack and reproducible witnesses;
infima over distributions are mesh infima whose densities are set so the
discretisation error sits well below the asserted tolerances.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.ndimage import minimum_filter1d
from scipy.optimize import nnls

from .entropy import EntropySpec, entropy_zero_one
from .hinge import (
    HingeLoss,
    complete_affine_rows,
    complete_clipped_rows,
    cost_hinge,
    sorted_hinge,
)
from .scoring import ScoringRule, paired_risks, risk_matrix
from .simplex import (
    ConfigurationError,
    CostMatrix,
    InvalidInputError,
    as_array,
    box_grid,
    cost_zero_one,
    make_prob,
    sample_simplex,
    simplex_grid,
)

VIOLATION_TOL = 1e-9


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _rows(x, m: int) -> np.ndarray:
    out = np.atleast_2d(np.asarray(x, dtype=float))
    if out.shape[1] != m:
        raise InvalidInputError(f"expected rows of length {m}")
    return out


def _norm_top2_rows(B: np.ndarray) -> np.ndarray:
    """Row-wise sum of the two largest absolute entries."""
    a = np.abs(B)
    part = np.partition(a, a.shape[1] - 2, axis=1)
    return part[:, -1] + part[:, -2]


# ---------------------------------------------------------------------------
# Reference classification losses over score vectors.
#
# Both take an action in R^m and charge the class picked by the lowest
# maximising index, so probability reports, completed margins and negated
# loss vectors all share one evaluator.
# ---------------------------------------------------------------------------

def zero_one_loss(m: int) -> HingeLoss:
    def table(S):
        S = np.asarray(S, dtype=float)
        out = np.ones_like(S)
        out[np.arange(len(S)), S.argmax(axis=1)] = 0.0
        return out

    return HingeLoss("zero_one", m, m, table, cost=cost_zero_one(m))


def cost_weighted_loss(C: CostMatrix) -> HingeLoss:
    def table(S):
        S = np.asarray(S, dtype=float)
        return C.c[:, S.argmax(axis=1)].T

    return HingeLoss("cost_weighted", C.m, C.m, table, cost=C)


def zero_one_regrets(etas, scores) -> np.ndarray:
    """Regret of classifying by the largest score component."""
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    picked = scores.argmax(axis=1)
    chosen = np.take_along_axis(etas, picked[:, None], axis=1)[:, 0]
    return etas.max(axis=1) - chosen


def cost_weighted_regrets(C: CostMatrix, etas, scores) -> np.ndarray:
    """Expected-cost regret of classifying by the largest score component."""
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    decision_costs = etas @ C.c
    picked = scores.argmax(axis=1)
    chosen = np.take_along_axis(decision_costs, picked[:, None], axis=1)[:, 0]
    return chosen - decision_costs.min(axis=1)


# ---------------------------------------------------------------------------
# Generic regret and entropy certification.
# ---------------------------------------------------------------------------

def _probe_actions(loss, m: int) -> np.ndarray:
    dim = getattr(loss, "action_dim", m)
    if dim == m:
        return simplex_grid(m, 8)
    return box_grid(0.0, 1.0, 2, dim)


def certify_entropy(loss, entropy: EntropySpec, etas=None, actions=None,
                    tol: float = 1e-3) -> float:
    """Max gap between the claimed entropy and the probed minimal risk.

    Raises a configuration error when the gap exceeds ``tol``.  The default
    probes place every vertex completion (margin losses) or the full report
    grid (probability losses) in the action set, so the minimal risks of the
    named families are attained exactly.
    """
    m = loss.m
    if actions is None:
        actions = _probe_actions(loss, m)
    if etas is None:
        etas = simplex_grid(m, 6)
    etas = _rows(etas, m)
    values = loss.values(np.atleast_2d(np.asarray(actions, dtype=float)))
    claimed = entropy.values(etas)
    risks = risk_matrix(values, etas)
    gap = float(np.max(np.abs(risks.min(axis=1) - claimed)))
    if not np.isfinite(gap) or gap > tol:
        raise ConfigurationError(
            f"entropy inconsistent with {loss.label}: probe gap {gap!r}")
    return gap


def regret(loss, entropy: EntropySpec, eta, action, certify: bool = False) -> float:
    """Expected loss at the action minus the entropy at eta."""
    eta = as_array(eta)
    if certify:
        certify_entropy(loss, entropy)
    values = loss.values(as_array(action)[None, :])
    return float(paired_risks(values, eta[None, :])[0]) - float(entropy.value(eta))


# ---------------------------------------------------------------------------
# Bound reports.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """Outcome of a sweep over one inequality family."""

    bound_id: str
    m: int
    samples: int
    worst_slack: float
    violations: int
    witness: dict = field(default_factory=dict)
    seconds: float = 0.0

    def ok(self) -> bool:
        return self.violations == 0

    def row(self) -> dict:
        return {
            "bound": self.bound_id,
            "m": self.m,
            "samples": self.samples,
            "worst_slack": self.worst_slack,
            "violations": self.violations,
            "seconds": self.seconds,
        }


def _report(bound_id: str, m: int, slacks: np.ndarray, witnesses, t0: float,
            samples: Optional[int] = None) -> BoundReport:
    slacks = np.asarray(slacks, dtype=float)
    finite = np.where(np.isnan(slacks), np.inf, slacks)
    worst = int(np.argmin(finite))
    violations = int((finite < -VIOLATION_TOL).sum())
    witness = witnesses(worst) if callable(witnesses) else dict(witnesses)
    witness["slack"] = float(finite[worst])
    return BoundReport(
        bound_id=bound_id,
        m=m,
        samples=int(slacks.size if samples is None else samples),
        worst_slack=float(finite[worst]),
        violations=violations,
        witness=witness,
        seconds=time.perf_counter() - t0,
    )


def _default_pairs(rng, m: int, n: int, span: float = 3.0):
    etas = sample_simplex(rng, m, n)
    taus = rng.uniform(-span, span, size=(n, m - 1))
    return etas, taus


# ---------------------------------------------------------------------------
# Hinge-side bounds.
# ---------------------------------------------------------------------------

def check_hinge_bounds(variant: str, C: Optional[CostMatrix] = None,
                       m: int = 3, n: int = 100_000, rng=0,
                       sampler: Optional[Callable] = None) -> BoundReport:
    """Classification regret over m against the matched hinge loss regret."""
    t0 = time.perf_counter()
    gen = _rng(rng)
    if variant == "cw3":
        if C is None:
            raise InvalidInputError("the cost-weighted variant needs a cost matrix")
        m = C.m
        loss = cost_hinge(C)
        completion = complete_clipped_rows
    elif variant == "zo4":
        loss = sorted_hinge(m)
        completion = complete_affine_rows
    else:
        raise InvalidInputError(f"unknown hinge bound variant {variant!r}")

    etas, taus = sampler(n) if sampler is not None else _default_pairs(gen, m, n)
    etas = _rows(etas, m)
    taus = _rows(taus, m - 1)
    scores = completion(taus)
    if variant == "cw3":
        lhs = cost_weighted_regrets(C, etas, scores) / m
        entropies = (etas @ C.c).min(axis=1)
    else:
        lhs = zero_one_regrets(etas, scores) / m
        entropies = 1.0 - etas.max(axis=1)
    rhs = (etas * loss.values(taus)).sum(axis=1) - entropies
    slacks = rhs - lhs

    def witness(i):
        return {"eta": etas[i].tolist(), "tau": taus[i].tolist(),
                "lhs": float(lhs[i]), "rhs": float(rhs[i])}

    return _report(f"hinge_{variant}", m, slacks, witness, t0)


def check_general_bound(loss: HingeLoss, n: int = 100_000, rng=0,
                        sampler: Optional[Callable] = None,
                        ordering: Optional[Callable] = None) -> BoundReport:
    """Scaled zero-one regret of the negated-loss prediction against the loss regret.

    The loss must share the zero-one entropy; this is certified on a probe
    grid first.  When ``ordering`` maps margins to completed score rows, the
    sweep also checks that classifying by negated losses and by the
    completion give identical zero-one regrets.
    """
    t0 = time.perf_counter()
    gen = _rng(rng)
    m = loss.m
    certify_entropy(loss, _zero_one_spec(), tol=1e-3)

    etas, taus = sampler(n) if sampler is not None else _default_pairs(gen, m, n)
    etas = _rows(etas, m)
    taus = _rows(taus, loss.action_dim)
    values = loss.values(taus)
    scores = -values
    entropies = 1.0 - etas.max(axis=1)
    lhs = zero_one_regrets(etas, scores) / m
    rhs = (etas * values).sum(axis=1) - entropies
    slacks = rhs - lhs
    tags = np.zeros(slacks.size, dtype=int)
    if ordering is not None:
        other = zero_one_regrets(etas, ordering(taus))
        mismatch = np.abs(zero_one_regrets(etas, scores) - other)
        slacks = np.concatenate([slacks, -mismatch])
        tags = np.concatenate([tags, np.ones(mismatch.size, dtype=int)])

    def witness(i):
        j = i % len(etas)
        return {"eta": etas[j].tolist(), "tau": taus[j].tolist(),
                "check": "ordering" if tags[i] else "regret",
                "lhs": float(lhs[j]), "rhs": float(rhs[j])}

    return _report(f"general_{loss.label}", m, slacks, witness, t0, samples=n)


def _zero_one_spec() -> EntropySpec:
    from .entropy import zero_one_entropy

    return zero_one_entropy()


def value_manifold_check(loss: HingeLoss, n: int = 10_000, rng=0,
                         actions: Optional[np.ndarray] = None,
                         vertex_tol: float = 1e-3) -> BoundReport:
    """Membership and vertex recovery for losses with the zero-one entropy.

    (a) every sampled loss vector z must satisfy z >= 0 and
        sum_j min(z_j, 1) >= m - 1, the reduced form of membership in the
        upward closure of the zero-one value polytope;
    (b) each polytope vertex (all ones except one zero) must be reachable
        within ``vertex_tol`` by a simplex-weighted combination of sampled
        loss vectors, found by nonnegative least squares.
    """
    t0 = time.perf_counter()
    gen = _rng(rng)
    m = loss.m
    dim = loss.action_dim
    if actions is None:
        random_part = gen.uniform(-3.0, 3.0, size=(n, dim))
        structured = box_grid(0.0, 1.0, 2, dim)
        slice_part = simplex_grid(m, 8)[:, :dim] if dim == m - 1 else None
        parts = [random_part, structured]
        if slice_part is not None:
            parts.append(slice_part)
        actions = np.vstack(parts)
    actions = _rows(actions, dim)
    Z = loss.values(actions)

    floor = Z.min(axis=1)
    capped = np.minimum(Z, 1.0).sum(axis=1) - (m - 1)
    membership = np.minimum(floor, capped)

    vertices = 1.0 - np.eye(m)
    vertex_slacks = np.empty(m)
    vertex_dists = np.empty(m)
    for j in range(m):
        v = vertices[j]
        dist2 = ((Z - v) ** 2).sum(axis=1)
        keep = np.argsort(dist2)[:500]
        block = Z[keep]
        scale = 1e3
        A = np.vstack([block.T, scale * np.ones(len(keep))])
        b = np.concatenate([v, [scale]])
        w, _ = nnls(A, b)
        total = w.sum()
        if total <= 0:
            vertex_dists[j] = math.inf
        else:
            vertex_dists[j] = float(np.linalg.norm(block.T @ (w / total) - v))
        vertex_slacks[j] = vertex_tol - vertex_dists[j]

    slacks = np.concatenate([membership, vertex_slacks])

    def witness(i):
        if i < len(membership):
            return {"action": actions[i].tolist(), "values": Z[i].tolist(),
                    "check": "membership"}
        j = i - len(membership)
        return {"vertex": vertices[j].tolist(), "distance": float(vertex_dists[j]),
                "check": "vertex"}

    return _report(f"value_manifold_{loss.label}", m, slacks, witness, t0,
                   samples=len(actions))


# ---------------------------------------------------------------------------
# Strong convexity and the loss-specific curvature constants.
# ---------------------------------------------------------------------------

_KINKED = {"zero_one", "cost_weighted", "power_max"}


def _sum_zero_directions(m: int, count: int, gen: np.random.Generator) -> np.ndarray:
    rows = []
    for j in range(m):
        for k in range(j + 1, m):
            x = np.zeros(m)
            x[j], x[k] = 0.5, -0.5
            rows.append(x)
    for pos in range(1, m):
        x = np.zeros(m)
        x[:pos] = 0.5 / pos
        x[pos:] = -0.5 / (m - pos)
        rows.append(x)
    rand = gen.normal(size=(count, m))
    rand -= rand.mean(axis=1, keepdims=True)
    scale = np.abs(rand).sum(axis=1, keepdims=True)
    rows.append(rand / np.where(scale == 0, 1.0, scale))
    return np.vstack([np.atleast_2d(r) for r in rows])


def strong_convexity_modulus(H: EntropySpec, m: int, density: int = 12,
                             directions: int = 48, rng=0,
                             step: float = 1e-4) -> float:
    """Smallest curvature of -H against the squared l1 norm.

    Minimises the second central difference of -H along sum-zero directions
    of unit l1 length over an interior grid.  Kinked entropies are rejected.
    """
    if H.label in _KINKED:
        raise InvalidInputError(f"{H.label} entropy has kinks; no modulus")
    gen = _rng(rng)
    grid = simplex_grid(m, density)
    interior = grid[(grid > 1.0 / (2 * density)).all(axis=1)]
    if len(interior) == 0:
        raise InvalidInputError("grid density too low for an interior point")
    X = _sum_zero_directions(m, directions, gen)
    P = np.repeat(interior, len(X), axis=0)
    D = np.tile(X, (len(interior), 1))
    center = H.values(P)
    upper = H.values(P + step * D)
    lower = H.values(P - step * D)
    curvature = (2.0 * center - upper - lower) / step ** 2
    return float(curvature.min())


def kappa_constant(family: str, beta: Optional[float] = None,
                   nu: Optional[float] = None, m: Optional[int] = None) -> float:
    """Curvature constant entering the squared-l1 regret lower bounds."""
    if family == "pairwise_beta":
        if nu is None or nu > 0:
            raise InvalidInputError("pairwise family needs a weight index nu <= 0")
        return 2.0
    if family == "power":
        if beta is None or not 0.0 < beta < 1.0:
            raise InvalidInputError("power family needs beta in (0, 1)")
        if beta >= 0.5:
            if m is None or m < 2:
                raise InvalidInputError("power family needs m >= 2")
            return float((1.0 - beta) * m ** ((1.0 - 1.0 / beta) * (2.0 * beta - 1.0))
                         * 2.0 ** (2.0 - 2.0 * beta))
        return float((1.0 - beta) * 2.0 ** (1.0 / beta - 1.0))
    if family == "shannon":
        return 1.0
    raise InvalidInputError(f"unknown curvature family {family!r}")


def check_scoring_bounds(rule: ScoringRule, kappa: float, m: Optional[int] = None,
                         n: int = 100_000, rng=0,
                         sampler: Optional[Callable] = None) -> BoundReport:
    """Squared-distance lower bounds on a proper rule's regret.

    Verifies both kappa/2 * l1(eta, q)^2 <= B(eta, q) and
    kappa/2 * (zero-one regret of q)^2 <= B(eta, q).
    """
    t0 = time.perf_counter()
    gen = _rng(rng)
    m = m if m is not None else rule.m
    if m is None:
        raise InvalidInputError("rule has no fixed m; pass one explicitly")
    if sampler is not None:
        etas, qs = sampler(n)
    else:
        etas = sample_simplex(gen, m, n)
        qs = sample_simplex(gen, m, n)
    etas = _rows(etas, m)
    qs = _rows(qs, m)
    b = rule.regrets(etas, qs)
    l1 = np.abs(etas - qs).sum(axis=1)
    zo = zero_one_regrets(etas, qs)
    slack_l1 = b - 0.5 * kappa * l1 ** 2
    slack_zo = b - 0.5 * kappa * zo ** 2
    slacks = np.concatenate([slack_l1, slack_zo])

    def witness(i):
        j = i % len(etas)
        return {"eta": etas[j].tolist(), "q": qs[j].tolist(),
                "check": "l1" if i < len(etas) else "zero_one",
                "regret": float(b[j])}

    return _report(f"scoring_{rule.label}", m, slacks, witness, t0, samples=n)


# ---------------------------------------------------------------------------
# Psi profiles: tabulated infima of a rule's regret under distance
# constraints between the truth and the report.
# ---------------------------------------------------------------------------

_PSI_KINDS = ("psi_q", "psi_underline", "psi_q_C", "psi_underline_C",
              "psi_underline_C0", "psi_BJM", "psi_RW")
_SINGLE_MESH = {2: 2000, 3: 120, 4: 40}
_PAIR_MESH = {2: 400, 3: 36, 4: 14}


@dataclass(frozen=True)
class PsiProfile:
    """A lower envelope of regrets, tabulated on a distance grid."""

    kind: str
    t: np.ndarray
    value: np.ndarray
    nondecreasing: bool

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.t, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.t) - 1)
        out = self.value[idx]
        return float(out) if out.ndim == 0 else out


def _monotone(values: np.ndarray) -> bool:
    finite = values[np.isfinite(values)]
    if finite.size < 2:
        return True
    return bool(np.all(np.diff(finite) >= -VIOLATION_TOL))


def _suffix_min_profile(kind: str, d: np.ndarray, b: np.ndarray,
                        t_grid: np.ndarray) -> PsiProfile:
    order = np.argsort(d)
    ds = d[order]
    suffix = np.minimum.accumulate(b[order][::-1])[::-1]
    idx = np.searchsorted(ds, t_grid, side="left")
    values = np.where(idx < len(ds), suffix[np.minimum(idx, len(ds) - 1)], np.inf)
    return PsiProfile(kind, t_grid, values, _monotone(values))


def _bucket_min_profile(kind: str, d: np.ndarray, b: np.ndarray,
                        t_grid: np.ndarray, halfwidth: float) -> PsiProfile:
    """Infimum over |distance - t| <= halfwidth for each grid t."""
    if d.size == 0:
        values = np.full(t_grid.shape, np.inf)
        return PsiProfile(kind, t_grid, values, _monotone(values))
    width = max(halfwidth, 1e-12)
    binsize = width / 2.0
    top = float(max(d.max(), t_grid.max())) + width
    nbins = int(top / binsize) + 2
    mins = np.full(nbins, np.inf)
    np.minimum.at(mins, np.minimum((d / binsize).astype(int), nbins - 1), b)
    smear = int(round(width / binsize))
    smoothed = minimum_filter1d(mins, size=2 * smear + 1, mode="nearest")
    idx = np.clip((t_grid / binsize).astype(int), 0, nbins - 1)
    values = smoothed[idx]
    return PsiProfile(kind, t_grid, values, _monotone(values))


def _pair_regrets(rule: ScoringRule, E: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Regret matrix B[i, j] between truth rows E and report rows Q.

    Boundary report rows can produce 0 * inf artifacts; those entries are
    promoted to +inf, which only shrinks the tabulated infima's domain and
    keeps the envelope an upper estimate of the true infimum.
    """
    H = rule.entropy
    g = H.supergradients(Q)
    with np.errstate(invalid="ignore"):
        base = H.values(Q) - (Q * g).sum(axis=1)
        out = E @ g.T + base[None, :] - H.values(E)[:, None]
    return np.where(np.isfinite(out), out, np.inf)


def psi_profile(kind: str, rule: ScoringRule, q=None, C: Optional[CostMatrix] = None,
                C0=None, t_grid: Optional[np.ndarray] = None,
                m: Optional[int] = None, mesh_steps: Optional[int] = None) -> PsiProfile:
    """Tabulate one of the regret lower-envelope functions.

    Mesh-based kinds are limited to m <= 4; the two-class plain and
    class-weighted envelopes use exact one-dimensional reductions.
    """
    if kind not in _PSI_KINDS:
        raise InvalidInputError(f"unknown profile kind {kind!r}")
    m = m if m is not None else (rule.m if rule.m is not None else
                                 (len(as_array(q)) if q is not None else None))
    if kind == "psi_RW":
        return _psi_rw_profile(rule, C0, t_grid)
    if m is None:
        raise InvalidInputError("cannot infer m; pass it explicitly")
    if m > 4:
        raise InvalidInputError("mesh profiles are limited to m <= 4")

    if kind == "psi_q" or kind == "psi_q_C":
        if q is None:
            raise InvalidInputError("this profile kind fixes the report q")
        q = make_prob(q).p
        steps = mesh_steps or _SINGLE_MESH[m]
        E = simplex_grid(m, steps)
        b = rule.regrets(E, np.tile(q, (len(E), 1)))
        diff = E - q[None, :]
        if kind == "psi_q_C":
            if C is None:
                raise InvalidInputError("the cost-converted profile needs C")
            diff = diff @ C.complement()
        d = _norm_top2_rows(diff)
        if t_grid is None:
            t_grid = np.linspace(0.0, float(d.max()), 201)
        return _suffix_min_profile(kind, d, b, np.asarray(t_grid, dtype=float))

    if kind == "psi_underline":
        if m == 2:
            if t_grid is None:
                t_grid = np.linspace(0.0, 1.0, 501)
            t_grid = np.asarray(t_grid, dtype=float)
            half = np.full((t_grid.size, 2), 0.5)
            up = np.column_stack([(1.0 + t_grid) / 2.0, (1.0 - t_grid) / 2.0])
            down = up[:, ::-1]
            vals = np.minimum(rule.regrets(up, half), rule.regrets(down, half))
            return PsiProfile(kind, t_grid, vals, _monotone(vals))
        steps = mesh_steps or _PAIR_MESH[m]
        E = simplex_grid(m, steps)
        Q = E[E.max(axis=1) <= 0.5 + 1e-12]
        B = _pair_regrets(rule, E, Q)
        diff = E[:, None, :] - Q[None, :, :]
        d = _norm_top2_rows(np.abs(diff).reshape(-1, m)).reshape(len(E), len(Q))
        if t_grid is None:
            t_grid = np.linspace(0.0, float(d.max()), 161)
        t_grid = np.asarray(t_grid, dtype=float)
        width = max(float(t_grid[1] - t_grid[0]) if t_grid.size > 1 else 0.0,
                    4.0 / steps)
        return _bucket_min_profile(kind, d.ravel(), B.ravel(), t_grid, width)

    if kind == "psi_underline_C":
        if C is None:
            raise InvalidInputError("the cost-converted envelope needs C")
        steps = mesh_steps or _PAIR_MESH[m]
        E = simplex_grid(m, steps)
        conv = E @ C.complement()
        feasible = conv.max(axis=1) <= conv.sum(axis=1) / 2.0 + 1e-12
        Q = E[feasible]
        B = _pair_regrets(rule, E, Q)
        diff = (E[:, None, :] - Q[None, :, :]) @ C.complement()
        d = _norm_top2_rows(np.abs(diff).reshape(-1, m)).reshape(len(E), len(Q))
        if t_grid is None:
            t_grid = np.linspace(0.0, float(d.max()) if d.size else 1.0, 161)
        t_grid = np.asarray(t_grid, dtype=float)
        scale = float(C.complement().max())
        width = max(float(t_grid[1] - t_grid[0]) if t_grid.size > 1 else 0.0,
                    4.0 * scale / steps)
        return _bucket_min_profile(kind, d.ravel(), B.ravel(), t_grid, width)

    if kind == "psi_BJM":
        if m != 2:
            raise InvalidInputError("the two-branch envelope is two-class only")
        return _psi_bjm_profile(rule, t_grid)

    # Remaining kind: class-weighted distance with per-class weights C0.
    if C0 is None:
        raise InvalidInputError("the class-weighted envelope needs weights")
    w = as_array(C0)
    if np.any(w <= 0):
        raise InvalidInputError("class weights must be positive")
    if m == 2:
        return _psi_c0_two_class(rule, w, t_grid)
    steps = mesh_steps or _PAIR_MESH[m]
    E = simplex_grid(m, steps)
    allq = simplex_grid(m, steps)
    feasible = (w * allq).max(axis=1) <= (w * allq).sum(axis=1) / 2.0 + 1e-12
    Q = allq[feasible]
    B = _pair_regrets(rule, E, Q)
    diff = (E[:, None, :] - Q[None, :, :]) * w[None, None, :]
    d = _norm_top2_rows(np.abs(diff).reshape(-1, m)).reshape(len(E), len(Q))
    if t_grid is None:
        t_grid = np.linspace(0.0, float(d.max()) if d.size else 1.0, 161)
    t_grid = np.asarray(t_grid, dtype=float)
    width = max(float(t_grid[1] - t_grid[0]) if t_grid.size > 1 else 0.0,
                4.0 * float(w.max()) / steps)
    return _bucket_min_profile(kind, d.ravel(), B.ravel(), t_grid, width)


def _psi_c0_two_class(rule: ScoringRule, w: np.ndarray,
                      t_grid: Optional[np.ndarray]) -> PsiProfile:
    # With two classes the feasibility cap pins the report at the weight
    # crossover, so the envelope is an exact one-parameter curve.
    total = float(w[0] + w[1])
    q1 = w[1] / total
    if t_grid is None:
        t_grid = np.linspace(0.0, total * min(q1, 1.0 - q1), 301)
    t_grid = np.asarray(t_grid, dtype=float)
    values = np.full(t_grid.shape, np.inf)
    qrow = np.array([q1, 1.0 - q1])
    for i, t in enumerate(t_grid):
        best = math.inf
        for sign in (1.0, -1.0):
            e1 = q1 + sign * t / total
            if 0.0 <= e1 <= 1.0:
                best = min(best, float(rule.regret(np.array([e1, 1.0 - e1]), qrow)))
        values[i] = best
    return PsiProfile("psi_underline_C0", t_grid, values, _monotone(values))


def _psi_bjm_profile(rule: ScoringRule, t_grid: Optional[np.ndarray],
                     report_points: int = 2001) -> PsiProfile:
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 201)
    t_grid = np.asarray(t_grid, dtype=float)
    q1 = np.linspace(1e-9, 1.0 - 1e-9, report_points)
    Q = np.column_stack([q1, 1.0 - q1])
    low = q1 <= 0.5
    high = q1 >= 0.5
    values = np.empty(t_grid.shape)
    for i, t in enumerate(t_grid):
        if t <= 0:
            values[i] = 0.0
            continue
        eta_hi = np.tile([(1.0 + t) / 2.0, (1.0 - t) / 2.0], (len(Q), 1))
        eta_lo = np.tile([(1.0 - t) / 2.0, (1.0 + t) / 2.0], (len(Q), 1))
        b1 = rule.regrets(eta_hi[low], Q[low])
        b2 = rule.regrets(eta_lo[high], Q[high])
        values[i] = min(b1.min() if b1.size else math.inf,
                        b2.min() if b2.size else math.inf)
    return PsiProfile("psi_BJM", t_grid, values, _monotone(values))


def psi_rw_value(rule: ScoringRule, C0, delta) -> float:
    """Two-class regret at the weight crossover shifted by delta."""
    w = as_array(C0)
    total = float(w[0] + w[1])
    e1 = (w[1] + delta) / total
    q1 = w[1] / total
    if not 0.0 <= e1 <= 1.0:
        return math.inf
    return float(rule.regret(np.array([e1, 1.0 - e1]), np.array([q1, 1.0 - q1])))


def _psi_rw_profile(rule: ScoringRule, C0, t_grid: Optional[np.ndarray]) -> PsiProfile:
    if C0 is None:
        raise InvalidInputError("the reweighting profile needs class weights")
    if t_grid is None:
        t_grid = np.linspace(-1.0, 1.0, 401)
    t_grid = np.asarray(t_grid, dtype=float)
    values = np.array([psi_rw_value(rule, C0, t) for t in t_grid])
    return PsiProfile("psi_RW", t_grid, values, _monotone(values))


def convex_minorant(profile: PsiProfile) -> PsiProfile:
    """Greatest convex function below the tabulated profile."""
    mask = np.isfinite(profile.value)
    ts = profile.t[mask]
    vs = profile.value[mask]
    if ts.size < 2:
        return profile
    hull_t: list = []
    hull_v: list = []
    for x, y in zip(ts, vs):
        hull_t.append(x)
        hull_v.append(y)
        while len(hull_t) >= 3:
            x0, x1, x2 = hull_t[-3], hull_t[-2], hull_t[-1]
            y0, y1, y2 = hull_v[-3], hull_v[-2], hull_v[-1]
            if (y1 - y0) * (x2 - x1) <= (y2 - y1) * (x1 - x0) + 1e-15:
                break
            del hull_t[-2], hull_v[-2]
    lowered = np.interp(profile.t, hull_t, hull_v,
                        left=hull_v[0], right=hull_v[-1])
    values = np.where(mask, np.minimum(profile.value, lowered), lowered)
    return PsiProfile(profile.kind, profile.t, values, _monotone(values))


# ---------------------------------------------------------------------------
# Cost transformation machinery.
# ---------------------------------------------------------------------------

def transformed_weights(C: CostMatrix, etas) -> np.ndarray:
    """Per-class weights of the cost-transformed risk identity (rows)."""
    E = _rows(etas, C.m)
    comp = C.complement()
    return E * C.row_max()[None, :] + E @ comp - E * np.diag(comp)[None, :]


def transform_shift(C: CostMatrix, etas) -> np.ndarray:
    """Constant absorbed by the cost transformation at each truth row."""
    E = _rows(etas, C.m)
    comp = C.complement()
    return E @ (comp.sum(axis=1) - np.diag(comp))


@dataclass(frozen=True)
class CostTransformedLoss:
    """A loss reweighted so its regret scales a cost-weighted regret."""

    base: object
    C: CostMatrix
    label: str
    m: int
    action_dim: int

    def values(self, A) -> np.ndarray:
        T = self.base.values(A)
        comp = self.C.complement()
        rowmax = self.C.row_max()
        shifted = T - 1.0
        return T * rowmax[None, :] + shifted @ comp.T - shifted * np.diag(comp)[None, :]

    def value(self, j: int, action) -> float:
        return float(self.values(as_array(action)[None, :])[0, j])

    def risk(self, eta, action) -> float:
        values = self.values(as_array(action)[None, :])
        return float(paired_risks(values, as_array(eta)[None, :])[0])

    def risks(self, etas, actions) -> np.ndarray:
        return paired_risks(self.values(actions), _rows(etas, self.m))


def cost_transform(loss, C: CostMatrix) -> CostTransformedLoss:
    """Reweight a loss by worst-case costs so regrets transfer across scales."""
    m = loss.m
    if m is None or m != C.m:
        raise InvalidInputError("loss and cost matrix disagree on m")
    dim = getattr(loss, "action_dim", m)
    return CostTransformedLoss(loss, C, f"transformed_{loss.label}", m, dim)


def risk_identity_check(loss, C: CostMatrix, eta, action) -> float:
    """Residual between the transformed risk and its reweighted identity."""
    eta = as_array(eta)
    transformed = cost_transform(loss, C)
    direct = transformed.risk(eta, action)
    weights = transformed_weights(C, eta[None, :])[0]
    total = float(weights.sum())
    normalised = weights / total
    base_values = loss.values(as_array(action)[None, :])
    base_risk = float(paired_risks(base_values, normalised[None, :])[0])
    shift = float(transform_shift(C, eta[None, :])[0])
    return abs(direct - (total * base_risk - shift))


def misclass_upper_bounds(eta, q, C: Optional[CostMatrix] = None) -> BoundReport:
    """Distance upper bounds on classification regrets of reports.

    Checks the zero-one regret against the two-largest-entries norm of
    eta - q and, when C is given, the cost-weighted regret of the converted
    prediction against the same norm of the converted difference.
    """
    t0 = time.perf_counter()
    etas = np.atleast_2d(np.asarray(eta, dtype=float))
    qs = np.atleast_2d(np.asarray(q, dtype=float))
    m = etas.shape[1]
    diff = etas - qs
    zo = zero_one_regrets(etas, qs)
    slack_zo = _norm_top2_rows(diff) - zo
    slacks = [slack_zo]
    if C is not None:
        comp = C.complement()
        converted = qs @ comp
        cw = cost_weighted_regrets(C, etas, converted)
        slack_cw = _norm_top2_rows(diff @ comp) - cw
        slacks.append(slack_cw)
    slacks = np.concatenate(slacks)

    def witness(i):
        j = i % len(etas)
        return {"eta": etas[j].tolist(), "q": qs[j].tolist(),
                "check": "zero_one" if i < len(etas) else "cost_weighted"}

    return _report("misclass_upper", m, slacks, witness, t0, samples=len(etas))


def check_cw_bounds(rule: ScoringRule, C: CostMatrix, n: int = 2000, rng=0,
                    mesh_steps: Optional[int] = None,
                    sampler: Optional[Callable] = None) -> BoundReport:
    """Envelope lower bounds on a proper rule's regret under costs.

    Verifies, over sampled (eta, q), both the reweighted-scale bound through
    the cost-transformed rule and the direct bound with the converted
    prediction.  Envelope values come from psi_profile.
    """
    t0 = time.perf_counter()
    gen = _rng(rng)
    m = C.m
    if rule.m is not None and rule.m != m:
        raise InvalidInputError("rule and cost matrix disagree on m")
    if m > 4:
        raise InvalidInputError("mesh profiles are limited to m <= 4")
    plain = psi_profile("psi_underline", rule, m=m, mesh_steps=mesh_steps)
    converted = psi_profile("psi_underline_C", rule, C=C, m=m, mesh_steps=mesh_steps)

    if sampler is not None:
        etas, qs = sampler(n)
    else:
        etas = sample_simplex(gen, m, n)
        qs = sample_simplex(gen, m, n)
    etas = _rows(etas, m)
    qs = _rows(qs, m)

    weights = transformed_weights(C, etas)
    totals = weights.sum(axis=1)
    normalised = weights / totals[:, None]
    t1 = cost_weighted_regrets(C, etas, qs) / totals
    rhs1 = rule.regrets(normalised, qs)
    lhs1 = plain(t1)

    comp = C.complement()
    t2 = cost_weighted_regrets(C, etas, qs @ comp)
    rhs2 = rule.regrets(etas, qs)
    lhs2 = converted(t2)

    slacks = np.concatenate([rhs1 - lhs1, rhs2 - lhs2])

    def witness(i):
        j = i % len(etas)
        tag = "transformed" if i < len(etas) else "converted"
        return {"eta": etas[j].tolist(), "q": qs[j].tolist(), "check": tag}

    return _report(f"cw_{rule.label}", m, slacks, witness, t0, samples=n)


def check_two_class_cost_bound(rule: ScoringRule, C0, eta_steps: int = 40,
                               q_steps: int = 40) -> BoundReport:
    """Two-class reweighting bound on a mesh of truths and reports."""
    t0 = time.perf_counter()
    w = as_array(C0)
    if w.size != 2 or np.any(w <= 0):
        raise InvalidInputError("need two positive class weights")
    C = CostMatrix(np.array([[0.0, w[0]], [w[1], 0.0]]))
    etas = simplex_grid(2, eta_steps)
    qs = simplex_grid(2, q_steps)
    E = np.repeat(etas, len(qs), axis=0)
    Q = np.tile(qs, (len(etas), 1))
    deltas = cost_weighted_regrets(C, E, Q * w[None, :])
    rhs = rule.regrets(E, Q)
    lhs = np.array([min(psi_rw_value(rule, w, d), psi_rw_value(rule, w, -d))
                    for d in deltas])
    slacks = rhs - lhs

    def witness(i):
        return {"eta": E[i].tolist(), "q": Q[i].tolist(), "delta": float(deltas[i])}

    return _report("two_class_cost", 2, slacks, witness, t0)


def check_w_set_bound(rule: ScoringRule, C: CostMatrix, eta, q,
                      w_points: int = 101,
                      mesh_steps: Optional[int] = None) -> BoundReport:
    """Interpolated-report bound along the segment from the truth to a report.

    Every grid weight w whose blend keeps the same converted prediction must
    satisfy the report-specific envelope bound at the blend.  The truth
    itself is always feasible for the envelope, so each instance's infimum
    includes it.
    """
    t0 = time.perf_counter()
    m = C.m
    eta = make_prob(eta).p
    q = make_prob(q).p
    comp = C.complement()
    k = int(np.argmax(q @ comp))
    target = cost_weighted_regrets(C, eta[None, :], (q @ comp)[None, :])[0]
    rhs = float(rule.regret(eta, q))
    steps = mesh_steps or _PAIR_MESH.get(m)
    if steps is None:
        raise InvalidInputError("mesh profiles are limited to m <= 4")
    mesh = np.vstack([simplex_grid(m, steps), eta[None, :]])

    ws = np.linspace(0.0, 1.0, w_points)
    members = []
    slacks = []
    half_witness = None
    for w in ws:
        blend = (1.0 - w) * eta + w * q
        scores = blend @ comp
        if scores[k] < scores.max() - 1e-12:
            continue
        members.append(float(w))
        if scores.max() <= scores.sum() / 2.0 + 1e-9 and half_witness is None:
            half_witness = float(w)
        diff = (mesh - blend[None, :]) @ comp
        feasible = _norm_top2_rows(diff) >= target - 1e-12
        values = rule.regrets(mesh[feasible], np.tile(blend, (int(feasible.sum()), 1)))
        slacks.append(rhs - float(values.min()))
    if not members:
        raise ConfigurationError("the blend grid lost its own endpoint")

    slacks = np.asarray(slacks)

    def witness(i):
        return {"eta": eta.tolist(), "q": q.tolist(), "w": members[i],
                "half_crossing": half_witness}

    return _report("w_set", m, slacks, witness, t0, samples=len(members))


# ---------------------------------------------------------------------------
# Classification calibration.
# ---------------------------------------------------------------------------

def calibration_infimum(loss, sigma: Callable[[np.ndarray], np.ndarray], eta,
                        k: int, actions, entropy_value: Optional[float] = None) -> float:
    """Infimum of the regret over actions predicting the wrong class k.

    Returns +inf when no grid action predicts k.  The class index is
    zero-based and must not be a Bayes class; when the loss carries a cost
    matrix the Bayes test and the default baseline use the cost columns.
    """
    eta = as_array(eta)
    m = eta.size
    if not 0 <= k < m:
        raise InvalidInputError("class index out of range")
    cost = getattr(loss, "cost", None)
    if cost is not None:
        col = eta @ cost.c
        if col[k] <= col.min() + 1e-12:
            raise InvalidInputError("the target class is already a Bayes class")
        default_base = float(col.min())
    else:
        if eta[k] >= eta.max() - 1e-12:
            raise InvalidInputError("the target class is already a Bayes class")
        default_base = entropy_zero_one(eta)
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    scores = sigma(actions)
    picked = scores[:, k] >= scores.max(axis=1) - 1e-12
    if not picked.any():
        return math.inf
    values = loss.values(actions[picked])
    risks = paired_risks(values, np.tile(eta, (int(picked.sum()), 1)))
    base = entropy_value if entropy_value is not None else default_base
    return float(risks.min() - base)
