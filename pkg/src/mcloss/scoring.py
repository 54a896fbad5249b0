"""Proper scoring rules over class probabilities, plus softmax-composite forms.

Each named family exposes the loss table exactly as displayed in its usual
statement (any additive per-label constant is recorded on the rule), the
matching closed-form entropy, and a supergradient selection under which the
expected loss admits the canonical entropy-plus-linear representation to
machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .entropy import BOUNDARY_EPS, DissimilaritySpec, EntropySpec, entropy_from_dissimilarity
from .simplex import InvalidInputError, argmax_lowest, as_array

_LIMIT_TOL = 1e-8


def _nan_to_posinf(a: np.ndarray) -> np.ndarray:
    return np.where(np.isnan(a), np.inf, a)


def paired_risks(table: np.ndarray, etas: np.ndarray) -> np.ndarray:
    """Row-wise expected losses with extended-value conventions.

    Zero probability kills an infinite loss.  When a row mixes both
    infinities under positive weight, the positive branch wins: every
    implemented family diverges upward at a faster rate than downward.
    """
    T = np.asarray(table, dtype=float)
    E = np.asarray(etas, dtype=float)
    out = (E * np.where(np.isfinite(T), T, 0.0)).sum(axis=1)
    out[((E > 0) & np.isneginf(T)).any(axis=1)] = -np.inf
    out[((E > 0) & np.isposinf(T)).any(axis=1)] = np.inf
    return out


def risk_matrix(table: np.ndarray, etas: np.ndarray) -> np.ndarray:
    """Expected loss of every action row (axis 1) under every probability row (axis 0)."""
    T = np.asarray(table, dtype=float)
    E = np.asarray(etas, dtype=float)
    risks = E @ np.where(np.isfinite(T), T, 0.0).T
    hot = (E > 0).astype(float)
    risks[hot @ np.isneginf(T).astype(float).T > 0] = -np.inf
    risks[hot @ np.isposinf(T).astype(float).T > 0] = np.inf
    return risks


@dataclass(frozen=True)
class ScoringRule:
    """A loss over (label, reported distribution) with its induced entropy."""

    label: str
    table: Callable[[np.ndarray], np.ndarray]
    entropy: EntropySpec
    m: Optional[int] = None
    beta: Optional[float] = None
    nu: Optional[float] = None
    # additive constant separating the displayed from the canonical tangent
    # form; counted per rival class for the pairwise families
    offset: float = 0.0

    def values(self, Q) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if self.m is not None and Q.shape[1] != self.m:
            raise InvalidInputError(f"{self.label} expects m={self.m}")
        return self.table(Q)

    def value(self, j: int, q) -> float:
        return float(self.values(as_array(q)[None, :])[0, j])

    def risk(self, eta, q) -> float:
        return float(paired_risks(self.values(as_array(q)[None, :]), as_array(eta)[None, :])[0])

    def risks(self, etas, qs) -> np.ndarray:
        return paired_risks(self.values(qs), np.asarray(etas, dtype=float))

    def regret(self, eta, q) -> float:
        return self.risk(eta, q) - float(self.entropy.value(as_array(eta)))

    def regrets(self, etas, qs) -> np.ndarray:
        return self.risks(etas, qs) - self.entropy.values(etas)

    def descriptor(self) -> dict:
        out = {"family": self.label}
        if self.beta is not None:
            out["beta"] = float(self.beta)
        if self.nu is not None:
            out["nu"] = float(self.nu)
        if self.m is not None:
            out["m"] = int(self.m)
        return out


def _rule(label: str, table, entropy_value, m=None, beta=None, nu=None, offset=0.0) -> ScoringRule:
    """Assemble a rule whose entropy supergradient is its own loss row."""
    spec = EntropySpec(
        value=lambda q: float(entropy_value(as_array(q)[None, :])[0]),
        supergradient=lambda q: table(as_array(q)[None, :])[0],
        label=label,
        batch_value=entropy_value,
        batch_supergradient=table,
    )
    return ScoringRule(label, table, spec, m=m, beta=beta, nu=nu, offset=offset)


# ---------------------------------------------------------------------------
# univariate convex building blocks


@dataclass(frozen=True)
class BaseConvex:
    """Univariate convex function on (0, inf) with derivatives and conjugate."""

    value: Callable
    deriv: Callable
    deriv2: Callable
    conjugate: Optional[Callable]
    label: str


def likelihood_base() -> BaseConvex:
    def value(t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0) - (1 + t) * np.log1p(t)

    def conj(s):
        s = np.asarray(s, dtype=float)
        return np.where(s < 0, -np.log1p(-np.exp(np.minimum(s, 0.0))), np.inf)

    return BaseConvex(
        value=value,
        deriv=lambda t: np.log(t) - np.log1p(t),
        deriv2=lambda t: 1.0 / (t * (1.0 + t)),
        conjugate=conj,
        label="likelihood",
    )


def exponential_base() -> BaseConvex:
    return BaseConvex(
        value=lambda t: (np.sqrt(t) - 1.0) ** 2,
        deriv=lambda t: 1.0 - 1.0 / np.sqrt(t),
        deriv2=lambda t: 0.5 * t ** -1.5,
        conjugate=lambda s: np.where(np.asarray(s, float) < 1,
                                     s / np.where(np.asarray(s, float) < 1, 1.0 - s, 1.0),
                                     np.inf),
        label="exponential",
    )


def calibration_base() -> BaseConvex:
    return BaseConvex(
        value=lambda t: -0.5 * np.log(t),
        deriv=lambda t: -0.5 / t,
        deriv2=lambda t: 0.5 / t ** 2,
        conjugate=lambda s: np.where(np.asarray(s, float) < 0,
                                     -0.5 - 0.5 * np.log(np.abs(2.0 * s)),
                                     np.inf),
        label="calibration",
    )


def calibration_symmetric_base() -> BaseConvex:
    return BaseConvex(
        value=lambda t: 0.5 * (t * np.log(t) - np.log(t)),
        deriv=lambda t: 0.5 * (np.log(t) + 1.0 - 1.0 / t),
        deriv2=lambda t: 0.5 * (1.0 / t + 1.0 / t ** 2),
        conjugate=None,
        label="calibration_symmetric",
    )


_BASES = {
    "likelihood": likelihood_base,
    "exponential": exponential_base,
    "calibration": calibration_base,
    "calibration_symmetric": calibration_symmetric_base,
}


def beta_base(nu: float) -> BaseConvex:
    """Power-weight building block; closed forms exist at indices 0 and -1/2."""
    if nu == 0:
        return likelihood_base()
    if nu == -0.5:
        return exponential_base()
    raise InvalidInputError("closed forms are implemented for indices 0 and -1/2")


def beta_weight(nu: float, q1: float) -> float:
    """Pointwise two-class weight of the power-weight family."""
    if not 0 < q1 < 1:
        raise InvalidInputError("q1 must be interior")
    return float(2.0 ** (2 * nu) * q1 ** (nu - 1) * (1 - q1) ** (nu - 1))


def two_class_weight(base: BaseConvex, q1: float) -> float:
    """Weight density of a two-class rule at reported probability q1."""
    if not 0 < q1 < 1:
        raise InvalidInputError("q1 must be interior")
    q2 = 1.0 - q1
    return float(base.deriv2(q1 / q2) / q2 ** 3)


# ---------------------------------------------------------------------------
# generic constructions from a dissimilarity function


def loss_from_dissimilarity_ratio(f: DissimilaritySpec, j: int, u) -> float:
    """Loss on ratio actions: negated subgradient for leading labels, the
    tangent-intercept value for the reference label."""
    u = as_array(u)
    g = np.asarray(f.subgradient(u), dtype=float)
    if j < u.size:
        return float(-g[j])
    return float(u @ g) - float(f.value(u))


def loss_from_dissimilarity_simplex(f: DissimilaritySpec, j: int, q) -> float:
    """Same construction with the ratios taken against the last coordinate."""
    q = as_array(q)
    c = q[-1] if q[-1] > 0 else BOUNDARY_EPS
    return loss_from_dissimilarity_ratio(f, j, q[:-1] / c)


def loss_from_dissimilarity_conjugate(f: DissimilaritySpec, j: int, s,
                                      conjugate: Optional[Callable] = None) -> float:
    """Loss on score actions: identity scores for leading labels, the convex
    conjugate for the reference label."""
    from .entropy import conjugate_numeric

    s = as_array(s)
    if j < s.size:
        return float(-s[j])
    if conjugate is not None:
        return float(np.asarray(conjugate(s[None, :]), dtype=float).ravel()[0])
    return conjugate_numeric(f, s)


def conjugate_loss_values(S, tail) -> np.ndarray:
    """Loss table for score actions S (K, m-1); `tail` maps S to the reference column."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    last = np.asarray(tail(S), dtype=float).reshape(len(S), 1)
    return np.hstack([-S, last])


def pairwise_dissimilarity(base: BaseConvex, m: int) -> DissimilaritySpec:
    """Sum of the univariate block over each leading coordinate (dimension m-1)."""
    return DissimilaritySpec(
        value=lambda t: float(np.sum(base.value(as_array(t)))),
        subgradient=lambda t: np.asarray(base.deriv(as_array(t)), dtype=float),
        label=f"pairwise_{base.label}",
        batch_value=lambda T: np.asarray(base.value(T), dtype=float).sum(axis=1),
        batch_subgradient=lambda T: np.asarray(base.deriv(T), dtype=float),
    )


def rule_from_dissimilarity(f: DissimilaritySpec, m: int, label: Optional[str] = None) -> ScoringRule:
    """Scoring rule whose loss rows are the ratio-form construction at u = ratios(q)."""

    def table(Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        ref = np.where(Q[:, -1:] > 0, Q[:, -1:], BOUNDARY_EPS)
        U = Q[:, :-1] / ref
        G = f.subgradients(U)
        tail = (U * G).sum(axis=1, keepdims=True) - f.values(U)[:, None]
        return _nan_to_posinf(np.hstack([-G, tail]))

    name = label or f"ratio_{f.label}"
    H = entropy_from_dissimilarity(f)
    spec = EntropySpec(H.value, H.supergradient, name, H.batch_value, table)
    return ScoringRule(name, table, spec, m=m)


# ---------------------------------------------------------------------------
# named two-class rules (m = 2)


def _shannon_values(Q: np.ndarray) -> np.ndarray:
    safe = np.where(Q > 0, Q, 1.0)
    return -(safe * np.log(safe)).sum(axis=1)


def two_class_rule(kind: str) -> ScoringRule:
    if kind == "likelihood":
        def table(Q):
            with np.errstate(divide="ignore"):
                return -np.log(Q)
        return _rule("two_class_likelihood", table, _shannon_values, m=2)

    if kind == "exponential":
        def table(Q):
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.sqrt(Q[:, 1] / Q[:, 0])
                return _nan_to_posinf(np.column_stack([r, 1.0 / r]))

        def hval(Q):
            return 2.0 * np.sqrt(Q[:, 0] * Q[:, 1])
        return _rule("two_class_exponential", table, hval, m=2, offset=1.0)

    if kind == "calibration":
        def table(Q):
            with np.errstate(divide="ignore", invalid="ignore"):
                head = Q[:, 1] / (2.0 * Q[:, 0])
                tail = 0.5 * (np.log(Q[:, 0] / Q[:, 1]) - 1.0)
                return _nan_to_posinf(np.column_stack([head, tail]))

        def hval(Q):
            with np.errstate(divide="ignore", invalid="ignore"):
                raw = 0.5 * Q[:, 1] * np.log(Q[:, 0] / Q[:, 1])
            return np.where(Q[:, 1] > 0, raw, 0.0)
        return _rule("two_class_calibration", table, hval, m=2)

    if kind == "calibration_symmetric":
        def table(Q):
            with np.errstate(divide="ignore", invalid="ignore"):
                r = Q[:, 1] / Q[:, 0]
                a = 0.5 * (np.log(r) + r - 1.0)
                b = 0.5 * (-np.log(r) + 1.0 / r - 1.0)
                return _nan_to_posinf(np.column_stack([a, b]))

        def hval(Q):
            with np.errstate(divide="ignore", invalid="ignore"):
                diff = (Q[:, 0] - Q[:, 1]) * (np.log(Q[:, 0]) - np.log(Q[:, 1]))
            return -0.5 * diff
        return _rule("two_class_calibration_symmetric", table, hval, m=2)

    raise InvalidInputError(f"unknown two-class kind {kind!r}")


def log_loss_rule(m: Optional[int] = None) -> ScoringRule:
    def table(Q):
        with np.errstate(divide="ignore"):
            return -np.log(Q)
    return _rule("log_loss", table, _shannon_values, m=m)


# ---------------------------------------------------------------------------
# pairwise families (reference class = last label)


def pairwise_asym_rule(kind: str, m: Optional[int] = None) -> ScoringRule:
    if kind not in ("likelihood", "exponential", "calibration"):
        raise InvalidInputError(f"unknown pairwise kind {kind!r}")

    def table(Q):
        lead = Q[:, :-1]
        ref = Q[:, -1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            if kind == "likelihood":
                head = np.log1p(ref / lead)
                tail = np.log1p(lead / ref).sum(axis=1, keepdims=True)
            elif kind == "exponential":
                head = np.sqrt(ref / lead) - 1.0
                tail = (np.sqrt(lead / ref) - 1.0).sum(axis=1, keepdims=True)
            else:
                head = ref / (2.0 * lead)
                tail = (0.5 * (np.log(lead / ref) - 1.0)).sum(axis=1, keepdims=True)
        return _nan_to_posinf(np.hstack([head, tail]))

    def hval(Q):
        lead = Q[:, :-1]
        ref = Q[:, -1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            if kind == "likelihood":
                both = lead + ref
                a = np.where(ref > 0, ref * np.log(both / np.where(ref > 0, ref, 1.0)), 0.0)
                b = np.where(lead > 0, lead * np.log(both / np.where(lead > 0, lead, 1.0)), 0.0)
                return (a + b).sum(axis=1)
            if kind == "exponential":
                return -((np.sqrt(lead) - np.sqrt(ref)) ** 2).sum(axis=1)
            raw = 0.5 * ref * np.log(lead / np.where(ref > 0, ref, 1.0))
            return np.where(ref > 0, raw, 0.0).sum(axis=1)

    return _rule(f"pairwise_asym_{kind}", table, hval, m=m)


def pairwise_sym_rule(kind: str, m: Optional[int] = None) -> ScoringRule:
    if kind not in ("likelihood", "exponential", "calibration"):
        raise InvalidInputError(f"unknown pairwise kind {kind!r}")

    def table(Q):
        with np.errstate(divide="ignore", invalid="ignore"):
            R = Q[:, None, :] / Q[:, :, None]  # R[n, j, i] = q_i / q_j
            if kind == "likelihood":
                term = 2.0 * np.log1p(R)
            elif kind == "exponential":
                term = 2.0 * np.sqrt(R)
            else:
                term = 0.5 * (np.log(R) + R - 1.0)
        idx = np.arange(Q.shape[1])
        term[:, idx, idx] = 0.0
        return _nan_to_posinf(term.sum(axis=2))

    def hval(Q):
        mq = Q.shape[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            if kind == "exponential":
                return 2.0 * (np.sqrt(Q).sum(axis=1) ** 2 - 1.0)
            out = np.zeros(len(Q))
            for i in range(mq):
                for j in range(i + 1, mq):
                    x, y = Q[:, i], Q[:, j]
                    if kind == "likelihood":
                        both = x + y
                        out = out + 2.0 * (
                            np.where(x > 0, x * np.log(both / np.where(x > 0, x, 1.0)), 0.0)
                            + np.where(y > 0, y * np.log(both / np.where(y > 0, y, 1.0)), 0.0)
                        )
                    else:
                        out = out - 0.5 * (x - y) * (np.log(x) - np.log(y))
            return out

    # the exponential family's displayed values exceed the canonical tangent
    # construction by 2 per rival class; the constant is immaterial to regrets
    offset = 2.0 if kind == "exponential" else 0.0
    return _rule(f"pairwise_sym_{kind}", table, hval, m=m, offset=offset)


# ---------------------------------------------------------------------------
# power-mean scores


def _power_kind(beta: float) -> str:
    if np.isinf(beta):
        return "max"
    if abs(beta) < _LIMIT_TOL:
        return "geometric"
    if abs(beta - 1.0) < _LIMIT_TOL:
        return "shannon"
    if beta < 0:
        raise InvalidInputError("power index must be nonnegative")
    return "power"


def _power_table(beta: float, rescaled: bool) -> Callable:
    kind = _power_kind(beta)
    if kind != "power" and not rescaled:
        raise InvalidInputError("indices 0, 1 and infinity exist only rescaled")

    def table(Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        m = Q.shape[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            if kind == "max":
                T = np.full_like(Q, 1.0 / (1.0 - 1.0 / m))
                T[np.arange(len(Q)), Q.argmax(axis=1)] = 0.0
                return T
            if kind == "geometric":
                geo = np.prod(Q, axis=1) ** (1.0 / m)
                return np.where(Q > 0, geo[:, None] / Q, np.inf)
            if kind == "shannon":
                return -np.log(Q) / np.log(m)
            norm = (Q ** beta).sum(axis=1) ** (1.0 / beta)
            core = (Q / norm[:, None]) ** (beta - 1.0)
            if rescaled:
                return _nan_to_posinf((core - 1.0) / (m ** (1.0 / beta - 1.0) - 1.0))
            return _nan_to_posinf(core if beta < 1 else -core)

    return table


def power_rule(beta: float, rescaled: bool = True) -> ScoringRule:
    """Scoring rule of the power-mean family; limit indices dispatch automatically."""
    table = _power_table(beta, rescaled)

    def hval(Q):
        Q = np.asarray(Q, dtype=float)
        m = Q.shape[1]
        kind = _power_kind(beta)
        if kind == "max":
            return (1.0 - Q.max(axis=1)) / (1.0 - 1.0 / m)
        if kind == "geometric":
            return m * np.prod(Q, axis=1) ** (1.0 / m)
        if kind == "shannon":
            return _shannon_values(Q) / np.log(m)
        norm = (Q ** beta).sum(axis=1) ** (1.0 / beta)
        if rescaled:
            return (norm - 1.0) / (m ** (1.0 / beta - 1.0) - 1.0)
        return norm if beta < 1 else -norm

    label = "power" if rescaled else "power_raw"
    return _rule(label, table, hval, beta=float(beta), offset=0.0)


def power_score(beta: float, j: int, q) -> float:
    """Raw power-mean score; the limit indices live in power_score_limit."""
    kind = _power_kind(beta)
    if kind != "power":
        raise InvalidInputError("use power_score_limit for indices 0, 1 and infinity")
    return power_rule(beta, rescaled=False).value(j, q)


def power_score_limit(beta: float, j: int, q) -> float:
    """Closed forms at the special indices 0, 1/2, 1 and infinity (rescaled)."""
    q = as_array(q)
    m = q.size
    if np.isinf(beta):
        return 0.0 if j == argmax_lowest(q) else 1.0 / (1.0 - 1.0 / m)
    if beta == 0:
        return float(np.prod(q) ** (1.0 / m) / q[j])
    if beta == 0.5:
        return float(np.sqrt(q / q[j]).sum() - 1.0) / (m - 1.0)
    if beta == 1:
        return float(-np.log(q[j]) / np.log(m))
    raise InvalidInputError("limit indices are 0, 1/2, 1 and infinity")


# ---------------------------------------------------------------------------
# softmax link and composite gradients


def softmax_link(h, m: Optional[int] = None) -> np.ndarray:
    """Probabilities proportional to exp(h); accepts m-1 scores extended by zero."""
    h = as_array(h)
    if not np.all(np.isfinite(h)):
        raise InvalidInputError("scores must be finite")
    if m is not None and h.size == m - 1:
        h = np.append(h, 0.0)
    z = np.exp(h - h.max())
    return z / z.sum()


def softmax_rows(H: np.ndarray) -> np.ndarray:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    Z = np.exp(H - H.max(axis=1, keepdims=True))
    return Z / Z.sum(axis=1, keepdims=True)


def composite_value(rule: ScoringRule, j: int, h) -> float:
    return rule.value(j, softmax_link(h))


def composite_gradient(rule: ScoringRule, j: int, h) -> np.ndarray:
    """Analytic gradient in h of the loss at label j composed with softmax."""
    h = as_array(h)
    if not np.all(np.isfinite(h)):
        raise InvalidInputError("scores must be finite")
    q = softmax_link(h)
    m = q.size
    lab = rule.label

    if lab in ("log_loss", "two_class_likelihood"):
        g = q.copy()
        g[j] -= 1.0
        return g

    if lab.startswith("two_class"):
        other = 1 - j
        if lab == "two_class_exponential":
            mag = 0.5 * np.sqrt(q[other] / q[j])
        elif lab == "two_class_calibration":
            mag = 0.5 * q[1] / q[0] if j == 0 else 0.5
        elif lab == "two_class_calibration_symmetric":
            mag = 0.5 * (1.0 + q[other] / q[j])
        else:
            raise InvalidInputError(f"no analytic gradient for {lab}")
        g = np.full(2, mag)
        g[j] = -mag
        return g

    if lab.startswith("pairwise_asym"):
        kind = lab.rsplit("_", 1)[1]
        r = m - 1
        g = np.zeros(m)
        if j < r:
            if kind == "likelihood":
                a = q[r] / (q[j] + q[r])
            elif kind == "exponential":
                a = 0.5 * np.sqrt(q[r] / q[j])
            else:
                a = 0.5 * q[r] / q[j]
            g[j] = -a
            g[r] = a
            return g
        if kind == "likelihood":
            g[:r] = q[:r] / (q[:r] + q[r])
        elif kind == "exponential":
            g[:r] = 0.5 * np.sqrt(q[:r] / q[r])
        else:
            g[:r] = 0.5
        g[r] = -g[:r].sum()
        return g

    if lab.startswith("pairwise_sym"):
        kind = lab.rsplit("_", 1)[1]
        if kind == "likelihood":
            g = 2.0 * q / (q + q[j])
        elif kind == "exponential":
            g = np.sqrt(q / q[j])
        else:
            g = 0.5 * (1.0 + q / q[j])
        g[j] = 0.0
        g[j] = -g.sum()
        return g

    if lab in ("power", "power_raw"):
        kind = _power_kind(rule.beta)
        if kind == "max":
            raise InvalidInputError("the max-limit score is not differentiable")
        if kind == "geometric":
            val = float(np.prod(q) ** (1.0 / m) / q[j])
            return val * (1.0 / m - (np.arange(m) == j))
        if kind == "shannon":
            g = q.copy()
            g[j] -= 1.0
            return g / np.log(m)
        beta = rule.beta
        N = float((q ** beta).sum())
        core = (1.0 - beta) * N ** (1.0 / beta - 2.0) * q[j] ** (beta - 1.0)
        vec = q ** beta - (np.arange(m) == j) * N
        if lab == "power":
            return core * vec / (m ** (1.0 / beta - 1.0) - 1.0)
        return core * vec * (1.0 if beta < 1 else -1.0)

    raise InvalidInputError(f"no analytic gradient for {lab}")


@dataclass(frozen=True)
class CompositeRule:
    """A scoring rule evaluated through the softmax link."""

    rule: ScoringRule

    def values(self, H) -> np.ndarray:
        return self.rule.values(softmax_rows(H))

    def value(self, j: int, h) -> float:
        return composite_value(self.rule, j, h)

    def gradient(self, j: int, h) -> np.ndarray:
        return composite_gradient(self.rule, j, h)


# ---------------------------------------------------------------------------
# family descriptors and verification residuals


@dataclass(frozen=True)
class LossFamily:
    """Serializable tag selecting a named scoring rule."""

    family: str
    beta: Optional[float] = None
    nu: Optional[float] = None
    m: Optional[int] = None

    def build(self) -> ScoringRule:
        name = self.family
        if name in ("power", "power_raw"):
            if self.beta is None:
                raise InvalidInputError("power families need beta")
            return power_rule(self.beta, rescaled=(name == "power"))
        if name == "log_loss":
            return log_loss_rule(self.m)
        if name.startswith("two_class_"):
            return two_class_rule(name[len("two_class_"):])
        if name.startswith("pairwise_asym_"):
            return pairwise_asym_rule(name[len("pairwise_asym_"):], self.m)
        if name.startswith("pairwise_sym_"):
            return pairwise_sym_rule(name[len("pairwise_sym_"):], self.m)
        raise InvalidInputError(f"unknown family {name!r}")

    def to_json(self) -> dict:
        out = {"family": self.family}
        for key in ("beta", "nu", "m"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out

    @staticmethod
    def from_json(obj: dict) -> "LossFamily":
        return LossFamily(
            family=obj["family"],
            beta=obj.get("beta"),
            nu=obj.get("nu"),
            m=obj.get("m"),
        )


def canonical_representation_residual(rule: ScoringRule, eta, q) -> float:
    """Gap between the expected loss and its entropy-plus-tangent representation."""
    eta = as_array(eta)
    q = as_array(q)
    risk = rule.risk(eta, q)
    g = np.asarray(rule.entropy.supergradient(q), dtype=float)
    rhs = float(rule.entropy.value(q)) - float((q - eta) @ g)
    return abs(risk - rhs)


def canonical_representation_residuals(rule: ScoringRule, etas, qs) -> np.ndarray:
    etas = np.asarray(etas, dtype=float)
    qs = np.asarray(qs, dtype=float)
    risks = rule.risks(etas, qs)
    G = rule.entropy.supergradients(qs)
    rhs = rule.entropy.values(qs) - ((qs - etas) * G).sum(axis=1)
    return np.abs(risks - rhs)


def properness_on_mesh(rule: ScoringRule, mesh: np.ndarray, tol: float = 1e-9) -> bool:
    """The expected loss of any mesh report is minimized at the report equal to
    the underlying probability row (itself a mesh point)."""
    table = rule.values(mesh)
    risks = risk_matrix(table, mesh)
    own = np.diag(risks)
    best = risks.min(axis=1)
    with np.errstate(invalid="ignore"):
        ok = (own <= best + tol) | (np.isneginf(own) & np.isneginf(best))
    return bool(np.all(ok))
