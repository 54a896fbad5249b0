"""Batch entry point: verification suites, profile sweeps and toy training.

Commands follow `mcloss <verify|sweep|train|eval>` with flags overriding an
optional JSON config.  Verify writes one report CSV and one witness JSON per
suite and exits 0 only when every report is violation free; sweep writes
long-format profile tables; train and eval write a model JSON and metric
CSVs.  All outputs are deterministic given (config, seed).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bounds as bd
from .entropy import (
    cost_weighted_entropy,
    dissimilarity_from_entropy,
    entropy_from_dissimilarity,
    entropy_of_loss_many,
    power_entropy_spec,
    shannon_entropy,
    zero_one_entropy,
)
from .hinge import (
    cost_hinge,
    complete_affine_rows,
    hinge_loss,
    max_hinge,
    sorted_hinge,
    sorted_hinge_global,
    sum_hinge,
)
from .scoring import (
    composite_gradient,
    conjugate_loss_values,
    exponential_base,
    likelihood_base,
    log_loss_rule,
    loss_from_dissimilarity_ratio,
    pairwise_asym_rule,
    pairwise_dissimilarity,
    pairwise_sym_rule,
    power_rule,
    properness_on_mesh,
    canonical_representation_residuals,
    rule_from_dissimilarity,
    softmax_rows,
    two_class_rule,
)
from .simplex import (
    CostMatrix,
    InvalidInputError,
    TrainingFailure,
    box_grid,
    cost_zero_one,
    sample_simplex,
    simplex_grid,
)
from .training import (
    LinearModel,
    class_posteriors,
    composite_family,
    fit,
    hinge_family,
    init_model,
    load_dataset,
    predict_affine,
    predict_argmax,
    predict_clipped,
    synth_gaussians,
    training_objective,
)

USAGE_ERROR = 2
FAILURE = 1

DEFAULTS = {
    "m": 3,
    "seed": 0,
    "samples": 20_000,
    "beta": 0.5,
    "out": "mcloss_out",
    "suite": None,
    "density": 201,
    "d": 2,
    "separation": 5.0,
    "train_n": 1_000,
    "test_n": 4_000,
    "steps": 400,
    "step_scale": 1.0,
    "family": "sorted_hinge",
    "data": None,
    "model": None,
}

# default probe cost matrix: reference-column costs are row minima, so the
# cost hinge stays convex and every costed suite can share it
PROBE_COST = np.array([[0.0, 2.0, 1.0],
                       [1.5, 0.0, 1.0],
                       [2.0, 1.0, 0.0]])


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _tol_report(bound_id: str, m: int, err: float, tol: float,
                samples: int, witness: dict, t0: float) -> bd.BoundReport:
    slack = tol - float(err)
    return bd.BoundReport(bound_id, m, samples, slack,
                          int(slack < -bd.VIOLATION_TOL),
                          dict(witness, slack=slack),
                          time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Verify suites.  Each returns a list of BoundReports.
# ---------------------------------------------------------------------------

def _named_entropies(m: int, beta: float):
    pairs = [("zero_one", zero_one_entropy()),
             ("cost_weighted", cost_weighted_entropy(CostMatrix(PROBE_COST))),
             ("shannon", shannon_entropy()),
             (f"power_{beta:g}", power_entropy_spec(beta))]
    for b in (0.3, 2.0):
        if abs(b - beta) > 1e-12:
            pairs.append((f"power_{b:g}", power_entropy_spec(b)))
    return pairs


def suite_duality(cfg) -> list:
    t0 = time.perf_counter()
    grid = simplex_grid(3, 40)
    etas = grid[np.all(grid > 0, axis=1)]
    orthant = box_grid(0.1, 3.0, 6, 2)
    reports = []
    for name, H in _named_entropies(3, cfg["beta"]):
        f = dissimilarity_from_entropy(H)
        back = entropy_from_dissimilarity(f)
        err = float(np.abs(back.values(etas) - H.values(etas)).max())
        reports.append(_tol_report(f"duality_H_{name}", 3, err, 1e-10,
                                   len(etas), {"entropy": name}, t0))
    for kind, base in (("likelihood", likelihood_base()),
                       ("exponential", exponential_base())):
        f = pairwise_dissimilarity(base, 2)
        H = entropy_from_dissimilarity(f)
        f2 = dissimilarity_from_entropy(H)
        err = float(np.abs(f2.batch_value(orthant) - f.batch_value(orthant)).max())
        reports.append(_tol_report(f"duality_f_{kind}", 3, err, 1e-10,
                                   len(orthant), {"dissimilarity": kind}, t0))
    return reports


def _named_rules(m: int, beta: float):
    rules = [log_loss_rule(m)]
    if m == 2:
        rules += [two_class_rule(k) for k in
                  ("likelihood", "exponential", "calibration")]
    rules += [pairwise_sym_rule(k, m) for k in ("likelihood", "exponential")]
    rules += [pairwise_asym_rule(k, m) for k in ("likelihood", "exponential")]
    rules += [power_rule(b) for b in dict.fromkeys([0.0, beta, 2.0])]
    return rules


def suite_properness(cfg) -> list:
    gen = np.random.default_rng(cfg["seed"])
    n = max(cfg["samples"], 1)
    m = cfg["m"]
    mesh = simplex_grid(m, 14)
    reports = []
    for rule in _named_rules(m, cfg["beta"]):
        t0 = time.perf_counter()
        rm = rule.m if rule.m is not None else m
        etas = sample_simplex(gen, rm, n)
        qs = sample_simplex(gen, rm, n) * (1 - 1e-3) + 1e-3 / rm
        resid = float(canonical_representation_residuals(rule, etas, qs).max())
        grid = mesh if rm == m else simplex_grid(rm, 14)
        proper = properness_on_mesh(rule, grid * (1 - 1e-6) + 1e-6 / rm)
        rep = _tol_report(f"properness_{rule.label}", rm, resid, 1e-9, n,
                          {"rule": rule.label, "grid_proper": bool(proper)}, t0)
        if not proper:
            rep = bd.BoundReport(rep.bound_id, rep.m, rep.samples,
                                 rep.worst_slack, rep.violations + 1,
                                 rep.witness, rep.seconds)
        reports.append(rep)
    return reports


def suite_gradients(cfg) -> list:
    gen = np.random.default_rng(cfg["seed"])
    n = min(max(cfg["samples"], 100), 1_000)
    m = cfg["m"]
    h = 1e-6
    reports = []
    for rule in _named_rules(m, cfg["beta"]):
        t0 = time.perf_counter()
        rm = rule.m if rule.m is not None else m
        worst = 0.0
        H = gen.uniform(-2.0, 2.0, (n, rm))
        labels = gen.integers(0, rm, n)
        for row, j in zip(H, labels):
            g = composite_gradient(rule, int(j), row)
            fd = np.empty(rm)
            for c in range(rm):
                up = row.copy()
                up[c] += h
                dn = row.copy()
                dn[c] -= h
                fd[c] = (rule.value(int(j), softmax_rows(up[None])[0])
                         - rule.value(int(j), softmax_rows(dn[None])[0])) / (2 * h)
            scale = max(1.0, float(np.abs(g).max()), float(np.abs(fd).max()))
            worst = max(worst, float(np.abs(g - fd).max()) / scale)
        reports.append(_tol_report(f"gradients_{rule.label}", rm, worst, 1e-6,
                                   n, {"rule": rule.label}, t0))
    return reports


def suite_hinge_order(cfg) -> list:
    gen = np.random.default_rng(cfg["seed"])
    m = cfg["m"]
    n = max(cfg["samples"], 1)
    taus = gen.uniform(-3.0, 3.0, (n, m - 1))
    zo3 = max_hinge(m).values(taus)
    llw2 = sum_hinge(m).values(taus)
    zo4 = sorted_hinge(m).values(taus)
    dkr2 = sorted_hinge_global(m).values(taus)
    t0 = time.perf_counter()
    reports = []

    def gap_report(bound_id, gap, extra):
        worst = int(np.argmin(gap))
        witness = {"tau": taus[worst % n].tolist(), "gap": float(gap[worst]),
                   **extra}
        return bd.BoundReport(bound_id, m, n, float(gap.min()),
                              int((gap < -bd.VIOLATION_TOL).sum()), witness,
                              time.perf_counter() - t0)

    reports.append(gap_report("order_zo3_le_llw2", (llw2 - zo3).ravel(), {}))
    reports.append(gap_report("order_zo4_le_dkr2", (dkr2 - zo4).ravel(), {}))
    reports.append(gap_report("order_nonnegative",
                              np.concatenate([zo3.ravel(), zo4.ravel()]), {}))
    simplex = simplex_grid(m, 8)
    heads = simplex[:, : m - 1]
    want = 1.0 - simplex
    err = max(float(np.abs(builder(m).values(heads) - want).max())
              for builder in (max_hinge, sum_hinge, sorted_hinge,
                              sorted_hinge_global))
    reports.append(_tol_report("simplex_alignment", m, err, 1e-12,
                               len(simplex), {}, t0))
    if m == 3:
        tau = np.array([[0.6, -0.3]])
        hand = {
            "zo3": (max_hinge(3), [0.4, 1.3, 0.6]),
            "llw2": (sum_hinge(3), [0.7, 1.3, 0.6]),
            "zo4": (sorted_hinge(3), [0.55, 1.3, 0.45]),
            "dkr2": (sorted_hinge_global(3), [0.55, 1.45, 0.45]),
        }
        err = max(float(np.abs(loss.values(tau)[0] - np.array(want)).max())
                  for loss, want in hand.values())
        reports.append(_tol_report("hand_rows", 3, err, 1e-12, 4,
                                   {"tau": [0.6, -0.3]}, t0))
    return reports


def suite_entropy_match(cfg) -> list:
    t0 = time.perf_counter()
    m = 3
    etas = simplex_grid(m, 40)
    shift = 1e-3
    reports = []

    f = pairwise_dissimilarity(likelihood_base(), m)
    H = pairwise_asym_rule("likelihood", m).entropy
    source = etas * (1 - shift) + shift / m
    ratios = source[:, :-1] / source[:, -1:]

    rule = rule_from_dissimilarity(f, m)
    table = rule.values(source)
    err = float(np.abs(entropy_of_loss_many(table, source, etas)
                       - H.values(etas)).max())
    reports.append(_tol_report("entropy_match_f_simplex", m, err, 1e-3,
                               len(etas), {"construction": "simplex"}, t0))

    table = np.array([[loss_from_dissimilarity_ratio(f, j, u) for j in range(m)]
                      for u in ratios])
    err = float(np.abs(entropy_of_loss_many(table, ratios, etas)
                       - H.values(etas)).max())
    reports.append(_tol_report("entropy_match_f_ratio", m, err, 1e-3,
                               len(etas), {"construction": "ratio"}, t0))

    base = likelihood_base()
    scores = np.array([f.subgradient(u) for u in ratios])
    tail = lambda S: np.asarray(base.conjugate(S), dtype=float).sum(axis=1)
    table = conjugate_loss_values(scores, tail)
    err = float(np.abs(entropy_of_loss_many(table, scores, etas)
                       - H.values(etas)).max())
    reports.append(_tol_report("entropy_match_f_conjugate", m, err, 1e-3,
                               len(etas), {"construction": "conjugate"}, t0))

    C = CostMatrix(PROBE_COST)
    gap = bd.certify_entropy(cost_hinge(C), cost_weighted_entropy(C))
    reports.append(_tol_report("entropy_match_cw3", m, gap, 1e-3, 0,
                               {"loss": "cost_hinge"}, t0))
    for name, builder in (("zo3", max_hinge), ("zo4", sorted_hinge),
                          ("llw2", sum_hinge), ("dkr2", sorted_hinge_global)):
        gap = bd.certify_entropy(builder(m), zero_one_entropy())
        reports.append(_tol_report(f"entropy_match_{name}", m, gap, 1e-3, 0,
                                   {"loss": builder(m).label}, t0))
    return reports


def suite_hinge_bounds(cfg) -> list:
    n = cfg["samples"]
    reports = [
        bd.check_hinge_bounds("zo4", m=cfg["m"], n=n, rng=cfg["seed"]),
        bd.check_hinge_bounds("cw3", C=cost_zero_one(cfg["m"]), n=n,
                              rng=cfg["seed"]),
    ]
    if cfg["m"] == 3:
        reports.append(bd.check_hinge_bounds("cw3", C=CostMatrix(PROBE_COST),
                                             n=n, rng=cfg["seed"]))
    return reports


def suite_general_bound(cfg) -> list:
    n = cfg["samples"]
    m = cfg["m"]
    from .hinge import complete_clipped_rows
    cases = [(sorted_hinge(m), complete_affine_rows),
             (sorted_hinge_global(m), complete_affine_rows),
             (sum_hinge(m), complete_affine_rows),
             (max_hinge(m), complete_clipped_rows)]
    return [bd.check_general_bound(loss, n=n, rng=cfg["seed"], ordering=order)
            for loss, order in cases]


def suite_manifold(cfg) -> list:
    n = min(cfg["samples"], 10_000)
    return [bd.value_manifold_check(builder(3), n=n, rng=cfg["seed"])
            for builder in (max_hinge, sorted_hinge, sum_hinge,
                            sorted_hinge_global)]


def suite_pinsker(cfg) -> list:
    t0 = time.perf_counter()
    reports = [bd.check_scoring_bounds(log_loss_rule(cfg["m"]), 1.0,
                                       n=cfg["samples"], rng=cfg["seed"])]
    rule = log_loss_rule(2)
    eta = np.array([0.9, 0.1])
    nudged = np.array([0.5 - 1e-9, 0.5 + 1e-9])
    lhs = 0.5 * float(bd.zero_one_regrets(eta[None], nudged[None])[0]) ** 2
    rhs = float(rule.regret(eta, nudged))
    reports.append(bd.BoundReport("pinsker_spot", 2, 1, rhs - lhs,
                                  int(rhs - lhs < -bd.VIOLATION_TOL),
                                  {"eta": eta.tolist(), "lhs": lhs, "rhs": rhs},
                                  time.perf_counter() - t0))
    return reports


def suite_kappa(cfg) -> list:
    t0 = time.perf_counter()
    cases = [("shannon_m2", shannon_entropy(), 2, 1.0),
             ("shannon_m3", shannon_entropy(), 3, 1.0),
             ("half_power", power_entropy_spec(0.5, rescaled=False), 3,
              bd.kappa_constant("power", beta=0.5, m=3)),
             ("pairwise_exponential",
              pairwise_sym_rule("exponential", 3).entropy, 3,
              bd.kappa_constant("pairwise_beta", nu=-0.5)),
             ("pairwise_likelihood",
              pairwise_sym_rule("likelihood", 3).entropy, 3,
              bd.kappa_constant("pairwise_beta", nu=0.0))]
    beta = cfg["beta"]
    if 0.0 < beta < 1.0:
        cases.append((f"power_{beta:g}",
                      power_entropy_spec(beta, rescaled=False), 3,
                      bd.kappa_constant("power", beta=beta, m=3)))
    reports = []
    for name, H, m, kappa in cases:
        mod = bd.strong_convexity_modulus(H, m)
        slack = mod - (kappa - 1e-3)
        reports.append(bd.BoundReport(f"kappa_{name}", m, 0, slack,
                                      int(slack < -bd.VIOLATION_TOL),
                                      {"modulus": mod, "kappa": kappa},
                                      time.perf_counter() - t0))
    return reports


def suite_cw_bounds(cfg) -> list:
    gen = np.random.default_rng(cfg["seed"])
    m = cfg["m"]
    C = CostMatrix(PROBE_COST) if m == 3 else cost_zero_one(m)
    reports = []
    if m <= 4:
        reports.append(bd.check_cw_bounds(log_loss_rule(m), C,
                                          n=min(cfg["samples"], 2_000),
                                          rng=cfg["seed"]))
    reports.append(bd.check_two_class_cost_bound(log_loss_rule(2),
                                                 np.array([2.0, 1.0])))
    etas = sample_simplex(gen, m, cfg["samples"])
    qs = sample_simplex(gen, m, cfg["samples"])
    base = gen.uniform(0.1, 3.0, (m, m))
    np.fill_diagonal(base, 0.0)
    reports.append(bd.misclass_upper_bounds(etas, qs, C=CostMatrix(base)))

    t0 = time.perf_counter()
    loss = sorted_hinge(3)
    worst = 0.0
    for _ in range(200):
        eta = sample_simplex(gen, 3, 1)[0]
        act = gen.uniform(-2.0, 2.0, loss.action_dim)
        worst = max(worst, bd.risk_identity_check(loss, CostMatrix(PROBE_COST),
                                                  eta, act))
    reports.append(_tol_report("cost_identity", 3, worst, 1e-9, 200, {}, t0))

    eps = 1e-6
    witness = bd.misclass_upper_bounds(np.array([[0.8, 0.2, 0.0]]),
                                       np.array([[0.5 - eps, 0.5 + eps, 0.0]]))
    reports.append(witness)
    return reports


def suite_calibration(cfg) -> list:
    t0 = time.perf_counter()
    grid = box_grid(-3.0, 3.0, 61, 2)
    eta = np.array([0.5, 0.3, 0.2])
    C = CostMatrix(PROBE_COST)
    cases = [
        ("calibration_zo4", sorted_hinge(3), eta, 2, (0.5 - 0.2) / 3),
        ("calibration_llw2", sum_hinge(3), eta, 1, (0.5 - 0.3) / 3),
        ("calibration_cw3", cost_hinge(C), eta,
         int(np.argmax(eta @ C.c)),
         (np.max(eta @ C.c) - np.min(eta @ C.c)) / 3),
    ]
    reports = []
    for name, loss, eta_, k, floor in cases:
        val = bd.calibration_infimum(loss, lambda A: -loss.values(A),
                                     eta_, k, grid)
        slack = val - (floor - 1e-3)
        reports.append(bd.BoundReport(name, 3, len(grid), slack,
                                      int(slack < -bd.VIOLATION_TOL),
                                      {"infimum": val, "floor": float(floor),
                                       "class": k},
                                      time.perf_counter() - t0))
    return reports


SUITES: dict = {
    "duality": suite_duality,
    "properness": suite_properness,
    "gradients": suite_gradients,
    "hinge-order": suite_hinge_order,
    "entropy-match": suite_entropy_match,
    "hinge-bounds": suite_hinge_bounds,
    "general-bound": suite_general_bound,
    "manifold": suite_manifold,
    "pinsker": suite_pinsker,
    "kappa": suite_kappa,
    "cw-bounds": suite_cw_bounds,
    "calibration": suite_calibration,
}


# ---------------------------------------------------------------------------
# Output plumbing.
# ---------------------------------------------------------------------------

def _write_reports(outdir: Path, suite: str, reports) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    lines = ["bound,m,samples,worst_slack,violations"]
    for rep in reports:
        lines.append(",".join([rep.bound_id, str(rep.m), str(rep.samples),
                               _fmt(rep.worst_slack), str(rep.violations)]))
    (outdir / f"{suite}.csv").write_text("\n".join(lines) + "\n")
    witness = {rep.bound_id: rep.witness for rep in reports}
    (outdir / f"{suite}_witness.json").write_text(
        json.dumps(witness, indent=2, sort_keys=True) + "\n")


def _write_metrics(path: Path, metrics: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["metric,value"] + [f"{k},{_fmt(v)}" for k, v in metrics.items()]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Commands.
# ---------------------------------------------------------------------------

def cmd_verify(cfg) -> int:
    names = [cfg["suite"]] if cfg["suite"] else list(SUITES)
    for name in names:
        if name not in SUITES:
            print(f"unknown suite {name!r}; choices: {', '.join(SUITES)}",
                  file=sys.stderr)
            return USAGE_ERROR
    outdir = Path(cfg["out"])
    bad = 0
    for name in names:
        reports = SUITES[name](cfg)
        _write_reports(outdir, name, reports)
        for rep in reports:
            status = "ok" if rep.ok() else "FAIL"
            print(f"{name}: {rep.bound_id} {status} "
                  f"worst_slack={rep.worst_slack:.3e} "
                  f"violations={rep.violations}")
            bad += rep.violations
    return 0 if bad == 0 else FAILURE


def cmd_sweep(cfg) -> int:
    suite = cfg["suite"] or "psi-exponential"
    density = int(cfg["density"])
    if density <= 0:
        print("sweep needs a positive mesh density", file=sys.stderr)
        return USAGE_ERROR
    if suite not in ("psi-exponential", "hinge-slack"):
        print(f"unknown sweep {suite!r}; choices: psi-exponential, hinge-slack",
              file=sys.stderr)
        return USAGE_ERROR
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    lines = ["bound_id,t_or_sample,lhs,rhs,slack"]
    bad = 0
    if suite == "psi-exponential":
        grid = np.linspace(0.0, 1.0, density)
        prof = bd.psi_profile("psi_underline", power_rule(0.5, rescaled=False),
                              m=2, t_grid=grid)
        closed = 1.0 - np.sqrt(np.clip(1.0 - grid ** 2, 0.0, None))
        for t, lhs, rhs in zip(grid, prof.value, closed):
            slack = 1e-3 - abs(lhs - rhs)
            bad += slack < -bd.VIOLATION_TOL
            lines.append(",".join([
                "psi_underline_exponential", _fmt(t), _fmt(lhs), _fmt(rhs),
                _fmt(slack)]))
    else:
        m = cfg["m"]
        if m > 4:
            print("hinge-slack sweeps are limited to m <= 4", file=sys.stderr)
            return USAGE_ERROR
        etas = simplex_grid(m, min(density, 24))
        taus = box_grid(-2.0, 2.0, 5, m - 1)
        loss = sorted_hinge(m)
        values = loss.values(taus)
        scores = complete_affine_rows(taus)
        idx = 0
        for ti in range(len(taus)):
            lhs_all = bd.zero_one_regrets(etas, np.tile(scores[ti], (len(etas), 1))) / m
            rhs_all = etas @ values[ti] - (1.0 - etas.max(axis=1))
            for lhs, rhs in zip(lhs_all, rhs_all):
                slack = rhs - lhs
                bad += slack < -bd.VIOLATION_TOL
                lines.append(",".join([
                    "hinge_zo4", str(idx), _fmt(lhs), _fmt(rhs), _fmt(slack)]))
                idx += 1
    (outdir / f"{suite}.csv").write_text("\n".join(lines) + "\n")
    print(f"{suite}: {len(lines) - 1} rows, violations={int(bad)}")
    return 0 if bad == 0 else FAILURE


_AFFINE_FAMILIES = ("sorted_hinge", "sum_hinge", "sorted_hinge_global")
_CLIPPED_FAMILIES = ("max_hinge", "cost_hinge")


def _resolve_family(cfg):
    name = cfg["family"]
    m = cfg["m"]
    if name in _AFFINE_FAMILIES + _CLIPPED_FAMILIES or name == "binary_hinge":
        cost = cost_zero_one(m) if name == "cost_hinge" else None
        loss = hinge_loss(name, m, cost=cost)
        fam = hinge_family(loss)
        primary = predict_affine if name in _AFFINE_FAMILIES else predict_clipped
        return fam, primary
    if name == "log_loss":
        fam = composite_family(log_loss_rule(m))
        return fam, predict_argmax
    if name == "power":
        fam = composite_family(power_rule(cfg["beta"]), m=m)
        return fam, predict_argmax
    raise InvalidInputError(f"unknown training family {name!r}")


def _training_data(cfg):
    if cfg["data"]:
        path = Path(cfg["data"])
        if not path.exists():
            return None, None
        data = load_dataset(path, {"m": cfg["m"]})
        return data, None
    train = synth_gaussians(cfg["m"], cfg["d"], cfg["train_n"],
                            cfg["separation"], cfg["seed"])
    test = synth_gaussians(cfg["m"], cfg["d"], cfg["test_n"],
                           cfg["separation"], cfg["seed"] + 1)
    return train, test


def cmd_train(cfg) -> int:
    try:
        fam, primary = _resolve_family(cfg)
    except InvalidInputError as exc:
        print(str(exc), file=sys.stderr)
        return USAGE_ERROR
    train, test = _training_data(cfg)
    if train is None:
        print(f"missing data file {cfg['data']}", file=sys.stderr)
        return USAGE_ERROR
    model0 = init_model(fam.action_dim, train.d, fam.label, fam.link)
    try:
        model = fit(model0, train, fam, steps=cfg["steps"],
                    step_scale=cfg["step_scale"])
    except TrainingFailure as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return FAILURE
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "model.json").write_text(model.to_json() + "\n")
    metrics = {
        "objective_initial": model.history[0] if model.history else float("nan"),
        "objective_final": training_objective(model, train, fam),
        "train_risk": _risk(model, train, primary),
    }
    if test is not None:
        metrics["test_risk"] = _risk(model, test, primary)
        if fam.link == "margins":
            metrics["test_risk_affine"] = _risk(model, test, predict_affine)
            metrics["test_risk_clipped"] = _risk(model, test, predict_clipped)
        if fam.link == "softmax" and "means" in test.meta:
            probs = softmax_rows(model.actions(test.features))
            post = class_posteriors(np.asarray(test.meta["means"]),
                                    test.features)
            metrics["posterior_l1"] = float(
                np.abs(probs - post).sum(axis=1).mean())
    _write_metrics(outdir / "train_metrics.csv", metrics)
    for k, v in metrics.items():
        print(f"{k}={v:.6g}")
    return 0


def _risk(model, data, predictor) -> float:
    from .training import evaluate_zero_one
    return evaluate_zero_one(model, data, predictor)


def cmd_eval(cfg) -> int:
    model_path = Path(cfg["model"] or (Path(cfg["out"]) / "model.json"))
    if not model_path.exists():
        print(f"missing model file {model_path}", file=sys.stderr)
        return USAGE_ERROR
    model = LinearModel.from_json(model_path.read_text())
    data, test = _training_data(cfg)
    if data is None:
        print(f"missing data file {cfg['data']}", file=sys.stderr)
        return USAGE_ERROR
    if cfg["data"] is None and test is not None:
        data = test
    metrics = {}
    if model.link == "margins":
        metrics["risk_affine"] = _risk(model, data, predict_affine)
        metrics["risk_clipped"] = _risk(model, data, predict_clipped)
        if model.family in _AFFINE_FAMILIES + ("max_hinge",):
            loss = hinge_loss(model.family, data.m)
            from .training import predict_by_score
            metrics["risk_score"] = _risk(model, data, predict_by_score(loss))
    else:
        metrics["risk_argmax"] = _risk(model, data, predict_argmax)
    outdir = Path(cfg["out"])
    _write_metrics(outdir / "eval_metrics.csv", metrics)
    for k, v in metrics.items():
        print(f"{k}={v:.6g}")
    return 0


# ---------------------------------------------------------------------------
# Argument handling.
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcloss", description=__doc__)
    p.add_argument("command", choices=("verify", "sweep", "train", "eval"))
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--suite", type=str, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--density", type=int, default=None)
    p.add_argument("--family", type=str, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--separation", type=float, default=None)
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--model", type=str, default=None)
    return p


def _merge_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(args.config)
        blob = json.loads(path.read_text())
        unknown = set(blob) - set(DEFAULTS)
        if unknown:
            raise InvalidInputError(f"unknown config keys {sorted(unknown)}")
        cfg.update(blob)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
    except (FileNotFoundError, InvalidInputError, json.JSONDecodeError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if cfg["m"] < 2:
        print("need at least two classes", file=sys.stderr)
        return USAGE_ERROR
    if cfg["samples"] < 1:
        print("need a positive sample count", file=sys.stderr)
        return USAGE_ERROR
    handler = {"verify": cmd_verify, "sweep": cmd_sweep,
               "train": cmd_train, "eval": cmd_eval}[args.command]
    return handler(cfg)


if __name__ == "__main__":
    sys.exit(main())
