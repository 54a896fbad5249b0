"""Tests for the linear training loop and its family adapters."""

import json

import numpy as np
import pytest

from mcloss import (
    Dataset,
    InvalidInputError,
    LinearModel,
    TrainingFailure,
    class_posteriors,
    complete_affine_rows,
    composite_family,
    cost_zero_one,
    evaluate_zero_one,
    fit,
    hinge_family,
    hinge_loss,
    init_model,
    load_dataset,
    log_loss_rule,
    max_hinge,
    nearest_mean_predictions,
    power_rule,
    predict_affine,
    predict_argmax,
    predict_by_score,
    predict_clipped,
    save_dataset,
    simplex_frame,
    softmax_rows,
    sorted_hinge,
    sorted_hinge_global,
    sum_hinge,
    synth_gaussians,
    training_objective,
)
from mcloss.scoring import composite_gradient
from mcloss.simplex import CostMatrix

RNG = np.random.default_rng(42)

GENERAL_COST = CostMatrix(np.array([[0.0, 2.0, 1.0],
                                    [1.5, 0.0, 1.0],
                                    [2.0, 1.0, 0.0]]))


def margin_losses(m):
    out = [max_hinge(m), sum_hinge(m), sorted_hinge(m),
           sorted_hinge_global(m)]
    if m == 2:
        out.append(hinge_loss("binary_hinge", 2))
    if m == 3:
        out.append(hinge_loss("cost_hinge", 3, cost=GENERAL_COST))
    return out


# ---------------------------------------------------------------------------
# Synthetic data.
# ---------------------------------------------------------------------------

class TestSimplexFrame:
    @pytest.mark.parametrize("m,d", [(2, 1), (3, 2), (3, 5), (5, 4)])
    def test_unit_pairwise_distances(self, m, d):
        pts = simplex_frame(m, d)
        assert pts.shape == (m, d)
        for i in range(m):
            for j in range(i + 1, m):
                assert np.linalg.norm(pts[i] - pts[j]) == pytest.approx(1.0)

    def test_centered(self):
        assert np.abs(simplex_frame(4, 3).sum(axis=0)).max() < 1e-12

    def test_narrow_embedding_truncates(self):
        pts = simplex_frame(4, 2)
        assert pts.shape == (4, 2)

    def test_bad_dims(self):
        with pytest.raises(InvalidInputError):
            simplex_frame(0, 2)


class TestSynthGaussians:
    def test_deterministic(self):
        a = synth_gaussians(3, 2, 100, 2.0, seed=5)
        b = synth_gaussians(3, 2, 100, 2.0, seed=5)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_seed_changes_draw(self):
        a = synth_gaussians(3, 2, 100, 2.0, seed=5)
        b = synth_gaussians(3, 2, 100, 2.0, seed=6)
        assert not np.array_equal(a.features, b.features)

    def test_mean_separation(self):
        data = synth_gaussians(4, 3, 10, 6.0, seed=0)
        means = np.asarray(data.meta["means"])
        for i in range(4):
            for j in range(i + 1, 4):
                assert np.linalg.norm(means[i] - means[j]) == pytest.approx(6.0)

    def test_zero_separation_collapses_means(self):
        data = synth_gaussians(3, 2, 10, 0.0, seed=0)
        assert np.abs(np.asarray(data.meta["means"])).max() == 0.0

    def test_well_separated_classes_are_easy(self):
        data = synth_gaussians(3, 2, 4000, 6.0, seed=1)
        preds = nearest_mean_predictions(data.meta["means"], data.features)
        assert np.mean(preds != data.labels) < 0.01

    def test_meta_fields(self):
        data = synth_gaussians(3, 2, 50, 1.5, seed=9)
        assert data.meta["seed"] == 9
        assert data.meta["m"] == 3
        assert data.meta["noise"] == 1.0
        assert data.m == 3 and data.n == 50 and data.d == 2

    def test_negative_separation_rejected(self):
        with pytest.raises(InvalidInputError):
            synth_gaussians(3, 2, 50, -1.0, seed=0)


class TestClassPosteriors:
    def test_rows_sum_to_one(self):
        data = synth_gaussians(3, 2, 200, 2.0, seed=3)
        post = class_posteriors(data.meta["means"], data.features)
        assert np.abs(post.sum(axis=1) - 1.0).max() < 1e-12

    def test_at_a_mean_the_own_class_dominates(self):
        means = simplex_frame(3, 2) * 5.0
        post = class_posteriors(means, means)
        assert np.array_equal(np.argmax(post, axis=1), np.arange(3))

    def test_zero_separation_is_uniform(self):
        post = class_posteriors(np.zeros((3, 2)), RNG.normal(size=(5, 2)))
        assert np.abs(post - 1.0 / 3).max() < 1e-12


class TestDataset:
    def test_misaligned_rows_rejected(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((4, 2)), np.zeros(3, dtype=int))

    def test_labels_out_of_range_rejected(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((4, 2)), np.array([0, 1, 2, 3]), {"m": 3})

    def test_negative_labels_rejected(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((3, 2)), np.array([0, -1, 1]))

    def test_m_inferred_from_labels(self):
        data = Dataset(np.zeros((4, 2)), np.array([0, 1, 2, 1]))
        assert data.m == 3

    def test_needs_one_row_per_class(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((2, 2)), np.array([0, 1]), {"m": 4})


class TestDatasetIO:
    def test_round_trip_is_exact(self, tmp_path):
        data = synth_gaussians(3, 4, 60, 2.0, seed=1)
        path = tmp_path / "data.csv"
        save_dataset(data, path)
        back = load_dataset(path, {"m": 3})
        assert np.array_equal(back.features, data.features)
        assert np.array_equal(back.labels, data.labels)

    def test_header_names_columns(self, tmp_path):
        data = synth_gaussians(2, 3, 20, 1.0, seed=0)
        path = tmp_path / "data.csv"
        save_dataset(data, path)
        header = path.read_text().splitlines()[0]
        assert header == "x1,x2,x3,y"


# ---------------------------------------------------------------------------
# Family adapters: values and subgradients.
# ---------------------------------------------------------------------------

def finite_difference(values, Y, T, h=1e-7):
    base_shape = T.shape
    fd = np.zeros(base_shape)
    for c in range(base_shape[1]):
        up = T.copy()
        up[:, c] += h
        dn = T.copy()
        dn[:, c] -= h
        fd[:, c] = (values(Y, up) - values(Y, dn)) / (2 * h)
    return fd


class TestHingeGradients:
    @pytest.mark.parametrize("loss", margin_losses(3), ids=lambda l: l.label)
    def test_matches_finite_differences(self, loss):
        fam = hinge_family(loss)
        T = RNG.uniform(-2.0, 2.0, (300, loss.action_dim))
        Y = RNG.integers(0, loss.m, 300)
        fd = finite_difference(fam.values, Y, T)
        err = np.abs(fam.grads(Y, T) - fd).max()
        assert err < 1e-6

    @pytest.mark.parametrize("loss", margin_losses(3), ids=lambda l: l.label)
    def test_subgradient_inequality(self, loss):
        fam = hinge_family(loss)
        T1 = RNG.uniform(-2.0, 2.0, (800, loss.action_dim))
        T2 = RNG.uniform(-2.0, 2.0, (800, loss.action_dim))
        Y = RNG.integers(0, loss.m, 800)
        gap = (fam.values(Y, T2) - fam.values(Y, T1)
               - (fam.grads(Y, T1) * (T2 - T1)).sum(axis=1))
        assert gap.min() > -1e-12

    @pytest.mark.parametrize("m", [2, 4, 5])
    def test_other_class_counts(self, m):
        loss = sorted_hinge(m)
        fam = hinge_family(loss)
        T = RNG.uniform(-2.0, 2.0, (200, m - 1))
        Y = RNG.integers(0, m, 200)
        fd = finite_difference(fam.values, Y, T)
        assert np.abs(fam.grads(Y, T) - fd).max() < 1e-6

    def test_two_class_collapse_to_binary_hinge(self):
        taus = RNG.uniform(-3.0, 3.0, (100, 1))
        binary = hinge_loss("binary_hinge", 2)
        want = binary.values(taus)
        for builder in (max_hinge, sum_hinge, sorted_hinge):
            assert np.abs(builder(2).values(taus) - want).max() == 0.0
        pooled = sorted_hinge_global(2).values(taus)
        assert np.abs(pooled - want).max() > 0.1

    def test_two_class_gradients_collapse(self):
        taus = RNG.uniform(-3.0, 3.0, (100, 1))
        labels = RNG.integers(0, 2, 100)
        want = hinge_family(hinge_loss("binary_hinge", 2)).grads(labels, taus)
        for builder in (max_hinge, sum_hinge, sorted_hinge):
            got = hinge_family(builder(2)).grads(labels, taus)
            assert np.abs(got - want).max() == 0.0

    def test_unknown_label_rejected(self):
        class Stub:
            label = "mystery"
            m = 3
            action_dim = 2
        with pytest.raises(InvalidInputError):
            hinge_family(Stub())

    def test_family_metadata(self):
        fam = hinge_family(sorted_hinge(4))
        assert fam.label == "sorted_hinge"
        assert fam.action_dim == 3
        assert fam.link == "margins"


class TestCompositeGradients:
    def test_log_loss_fast_path_matches_generic(self):
        rule = log_loss_rule(3)
        fam = composite_family(rule)
        A = RNG.uniform(-2.0, 2.0, (200, 3))
        Y = RNG.integers(0, 3, 200)
        got = fam.grads(Y, A)
        want = np.stack([composite_gradient(rule, int(j), a)
                         for j, a in zip(Y, A)])
        assert np.abs(got - want).max() < 1e-12

    @pytest.mark.parametrize("beta", [0.5, 2.0])
    def test_power_rule_matches_finite_differences(self, beta):
        fam = composite_family(power_rule(beta), m=3)
        A = RNG.uniform(-2.0, 2.0, (100, 3))
        Y = RNG.integers(0, 3, 100)
        fd = finite_difference(fam.values, Y, A)
        assert np.abs(fam.grads(Y, A) - fd).max() < 1e-5

    def test_family_metadata(self):
        fam = composite_family(log_loss_rule(3))
        assert fam.label == "composite_log_loss"
        assert fam.action_dim == 3
        assert fam.link == "softmax"

    def test_needs_class_count(self):
        with pytest.raises(InvalidInputError):
            composite_family(power_rule(0.5))


# ---------------------------------------------------------------------------
# Models and prediction maps.
# ---------------------------------------------------------------------------

class TestLinearModel:
    def test_actions_apply_bias(self):
        W = np.array([[1.0, 0.0, 2.0], [0.0, -1.0, 0.5]])
        model = LinearModel(W, "sorted_hinge", "margins")
        out = model.actions(np.array([[3.0, 4.0]]))
        assert np.allclose(out, [[5.0, -3.5]])

    def test_json_round_trip_is_exact(self):
        W = RNG.normal(size=(2, 4))
        model = LinearModel(W, "sorted_hinge", "margins", (0.5, 0.25))
        back = LinearModel.from_json(model.to_json())
        assert np.array_equal(back.weights, model.weights)
        assert back.family == model.family
        assert back.link == model.link
        assert back.history == model.history

    def test_json_history_is_plain_data(self):
        model = init_model(2, 3, "sorted_hinge", "margins")
        blob = json.loads(model.to_json())
        assert blob["history"] == []

    def test_nonfinite_weights_rejected(self):
        with pytest.raises(InvalidInputError):
            LinearModel(np.array([[np.inf, 0.0]]), "x", "margins")

    def test_init_model_shape(self):
        model = init_model(3, 5, "composite_log_loss", "softmax")
        assert model.weights.shape == (3, 6)
        assert np.all(model.weights == 0.0)


class TestPredictionMaps:
    def test_affine_and_clipped_can_disagree(self):
        tau = np.array([[0.6, -0.3]])
        assert predict_affine(tau)[0] == 2
        assert predict_clipped(tau)[0] == 0

    def test_affine_agrees_with_appended_coordinate(self):
        T = RNG.uniform(-2.0, 2.0, (50, 2))
        want = np.argmax(complete_affine_rows(T), axis=1)
        assert np.array_equal(predict_affine(T), want)

    def test_score_map_prefers_cheapest_class(self):
        loss = sorted_hinge(3)
        T = RNG.uniform(-2.0, 2.0, (50, 2))
        want = np.argmin(loss.values(T), axis=1)
        assert np.array_equal(predict_by_score(loss)(T), want)

    def test_evaluate_zero_one_counts_mismatches(self):
        data = Dataset(np.array([[1.0], [1.0], [1.0]]),
                       np.array([0, 1, 0]), {"m": 2})
        model = LinearModel(np.array([[1.0, 0.0], [0.0, 0.0]]),
                            "composite_log_loss", "softmax")
        # actions are (1, 0) for every row, so argmax always picks class 0
        assert evaluate_zero_one(model, data, predict_argmax) == pytest.approx(1 / 3)


# ---------------------------------------------------------------------------
# Fitting.
# ---------------------------------------------------------------------------

class TestFit:
    def setup_method(self):
        self.data = synth_gaussians(3, 2, 600, 4.0, seed=3)

    def test_composite_objective_halves(self):
        fam = composite_family(log_loss_rule(3))
        model = fit(init_model(3, 2, fam.label, fam.link), self.data, fam,
                    steps=300, step_scale=2.0)
        assert model.history[-1] < 0.5 * model.history[0]

    def test_history_window_means_nonincreasing(self):
        fam = hinge_family(sorted_hinge(3))
        model = fit(init_model(2, 2, fam.label, fam.link), self.data, fam,
                    steps=400)
        trace = np.asarray(model.history)
        windows = trace.reshape(4, 100).mean(axis=1)
        assert np.all(np.diff(windows) <= 1e-3)

    def test_zero_steps_returns_input_model(self):
        fam = hinge_family(sorted_hinge(3))
        model = init_model(2, 2, fam.label, fam.link)
        assert fit(model, self.data, fam, steps=0) is model

    def test_history_length_matches_steps(self):
        fam = hinge_family(sum_hinge(3))
        model = fit(init_model(2, 2, fam.label, fam.link), self.data, fam,
                    steps=17)
        assert len(model.history) == 17

    def test_divergence_raises_with_diagnostics(self):
        fam = hinge_family(sorted_hinge(3))
        with pytest.raises(TrainingFailure, match="step scale"):
            fit(init_model(2, 2, fam.label, fam.link), self.data, fam,
                steps=50, step_scale=1e9)

    def test_shape_mismatch_rejected(self):
        fam = hinge_family(sorted_hinge(3))
        with pytest.raises(InvalidInputError):
            fit(init_model(3, 2, fam.label, fam.link), self.data, fam, steps=5)

    def test_negative_steps_rejected(self):
        fam = hinge_family(sorted_hinge(3))
        with pytest.raises(InvalidInputError):
            fit(init_model(2, 2, fam.label, fam.link), self.data, fam, steps=-1)

    def test_ridge_shrinks_weights(self):
        fam = composite_family(log_loss_rule(3))
        plain = fit(init_model(3, 2, fam.label, fam.link), self.data, fam,
                    steps=200, step_scale=2.0)
        damped = fit(init_model(3, 2, fam.label, fam.link), self.data, fam,
                     steps=200, step_scale=2.0, ridge=1.0)
        assert (np.linalg.norm(damped.weights[:, :-1])
                < np.linalg.norm(plain.weights[:, :-1]))

    def test_training_objective_matches_final_actions(self):
        fam = hinge_family(sorted_hinge(3))
        model = fit(init_model(2, 2, fam.label, fam.link), self.data, fam,
                    steps=50)
        A = model.actions(self.data.features)
        want = float(fam.values(self.data.labels, A).mean())
        assert training_objective(model, self.data, fam) == pytest.approx(want)


class TestEndToEnd:
    def test_sorted_hinge_low_test_risk(self):
        fam = hinge_family(sorted_hinge(3))
        train = synth_gaussians(3, 2, 1000, 5.0, seed=11)
        test = synth_gaussians(3, 2, 4000, 5.0, seed=12)
        model = fit(init_model(2, 2, fam.label, fam.link), train, fam,
                    steps=400)
        risk = evaluate_zero_one(model, test, predict_affine)
        oracle = np.mean(nearest_mean_predictions(test.meta["means"],
                                                  test.features) != test.labels)
        assert risk <= 0.05
        assert risk <= oracle + 0.02

    def test_posteriors_sharpen_with_more_data(self):
        fam = composite_family(log_loss_rule(3))
        errs = []
        for n in (200, 800, 3200):
            data = synth_gaussians(3, 2, n, 3.0, seed=7)
            model = fit(init_model(3, 2, fam.label, fam.link), data, fam,
                        steps=600, step_scale=2.0)
            probs = softmax_rows(model.actions(data.features))
            post = class_posteriors(data.meta["means"], data.features)
            errs.append(float(np.abs(probs - post).sum(axis=1).mean()))
        assert errs[0] > errs[1] > errs[2]

    def test_binary_hinge_agrees_with_logistic_boundary(self):
        train = synth_gaussians(2, 2, 800, 3.0, seed=21)
        test = synth_gaussians(2, 2, 2000, 3.0, seed=22)
        hfam = hinge_family(hinge_loss("binary_hinge", 2))
        cfam = composite_family(log_loss_rule(2))
        hm = fit(init_model(1, 2, hfam.label, hfam.link), train, hfam,
                 steps=400)
        cm = fit(init_model(2, 2, cfam.label, cfam.link), train, cfam,
                 steps=400, step_scale=2.0)
        hp = predict_affine(hm.actions(test.features))
        cp = predict_argmax(cm.actions(test.features))
        assert np.mean(hp == cp) > 0.97

    def test_cost_hinge_trains_against_unit_costs(self):
        fam = hinge_family(hinge_loss("cost_hinge", 3, cost=cost_zero_one(3)))
        train = synth_gaussians(3, 2, 1000, 5.0, seed=11)
        model = fit(init_model(2, 2, fam.label, fam.link), train, fam,
                    steps=300)
        risk = evaluate_zero_one(model, train, predict_clipped)
        assert risk <= 0.06
