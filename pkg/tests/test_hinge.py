import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from mcloss import hinge as hg
from mcloss.entropy import cost_weighted_entropy, zero_one_entropy
from mcloss.scoring import risk_matrix
from mcloss.simplex import (
    CostMatrix,
    InvalidInputError,
    box_grid,
    cost_zero_one,
    sample_simplex,
    simplex_grid,
)

RNG = np.random.default_rng(42)
HAND_TAU = np.array([0.6, -0.3])

SIMPLEX_ALIGNED = ["max_hinge", "sum_hinge", "sorted_hinge", "sorted_hinge_global"]


def brute_sorted_hinge(tilde, j):
    rivals = np.sort(np.delete(tilde, j))[::-1]
    cands = [0.0]
    for i in range(1, tilde.size):
        cands.append((tilde[j] + rivals[: i - 1].sum() - 1.0) / i)
    return 1.0 - tilde[j] + max(cands)


def brute_global_scan(vec):
    v = np.sort(vec)[::-1]
    return max((v[:i].sum() - 1.0) / i for i in range(1, vec.size + 1))


class TestBinaryHinge:
    def test_margin_origin(self):
        assert hg.binary_hinge().value(0, [0.0]) == 1.0

    def test_spot(self):
        bh = hg.binary_hinge()
        assert bh.value(0, [2.0]) == 0.0
        assert bh.value(1, [2.0]) == 2.0

    def test_interval_matches_linear(self):
        bh = hg.binary_hinge()
        for tau in np.linspace(0.0, 1.0, 11):
            assert bh.value(0, [tau]) == pytest.approx(1.0 - tau)
            assert bh.value(1, [tau]) == pytest.approx(tau)


class TestCostLinear:
    def test_matrix_product(self):
        C = CostMatrix(np.array([[0.0, 2.0], [0.5, 0.0]]))
        loss = hg.cost_linear(C)
        lam = np.array([0.25, 0.75])
        assert loss.value(0, lam) == pytest.approx(1.5)
        assert loss.value(1, lam) == pytest.approx(0.125)

    def test_unit_costs_complement(self):
        loss = hg.cost_linear(cost_zero_one(3))
        lam = np.array([0.2, 0.5, 0.3])
        assert_allclose(loss.values(lam[None])[0], 1.0 - lam)

    def test_vertex_is_free(self):
        loss = hg.cost_linear(cost_zero_one(4))
        for j in range(4):
            assert loss.value(j, np.eye(4)[j]) == 0.0

    def test_not_proper(self):
        # truthful reporting is beaten by committing to the likelier class
        loss = hg.cost_linear(cost_zero_one(2))
        eta = np.array([0.6, 0.4])
        truthful = float(eta @ loss.values(eta[None])[0])
        grid = simplex_grid(2, 50)
        best = risk_matrix(loss.values(grid), eta[None])[0].min()
        assert truthful == pytest.approx(0.48)
        assert best == pytest.approx(0.4)
        assert best < truthful


class TestCostHinge:
    def test_unit_costs_reduce_to_max_hinge(self):
        T = RNG.uniform(-3, 3, size=(500, 3))
        a = hg.cost_hinge(cost_zero_one(4)).values(T)
        b = hg.max_hinge(4).values(T)
        assert_allclose(a, b, atol=0.0)

    def test_simplex_coincides_with_linear(self):
        C = CostMatrix(np.array([[0.0, 0.3, 0.5], [1.0, 0.0, 0.7], [0.25, 0.4, 0.0]]))
        lam = sample_simplex(RNG, 3, 200)
        hinge_vals = hg.cost_hinge(C).values(lam[:, :2])
        lin_vals = hg.cost_linear(C).values(lam)
        assert_allclose(hinge_vals, lin_vals, atol=1e-12)

    def test_compatible_costs_convex(self):
        # every reference-column entry is a row minimum among off-diagonals
        C = CostMatrix(np.array([[0.0, 0.9, 0.4], [0.8, 0.0, 0.3], [0.7, 0.6, 0.0]]))
        loss = hg.cost_hinge(C)
        for _ in range(300):
            a = RNG.uniform(-3, 3, size=2)
            b = RNG.uniform(-3, 3, size=2)
            mid = 0.5 * (a + b)
            for j in range(3):
                gap = loss.value(j, mid) - 0.5 * (loss.value(j, a) + loss.value(j, b))
                assert gap <= 1e-9

    def test_incompatible_costs_nonconvex_witness(self):
        C = CostMatrix(np.array([[0.0, 0.1, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]))
        loss = hg.cost_hinge(C)
        a, b = np.array([0.0, -1.0]), np.array([0.0, 1.0])
        mid = 0.5 * (a + b)
        gap = loss.value(0, mid) - 0.5 * (loss.value(0, a) + loss.value(0, b))
        assert gap > 0.4

    def test_entropy_recovery(self):
        C = CostMatrix(np.array([[0.0, 0.3, 0.5], [1.0, 0.0, 0.7], [0.25, 0.4, 0.0]]))
        etas = simplex_grid(3, 20)
        T = box_grid(-3.0, 3.0, 61, 2)
        got = risk_matrix(hg.cost_hinge(C).values(T), etas).min(axis=1)
        assert np.abs(got - cost_weighted_entropy(C).values(etas)).max() < 1e-3


class TestMaxHinge:
    def test_hand_values(self):
        assert_allclose(hg.max_hinge(3).values(HAND_TAU[None])[0], [0.4, 1.3, 0.6])

    def test_two_class_reduction(self):
        bh = hg.binary_hinge()
        mh = hg.max_hinge(2)
        for tau in RNG.uniform(-4, 4, size=50):
            assert mh.value(0, [tau]) == pytest.approx(bh.value(0, [tau]))
            assert mh.value(1, [tau]) == pytest.approx(bh.value(1, [tau]))

    def test_nonnegative(self):
        T = RNG.uniform(-5, 5, size=(2000, 3))
        assert (hg.max_hinge(4).values(T) >= 0.0).all()


class TestSumHinge:
    def test_hand_values(self):
        assert_allclose(hg.sum_hinge(3).values(HAND_TAU[None])[0], [0.7, 1.3, 0.6])

    def test_dominates_max_hinge(self):
        for m in (2, 3, 4, 5):
            T = RNG.uniform(-3, 3, size=(2000, m - 1))
            assert (hg.max_hinge(m).values(T) <= hg.sum_hinge(m).values(T) + 1e-12).all()

    def test_reparametrization_identity(self):
        for m in (2, 3, 4, 5):
            G = RNG.normal(size=(300, m))
            G -= G.mean(axis=1, keepdims=True)
            margin_vals = hg.sum_hinge_margin(m).values(G)
            slice_vals = hg.sum_hinge(m).values((1.0 + G[:, : m - 1]) / m)
            assert np.abs(slice_vals - margin_vals / m).max() < 1e-12

    def test_sum_zero_enforced(self):
        with pytest.raises(InvalidInputError):
            hg.sum_hinge_margin(3).values(np.array([[0.5, 0.5, 0.5]]))


class TestSortedHinge:
    def test_hand_values(self):
        assert_allclose(hg.sorted_hinge(3).values(HAND_TAU[None])[0], [0.55, 1.3, 0.45])

    def test_two_class_spot(self):
        assert_allclose(hg.sorted_hinge(2).values([[2.0]])[0], [0.0, 2.0])

    def test_matches_per_label_brute_force(self):
        for m in (2, 3, 4, 6):
            loss = hg.sorted_hinge(m)
            T = RNG.uniform(-3, 3, size=(200, m - 1))
            got = loss.values(T)
            tilde = hg.complete_affine_rows(T)
            want = np.array([[brute_sorted_hinge(row, j) for j in range(m)] for row in tilde])
            assert_allclose(got, want, atol=1e-12)

    def test_ties_are_deterministic(self):
        T = np.array([[0.5, 0.5, 0.5], [1.0, 1.0, -1.0]])
        loss = hg.sorted_hinge(4)
        assert_allclose(loss.values(T), loss.values(T.copy()))

    def test_nonnegative(self):
        T = RNG.uniform(-5, 5, size=(2000, 4))
        assert (hg.sorted_hinge(5).values(T) >= 0.0).all()


class TestSortedHingeGlobal:
    def test_hand_values(self):
        assert_allclose(hg.sorted_hinge_global(3).values(HAND_TAU[None])[0],
                        [0.55, 1.45, 0.45])

    def test_two_class_spot(self):
        assert_allclose(hg.sorted_hinge_global(2).values([[2.0]])[0], [0.0, 3.0])

    def test_dominates_sorted_hinge(self):
        for m in (2, 3, 4, 5):
            T = RNG.uniform(-3, 3, size=(2000, m - 1))
            assert (hg.sorted_hinge(m).values(T)
                    <= hg.sorted_hinge_global(m).values(T) + 1e-12).all()

    def test_margin_variant_translation_invariant(self):
        loss = hg.sorted_hinge_margin(4)
        G = RNG.normal(size=(100, 4))
        for b in (-3.0, 0.7, 12.0):
            assert np.abs(loss.values(G + b) - loss.values(G)).max() < 1e-9

    def test_slice_variant_is_completed_margin(self):
        m = 4
        T = RNG.uniform(-2, 2, size=(100, m - 1))
        a = hg.sorted_hinge_global(m).values(T)
        b = hg.sorted_hinge_margin(m).values(hg.complete_affine_rows(T))
        assert_allclose(a, b, atol=0.0)

    def test_global_scan_matches_brute(self):
        G = RNG.normal(size=(100, 5))
        S = hg._sorted_prefix_maxima(G)
        want = np.array([brute_global_scan(row) for row in G])
        assert_allclose(S, want, atol=1e-12)


class TestPredictionMaps:
    def test_clipped_hand_value(self):
        assert_allclose(hg.complete_clipped(HAND_TAU), [0.6, -0.3, 0.4])

    def test_affine_hand_value(self):
        assert_allclose(hg.complete_affine(HAND_TAU), [0.6, -0.3, 0.7])

    def test_hand_value_classifies_differently(self):
        assert int(np.argmax(hg.complete_clipped(HAND_TAU))) == 0
        assert int(np.argmax(hg.complete_affine(HAND_TAU))) == 2

    def test_nonnegative_tau_matches_affine(self):
        tau = np.array([0.2, 0.3, 0.1])
        assert_allclose(hg.complete_clipped(tau), hg.complete_affine(tau))

    def test_zero_tau(self):
        assert hg.complete_clipped(np.zeros(3))[-1] == 1.0

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=6))
    def test_affine_always_sums_to_one(self, vals):
        out = hg.complete_affine(np.array(vals))
        assert out.sum() == pytest.approx(1.0, abs=1e-9)


class TestScoreByLoss:
    def test_sorted_hinge_scores(self):
        s = hg.score_by_loss(hg.sorted_hinge(3), HAND_TAU)
        assert_allclose(s, [-0.55, -1.3, -0.45])
        # scoring agrees with the affine completion, not the clipped one
        assert int(np.argmax(s)) == int(np.argmax(hg.complete_affine(HAND_TAU))) == 2

    def test_binary_scores(self):
        s = hg.score_by_loss(hg.binary_hinge(), [2.0])
        assert_allclose(s, [0.0, -2.0])
        assert int(np.argmax(s)) == 0

    def test_equal_losses_tie_to_first(self):
        s = hg.score_by_loss(hg.binary_hinge(), [0.5])
        assert s[0] == s[1]
        assert int(np.argmax(s)) == 0


class TestOrderings:
    def test_tight_extension_orderings(self):
        for m in (2, 3, 4, 5):
            T = RNG.uniform(-3, 3, size=(10_000, m - 1))
            zo3 = hg.max_hinge(m).values(T)
            llw2 = hg.sum_hinge(m).values(T)
            zo4 = hg.sorted_hinge(m).values(T)
            dkr2 = hg.sorted_hinge_global(m).values(T)
            assert (zo3 >= -1e-15).all() and (zo4 >= -1e-15).all()
            assert (zo3 <= llw2 + 1e-12).all()
            assert (zo4 <= dkr2 + 1e-12).all()

    def test_simplex_alignment(self):
        for m in (2, 3, 4, 5):
            lam = sample_simplex(RNG, m, 500)
            for name in SIMPLEX_ALIGNED:
                loss = hg.hinge_loss(name, m)
                vals = loss.values(lam[:, : m - 1])
                assert np.abs(vals - (1.0 - lam)).max() < 1e-12, name


class TestConvexity:
    def families(self, m):
        fams = [hg.hinge_loss(n, m) for n in SIMPLEX_ALIGNED]
        fams.append(hg.cost_hinge(cost_zero_one(m)))
        fams.append(hg.sorted_hinge_margin(m))
        return fams

    def test_midpoint_convexity(self):
        for m in (3, 5):
            for loss in self.families(m):
                d = loss.action_dim
                for _ in range(200):
                    a = RNG.uniform(-3, 3, size=d)
                    b = RNG.uniform(-3, 3, size=d)
                    rows = np.vstack([a, b, 0.5 * (a + b)])
                    va, vb, vm = loss.values(rows)
                    assert (vm <= 0.5 * (va + vb) + 1e-9).all(), loss.label

    def test_binary_hinge_convex(self):
        bh = hg.binary_hinge()
        for _ in range(200):
            a, b = RNG.uniform(-4, 4, size=2)
            rows = np.array([[a], [b], [0.5 * (a + b)]])
            va, vb, vm = bh.values(rows)
            assert (vm <= 0.5 * (va + vb) + 1e-12).all()


class TestMonotoneOrdering:
    def test_completed_components_order_losses(self):
        # a label with a larger affine completion never has a larger loss;
        # the max-of-positive-parts family orders with the clipped completion
        for name in ["sum_hinge", "sorted_hinge", "sorted_hinge_global"]:
            loss = hg.hinge_loss(name, 4)
            T = RNG.uniform(-3, 3, size=(500, 3))
            tilde = hg.complete_affine_rows(T)
            vals = loss.values(T)
            for j in range(4):
                for k in range(4):
                    mask = tilde[:, j] <= tilde[:, k]
                    assert (vals[mask, j] >= vals[mask, k] - 1e-12).all(), name

    def test_max_hinge_orders_with_clipped(self):
        loss = hg.max_hinge(4)
        T = RNG.uniform(-3, 3, size=(500, 3))
        dag = hg.complete_clipped_rows(T)
        vals = loss.values(T)
        for j in range(4):
            for k in range(4):
                mask = dag[:, j] <= dag[:, k]
                assert (vals[mask, j] >= vals[mask, k] - 1e-12).all()


class TestEntropyRecovery:
    def test_unit_cost_families_recover_zero_one_entropy(self):
        etas = simplex_grid(3, 20)
        T = box_grid(-3.0, 3.0, 61, 2)
        want = zero_one_entropy().values(etas)
        for name in SIMPLEX_ALIGNED:
            loss = hg.hinge_loss(name, 3)
            got = risk_matrix(loss.values(T), etas).min(axis=1)
            assert np.abs(got - want).max() < 1e-3, name


class TestBuilder:
    def test_all_names(self):
        for name in _ALL_NAMES:
            loss = hg.hinge_loss(name, 3)
            assert loss.label == name

    def test_unknown_name(self):
        with pytest.raises(InvalidInputError):
            hg.hinge_loss("mystery", 3)

    def test_wrong_action_width(self):
        with pytest.raises(InvalidInputError):
            hg.sorted_hinge(3).values(np.zeros((2, 3)))


_ALL_NAMES = ["binary_hinge", "cost_linear", "cost_hinge", "max_hinge",
              "sum_hinge", "sum_hinge_margin", "sorted_hinge",
              "sorted_hinge_margin", "sorted_hinge_global"]
