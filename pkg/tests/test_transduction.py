import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import ConvergenceWarning

from oracles import dense_energy, random_graph, random_seed_labels
from tvos.transduction import (SingularSystemError, TransductionParams,
                               TransductiveLabelSpreading, energy, normalize_affinity,
                               one_hot_labels, propagate_step, solve_closed_form,
                               solve_iterative, stationary_mu)

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


class TestNormalizeAffinity:
    def test_unit_degrees_unchanged(self):
        np.testing.assert_array_equal(normalize_affinity(SWAP), SWAP)

    def test_scaled_pair(self):
        np.testing.assert_allclose(normalize_affinity(2 * SWAP), SWAP)

    def test_isolated_nodes_zero(self):
        np.testing.assert_array_equal(normalize_affinity(np.zeros((3, 3))), np.zeros((3, 3)))

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            normalize_affinity([[0, -1], [-1, 0]])

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            normalize_affinity(np.ones((2, 3)))

    def test_spectral_radius_at_most_one(self, rng):
        for _ in range(10):
            s = normalize_affinity(random_graph(rng, 30))
            assert np.max(np.abs(np.linalg.eigvalsh(s))) <= 1 + 1e-12


class TestEnergy:
    def test_hand_expansion(self):
        y = np.array([[1.0], [0.0]])
        assert energy(SWAP, y, y, 1.0) == pytest.approx(2.0)

    def test_zero_graph_perfect_fit(self, rng):
        y = rng.random((4, 2))
        assert energy(np.zeros((4, 4)), y, y, 3.0) == 0.0

    def test_constant_on_unit_degree_graph(self):
        w = np.array([[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])
        y = np.full((3, 2), 0.3)
        assert energy(w, y, np.zeros((3, 2)), 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_matches_loop_oracle(self, rng):
        for _ in range(5):
            w = random_graph(rng, 12, density=0.6)
            y, y0 = rng.random((12, 3)), random_seed_labels(rng, 12, 3, 4)
            labeled = y0.sum(axis=1) > 0
            assert energy(w, y, y0, 0.7) == pytest.approx(dense_energy(w, y, y0, 0.7), rel=1e-12)
            assert energy(w, y, y0, 0.7, labeled) == pytest.approx(
                dense_energy(w, y, y0, 0.7, labeled), rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            energy(SWAP, np.zeros((2, 2)), np.zeros((2, 3)), 1.0)


class TestStep:
    def test_alpha_zero_returns_y0(self, rng):
        s = normalize_affinity(random_graph(rng, 5))
        y0 = rng.random((5, 2))
        np.testing.assert_array_equal(propagate_step(s, rng.random((5, 2)), y0, 0.0), y0)

    def test_hand_case(self):
        y = np.array([[1.0], [0.0]])
        np.testing.assert_allclose(propagate_step(SWAP, y, y, 0.5), [[0.5], [0.5]])

    def test_alpha_one_rejected(self):
        with pytest.raises(ValueError):
            propagate_step(SWAP, np.eye(2), np.eye(2), 1.0)


class TestSolvers:
    def test_alpha_zero_one_step(self, rng):
        w = random_graph(rng, 6)
        y0 = random_seed_labels(rng, 6, 2, 3)
        res = solve_iterative(w, y0, TransductionParams(alpha=0.0))
        assert res.converged and res.n_iter == 1
        np.testing.assert_array_equal(res.labels, y0)
        np.testing.assert_array_equal(solve_closed_form(w, y0, 0.0), y0)

    def test_two_node_fixed_point(self):
        y0 = np.array([[1.0], [0.0]])
        res = solve_iterative(SWAP, y0, TransductionParams(alpha=0.5, tol=1e-10))
        np.testing.assert_allclose(res.labels, [[2 / 3], [1 / 3]], atol=1e-9)
        np.testing.assert_allclose(solve_closed_form(SWAP, y0, 0.5), [[2 / 3], [1 / 3]], atol=1e-14)

    def test_isolated_node(self):
        w = np.zeros((3, 3))
        w[0, 1] = w[1, 0] = 1.0
        y0 = np.eye(3)[:, :2]
        out = solve_closed_form(w, y0, 0.9)
        np.testing.assert_allclose(out[2], 0.1 * y0[2])

    @pytest.mark.parametrize("alpha", [0.5, 0.9, 0.99])
    def test_iterative_matches_closed_form(self, rng, alpha):
        tol = 1e-10
        for _ in range(5):
            n = int(rng.integers(5, 60))
            w = random_graph(rng, n)
            y0 = random_seed_labels(rng, n, 3, max(1, n // 5))
            res = solve_iterative(w, y0, TransductionParams(alpha=alpha, tol=tol))
            assert res.converged
            gap = np.max(np.abs(res.labels - solve_closed_form(w, y0, alpha)))
            assert gap < 10 * tol

    def test_class_decoupling(self, rng):
        w = random_graph(rng, 20)
        y0 = random_seed_labels(rng, 20, 3, 6)
        joint = solve_closed_form(w, y0, 0.9)
        # equal up to rounding: multi-column LAPACK solves block differently
        for c in range(3):
            np.testing.assert_allclose(joint[:, c], solve_closed_form(w, y0[:, [c]], 0.9)[:, 0],
                                       rtol=0, atol=1e-14)
        p = TransductionParams(alpha=0.9)
        joint_it = solve_iterative(w, y0, p).labels
        for c in range(3):
            col = solve_iterative(w, y0[:, [c]], p).labels[:, 0]
            np.testing.assert_allclose(joint_it[:, c], col, atol=1e-12)

    def test_monotone_contraction(self, rng):
        # unit-degree graph: ring with weights 1/2
        n, alpha = 12, 0.9
        w = np.zeros((n, n))
        for i in range(n):
            w[i, (i + 1) % n] = w[(i + 1) % n, i] = 0.5
        y0 = random_seed_labels(rng, n, 2, 3)
        star = solve_closed_form(w, y0, alpha)
        s = normalize_affinity(w)
        y = y0.copy()
        for _ in range(50):
            nxt = propagate_step(s, y, y0, alpha)
            assert np.linalg.norm(nxt - star) <= alpha * np.linalg.norm(y - star) + 1e-9
            y = nxt

    def test_non_convergence_flag(self, rng):
        w = random_graph(rng, 10)
        y0 = random_seed_labels(rng, 10, 2, 3)
        with pytest.warns(ConvergenceWarning):
            res = solve_iterative(w, y0, TransductionParams(alpha=0.99, max_iters=3))
        assert not res.converged and res.n_iter == 3
        assert np.all(np.isfinite(res.labels))

    def test_singular_system(self):
        with pytest.raises(ValueError):
            solve_closed_form(SWAP, np.eye(2), 1.0)
        assert issubclass(SingularSystemError, np.linalg.LinAlgError)


class TestParams:
    def test_mu_alpha_relation(self):
        p = TransductionParams(mu=99.0)
        assert p.alpha == pytest.approx(0.99, abs=1e-12)
        assert TransductionParams(alpha=0.99).mu == pytest.approx(99.0)

    def test_inconsistent_pair(self):
        with pytest.raises(ValueError, match="inconsistent"):
            TransductionParams(alpha=0.5, mu=3.0)

    @pytest.mark.parametrize("kw", [dict(alpha=1.0), dict(alpha=-0.1), dict(tol=0),
                                    dict(max_iters=0), dict(mu=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            TransductionParams(**kw)


class TestMinimizer:
    def test_stationary_mu_gradient_vanishes(self, rng):
        w = random_graph(rng, 15)
        y0 = random_seed_labels(rng, 15, 2, 4)
        alpha = 0.9
        y = solve_closed_form(w, y0, alpha)
        mu = stationary_mu(alpha)
        s = normalize_affinity(w)
        grad = 4 * (y - s @ y) + 2 * mu * (y - y0)
        assert np.max(np.abs(grad)) < 1e-12

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), alpha=st.sampled_from([0.5, 0.9, 0.99]))
    def test_perturbations_never_help(self, seed, alpha):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 25))
        w = random_graph(rng, n)
        y0 = random_seed_labels(rng, n, 2, max(1, n // 4))
        y = solve_closed_form(w, y0, alpha)
        mu = stationary_mu(alpha)
        base = energy(w, y, y0, mu)
        for _ in range(20):
            delta = rng.uniform(-0.1, 0.1, size=y.shape)
            assert energy(w, y + delta, y0, mu) >= base


    def test_params_mu_is_not_the_stationary_weight(self, rng):
        # with mu = alpha / (1 - alpha) the fixed point has a non-zero energy gradient
        w = random_graph(rng, 15)
        y0 = random_seed_labels(rng, 15, 2, 4)
        alpha = 0.9
        y = solve_closed_form(w, y0, alpha)
        mu = TransductionParams(alpha=alpha).mu
        s = normalize_affinity(w)
        grad = 4 * (y - s @ y) + 2 * mu * (y - y0)
        assert np.max(np.abs(grad)) > 1e-3


class TestOneHot:
    def test_unlabeled_rows_zero(self):
        np.testing.assert_array_equal(one_hot_labels([1, -1, 0]), [[0, 1], [0, 0], [1, 0]])

    def test_explicit_classes(self):
        assert one_hot_labels([0, 1], n_classes=4).shape == (2, 4)


class TestEstimator:
    def test_chain(self):
        w = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        model = TransductiveLabelSpreading(alpha=0.5).fit(w, [0, -1, 1])
        np.testing.assert_array_equal(model.transduction_, [0, 0, 1])
        np.testing.assert_allclose(model.predict_proba().sum(axis=1), 1.0)
        np.testing.assert_array_equal(model.predict(), model.transduction_)

    def test_closed_form_method_agrees(self, rng):
        w = random_graph(rng, 20)
        y = np.full(20, -1)
        y[:4] = [0, 1, 2, 0]
        a = TransductiveLabelSpreading(method="iterative").fit(w, y)
        b = TransductiveLabelSpreading(method="closed_form").fit(w, y)
        np.testing.assert_allclose(a.label_distributions_, b.label_distributions_, atol=1e-8)

    def test_get_params_clone(self):
        model = TransductiveLabelSpreading(alpha=0.7, tol=1e-6)
        assert clone(model).get_params() == model.get_params()
        assert model.get_params()["alpha"] == 0.7

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            TransductiveLabelSpreading().predict()

    def test_quiet_when_converged(self, rng):
        w = random_graph(rng, 8)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            TransductiveLabelSpreading(alpha=0.5).fit(w, [0, 1, -1, -1, -1, -1, -1, -1])
