import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, full_objective, proximal_gradient, sparse_group_prox
from netcontent.errors import SingularSystemError, ValidationError
from netcontent.features import FeatureGroups
from netcontent.solver import (
    Hyperparams,
    WeightMatrix,
    fit,
    gradient_smooth,
    graph_term,
    irls_step,
    l1_sparsify,
    label_matrix,
    objective,
    predict,
    predict_labels,
    prox_penalty,
    reweight,
    smooth_objective,
    surrogate_objective,
)

ZERO = Hyperparams(0.0, 0.0, 0.0)


def random_instance(rng, m=None, n=None, with_graph=True):
    m = m or int(rng.integers(2, 7))
    n = n or int(rng.integers(3, 9))
    X = rng.normal(size=(m, n))
    Y = label_matrix(rng.integers(0, 2, size=n))
    if with_graph:
        B = rng.normal(size=(n, n))
        L = B @ B.T / n
    else:
        L = np.zeros((n, n))
    groups = FeatureGroups.from_labels(rng.integers(0, max(1, m // 2), size=m))
    return X, Y, L, groups


# -- objective pieces --------------------------------------------------------

def test_objective_at_zero():
    Y = label_matrix([0, 1, 1, 0, 1])
    X = np.ones((3, 5))
    assert objective(np.zeros((3, 2)), X, Y, np.eye(5), Hyperparams()) == pytest.approx(2.5)


def test_objective_exact_fit():
    assert objective(np.eye(2), np.eye(2), np.eye(2), np.zeros((2, 2)), ZERO) == 0.0


def test_graph_term_constant_predictions_regular_graph():
    # on a regular graph pi is uniform, so constant predictions are free
    from netcontent.graph import graph_laplacian, TweetGraph
    from scipy import sparse
    A = np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]], float)
    L = graph_laplacian(TweetGraph(tuple("abcd"), sparse.csr_matrix(A)), 0.85)
    X = np.ones((1, 4))
    assert abs(graph_term(np.array([[0.3, -1.2]]), X, L)) < 1e-12


def test_objective_dimension_mismatch():
    with pytest.raises(ValidationError):
        objective(np.zeros((3, 2)), np.ones((3, 4)), label_matrix([0, 1, 1]), np.eye(4), ZERO)


def test_objective_terms(rng):
    X, Y, L, groups = random_instance(rng)
    W = rng.normal(size=(X.shape[0], 2))
    h = Hyperparams(0.3, 0.7, 1.1)
    expected = full_objective(W, X, Y, L, 0.3, 0.7, 1.1, groups.group_of)
    assert objective(W, X, Y, L, h, groups) == pytest.approx(expected, rel=1e-12)


def test_label_matrix_checks():
    np.testing.assert_array_equal(label_matrix([1, 0]), [[0, 1], [1, 0]])
    with pytest.raises(ValidationError):
        label_matrix([0, 2])


# -- reweighting ---------------------------------------------------------------

def test_reweight_block_norm():
    W = np.array([[3.0, 0.0], [0.0, 4.0], [1.0, 0.0]])
    groups = FeatureGroups.from_labels([0, 0, 1])
    np.testing.assert_allclose(reweight(W, Hyperparams(), groups), [0.1, 0.1, 0.5])


def test_reweight_zero_group_floor():
    d = reweight(np.zeros((2, 2)), Hyperparams(epsilon=1e-10), FeatureGroups.from_labels([0, 0]))
    np.testing.assert_allclose(d, 5e9)


def test_reweight_singletons():
    W = np.array([[3.0, 4.0], [0.0, -2.0]])
    np.testing.assert_allclose(reweight(W, Hyperparams()), [0.1, 0.25])


# -- IRLS step -----------------------------------------------------------------

def test_irls_identity_system():
    W = irls_step(np.eye(2), np.eye(2), np.zeros((2, 2)), np.zeros(2), ZERO)
    np.testing.assert_allclose(W, np.eye(2), atol=1e-14)


def test_irls_shrinks_with_lambda2(rng):
    X, Y, L, _ = random_instance(rng, 5, 8)
    d = np.full(5, 0.5)
    norms = [np.linalg.norm(irls_step(X, Y, L, d, Hyperparams(0, lam, 0.4))) for lam in (1, 10, 100)]
    assert norms[0] > norms[1] > norms[2]


def test_irls_residual(rng):
    X, Y, L, groups = random_instance(rng, 6, 8)
    h = Hyperparams(0, 0.5, 0.4)
    d = reweight(rng.normal(size=(6, 2)), h, groups)
    W = irls_step(X, Y, L, d, h)
    A = X @ X.T + h.lambda2 * np.diag(d) + h.lambda_s * X @ L @ X.T
    assert np.linalg.norm(A @ W - X @ Y) < 1e-8 * np.linalg.norm(X @ Y)
    # first-order optimality of the quadratic model
    assert np.abs(gradient_smooth(W, X, Y, L, d, h)).max() < 1e-8


def test_singular_system_advises_lambda2():
    X = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularSystemError, match="lambda2"):
        irls_step(X, np.eye(2), np.zeros((2, 2)), np.zeros(2), ZERO)


# -- sparsification and prediction -------------------------------------------

@pytest.mark.parametrize("w, out", [(0.005, 0.0), (-0.03, -0.02), (0.5, 0.49)])
def test_l1_sparsify(w, out):
    assert l1_sparsify(np.array([[w]]), 0.01)[0, 0] == pytest.approx(out, abs=1e-15)


def test_l1_sparsify_zero_lambda_identity(rng):
    W = rng.normal(size=(4, 2))
    np.testing.assert_array_equal(l1_sparsify(W, 0.0), W)


def test_predict_rules():
    W = np.eye(2)
    assert predict([2.0, 1.0], W) == 0
    assert predict([0.0, 0.0], W) == 0
    assert predict([1.0, 3.0], W) == 1


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(1e-3, 1e3))
def test_predict_scale_invariant(x, scale):
    W = np.array([[1.0, -0.5], [0.2, 0.7], [-1.0, 0.1]])
    assert predict(np.array(x) * scale, W) == predict(np.array(x), W)


def test_weight_matrix_validates():
    with pytest.raises(ValidationError):
        WeightMatrix(np.zeros((3, 2)), FeatureGroups.singletons(2))
    with pytest.raises(ValidationError):
        WeightMatrix(np.full((1, 2), np.nan), FeatureGroups.singletons(1))


@pytest.mark.parametrize("kw", [dict(lambda1=-1), dict(epsilon=0), dict(tol=0), dict(max_iter=0),
                                dict(lambda_s=float("inf"))])
def test_hyperparams_validation(kw):
    with pytest.raises(ValidationError):
        Hyperparams(**kw)


# -- gradient ---------------------------------------------------------------------

def test_gradient_isolation(rng):
    X, Y, L, _ = random_instance(rng)
    g = gradient_smooth(np.zeros((X.shape[0], 2)), X, Y, L, np.ones(X.shape[0]), ZERO)
    np.testing.assert_allclose(g, -X @ Y)


def test_gradient_matches_finite_differences(rng):
    for _ in range(20):
        X, Y, L, groups = random_instance(rng)
        h = Hyperparams(0.0, float(rng.uniform(0, 2)), float(rng.uniform(0, 2)))
        d = reweight(rng.normal(size=(X.shape[0], 2)), h, groups)
        W = rng.normal(size=(X.shape[0], 2))
        num = central_difference(lambda V: surrogate_objective(V, X, Y, L, d, h), W)
        ana = gradient_smooth(W, X, Y, L, d, h)
        assert np.linalg.norm(num - ana) <= 1e-5 * np.linalg.norm(ana)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 2.0))
def test_prox_penalty_matches_oracle(seed, t):
    rng = np.random.default_rng(seed)
    X, _, _, groups = random_instance(rng)
    V = rng.normal(size=(X.shape[0], 2))
    h = Hyperparams(float(rng.uniform(0, 1)), float(rng.uniform(0, 2)), 0.0)
    expected = sparse_group_prox(V, t * h.lambda1, t * h.lambda2 / 2, groups.group_of)
    np.testing.assert_allclose(prox_penalty(V, t, h, groups), expected, atol=1e-12)


# -- fit -------------------------------------------------------------------------

def test_fit_least_squares_one_iteration(rng):
    X = rng.normal(size=(4, 4))
    Y = label_matrix([0, 1, 1, 0])
    w, rep = fit(X, Y, np.zeros((4, 4)), ZERO)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_allclose(X @ X.T @ w.W, X @ Y, atol=1e-9)
    np.testing.assert_array_equal(predict_labels(X, w), [0, 1, 1, 0])


def _oracle_gap(X, Y, L, h, groups):
    w, _ = fit(X, Y, L, h, groups)
    ref = proximal_gradient(X, Y, L, h.lambda1, h.lambda2, h.lambda_s, groups.group_of)
    f_fit = objective(w, X, Y, L, h)
    f_ref = full_objective(ref, X, Y, L, h.lambda1, h.lambda2, h.lambda_s, groups.group_of)
    return (f_fit - f_ref) / abs(f_ref)


@pytest.mark.parametrize("h, with_graph", [
    (Hyperparams(0.01, 0.5, 0.0), False),   # sparse group lasso
    (Hyperparams(0.05, 0.0, 0.0), False),   # lasso-like, singletons
    (Hyperparams(0.01, 0.5, 0.4), True),    # full objective
])
def test_fit_reduction_chain(rng, h, with_graph):
    for _ in range(4):
        X, Y, L, groups = random_instance(rng, with_graph=with_graph)
        if h.lambda2 == 0:
            groups = FeatureGroups.singletons(X.shape[0])
        assert _oracle_gap(X, Y, L, h, groups) < 1e-4


def test_fit_singletons_small(rng):
    X, Y, L, _ = random_instance(rng, 4, 6, with_graph=False)
    assert _oracle_gap(X, Y, L, Hyperparams(0.01, 0.5, 0.0), FeatureGroups.singletons(4)) < 1e-4


def test_fit_smooth_trace_monotone(rng):
    for _ in range(20):
        X, Y, L, groups = random_instance(rng)
        _, rep = fit(X, Y, L, Hyperparams(0.01, 0.5, 0.4), groups)
        assert np.all(np.diff(rep.smooth_trace) <= 1e-9)
        assert np.all(np.diff(rep.l1_trace) <= 1e-9)
        assert rep.final_objective <= rep.objective_trace[-1] + 1e-9


def test_fit_deterministic(rng):
    X, Y, L, groups = random_instance(rng, 6, 8)
    a = fit(X, Y, L, Hyperparams(), groups)
    b = fit(X, Y, L, Hyperparams(), groups)
    np.testing.assert_array_equal(a[0].W, b[0].W)
    assert a[1] == b[1]


def test_fit_permutation_equivariant(rng):
    X, Y, L, groups = random_instance(rng, 6, 8)
    perm = rng.permutation(6)
    w, _ = fit(X, Y, L, Hyperparams(), groups)
    wp, _ = fit(X[perm], Y, L, Hyperparams(), FeatureGroups.from_labels(groups.group_of[perm]))
    np.testing.assert_allclose(wp.W, w.W[perm], atol=1e-8)


def test_fit_reports_nonconvergence(rng):
    X, Y, L, groups = random_instance(rng, 6, 8)
    w, rep = fit(X, Y, L, Hyperparams(max_iter=1), groups)
    assert len(rep.smooth_trace) == len(rep.l1_trace) == 1
    assert rep.iterations == 2 and not rep.converged


def test_fit_sparsity_and_exact_zeros(rng):
    X = rng.normal(size=(10, 12))
    X[5:] *= 0.01  # weak features should be dropped
    Y = label_matrix(rng.integers(0, 2, 12))
    w, rep = fit(X, Y, np.zeros((12, 12)), Hyperparams(0.2, 0.5, 0.0))
    assert rep.final_sparsity > 0
    assert rep.final_sparsity == np.mean(~np.any(w.W != 0, axis=1))


def test_fit_smooth_objective_reported(rng):
    X, Y, L, groups = random_instance(rng)
    h = Hyperparams()
    w, rep = fit(X, Y, L, h, groups)
    assert rep.final_objective == pytest.approx(objective(w, X, Y, L, h), rel=1e-10)
    assert smooth_objective(w, X, Y, L, h) <= rep.final_objective


def test_fit_dimension_checks(rng):
    X, Y, L, groups = random_instance(rng, 4, 6)
    with pytest.raises(ValidationError):
        fit(X, Y[:-1], L, Hyperparams(), groups)
    with pytest.raises(ValidationError):
        fit(X, Y, L, Hyperparams(), FeatureGroups.singletons(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_graph_term_nonnegative(seed):
    rng = np.random.default_rng(seed)
    X, Y, L, _ = random_instance(rng)
    assert graph_term(rng.normal(size=(X.shape[0], 2)), X, L) >= -1e-10
