"""Graph-regularized sparse group lasso for short-text classification.

The classifier ``W`` (features x classes) minimizes

    1/2 ||X^T W - Y||_F^2 + lambda1 ||W||_1 + lambda2/2 ||W||_{2,1}
        + lambda_s/2 tr(W^T X L X^T W)

where ``||W||_{2,1}`` sums the Frobenius norms of the row blocks of ``W``
belonging to each feature group and ``L`` is the tweet-graph Laplacian.

``fit`` uses iteratively reweighted least squares.  Each sweep replaces
the group norm by a quadratic majorizer at the current iterate (the
diagonal matrix ``D``) and solves the resulting symmetric positive-definite
system by Cholesky, so the objective without its l1 term never increases.
The l1 step then continues the sweeps with an elementwise majorizer of the
l1 norm as well.  Reweighting shrinks a vanishing group only slowly, so a
few cheap proximal-gradient steps finish the fit and put exact zeros where
the minimizer has them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse

from .errors import SingularSystemError, ValidationError
from .features import FeatureGroups, FeatureMatrix
from .graph import GraphLaplacian

CLASSES = ("negative", "positive")
# proximal steps allowed per reweighting sweep of the budget
POLISH_FACTOR = 50


@dataclass(frozen=True)
class Hyperparams:
    lambda1: float = 0.01
    lambda2: float = 0.5
    lambda_s: float = 0.4
    epsilon: float = 1e-10
    tol: float = 1e-6
    max_iter: int = 100

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda_s"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be a finite value >= 0, got {v}")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValidationError("max_iter must be at least 1")

    def replace(self, **changes) -> "Hyperparams":
        return Hyperparams(**{**self.__dict__, **changes})


@dataclass(frozen=True)
class WeightMatrix:
    W: np.ndarray
    groups: FeatureGroups

    def __post_init__(self):
        if self.W.ndim != 2 or self.W.shape[0] != self.groups.m:
            raise ValidationError(f"weights of shape {self.W.shape} do not match {self.groups.m} grouped features")
        if not np.all(np.isfinite(self.W)):
            raise ValidationError("non-finite weights")

    @property
    def shape(self):
        return self.W.shape


@dataclass
class FitReport:
    objective_trace: list = field(default_factory=list)
    smooth_trace: list = field(default_factory=list)
    l1_trace: list = field(default_factory=list)
    prox_steps: int = 0
    iterations: int = 0
    converged: bool = False
    final_sparsity: float = 0.0
    final_objective: float = float("nan")


def label_matrix(labels, c: int = 2) -> np.ndarray:
    """One-hot ``n x c`` matrix; class 0 is negative, class 1 positive."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValidationError("labels must be a vector")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValidationError(f"labels must lie in 0..{c - 1}")
    Y = np.zeros((labels.size, c))
    Y[np.arange(labels.size), labels.astype(int)] = 1.0
    return Y


def _x(x):
    if isinstance(x, FeatureMatrix):
        x = x.X
    return sparse.csr_matrix(x, dtype=float) if not sparse.issparse(x) else x.tocsr().astype(float)


def _l(l):
    if isinstance(l, GraphLaplacian):
        return l.L
    return l.toarray() if sparse.issparse(l) else np.asarray(l, dtype=float)


def _w(w):
    return w.W if isinstance(w, WeightMatrix) else np.asarray(w, dtype=float)


def _groups(w, groups):
    if groups is not None:
        return groups
    if isinstance(w, WeightMatrix):
        return w.groups
    return FeatureGroups.singletons(_w(w).shape[0])


def _check_dims(X, Y, L, W=None):
    m, n = X.shape
    if Y.shape[0] != n:
        raise ValidationError(f"{Y.shape[0]} label rows for {n} tweets")
    if L is not None and L.shape != (n, n):
        raise ValidationError(f"Laplacian of shape {L.shape} for {n} tweets")
    if W is not None and W.shape != (m, Y.shape[1]):
        raise ValidationError(f"weights of shape {W.shape}, expected {(m, Y.shape[1])}")


def group_norms(W: np.ndarray, groups: FeatureGroups) -> np.ndarray:
    row_sq = np.einsum("ij,ij->i", W, W)
    return np.sqrt(np.bincount(groups.group_of, weights=row_sq, minlength=len(groups)))


def l21_norm(W, groups: FeatureGroups | None = None) -> float:
    return float(group_norms(_w(W), _groups(W, groups)).sum())


def graph_term(W, x, l) -> float:
    """``tr(W^T X L X^T W)``."""
    Z = _x(x).T @ _w(W)
    return float(np.sum(Z * (_l(l) @ Z)))


def objective(w, x, y, l, h: Hyperparams, groups: FeatureGroups | None = None) -> float:
    W, X, Y, L = _w(w), _x(x), np.asarray(y, dtype=float), _l(l)
    _check_dims(X, Y, L, W)
    R = X.T @ W - Y
    return (0.5 * float(np.sum(R * R))
            + h.lambda1 * float(np.abs(W).sum())
            + 0.5 * h.lambda2 * l21_norm(W, _groups(w, groups))
            + 0.5 * h.lambda_s * graph_term(W, X, L))


def smooth_objective(w, x, y, l, h: Hyperparams, groups: FeatureGroups | None = None) -> float:
    """The objective without its l1 term."""
    return objective(w, x, y, l, h.replace(lambda1=0.0), groups)


def reweight(w, h: Hyperparams, groups: FeatureGroups | None = None) -> np.ndarray:
    """Diagonal of ``D``: ``1 / (2 max(||w_g||, epsilon))`` for each row of group ``g``.

    Returned as a length-``m`` vector.
    """
    groups = _groups(w, groups)
    norms = group_norms(_w(w), groups)
    return 0.5 / np.maximum(norms, h.epsilon)[groups.group_of]


def surrogate_objective(w, x, y, l, d, h: Hyperparams) -> float:
    """Quadratic model with ``D`` held fixed; ``gradient_smooth`` is its gradient."""
    W, X, Y = _w(w), _x(x), np.asarray(y, dtype=float)
    R = X.T @ W - Y
    return (0.5 * float(np.sum(R * R))
            + 0.5 * h.lambda2 * float(np.sum(np.asarray(d)[:, None] * W * W))
            + 0.5 * h.lambda_s * graph_term(W, X, l))


def gradient_smooth(w, x, y, l, d, h: Hyperparams) -> np.ndarray:
    """``X X^T W - X Y + lambda2 D W + lambda_s X L X^T W``."""
    W, X, Y, L = _w(w), _x(x), np.asarray(y, dtype=float), _l(l)
    _check_dims(X, Y, L, W)
    Z = X.T @ W
    grad = X @ (Z - Y) + h.lambda2 * np.asarray(d)[:, None] * W
    if h.lambda_s:
        grad = grad + h.lambda_s * (X @ (L @ Z))
    return np.asarray(grad)


def normal_matrix(x, l, h: Hyperparams, x_graph=None) -> np.ndarray:
    """Dense ``X X^T + lambda_s Xg L Xg^T``; ``Xg`` defaults to ``X``."""
    X = _x(x)
    G = (X @ X.T).toarray()
    if h.lambda_s:
        Xg = X if x_graph is None else _x(x_graph)
        XL = np.asarray(Xg @ _l(l))
        G += h.lambda_s * np.asarray(Xg @ XL.T).T
        G = 0.5 * (G + G.T)
    return G


def _spd_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    diag = np.diag(A).copy()
    try:
        c, lower = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSystemError("normal equations are singular; use lambda2 > 0") from exc
    pivots = np.diag(c) ** 2
    if np.any(pivots <= 1e-12 * np.maximum(diag, np.finfo(float).tiny)):
        raise SingularSystemError("normal equations are numerically singular; use lambda2 > 0")
    return linalg.cho_solve((c, lower), b, check_finite=False)


def _solve(G, B, d, h, l1_weights=None):
    base = G.copy()
    idx = np.diag_indices_from(base)
    if l1_weights is None or h.lambda1 == 0:
        base[idx] += h.lambda2 * d
        return _spd_solve(base, B)
    W = np.empty_like(B)
    for k in range(B.shape[1]):
        A = base.copy()
        A[idx] += h.lambda2 * d + h.lambda1 * l1_weights[:, k]
        W[:, k] = _spd_solve(A, B[:, k])
    return W


def irls_step(x, y, l, d, h: Hyperparams, l1_weights: np.ndarray | None = None, normal=None) -> np.ndarray:
    """Solve ``(X X^T + lambda2 D + lambda_s X L X^T) W = X Y``.

    ``l1_weights`` (``m x c``) adds ``lambda1 * diag(l1_weights[:, k])`` to the
    system of column ``k``; that is the quadratic majorizer of the l1 term.
    ``normal`` is a precomputed ``normal_matrix(x, l, h)``; ``fit`` forms it
    once, so a sweep only costs the factorization.
    """
    X, Y, L = _x(x), np.asarray(y, dtype=float), _l(l)
    _check_dims(X, Y, L)
    G = normal_matrix(X, L, h) if normal is None else np.asarray(normal, dtype=float)
    return _solve(G, np.asarray(X @ Y), np.asarray(d, dtype=float), h, l1_weights)


def l1_sparsify(w, h: Hyperparams | float):
    """Entrywise soft threshold ``sign(w) max(|w| - lambda1, 0)``."""
    lam = h.lambda1 if isinstance(h, Hyperparams) else float(h)
    W = _w(w)
    out = np.sign(W) * np.maximum(np.abs(W) - lam, 0.0)
    return WeightMatrix(out, w.groups) if isinstance(w, WeightMatrix) else out


def _quadratic_parts(W, G, B, yy):
    # 1/2 ||X^T W - Y||^2 + lambda_s/2 tr(W^T X L X^T W) from the normal matrix
    return 0.5 * float(np.sum(W * (G @ W))) - float(np.sum(W * B)) + 0.5 * yy


def prox_penalty(w, t: float, h: Hyperparams, groups: FeatureGroups) -> np.ndarray:
    """Proximal operator of ``t (lambda1 ||W||_1 + lambda2/2 ||W||_{2,1})``.

    Soft-thresholds every entry, then shrinks each group block towards zero;
    blocks whose norm falls below ``t lambda2 / 2`` become exactly zero.
    """
    U = l1_sparsify(_w(w), t * h.lambda1)
    norms = np.sqrt(np.bincount(groups.group_of, weights=np.sum(U * U, axis=1), minlength=len(groups)))
    cut = 0.5 * t * h.lambda2
    scale = np.where(norms > cut, 1.0 - cut / np.maximum(norms, 1e-300), 0.0)
    return U * scale[groups.group_of][:, None]


def _polish(W, G, B, groups, h):
    # proximal gradient from the reweighting result: it settles the
    # coefficients the reweighting drives to zero only slowly and makes them
    # exactly zero; each step is O(m^2 c) and never increases the objective
    top = float(linalg.eigvalsh(G, subset_by_index=[G.shape[0] - 1] * 2, check_finite=False)[0])
    t = 1.0 / max(top, 1e-300)
    for k in range(1, POLISH_FACTOR * int(h.max_iter) + 1):
        nxt = prox_penalty(W - t * (G @ W - B), t, h, groups)
        step = float(np.linalg.norm(nxt - W))
        W = nxt
        if step <= h.tol * max(1.0, float(np.linalg.norm(W))):
            return W, k, True
    return W, k, False


def _irls(G, B, yy, groups, h, d, e, record):
    """Reweighting sweeps from the weights ``d`` (group) and ``e`` (l1, or None).

    Stops on relative change of the objective being majorized.  Returns the
    last iterate, the group weights its solve used, and the convergence flag.
    """
    use_l1 = e is not None
    prev, W, d_used, converged = None, None, d, False
    for _ in range(int(h.max_iter)):
        W = _solve(G, B, d, h, e)
        d_used = d
        smooth = _quadratic_parts(W, G, B, yy) + 0.5 * h.lambda2 * float(group_norms(W, groups).sum())
        value = smooth + (h.lambda1 * float(np.abs(W).sum()) if use_l1 else 0.0)
        record(W, smooth)
        if prev is not None and abs(prev - value) <= h.tol * max(abs(prev), 1e-300):
            converged = True
            break
        if h.lambda2 == 0 and not use_l1:
            converged = True  # nothing is reweighted: one solve is exact
            break
        prev = value
        d = reweight(W, h, groups)
        if use_l1:
            e = 1.0 / np.maximum(np.abs(W), h.epsilon)
    return W, d_used, converged


def fit(x, y, l, h: Hyperparams = Hyperparams(), groups: FeatureGroups | None = None, x_graph=None):
    """Fit ``W``.  Returns ``(WeightMatrix, FitReport)``.

    ``x_graph`` (same rows as ``x``, one column per Laplacian node) lets the
    graph term span unlabeled tweets as well; by default it is ``x``.

    The reweighting loop minimizes the objective without its l1 term,
    starting from ``D = I/2`` (every group norm taken as 1), so the first
    sweep is a ridge solve.  It stops when the relative change falls below
    ``h.tol`` or after ``h.max_iter`` sweeps.  With ``lambda1 > 0`` the l1
    step follows: further sweeps that also majorize the l1 term,
    warm-started from the loop's result.  Last, proximal-gradient steps
    (``prox_penalty``) run until the iterate moves by less than ``h.tol``
    relative; they set vanishing weights and groups to exactly zero.
    Non-convergence is reported, not raised.
    """
    X, Y, L = _x(x), np.asarray(y, dtype=float), _l(l)
    if x_graph is None:
        _check_dims(X, Y, L)
    else:
        _check_dims(X, Y, None)
        if _x(x_graph).shape[0] != X.shape[0] or L.shape != (_x(x_graph).shape[1],) * 2:
            raise ValidationError("graph feature matrix does not match the features or the Laplacian")
    m, c = X.shape[0], Y.shape[1]
    groups = groups if groups is not None else FeatureGroups.singletons(m)
    if groups.m != m:
        raise ValidationError(f"{groups.m} grouped features for {m} feature rows")

    G = normal_matrix(X, L, h, x_graph)
    B = np.asarray(X @ Y)
    yy = float(np.sum(Y * Y))
    report = FitReport()

    def loop_record(W, smooth):
        report.smooth_trace.append(smooth)
        report.objective_trace.append(smooth + h.lambda1 * float(np.abs(W).sum()))

    d, e = np.full(m, 0.5), np.ones((m, c))
    report.converged = True
    # without the group term the loop alone may be singular; the l1 sweeps are not
    if h.lambda2 > 0 or h.lambda1 == 0:
        W, d_used, report.converged = _irls(G, B, yy, groups, h, d, None, loop_record)
        d, e = reweight(W, h, groups), 1.0 / np.maximum(np.abs(W), h.epsilon)

    if h.lambda1 > 0:
        def l1_record(W, smooth):
            report.l1_trace.append(smooth + h.lambda1 * float(np.abs(W).sum()))

        W, d_used, l1_converged = _irls(G, B, yy, groups, h, d, e, l1_record)
        report.converged = report.converged and l1_converged
    if h.lambda1 > 0 or h.lambda2 > 0:
        W, report.prox_steps, polished = _polish(W, G, B, groups, h)
        report.converged = report.converged and polished
    report.iterations = len(report.smooth_trace) + len(report.l1_trace)

    report.final_sparsity = float(np.mean(~np.any(W != 0, axis=1))) if m else 0.0
    report.final_objective = _quadratic_parts(W, G, B, yy) + 0.5 * h.lambda2 * float(
        group_norms(W, groups).sum()) + h.lambda1 * float(np.abs(W).sum())
    return WeightMatrix(W, groups), report


def scores(x, w) -> np.ndarray:
    """Class scores ``X^T W`` for every column of ``x`` (``n x c``)."""
    return np.asarray(_x(x).T @ _w(w))


def predict(x_col, w) -> int:
    """Arg-max class of one feature vector; ties go to class 0."""
    s = np.asarray(x_col, dtype=float).ravel() @ _w(w)
    return int(np.argmax(s))


def predict_labels(x, w) -> np.ndarray:
    # np.argmax returns the first maximum, which puts ties in class 0
    return np.argmax(scores(x, w), axis=1)
