"""Independent reference computations used only by the tests."""
import itertools

import numpy as np


def brute_force_line_graph(edges):
    """Adjacency over tweets sorted by id, by pairwise endpoint comparison."""
    edges = sorted(edges, key=lambda e: e[2])
    n = len(edges)
    H = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        if {edges[i][0], edges[i][1]} & {edges[j][0], edges[j][1]}:
            H[i, j] = H[j, i] = 1.0
    return [e[2] for e in edges], H


def dense_stationary(P):
    """Left Perron vector of ``P`` from a dense eigendecomposition."""
    vals, vecs = np.linalg.eig(P.T)
    k = np.argmin(np.abs(vals - 1.0))
    v = np.real(vecs[:, k])
    return v / v.sum()


def normalized_laplacian(A):
    d = A.sum(axis=1)
    s = 1.0 / np.sqrt(d)
    return np.eye(len(d)) - s[:, None] * A * s[None, :]


def sparse_group_prox(V, t_l1, t_group, group_of):
    """Prox of ``t_l1 ||.||_1 + t_group sum_g ||V_g||_F``."""
    U = np.sign(V) * np.maximum(np.abs(V) - t_l1, 0.0)
    out = np.zeros_like(U)
    for g in np.unique(group_of):
        rows = group_of == g
        nrm = np.linalg.norm(U[rows])
        if nrm > t_group:
            out[rows] = (1.0 - t_group / nrm) * U[rows]
    return out


def full_objective(W, X, Y, L, lam1, lam2, lams, group_of):
    R = X.T @ W - Y
    Z = X.T @ W
    gn = sum(np.linalg.norm(W[group_of == g]) for g in np.unique(group_of))
    return (0.5 * np.sum(R * R) + lam1 * np.abs(W).sum() + 0.5 * lam2 * gn
            + 0.5 * lams * np.sum(Z * (L @ Z)))


def proximal_gradient(X, Y, L, lam1, lam2, lams, group_of, tol=1e-10, max_iter=500_000):
    """FISTA with gradient restart on the full regularized objective."""
    X = np.asarray(X, dtype=float)
    Q = X @ X.T + lams * X @ L @ X.T
    B = X @ Y
    step = 1.0 / max(np.linalg.eigvalsh(Q).max(), 1e-12)
    W = np.zeros((X.shape[0], Y.shape[1]))
    V = W.copy()
    t = 1.0
    for _ in range(max_iter):
        grad = Q @ V - B
        W_new = sparse_group_prox(V - step * grad, step * lam1, step * lam2 / 2, group_of)
        if np.sum((V - W_new) * (W_new - W)) > 0:
            t = 1.0
            V = W.copy()
            continue
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        V = W_new + (t - 1) / t_new * (W_new - W)
        delta = np.max(np.abs(W_new - W))
        W, t = W_new, t_new
        if delta < tol:
            break
    return W


def central_difference(f, W, h=1e-6):
    G = np.zeros_like(W)
    for idx in np.ndindex(*W.shape):
        E = np.zeros_like(W)
        E[idx] = h
        G[idx] = (f(W + E) - f(W - E)) / (2 * h)
    return G
