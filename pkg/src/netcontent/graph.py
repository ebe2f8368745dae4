"""Tweet graphs and the random-walk Laplacian used as a smoothness penalty.

A user-interaction graph has one edge per tweet (a reply or retweet from
one user to another).  ``line_graph`` turns it into a graph over tweets in
which two tweets are linked when their interaction edges touch a common
user.  The remaining functions build the random walk on that tweet graph
and the symmetric Laplacian

    L = I - (Pi^1/2 P Pi^-1/2 + Pi^-1/2 P^T Pi^1/2) / 2

where ``P`` is the transition matrix and ``Pi`` the diagonal matrix of the
walk's stationary distribution.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConvergenceError,
    DuplicateTweetError,
    NotErgodicError,
    NumericalError,
    ValidationError,
)

DEFAULT_DAMPING = 0.85


class Interaction(NamedTuple):
    src: str
    dst: str
    tweet: str
    weight: float = 1.0


@dataclass(frozen=True)
class UserGraph:
    """Directed multigraph of user interactions, one edge per tweet."""

    nodes: frozenset
    edges: tuple

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise ValidationError(f"edge for tweet {e.tweet!r} has an endpoint outside the node set")
            if e.weight < 0:
                raise ValidationError(f"negative weight on tweet {e.tweet!r}")
            if e.tweet in seen:
                raise DuplicateTweetError(e.tweet)
            seen.add(e.tweet)

    @classmethod
    def from_edges(cls, edges: Iterable) -> "UserGraph":
        edges = tuple(Interaction(*e) for e in edges)
        nodes = frozenset(u for e in edges for u in (e.src, e.dst))
        return cls(nodes=nodes, edges=edges)

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True)
class TweetGraph:
    """Undirected tweet-tweet graph.

    ``nodes`` fixes the canonical tweet index shared by the feature matrix,
    the label matrix and the Laplacian.  ``adjacency`` is a symmetric CSR
    matrix with an empty diagonal.
    """

    nodes: tuple
    adjacency: sparse.csr_matrix
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.nodes)
        if self.adjacency.shape != (n, n):
            raise ValidationError(f"adjacency shape {self.adjacency.shape} does not match {n} nodes")
        index = {t: i for i, t in enumerate(self.nodes)}
        if len(index) != n:
            dup = next(t for t in self.nodes if self.nodes.count(t) > 1)
            raise DuplicateTweetError(dup)
        object.__setattr__(self, "_index", index)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def n_links(self) -> int:
        return self.adjacency.nnz // 2

    def index(self, tweet: str) -> int:
        return self._index[tweet]

    def __contains__(self, tweet) -> bool:
        return tweet in self._index

    def subgraph(self, tweets: Sequence[str]) -> "TweetGraph":
        """Induced subgraph on ``tweets``, in the order given."""
        missing = [t for t in tweets if t not in self._index]
        if missing:
            raise ValidationError(f"tweet {missing[0]!r} is not in the tweet graph")
        idx = np.fromiter((self._index[t] for t in tweets), dtype=np.int64, count=len(tweets))
        sub = self.adjacency[idx][:, idx].tocsr()
        return TweetGraph(tuple(tweets), sub)

    def toarray(self) -> np.ndarray:
        return self.adjacency.toarray()


def line_graph(g: UserGraph) -> TweetGraph:
    """Node-to-edge conversion of a user graph.

    Every interaction edge becomes a tweet node.  Two tweets are linked
    (weight 1) when their edges share an endpoint; edge direction is
    ignored.  Nodes are sorted by tweet id.
    """
    if len(g.edges) == 0:
        raise ValidationError("user graph has no edges")
    seen = set()
    for e in g.edges:
        if e.tweet in seen:
            raise DuplicateTweetError(e.tweet)
        seen.add(e.tweet)

    edges = sorted(g.edges, key=lambda e: e.tweet)
    incident = defaultdict(set)
    for i, e in enumerate(edges):
        incident[e.src].add(i)
        incident[e.dst].add(i)

    rows, cols = [], []
    for user in sorted(incident):
        members = sorted(incident[user])
        for a in members:
            for b in members:
                if a != b:
                    rows.append(a)
                    cols.append(b)
    n = len(edges)
    adj = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    # pairs sharing both endpoints were counted twice
    adj.data[:] = 1.0
    adj.sort_indices()
    return TweetGraph(tuple(e.tweet for e in edges), adj)


@dataclass(frozen=True)
class TransitionMatrix:
    P: np.ndarray
    damping: float
    dangling: str = "uniform-redistribute"

    @property
    def n(self) -> int:
        return self.P.shape[0]


def transition_matrix(h: TweetGraph | np.ndarray | sparse.spmatrix, damping: float = DEFAULT_DAMPING) -> TransitionMatrix:
    """Random-walk transition matrix with uniform teleportation.

    Rows of ``H / d_out`` with zero out-degree are replaced by the uniform
    row, then ``P = damping * P0 + (1 - damping) / n``.
    """
    if not 0 < damping <= 1:
        raise ValidationError(f"damping must lie in (0, 1], got {damping}")
    H = h.adjacency if isinstance(h, TweetGraph) else h
    H = H.toarray() if sparse.issparse(H) else np.asarray(H, dtype=float)
    n = H.shape[0]
    if n == 0:
        raise ValidationError("empty graph")
    if np.any(H < 0):
        raise ValidationError("negative edge weight")
    d_out = H.sum(axis=1)
    P = np.empty((n, n))
    dangling = d_out == 0
    P[~dangling] = H[~dangling] / d_out[~dangling, None]
    P[dangling] = 1.0 / n
    if damping < 1:
        P = damping * P + (1.0 - damping) / n
    return TransitionMatrix(P, float(damping))


@dataclass(frozen=True)
class StationaryDistribution:
    pi: np.ndarray
    residual: float
    iterations: int


def is_strongly_connected(P: np.ndarray) -> bool:
    n_comp, _ = connected_components(sparse.csr_matrix(P > 0), directed=True, connection="strong")
    return n_comp == 1


def stationary_distribution(p: TransitionMatrix, tol: float = 1e-12, max_iter: int = 100_000) -> StationaryDistribution:
    """Left fixed point of ``P`` by power iteration from the uniform vector.

    Without teleportation (damping 1) the chain may be periodic, so the
    lazy walk ``(I + P) / 2`` is iterated instead; it has the same fixed
    point.  Damping 1 also requires a strongly connected chain, otherwise
    the fixed point is not unique and ``NotErgodicError`` is raised.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    P = p.P
    n = P.shape[0]
    lazy = p.damping >= 1
    if lazy and not is_strongly_connected(P):
        raise NotErgodicError(
            "random walk is not strongly connected at damping 1; use a damping below 1"
        )
    pi = np.full(n, 1.0 / n)
    resid = np.inf
    for it in range(1, max_iter + 1):
        nxt = pi @ P
        resid = float(np.max(np.abs(nxt - pi)))
        if resid < tol:
            return StationaryDistribution(pi, resid, it)
        pi = 0.5 * (pi + nxt) if lazy else nxt
        pi /= pi.sum()
    raise ConvergenceError("power iteration did not converge", resid)


@dataclass(frozen=True)
class GraphLaplacian:
    L: np.ndarray
    theta: np.ndarray
    pi: np.ndarray | None = None
    P: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.L.shape[0]


def laplacian(p: TransitionMatrix, pi: StationaryDistribution | np.ndarray) -> GraphLaplacian:
    pi_vec = pi.pi if isinstance(pi, StationaryDistribution) else np.asarray(pi, dtype=float)
    if pi_vec.shape != (p.n,):
        raise ValidationError("stationary distribution does not match the transition matrix")
    if np.any(pi_vec <= 0):
        raise NumericalError("stationary distribution has non-positive entries; check the damping factor")
    s = np.sqrt(pi_vec)
    A = s[:, None] * p.P / s[None, :]
    theta = (A + A.T) / 2
    L = np.eye(p.n) - theta
    return GraphLaplacian(L, theta, pi_vec, p.P)


def graph_laplacian(h: TweetGraph, damping: float = DEFAULT_DAMPING, tol: float = 1e-12) -> GraphLaplacian:
    p = transition_matrix(h, damping)
    return laplacian(p, stationary_distribution(p, tol=tol))


def smoothness(y_hat: np.ndarray, p: TransitionMatrix | np.ndarray, pi: StationaryDistribution | np.ndarray) -> float:
    """Pairwise smoothness penalty ``1/2 sum pi(u) P(u,v) ||y_u - y_v||^2``.

    ``y_hat`` holds the rescaled predictions ``f(u) / sqrt(pi(u))``.  The
    value equals ``tr(F^T L F)`` with ``F = Pi^1/2 y_hat``.
    """
    P = p.P if isinstance(p, TransitionMatrix) else np.asarray(p)
    pi_vec = pi.pi if isinstance(pi, StationaryDistribution) else np.asarray(pi)
    Y = np.asarray(y_hat, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != P.shape[0] or pi_vec.shape[0] != P.shape[0]:
        raise ValidationError("shape mismatch")
    total = 0.0
    for u in range(P.shape[0]):
        nz = np.nonzero(P[u])[0]
        if nz.size == 0:
            continue
        diff = Y[u] - Y[nz]
        total += pi_vec[u] * float(P[u, nz] @ np.einsum("ij,ij->i", diff, diff))
    return 0.5 * total
