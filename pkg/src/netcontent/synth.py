"""Synthetic networked-tweet datasets with planted homophily.

Users belong to communities; community 0 is the positive one.  Each tweet
is an interaction edge drawn from a stochastic block model (ordered user
pairs weighted by ``p_intra`` inside a community and ``p_inter`` across).
The tweet's label follows the community of its author with probability
``homophily``.  Block counts and positive counts are allocated exactly
(rounded), so the label rate stays on target.  Words come from two
class-conditional distributions that share a uniform component;
``content_signal`` moves them from identical (0) to disjoint (1).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError
from .features import TweetRecord
from .graph import Interaction, UserGraph, line_graph


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 450
    n_tweets: int = 2000
    n_communities: int = 2
    p_intra: float = 0.05
    p_inter: float = 0.005
    positive_rate: float = 0.099
    homophily: float = 0.9
    content_signal: float = 0.3
    vocab_size: int = 200
    min_words: int = 6
    max_words: int = 14
    seed: int = 0

    def __post_init__(self):
        if self.n_communities < 2 or self.n_users < self.n_communities + 1:
            raise ValidationError("need at least two communities and more users than communities")
        if self.n_tweets < 1:
            raise ValidationError("n_tweets must be positive")
        for name in ("p_intra", "p_inter", "content_signal", "homophily"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.p_intra < self.p_inter:
            raise ValidationError("p_intra must be at least p_inter")
        if not 0 < self.positive_rate < 1:
            raise ValidationError("positive_rate must lie in (0, 1)")
        if self.vocab_size < 2 or not 1 <= self.min_words <= self.max_words:
            raise ValidationError("bad vocabulary or tweet-length settings")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SynthData:
    user_graph: UserGraph
    records: tuple
    labels: dict
    community: dict
    stats: dict


def _block_sizes(cfg: SynthConfig, k_pos: int) -> np.ndarray:
    rest = cfg.n_users - k_pos
    q, r = divmod(rest, cfg.n_communities - 1)
    return np.array([k_pos] + [q + (1 if i < r else 0) for i in range(cfg.n_communities - 1)])


def _block_weights(cfg: SynthConfig, sizes: np.ndarray) -> np.ndarray:
    pairs = np.outer(sizes, sizes).astype(float) - np.diag(sizes)
    probs = np.full(pairs.shape, cfg.p_inter)
    np.fill_diagonal(probs, cfg.p_intra)
    return pairs * probs


def _author_share(cfg, k_pos):
    sizes = _block_sizes(cfg, k_pos)
    if np.any(sizes < 1):
        return np.inf
    w = _block_weights(cfg, sizes)
    total = w.sum()
    return w[0].sum() / total if total > 0 else np.nan


def _allocate(p: np.ndarray, n: int) -> np.ndarray:
    counts = np.floor(p * n).astype(int)
    rest = n - counts.sum()
    order = np.argsort(-(p * n - counts), kind="stable")
    counts[order[:rest]] += 1
    return counts


def positive_community_size(cfg: SynthConfig) -> int:
    """Size of community 0 whose share of authored tweets is closest to the positive rate."""
    best, best_gap = 1, np.inf
    for k in range(1, cfg.n_users - cfg.n_communities + 2):
        share = _author_share(cfg, k)
        if np.isfinite(share) and abs(share - cfg.positive_rate) < best_gap:
            best, best_gap = k, abs(share - cfg.positive_rate)
    return best


def generate(cfg: SynthConfig) -> SynthData:
    if cfg.p_intra == 0 and cfg.p_inter == 0:
        raise ValidationError("degenerate config: edge probabilities are zero, no interactions expected")
    rng = np.random.default_rng(cfg.seed)
    k_pos = positive_community_size(cfg)
    sizes = _block_sizes(cfg, k_pos)
    weights = _block_weights(cfg, sizes)
    if weights.sum() <= 0:
        raise ValidationError("degenerate config: no interactions expected")

    community = np.repeat(np.arange(cfg.n_communities), sizes)
    community = rng.permutation(community)
    members = [np.flatnonzero(community == c) for c in range(cfg.n_communities)]
    users = [f"u{i:05d}" for i in range(cfg.n_users)]

    # label probabilities: authors in community 0 post positives w.p. homophily;
    # elsewhere the rate is set so both mislabeled counts match in expectation
    share = float(weights[0].sum() / weights.sum())
    p_pos_in = cfg.homophily
    p_pos_out = min(1.0, share * (1 - cfg.homophily) / (1 - share)) if share < 1 else 0.0

    # exact allocation (largest remainder) keeps the label rate on target
    flat = weights.ravel() / weights.sum()
    blocks = rng.permutation(np.repeat(np.arange(flat.size), _allocate(flat, cfg.n_tweets)))
    author_in = blocks // cfg.n_communities == 0
    labels_arr = np.zeros(cfg.n_tweets, dtype=int)
    for mask, rate in ((author_in, p_pos_in), (~author_in, p_pos_out)):
        idx = np.flatnonzero(mask)
        k = int(round(rate * idx.size))
        labels_arr[rng.permutation(idx)[:k]] = 1
    half = cfg.vocab_size // 2
    uniform = np.full(cfg.vocab_size, 1.0 / cfg.vocab_size)
    word_dists = []
    for cls in (0, 1):
        own = np.zeros(cfg.vocab_size)
        sl = slice(0, half) if cls == 0 else slice(half, cfg.vocab_size)
        own[sl] = 1.0 / (sl.stop - sl.start)
        word_dists.append((1 - cfg.content_signal) * uniform + cfg.content_signal * own)

    edges, records, labels, tweet_comm = [], [], {}, {}
    width = max(5, len(str(cfg.n_tweets)))
    for t, block in enumerate(blocks):
        a, b = divmod(int(block), cfg.n_communities)
        src = int(rng.choice(members[a]))
        dst_pool = members[b] if a != b else members[b][members[b] != src]
        dst = int(rng.choice(dst_pool))
        tid = f"t{t:0{width}d}"
        label = int(labels_arr[t])
        n_words = int(rng.integers(cfg.min_words, cfg.max_words + 1))
        words = rng.choice(cfg.vocab_size, size=n_words, p=word_dists[label])
        text = " ".join(f"w{w:03d}" for w in words)
        edges.append(Interaction(users[src], users[dst], tid))
        records.append(TweetRecord(tid, text))
        labels[tid] = label
        tweet_comm[tid] = a

    g = UserGraph.from_edges(edges)
    comm = {u: int(c) for u, c in zip(users, community)}
    stats = {
        "positive_community_users": int(k_pos),
        "author_share_positive_community": share,
        "label_rate": float(np.mean(list(labels.values()))),
        "mean_interactions_per_tweet": float(line_graph(g).adjacency.nnz / cfg.n_tweets),
        "intra_fraction": float(np.mean([comm[e.src] == comm[e.dst] for e in edges])),
    }
    return SynthData(g, tuple(records), labels, comm, stats)
