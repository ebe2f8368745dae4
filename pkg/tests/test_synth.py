import numpy as np
import pytest

from netcontent.errors import ValidationError
from netcontent.evaluation import AblationConfig, Dataset, run_mode
from netcontent.features import FeatureConfig
from netcontent.graph import line_graph
from netcontent.synth import SynthConfig, generate, positive_community_size


def _same_label_fraction(d):
    g = line_graph(d.user_graph)
    y = np.array([d.labels[t] for t in g.nodes])
    A = g.adjacency.tocoo()
    return float(np.mean(y[A.row] == y[A.col])), float(np.mean(y)), y


def test_deterministic_per_seed():
    a = generate(SynthConfig(n_tweets=300, seed=7))
    b = generate(SynthConfig(n_tweets=300, seed=7))
    assert a.user_graph == b.user_graph and a.records == b.records and a.labels == b.labels
    c = generate(SynthConfig(n_tweets=300, seed=8))
    assert c.records != a.records


def test_label_rate_near_target():
    for seed in range(5):
        d = generate(SynthConfig(n_tweets=1000, seed=seed))
        assert abs(d.stats["label_rate"] - 0.099) <= 0.02


def test_planted_assortativity():
    for seed in range(10):
        d = generate(SynthConfig(n_tweets=800, seed=seed))
        same, rate, _ = _same_label_fraction(d)
        base = rate ** 2 + (1 - rate) ** 2
        assert same > base


def test_stats_reported():
    d = generate(SynthConfig(n_tweets=500, seed=1))
    for key in ("mean_interactions_per_tweet", "label_rate", "intra_fraction", "positive_community_users"):
        assert key in d.stats
    assert d.stats["intra_fraction"] > 0.5


def test_density_tunes_interactions_per_tweet():
    sparse_ = generate(SynthConfig(n_users=900, seed=0)).stats["mean_interactions_per_tweet"]
    dense = generate(SynthConfig(n_users=300, seed=0)).stats["mean_interactions_per_tweet"]
    assert sparse_ < dense


def test_positive_community_size_matches_share():
    k = positive_community_size(SynthConfig())
    assert 1 <= k < SynthConfig().n_users


def test_every_tweet_is_one_edge():
    d = generate(SynthConfig(n_tweets=200, seed=3))
    assert len(d.user_graph.edges) == 200 == len(d.records) == len(d.labels)
    assert {e.tweet for e in d.user_graph.edges} == {r.tweet_id for r in d.records}


@pytest.mark.parametrize("kw", [
    dict(p_intra=0.001, p_inter=0.01),
    dict(positive_rate=0.0),
    dict(n_communities=1),
    dict(homophily=1.5),
    dict(min_words=5, max_words=2),
])
def test_invalid_configs(kw):
    with pytest.raises(ValidationError):
        SynthConfig(**kw)


def test_zero_probabilities_degenerate():
    with pytest.raises(ValidationError, match="degenerate"):
        generate(SynthConfig(p_intra=0.0, p_inter=0.0))


def test_no_content_signal_is_chance_level():
    f1, rates = [], []
    for seed in range(10):
        d = generate(SynthConfig(n_tweets=800, content_signal=0.0, seed=seed))
        data = Dataset.build(line_graph(d.user_graph), d.records, d.labels)
        f1.append(run_mode(AblationConfig("content_only", seed=seed, features=FeatureConfig(order=1)), data).f1)
        rates.append(d.stats["label_rate"])
    # a chance-level classifier scores at most about the base rate
    assert np.mean(f1) <= np.mean(rates) + 2 * np.std(f1) / np.sqrt(10) + 0.02
