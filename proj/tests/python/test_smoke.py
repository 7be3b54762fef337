import math

import numpy as np
import pytest

import redistlab as rl


def test_manifold_worked_examples():
    assert rl.manifold_payout(0.0, 1.0, [10, 10, 10, 10], [6, 0, 4, 0]) == pytest.approx([9.6, 0, 6.4, 0])
    assert rl.manifold_payout(0.0, 0.25, [10, 10, 10, 10], [6, 0, 4, 0]) == pytest.approx([4, 4, 4, 4])
    y = rl.mechanism_payout(rl.named("liberal_egalitarian"), [10, 2, 2, 2], [5, 2, 2, 2])
    assert sum(y) == pytest.approx(1.6 * 11)


def test_domain_errors_surface_as_value_error():
    with pytest.raises(ValueError):
        rl.manifold_payout(0.5, 0.5, [10, 10, 10, 10], [11, 0, 0, 0])


def test_gini_and_vote_model():
    assert rl.gini([10, 2, 2, 2]) == pytest.approx(0.375)
    assert rl.vote_probability(1.0, 1.0) == pytest.approx(0.5)
    assert rl.vote_probability(1.0, 0.0) == pytest.approx(1 / (1 + math.exp(-1.4)))


def test_rational_step_directions():
    e = [10, 10, 10, 10]
    up = rl.rational_step(1.0, 0.0, e, 0, [5, 5, 5, 5], rl.named("libertarian"))
    down = rl.rational_step(1.0, 0.0, e, 0, [5, 5, 5, 5], rl.named("strict_egalitarian"))
    assert up == pytest.approx(1.5)
    assert down == pytest.approx(-1.5)


def test_session_structure_and_regression_input():
    ep = rl.run_session([10, 2, 2, 2], rl.named("libertarian"), rl.manifold(0.5, 0.5), seed=3)
    rounds = sum(len(b["rounds"]) for b in ep["blocks"])
    assert rounds == 34
    assert ep == rl.run_session([10, 2, 2, 2], rl.named("libertarian"), rl.manifold(0.5, 0.5), seed=3)


def test_tiny_pipeline():
    corpus = rl.generate_corpus(episodes=8, seed=1)
    assert len(corpus) == 8
    trained = rl.train_players(corpus, seed=2, updates=5, batch=8, eval_every=5)
    assert trained["validation_ce"] > 0
    designer = rl.train_designer(trained["model"], seed=4, updates=2, episodes_per_profile=1)
    w = rl.designer_weights(designer["policy"], [10, 4, 4, 4], [5, 2, 2, 2])
    assert sum(w) == pytest.approx(1.0)
    assert min(w) >= 0


def test_head_to_head_and_plots():
    a, b = rl.named("libertarian"), rl.manifold(0.5, 0.5)
    ab = rl.head_to_head(a, b, blocks=16, seed=1)
    ba = rl.head_to_head(b, a, blocks=16, seed=1)
    assert ab["share"] + ba["share"] == pytest.approx(1.0)
    plot = rl.beach_plot(rl.named("strict_egalitarian"), [10, 4, 4, 4], resolution=5)
    assert plot


def test_mds_recovers_distances():
    d = np.array([[0, 3, 4], [3, 0, 5], [4, 5, 0]], dtype=float)
    coords, eig, degenerate = rl.classical_mds(d)
    assert not degenerate
    assert np.allclose(rl.pairwise_distances(coords), d, atol=1e-9)
