"""Python front end to the redistribution laboratory.

Mechanism specs, episodes and model weights are plain dicts/lists in the same
JSON layout the command-line tool reads and writes.
"""

import json as _json

import numpy as _np

from . import _redist
from ._redist import DomainError, GROWTH, PLAYERS, gini, manifold_payout, vote_probability

__all__ = [
    "DomainError",
    "GROWTH",
    "PLAYERS",
    "beach_plot",
    "classical_mds",
    "designer_weights",
    "fit_vote_regression",
    "generate_corpus",
    "gini",
    "head_to_head",
    "manifold_payout",
    "mechanism_payout",
    "named",
    "manifold",
    "rational_step",
    "run_metagame",
    "run_session",
    "train_designer",
    "train_players",
    "vote_probability",
]


def named(name):
    return {"kind": "named", "name": name}


def manifold(v, w):
    return {"kind": "manifold", "v": v, "w": w}


def _dump(value):
    return "" if value is None else _json.dumps(value)


def mechanism_payout(spec, endowments, contributions):
    return _redist.mechanism_payout(_dump(spec), list(endowments), list(contributions))


def rational_step(learning_rate, generosity, endowments, seat, contributions, spec):
    """Generosity after one gradient-ascent step of a rational player."""
    return _redist.rational_step(learning_rate, generosity, list(endowments), seat, list(contributions), _dump(spec))


def run_session(profile, mech_a, mech_b, order_flag=False, seed=0, model=None):
    """Plays one 34-round session; rational players unless a player model is given."""
    return _json.loads(_redist.run_session(list(profile), _dump(mech_a), _dump(mech_b), order_flag, seed, _dump(model)))


def generate_corpus(**config):
    return _json.loads(_redist.generate_corpus(_json.dumps(config)))


def train_players(episodes, seed=0, **config):
    return _json.loads(_redist.train_players(_json.dumps(episodes), _json.dumps(config), seed))


def train_designer(model, seed=0, **config):
    return _json.loads(_redist.train_designer(_dump(model), _json.dumps(config), seed))


def designer_weights(policy, endowments, contributions):
    return _redist.designer_weights(_dump(policy), list(endowments), list(contributions))


def head_to_head(mech_a, mech_b, blocks=256, seed=0, model=None):
    return _json.loads(_redist.head_to_head(_dump(mech_a), _dump(mech_b), blocks, seed, _dump(model)))


def run_metagame(grid=None, blocks=256, seed=0, model=None):
    return _json.loads(_redist.run_metagame(_json.dumps(grid or []), blocks, seed, _dump(model)))


def beach_plot(spec, profile, resolution=11):
    return _json.loads(_redist.beach_plot(_dump(spec), list(profile), resolution))


def classical_mds(distances, dims=2):
    """Returns (coordinates, eigenvalues, degenerate)."""
    return _redist.classical_mds(_np.asarray(distances, dtype=float), dims)


def pairwise_distances(points):
    return _redist.pairwise_distances(_np.asarray(points, dtype=float))


def fit_vote_regression(episodes):
    return _json.loads(_redist.fit_vote_regression(_json.dumps(episodes)))
