"""Counterfactual latent uncertainty explanations."""

import json

from ._cluekit import (
    Bundle,
    ConfigError,
    Dataset,
    NumericalError,
    ShapeError,
    entropy,
    top_uncertain,
)
from . import _cluekit

__all__ = [
    "Bundle",
    "ConfigError",
    "Dataset",
    "NumericalError",
    "ShapeError",
    "entropy",
    "explain",
    "generate",
    "top_uncertain",
    "train",
]


def generate(generator="minidigits", seed=0, **params):
    """Build a synthetic dataset (``blobs`` or ``minidigits``)."""
    return Dataset.generate(json.dumps({"generator": generator, "seed": seed, **params}))


def train(data, seed=0, vae=None, ensemble=None):
    """Train the VAE and the ensemble; hyperparameter dicts override defaults."""
    return Bundle.train(data, json.dumps(vae or {}), json.dumps(ensemble or {}), seed)


def explain(data, rows, bundle, method="dclue", config=None, diversity=None):
    """Run one explanation method over the given rows and return the result dict."""
    out = _cluekit.explain(data, list(rows), bundle, method, json.dumps(config or {}), json.dumps(diversity or {}))
    return json.loads(out)
