import math

import numpy as np
import pytest

import cluekit


@pytest.fixture(scope="module")
def blobs():
    data = cluekit.generate("blobs", seed=3, n_train=300, n_test=60)
    bundle = cluekit.train(data, seed=3, vae={"latent": 2, "epochs": 10, "reconstruction": "gaussian"},
                           ensemble={"epochs": 10})
    return data, bundle


def test_generate_is_deterministic():
    a = cluekit.generate("minidigits", seed=5, n_train=50, n_test=10)
    b = cluekit.generate("minidigits", seed=5, n_train=50, n_test=10)
    assert len(a) == 60
    assert np.array_equal(a.inputs, b.inputs)
    assert a.labels == b.labels


def test_entropy_of_uniform():
    assert cluekit.entropy(np.full(4, 0.25)) == pytest.approx(math.log(4))


def test_bundle_roundtrip(blobs, tmp_path):
    data, bundle = blobs
    bundle.save(str(tmp_path / "b"))
    again = cluekit.Bundle.load(str(tmp_path / "b"))
    x = data.inputs[0]
    assert np.array_equal(bundle.predict(x), again.predict(x))
    assert bundle.encode(x).shape == (2,)


def test_explain_returns_candidates(blobs):
    data, bundle = blobs
    test = data.subset("test")
    rows = cluekit.top_uncertain(test, bundle, 3)
    out = cluekit.explain(test, rows, bundle, "dclue", {"k": 4, "delta": 1.0, "r": 1.0, "seed": 1})
    assert out["method"] == "dclue"
    assert len(out["runs"]) == 3
    for run in out["runs"]:
        assert len(run["ceset"]["candidates"]) == 4


def test_bad_config_raises(blobs):
    data, bundle = blobs
    with pytest.raises(cluekit.ConfigError):
        cluekit.explain(data, [0], bundle, "dclue", {"k": 0})
