import json

import numpy as np
import pytest

from gemkoc import model as mk
from gemkoc.data_io import MinMaxScaler
from gemkoc.exceptions import ModelFormatError
from gemkoc.graphs import GraphSpec, Recipe
from gemkoc.layers import LayerHyperparams
from gemkoc.persistence import dumps, load_model, loads, save_model


@pytest.fixture(params=[(1, Recipe.ZERO, "THETA1"), (3, Recipe.LLE, "THETA2"), (2, Recipe.CDA, "THETA1")])
def fitted(request, rng):
    depth, recipe, kind = request.param
    raw = rng.uniform(-5, 5, size=(18, 3))
    sc = MinMaxScaler.fit(raw)
    hp = LayerHyperparams(0.5, 2.0, GraphSpec(recipe, clusters=3 if recipe is Recipe.CDA else None))
    return mk.fit(sc.transform(raw), mk.MkocConfig(depth=depth, layers=hp, threshold=kind, seed=5), scaler=sc)


def test_write_read_write_identical(fitted, tmp_path):
    p, q = tmp_path / "a.json", tmp_path / "b.json"
    save_model(fitted, p)
    save_model(load_model(p), q)
    assert p.read_bytes() == q.read_bytes()


def test_round_trip_bit_exact(fitted, rng):
    back = loads(dumps(fitted))
    assert back.threshold == fitted.threshold and back.threshold_kind is fitted.threshold_kind
    assert back.train_output_mean == fitted.train_output_mean
    for a, b in zip(fitted.layers, back.layers):
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.train_inputs, b.train_inputs)
        assert a.sigma == b.sigma and a.hyperparams == b.hyperparams
    probe = rng.uniform(-6, 6, size=(10, 3))
    np.testing.assert_array_equal(mk.score_samples(fitted, probe), mk.score_samples(back, probe))


def test_threshold_block(fitted):
    th = json.loads(dumps(fitted))["threshold"]
    assert set(th) == {"kind", "theta", "train_output_mean", "r", "eta"}


@pytest.mark.parametrize("text", ["not json", "{}", '{"format":"gemkoc-model","version":99}',
                                  '{"format":"gemkoc-model","version":1,"layers":[]}'])
def test_bad_files(text):
    with pytest.raises(ModelFormatError):
        loads(text)


def test_missing_key(fitted):
    d = json.loads(dumps(fitted))
    del d["layers"][-1]["weights"]
    with pytest.raises(ModelFormatError):
        loads(json.dumps(d))
