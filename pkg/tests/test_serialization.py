import json
import math
from importlib import resources

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bell_lab.correlations import Behavior
from bell_lab.lhv import BellFunctional
from bell_lab.quantum import born_behavior, random_setup
from bell_lab.serialization import dumps, load_schema, loads, party_columns

SCHEMAS = sorted(p.name[:-5] for p in resources.files("bell_lab").joinpath("schemas").iterdir() if p.name.endswith(".json"))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_behavior_round_trip_is_bit_exact(seed):
    b = born_behavior(random_setup(np.random.default_rng(seed)))
    back = Behavior.from_json(b.to_json())
    assert np.array_equal(back.table, b.table)
    assert back.scenario == b.scenario


@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(x):
    assert loads(dumps({"v": x}))["v"] == x


def test_numpy_types():
    d = loads(dumps({"a": np.arange(3), "b": np.bool_(True), "c": np.int64(7), "d": np.float32(0.5)}))
    assert d == {"a": [0, 1, 2], "b": True, "c": 7, "d": 0.5}
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_non_finite_rejected():
    for bad in (math.nan, math.inf, np.float64("nan")):
        with pytest.raises(ValueError):
            dumps({"x": bad})


def test_functional_round_trip():
    f = BellFunctional.chsh_s()
    back = BellFunctional.from_dict(json.loads(f.to_json()))
    assert np.array_equal(back.coefficients, f.coefficients)


def test_party_columns():
    assert party_columns(2) == (["x", "y"], ["a", "b"])
    assert party_columns(3) == (["x", "y", "z"], ["a", "b", "c"])
    assert party_columns(4)[1] == ["a0", "a1", "a2", "a3"]


@pytest.mark.parametrize("name", SCHEMAS)
def test_schemas_are_valid(name):
    jsonschema.Draft202012Validator.check_schema(load_schema(name))


def test_expected_schemas_shipped():
    assert {"behavior", "functional", "run_report", "membership", "speed_scan", "error"} <= set(SCHEMAS)
    with pytest.raises(KeyError):
        load_schema("nope")
