import json

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from rcinterp.reporting import dumps, fmt_float, write_csv


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(x):
    assert float(fmt_float(x)) == x


def test_special_values():
    assert fmt_float(1) == "1.0" and fmt_float(-3.0) == "-3.0"
    assert fmt_float(float("nan")) == "NaN" and fmt_float(-np.inf) == "-Infinity"


def test_dumps_sorted_and_stable():
    a = {"b": [1, 2.5, True, None], "a": {"z": 1j, "y": np.float64(0.1)}}
    b = {"a": {"y": 0.1, "z": complex(0, 1)}, "b": [1, 2.5, True, None]}
    assert dumps(a) == dumps(b)
    back = json.loads(dumps(a))
    assert list(back) == ["a", "b"] and back["a"]["z"] == [0.0, 1.0]
    assert dumps({"x": 0.1}) == '{\n "x": 0.10000000000000001\n}\n'


def test_csv(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["i", "v"], [np.arange(3), np.array([0.5, 1.0, 2.0])])
    assert path.read_text() == "i,v\n0,0.5\n1,1.0\n2,2.0\n"
