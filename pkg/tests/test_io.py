import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sera.io import ParseError, dumps, read_json, read_table, read_weights, write_field, write_table


def test_roundtrip_exact(tmp_path, rng):
    pts = rng.normal(size=(20, 2)) * 1e3
    vals = rng.normal(size=20) * 1e-7
    p = tmp_path / "s.csv"
    write_table(p, pts, vals)
    P, V = read_table(p)
    np.testing.assert_array_equal(P, pts)
    np.testing.assert_array_equal(V, vals)
    raw = p.read_bytes()
    assert b"\r" not in raw and raw.startswith(b"y_1,y_2,value\n")


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_text_roundtrip(x):
    assert float(dumps(x)) == x


def test_field_and_weights_headers(tmp_path):
    write_field(tmp_path / "f.csv", np.zeros((2, 1)), [1.0, 2.0])
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "x_1,value"
    write_table(tmp_path / "w.csv", np.zeros((1, 1)), [0.5], value_name="w")
    _, w = read_weights(tmp_path / "w.csv")
    assert w[0] == 0.5


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("a,b\n1,2\n", 1),
    ("y_1,value\n1,2\n3\n", 3),
    ("y_1,value\n1,2\n1,abc\n", 3),
])
def test_parse_errors(tmp_path, text, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ParseError) as exc:
        read_table(p)
    assert exc.value.lineno == line
    assert f":{line}:" in str(exc.value)


def test_json_format(tmp_path):
    obj = {"a": [1.0, 2.5], "b": {"c": np.float64(0.1), "d": np.arange(2)}, "e": math.inf,
           "f": None, "g": True, "h": [[1, 2], [3, 4]]}
    text = dumps(obj)
    back = json.loads(text)
    assert back["b"]["c"] == 0.1 and back["e"] is None and back["h"] == [[1, 2], [3, 4]]
    assert '"a": [1, 2.5]' in text
    p = tmp_path / "x.json"
    p.write_text("{bad")
    with pytest.raises(ParseError):
        read_json(p)
