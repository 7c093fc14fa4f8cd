import json

import numpy as np
import pytest

from qplab.core import DecayingSymbol, Frequency, TrigPoly
from qplab.io import atomic_write_text, dumps, fmt, from_dict, loads, read_csv, to_dict, write_csv


def _same_symbol(a, b):
    return np.array_equal(a.ks, b.ks) and np.array_equal(a.values, b.values) and a.radius == b.radius


def test_trig_poly_round_trip_bitwise():
    v = TrigPoly(np.array([0.1 - 1 / 3j, np.pi, 0.1 + 1 / 3j]))
    back = loads(dumps(v))
    assert np.array_equal(back.coeffs, v.coeffs)


def test_symbol_round_trip_bitwise():
    w = DecayingSymbol.from_function(lambda a, b: np.exp(np.cos(2 * np.pi * a) * np.cos(2 * np.pi * b)), d=2, radius=5)
    assert _same_symbol(loads(dumps(w)), w)


def test_frequency_round_trip():
    a = Frequency([(5**0.5 - 1) / 2, 2 ** 0.5 - 1])
    assert np.array_equal(loads(dumps(a)).alpha, a.alpha)


def test_document_layout(cos_v):
    doc = to_dict(cos_v)
    assert doc["coeffs"] == [[-1, 1.0, 0.0], [0, 0.0, 0.0], [1, 1.0, 0.0]]
    assert json.loads(json.dumps(doc)) == doc


def test_unknown_type():
    with pytest.raises(ValueError, match="unknown"):
        from_dict({"type": "Banana"})
    with pytest.raises(TypeError):
        to_dict(3.0)


def test_fmt_round_trips(rng):
    for x in rng.standard_normal(100) * 10.0 ** rng.integers(-300, 300, 100):
        assert float(fmt(x)) == x


def test_csv(tmp_path):
    p = tmp_path / "a.csv"
    write_csv(p, ["a", "b"], [(0.1, 3), (np.float64(1 / 3), "x")])
    raw = p.read_bytes()
    assert b"\r" not in raw
    header, rows = read_csv(p)
    assert header == ["a", "b"] and rows[1] == ["0.33333333333333331", "x"]


def test_atomic_write(tmp_path):
    p = tmp_path / "f.txt"
    atomic_write_text(p, "one")
    atomic_write_text(p, "two")
    assert p.read_text() == "two"
    assert [q.name for q in tmp_path.iterdir()] == ["f.txt"]
