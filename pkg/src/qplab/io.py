"""Text serialisation of model data and CSV helpers.

Model documents are JSON objects. Coefficients are lists of ``[k, re, im]``
triples (``k`` an int, or a list of ints for d > 1) in lexicographic k order.
Floats go through ``repr`` which is the shortest string that round-trips.
"""

import csv
import io
import json
import os
import tempfile

import numpy as np

from .core import DecayingSymbol, Frequency, TrigPoly


def _triples(ks, values, scalar_k):
    out = []
    for k, v in zip(ks, values):
        kk = int(k[0]) if scalar_k else [int(x) for x in k]
        out.append([kk, float(np.real(v)), float(np.imag(v))])
    return out


def trig_poly_to_dict(v):
    ks = np.arange(-v.degree, v.degree + 1)[:, None]
    return {"type": "TrigPoly", "degree": v.degree, "coeffs": _triples(ks, v.coeffs, True)}


def symbol_to_dict(w):
    return {
        "type": "DecayingSymbol",
        "dimension": w.dimension,
        "radius": w.radius,
        "C": float(w.C),
        "c": float(w.c),
        "coeffs": _triples(w.ks, w.values, w.dimension == 1),
    }


def frequency_to_dict(alpha):
    return {"type": "Frequency", "d": alpha.d, "alpha": [float(a) for a in alpha.alpha]}


def _parse_triples(rows):
    ks, vals = [], []
    for row in rows:
        k, re, im = row
        ks.append(np.atleast_1d(k))
        vals.append(complex(float(re), float(im)))
    return np.array(ks, dtype=np.int64), np.array(vals, dtype=np.complex128)


def from_dict(doc):
    kind = doc.get("type")
    if kind == "TrigPoly":
        ks, vals = _parse_triples(doc["coeffs"])
        return TrigPoly.from_dict({int(k[0]): v for k, v in zip(ks, vals)})
    if kind == "DecayingSymbol":
        ks, vals = _parse_triples(doc["coeffs"])
        ks = ks.reshape(-1, int(doc["dimension"]))
        return DecayingSymbol(ks, vals, C=doc.get("C", 1.0), c=doc.get("c", 1.0), radius=doc.get("radius", -1))
    if kind == "Frequency":
        return Frequency(doc["alpha"])
    raise ValueError(f"unknown document type {kind!r}")


def to_dict(obj):
    if isinstance(obj, TrigPoly):
        return trig_poly_to_dict(obj)
    if isinstance(obj, DecayingSymbol):
        return symbol_to_dict(obj)
    if isinstance(obj, Frequency):
        return frequency_to_dict(obj)
    raise TypeError(type(obj))


def dumps(obj):
    return json.dumps(to_dict(obj), indent=2)


def loads(text):
    return from_dict(json.loads(text))


def fmt(x):
    """17 significant digits."""
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    """Comma separated, header row, 17-digit reals, LF endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def atomic_write_text(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
