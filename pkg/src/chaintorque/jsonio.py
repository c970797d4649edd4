"""Report helpers: every analysis scalar carries an explicit exactness tag
({"exact": "p/q"} or {"approx": float}); structural integers stay plain."""

import json
import math
from fractions import Fraction

SCHEMA = 1


def exact(value):
    if isinstance(value, Fraction):
        return {"exact": str(value)}
    return {"exact": str(Fraction(value))}


def approx(value):
    if value is None:
        return {"approx": None}
    value = float(value)
    if math.isinf(value) or math.isnan(value):
        return {"approx": None, "note": repr(value)}
    return {"approx": value}


def document(payload):
    doc = {"schema": SCHEMA}
    doc.update(payload)
    return doc


def dumps(payload):
    return json.dumps(document(payload), sort_keys=True, indent=2)
