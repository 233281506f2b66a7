"""CSV and JSON forms of spin and image fields.

Spin fields are written one vertex per row as ``address,spin``; image fields
as ``address,value``.  Addresses are bit strings with the root written
``r``, rows come in heap order, and a partial image marks its root ``r,?``.
The JSON form is an object with the same field names, e.g.
``{"kind": "image", "depth": 2, "partial": true, "records": [...]}``.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from . import tree
from .gibbs import SpinField
from .renorm import ImageField

UNKNOWN = "?"


def _depth_from_count(n: int) -> int:
    depth = (n + 1).bit_length() - 2
    if n < 1 or tree.ball_size(depth) != n:
        raise ValueError(f"{n} records do not fill a ball of the binary tree")
    return depth


def _records(field: SpinField | ImageField) -> list[tuple[str, str]]:
    partial = isinstance(field, ImageField) and field.partial
    out = []
    for i, label in enumerate(tree.labels(field.depth)):
        out.append((label, UNKNOWN if (partial and i == 0) else str(int(field.values[i]))))
    return out


def to_csv(field: SpinField | ImageField) -> str:
    column = "spin" if isinstance(field, SpinField) else "value"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["address", column])
    writer.writerows(_records(field))
    return buf.getvalue()


def to_json(field: SpinField | ImageField) -> str:
    is_spin = isinstance(field, SpinField)
    column = "spin" if is_spin else "value"
    doc = {"kind": "spin" if is_spin else "image", "depth": field.depth}
    if not is_spin:
        doc["partial"] = field.partial
    doc["records"] = [{"address": a, column: (v if v == UNKNOWN else int(v))} for a, v in _records(field)]
    return json.dumps(doc) + "\n"


def _assemble(pairs: list[tuple[str, str]], column: str) -> SpinField | ImageField:
    index = {}
    for address, value in pairs:
        v = tree.parse(address)
        if v.index in index:
            raise ValueError(f"duplicate address {address!r}")
        index[v.index] = value
    depth = _depth_from_count(len(index))
    if sorted(index) != list(range(len(index))):
        raise ValueError("addresses do not cover a ball around the root")
    raw = [index[i] for i in range(len(index))]
    partial = raw[0] == UNKNOWN
    if partial and column == "spin":
        raise ValueError("spin fields cannot leave the root unassigned")
    try:
        values = np.array([0 if partial and i == 0 else int(x) for i, x in enumerate(raw)], dtype=np.int8)
    except ValueError as exc:
        raise ValueError(f"non-integer {column}: {exc}") from None
    if column == "spin":
        return SpinField(depth, values)
    return ImageField(depth, values, partial=partial)


def from_csv(text: str) -> SpinField | ImageField:
    """Parse either CSV form; the header decides between spins and images."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise ValueError("empty field file")
    header = [h.strip() for h in rows[0]]
    if header not in (["address", "spin"], ["address", "value"]):
        raise ValueError(f"expected header address,spin or address,value; got {','.join(header)}")
    pairs = []
    for r in rows[1:]:
        if len(r) != 2:
            raise ValueError(f"malformed row {r!r}")
        pairs.append((r[0].strip(), r[1].strip()))
    return _assemble(pairs, header[1])


def from_json(text: str) -> SpinField | ImageField:
    doc = json.loads(text)
    column = "spin" if doc.get("kind") == "spin" else "value"
    try:
        pairs = [(str(rec["address"]), str(rec[column])) for rec in doc["records"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed field document: {exc}") from None
    return _assemble(pairs, column)


def load(path: str) -> SpinField | ImageField:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return from_json(text) if text.lstrip().startswith("{") else from_csv(text)
