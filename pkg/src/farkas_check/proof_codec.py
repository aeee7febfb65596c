"""Reading and writing the JSON file formats.

All scalars are JSON strings (``"3"``, ``"-0.5"``, ``"7/10"``); JSON numbers
are refused so no reader can round them through a float. Vectors are
either arrays of scalars or ``{"size": n, "entries": {"i": "v", ...}}``.
The written form is canonical: sorted keys, ``"p/q"`` scalars, dense
arrays unless ``sparse=True``. See docs/format.md.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Optional, Union

from .exact_arith import format_rational, parse_rational
from .linalg import Backend, DimensionError, SparseVector, Tableau, Vector, vector
from .proof_model import (
    BoundType,
    BoundUpdate,
    Defect,
    Equation,
    Lemma,
    Proof,
    ProofNode,
    Query,
    ReluConstraint,
    Split,
    validate_structure,
)
from .query_encoder import BoxProperty, Layer, Network

SCHEMA_VERSION = "1"


class CodecError(ValueError):
    pass


class ParseError(CodecError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}" if line else message)
        self.line = line
        self.column = column


class SchemaError(CodecError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class StructureError(CodecError):
    def __init__(self, defects: list[Defect]):
        super().__init__("; ".join(str(d) for d in defects))
        self.defects = defects


Text = Union[str, bytes]


def _load(text: Text) -> Any:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from None
    if not text.strip():
        raise ParseError("empty document", 1, 1)

    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None


# --- decoding helpers -------------------------------------------------------

def _obj(doc, path: str, required: tuple = (), optional: tuple = ()) -> dict:
    if not isinstance(doc, dict):
        raise SchemaError(path, f"expected an object, got {type(doc).__name__}")
    for key in required:
        if key not in doc:
            raise SchemaError(path, f"missing field {key!r}")
    allowed = set(required) | set(optional)
    for key in doc:
        if key not in allowed:
            raise SchemaError(path, f"unknown field {key!r}")
    return doc


def _dict(doc, path: str) -> dict:
    if not isinstance(doc, dict):
        raise SchemaError(path, f"expected an object, got {type(doc).__name__}")
    return doc


def _list(doc, path: str) -> list:
    if not isinstance(doc, list):
        raise SchemaError(path, f"expected an array, got {type(doc).__name__}")
    return doc


def _nat(doc, path: str) -> int:
    if isinstance(doc, bool) or not isinstance(doc, int) or doc < 0:
        raise SchemaError(path, "expected a non-negative integer")
    return doc


def _scalar(doc, path: str) -> Fraction:
    if not isinstance(doc, str):
        raise SchemaError(path, f"scalars must be strings, got {type(doc).__name__}")
    try:
        return parse_rational(doc)
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(path, str(exc)) from None


def _kind(doc, path: str) -> BoundType:
    try:
        return BoundType(doc)
    except ValueError:
        raise SchemaError(path, f"bound kind must be 'upper' or 'lower', got {doc!r}") from None


def _vector(doc, path: str, backend: Backend) -> Vector:
    if isinstance(doc, list):
        return vector([_scalar(v, f"{path}[{i}]") for i, v in enumerate(doc)], backend)
    obj = _obj(doc, path, ("size", "entries"))
    size = _nat(obj["size"], f"{path}.size")
    entries = _dict(obj["entries"], f"{path}.entries")
    pairs = []
    for key, value in entries.items():
        if not key.isdigit():
            raise SchemaError(f"{path}.entries", f"index keys must be decimal strings, got {key!r}")
        idx = int(key)
        if idx >= size:
            raise SchemaError(f"{path}.entries", f"index {idx} out of range for size {size}")
        pairs.append((idx, _scalar(value, f"{path}.entries.{key}")))
    v = SparseVector(size, pairs)
    return v if backend is Backend.SPARSE else vector(v.tolist(), backend)


def _version(doc: dict, path: str = "$") -> None:
    v = doc["schemaVersion"]
    if v != SCHEMA_VERSION:
        raise SchemaError(f"{path}.schemaVersion", f"unsupported schema version {v!r}")


def _names(doc: dict, n: int) -> Optional[tuple[str, ...]]:
    if "variables" not in doc:
        return None
    names = _list(doc["variables"], "$.variables")
    if len(names) != n or not all(isinstance(s, str) for s in names):
        raise SchemaError("$.variables", f"expected {n} variable names")
    return tuple(names)


def _constraints(doc, path: str) -> tuple[ReluConstraint, ...]:
    out = []
    for i, c in enumerate(_list(doc, path)):
        p = f"{path}[{i}]"
        c = _obj(c, p, ("id", "type", "b", "f"))
        if c["type"] != "relu":
            raise SchemaError(f"{p}.type", f"unsupported constraint type {c['type']!r}")
        out.append(ReluConstraint(_nat(c["id"], f"{p}.id"), _nat(c["b"], f"{p}.b"), _nat(c["f"], f"{p}.f")))
    return tuple(out)


_HEADER = ("schemaVersion", "numVars", "tableau", "upperBounds", "lowerBounds", "constraints")


def _header(doc: dict, backend: Backend):
    n = _nat(doc["numVars"], "$.numVars")
    rows = tuple(_vector(r, f"$.tableau[{i}]", backend) for i, r in enumerate(_list(doc["tableau"], "$.tableau")))
    upper = _vector(doc["upperBounds"], "$.upperBounds", backend)
    lower = _vector(doc["lowerBounds"], "$.lowerBounds", backend)
    constraints = _constraints(doc["constraints"], "$.constraints")
    return Tableau(n, rows), upper, lower, constraints, _names(doc, n)


def _bound(doc, path: str) -> tuple[int, BoundType, Fraction]:
    doc = _obj(doc, path, ("var", "kind", "value"))
    return _nat(doc["var"], f"{path}.var"), _kind(doc["kind"], f"{path}.kind"), _scalar(doc["value"], f"{path}.value")


def _node(doc, path: str, backend: Backend) -> ProofNode:
    doc = _obj(doc, path, ("split", "lemmas"), ("children", "contradiction"))
    sp = _obj(doc["split"], f"{path}.split", ("bounds", "equations"))
    bounds = tuple(BoundUpdate(*_bound(b, f"{path}.split.bounds[{i}]"))
                   for i, b in enumerate(_list(sp["bounds"], f"{path}.split.bounds")))
    equations = tuple(Equation(_vector(e, f"{path}.split.equations[{i}]", backend))
                      for i, e in enumerate(_list(sp["equations"], f"{path}.split.equations")))
    lemmas = []
    for i, lem in enumerate(_list(doc["lemmas"], f"{path}.lemmas")):
        p = f"{path}.lemmas[{i}]"
        lem = _obj(lem, p, ("causing", "affected", "constraint", "farkas"))
        cv, ck, cval = _bound(lem["causing"], f"{p}.causing")
        av, ak, aval = _bound(lem["affected"], f"{p}.affected")
        lemmas.append(Lemma(cv, ck, cval, av, ak, aval, _nat(lem["constraint"], f"{p}.constraint"),
                            _vector(lem["farkas"], f"{p}.farkas", backend)))
    has_children = "children" in doc
    if has_children == ("contradiction" in doc):
        raise SchemaError(path, "a node needs exactly one of 'children' or 'contradiction'")
    if has_children:
        kids = tuple(_node(c, f"{path}.children[{i}]", backend)
                     for i, c in enumerate(_list(doc["children"], f"{path}.children")))
        return ProofNode(Split(bounds, equations), tuple(lemmas), kids, None)
    w = _vector(doc["contradiction"], f"{path}.contradiction", backend)
    return ProofNode(Split(bounds, equations), tuple(lemmas), None, w)


def parse_proof(text: Text, backend: Backend = Backend.DENSE, validate: bool = True) -> Proof:
    doc = _obj(_load(text), "$", _HEADER + ("root",), ("variables",))
    _version(doc)
    tableau, upper, lower, constraints, names = _header(doc, backend)
    p = Proof(tableau, upper, lower, constraints, _node(doc["root"], "$.root", backend), names)
    if validate:
        defects = validate_structure(p)
        if defects:
            raise StructureError(defects)
    return p


def parse_query(text: Text, backend: Backend = Backend.DENSE) -> Query:
    doc = _obj(_load(text), "$", _HEADER, ("variables",))
    _version(doc)
    tableau, upper, lower, constraints, names = _header(doc, backend)
    n = tableau.num_cols
    for i, row in enumerate(tableau.rows):
        if len(row) != n:
            raise SchemaError(f"$.tableau[{i}]", f"row has length {len(row)}, expected {n}")
    for key, vec in (("upperBounds", upper), ("lowerBounds", lower)):
        if len(vec) != n:
            raise SchemaError(f"$.{key}", f"length {len(vec)}, expected {n}")
    for i, (u, l) in enumerate(zip(upper, lower)):
        if l > u:
            raise SchemaError(f"$.lowerBounds[{i}]", f"lower bound {l} exceeds upper bound {u}")
    for i, c in enumerate(constraints):
        if c.b == c.f or c.b >= n or c.f >= n:
            raise SchemaError(f"$.constraints[{i}]", "b and f must be distinct variables of the tableau")
    if len({c.id for c in constraints}) != len(constraints):
        raise SchemaError("$.constraints", "duplicate constraint ids")
    return Query(tableau, upper, lower, constraints, names)


def parse_network(text: Text) -> Network:
    doc = _obj(_load(text), "$", ("schemaVersion", "inputSize", "layers"))
    _version(doc)
    size = _nat(doc["inputSize"], "$.inputSize")
    layers = []
    for i, layer in enumerate(_list(doc["layers"], "$.layers")):
        p = f"$.layers[{i}]"
        layer = _obj(layer, p, ("weights", "biases"))
        weights = tuple(tuple(_scalar(w, f"{p}.weights[{j}][{k}]") for k, w in enumerate(_list(row, f"{p}.weights[{j}]")))
                        for j, row in enumerate(_list(layer["weights"], f"{p}.weights")))
        biases = tuple(_scalar(b, f"{p}.biases[{j}]") for j, b in enumerate(_list(layer["biases"], f"{p}.biases")))
        layers.append(Layer(weights, biases))
    try:
        return Network(size, tuple(layers))
    except DimensionError as exc:
        raise SchemaError("$.layers", str(exc)) from None


def _interval(doc, path: str) -> tuple[Fraction, Fraction]:
    doc = _obj(doc, path, ("lower", "upper"))
    lo, hi = _scalar(doc["lower"], f"{path}.lower"), _scalar(doc["upper"], f"{path}.upper")
    if lo > hi:
        raise SchemaError(path, f"lower {lo} exceeds upper {hi}")
    return lo, hi


def parse_property(text: Text) -> BoxProperty:
    doc = _obj(_load(text), "$", ("schemaVersion", "inputBounds", "outputBounds"), ("boundOverrides",))
    _version(doc)
    inputs = tuple(_interval(b, f"$.inputBounds[{i}]") for i, b in enumerate(_list(doc["inputBounds"], "$.inputBounds")))
    outputs = tuple(_interval(b, f"$.outputBounds[{i}]") for i, b in enumerate(_list(doc["outputBounds"], "$.outputBounds")))
    overrides = {}
    raw = _dict(doc.get("boundOverrides", {}), "$.boundOverrides")
    for name, iv in raw.items():
        overrides[name] = _interval(iv, f"$.boundOverrides.{name}")
    return BoxProperty(inputs, outputs, overrides)


# --- encoding ---------------------------------------------------------------

def _enc_vector(v: Vector, sparse: bool):
    if sparse:
        return {"size": len(v), "entries": {str(k): format_rational(x) for k, x in v.items()}}
    return [format_rational(x) for x in v]


def _enc_bound(var: int, kind: BoundType, value: Fraction) -> dict:
    return {"var": var, "kind": kind.value, "value": format_rational(value)}


def _enc_node(node: ProofNode, sparse: bool) -> dict:
    out = {
        "split": {
            "bounds": [_enc_bound(b.var, b.kind, b.value) for b in node.split.bounds],
            "equations": [_enc_vector(e.row, sparse) for e in node.split.equations],
        },
        "lemmas": [
            {
                "causing": _enc_bound(l.causing_var, l.causing_kind, l.causing_value),
                "affected": _enc_bound(l.affected_var, l.affected_kind, l.affected_value),
                "constraint": l.constraint_id,
                "farkas": _enc_vector(l.farkas, sparse),
            }
            for l in node.lemmas
        ],
    }
    if node.children is not None:
        out["children"] = [_enc_node(c, sparse) for c in node.children]
    if node.contradiction is not None:
        out["contradiction"] = _enc_vector(node.contradiction, sparse)
    return out


def _enc_header(q, sparse: bool) -> dict:
    out = {
        "schemaVersion": SCHEMA_VERSION,
        "numVars": q.tableau.num_cols,
        "tableau": [_enc_vector(r, sparse) for r in q.tableau.rows],
        "upperBounds": _enc_vector(q.upper, sparse),
        "lowerBounds": _enc_vector(q.lower, sparse),
        "constraints": [{"id": c.id, "type": "relu", "b": c.b, "f": c.f} for c in q.constraints],
    }
    if q.names is not None:
        out["variables"] = list(q.names)
    return out


def _render(doc, indent: str) -> str:
    # sorted keys; flat arrays and flat objects stay on one line
    inner = indent + "  "
    if isinstance(doc, dict):
        if all(not isinstance(v, (dict, list)) for v in doc.values()):
            return "{" + ", ".join(f"{json.dumps(k)}: {json.dumps(doc[k])}" for k in sorted(doc)) + "}"
        fields = [f"{inner}{json.dumps(k)}: {_render(doc[k], inner)}" for k in sorted(doc)]
        return "{\n" + ",\n".join(fields) + "\n" + indent + "}"
    if isinstance(doc, list):
        if all(not isinstance(v, (dict, list)) for v in doc):
            return "[" + ", ".join(json.dumps(v) for v in doc) + "]"
        return "[\n" + ",\n".join(inner + _render(v, inner) for v in doc) + "\n" + indent + "]"
    return json.dumps(doc, ensure_ascii=False)


def _dump(doc: dict) -> bytes:
    return (_render(doc, "") + "\n").encode("utf-8")


def serialize_proof(p: Proof, sparse: bool = False) -> bytes:
    doc = _enc_header(p, sparse)
    doc["root"] = _enc_node(p.root, sparse)
    return _dump(doc)


def serialize_query(q: Query, sparse: bool = False) -> bytes:
    return _dump(_enc_header(q, sparse))


def serialize_network(net: Network) -> bytes:
    return _dump({
        "schemaVersion": SCHEMA_VERSION,
        "inputSize": net.input_size,
        "layers": [
            {"weights": [[format_rational(w) for w in row] for row in layer.weights],
             "biases": [format_rational(b) for b in layer.biases]}
            for layer in net.layers
        ],
    })


def serialize_property(prop: BoxProperty) -> bytes:
    enc = lambda iv: {"lower": format_rational(iv[0]), "upper": format_rational(iv[1])}
    doc = {
        "schemaVersion": SCHEMA_VERSION,
        "inputBounds": [enc(iv) for iv in prop.inputs],
        "outputBounds": [enc(iv) for iv in prop.outputs],
    }
    if prop.overrides:
        doc["boundOverrides"] = {k: enc(v) for k, v in prop.overrides.items()}
    return _dump(doc)
