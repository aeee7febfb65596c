import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EX1_LOWER, EX1_ROWS, EX1_UPPER, FIXTURES, F, fig2_bytes
from strategies import proofs
from farkas_check.linalg import Backend, Tableau, vector
from farkas_check.proof_codec import (
    ParseError,
    SchemaError,
    StructureError,
    parse_network,
    parse_proof,
    parse_property,
    parse_query,
    serialize_network,
    serialize_proof,
    serialize_property,
    serialize_query,
)
from farkas_check.proof_model import DefectKind, ReluConstraint, validate_structure

REJECT = FIXTURES / "reject"

# fixture name -> (error type, defect kind for structural rejections)
EXPECTED_REJECTIONS = {
    "bounds_length": (StructureError, DefectKind.BOUNDS_LENGTH),
    "bounds_order": (StructureError, DefectKind.BOUNDS_ORDER),
    "row_length": (StructureError, DefectKind.ROW_LENGTH),
    "equation_length": (StructureError, DefectKind.ROW_LENGTH),
    "bad_constraint": (StructureError, DefectKind.BAD_CONSTRAINT),
    "duplicate_constraint": (StructureError, DefectKind.DUPLICATE_CONSTRAINT),
    "var_range": (StructureError, DefectKind.VAR_RANGE),
    "split_var_range": (StructureError, DefectKind.VAR_RANGE),
    "zero_equation": (StructureError, DefectKind.ZERO_EQUATION),
    "empty_split": (StructureError, DefectKind.EMPTY_SPLIT),
    "no_children": (StructureError, DefectKind.NODE_SHAPE),
    "contradiction_length": (StructureError, DefectKind.VECTOR_LENGTH),
    "farkas_length": (StructureError, DefectKind.VECTOR_LENGTH),
    "unknown_constraint": (StructureError, DefectKind.UNKNOWN_CONSTRAINT),
    "lemma_vars": (StructureError, DefectKind.LEMMA_VARS),
    "number_scalar": (SchemaError, None),
    "bad_version": (SchemaError, None),
    "unknown_field": (SchemaError, None),
    "missing_field": (SchemaError, None),
    "both_bodies": (SchemaError, None),
    "bad_kind": (SchemaError, None),
    "bad_scalar": (SchemaError, None),
    "sparse_index": (SchemaError, None),
    "relu_type": (SchemaError, None),
    "truncated": (ParseError, None),
    "empty": (ParseError, None),
}


def test_every_reject_fixture_is_listed():
    on_disk = {p.name.removesuffix(".proof.json") for p in REJECT.glob("*.proof.json")}
    assert on_disk == set(EXPECTED_REJECTIONS)


def test_every_defect_kind_has_a_fixture():
    covered = {kind for _, kind in EXPECTED_REJECTIONS.values() if kind is not None}
    assert covered == set(DefectKind)


@pytest.mark.parametrize("name", sorted(EXPECTED_REJECTIONS))
def test_reject_fixture(name, backend):
    error, kind = EXPECTED_REJECTIONS[name]
    with pytest.raises(error) as info:
        parse_proof((REJECT / f"{name}.proof.json").read_bytes(), backend)
    if kind is not None:
        assert kind in {d.kind for d in info.value.defects}


def test_two_leaf_proof_shape(fig2):
    assert fig2.tableau.num_rows == 4 and fig2.tableau.num_cols == 9
    assert fig2.tableau.rows == tuple(vector(F(*r)) for r in EX1_ROWS)
    assert fig2.upper == vector(F(*EX1_UPPER)) and fig2.lower == vector(F(*EX1_LOWER))
    assert fig2.constraints == (ReluConstraint(0, 2, 5), ReluConstraint(1, 3, 6), ReluConstraint(2, 4, 7))
    assert len(fig2.root.lemmas) == 1 and len(fig2.root.children) == 2
    assert all(child.is_leaf for child in fig2.root.children)
    assert fig2.names == ("x1", "x2", "b1", "b2", "b3", "f1", "f2", "f3", "y")


def test_empty_input():
    with pytest.raises(ParseError) as info:
        parse_proof(b"")
    assert (info.value.line, info.value.column) == (1, 1)


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_proof(b'{\n  "schemaVersion": "1",\n  oops\n}')
    assert info.value.line == 3


def test_schema_error_names_path():
    doc = json.loads(fig2_bytes())
    doc["root"]["children"][1]["contradiction"][2] = 0
    with pytest.raises(SchemaError) as info:
        parse_proof(json.dumps(doc))
    assert info.value.path == "$.root.children[1].contradiction[2]"


def test_decimal_entries_equal_fractions():
    doc = json.loads(fig2_bytes())
    doc["upperBounds"][0] = "0.5"
    a = parse_proof(json.dumps(doc))
    doc["upperBounds"][0] = "1/2"
    b = parse_proof(json.dumps(doc))
    assert a == b and a.upper[0] == Fraction(1, 2)


def test_round_trip(fig2):
    assert parse_proof(serialize_proof(fig2)) == fig2
    assert parse_proof(serialize_proof(fig2, sparse=True)) == fig2


def test_serialization_is_deterministic(fig2):
    reparsed = parse_proof(fig2_bytes(), Backend.SPARSE)
    assert serialize_proof(fig2) == serialize_proof(reparsed)
    out = serialize_proof(fig2)
    assert out.endswith(b"\n")
    assert b"3/1" in out  # canonical p/q even for integers


def test_validate_flag_skips_structure_check():
    raw = (REJECT / "contradiction_length.proof.json").read_bytes()
    p = parse_proof(raw, validate=False)
    assert validate_structure(p)


@settings(max_examples=80, deadline=None)
@given(proofs(), st.booleans())
def test_random_round_trip(p, sparse):
    text = serialize_proof(p, sparse=sparse)
    q = parse_proof(text, Backend.SPARSE if sparse else Backend.DENSE)
    assert q == p
    assert validate_structure(q) == validate_structure(p)
    assert serialize_proof(q, sparse=sparse) == text


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(1, 6), st.randoms(use_true_random=False))
def test_sparse_and_dense_tableau_encodings_agree(m, n, rnd):
    rows = [[Fraction(rnd.randint(-3, 3), rnd.randint(1, 4)) if rnd.random() < 0.4 else Fraction(0)
             for _ in range(n)] for _ in range(m)]
    doc = json.loads(fig2_bytes())
    doc.update(numVars=n, tableau=[[str(x) for x in r] for r in rows],
               upperBounds=["1"] * n, lowerBounds=["0"] * n, constraints=[])
    doc.pop("variables")
    doc["root"] = {"split": {"bounds": [], "equations": []}, "lemmas": [], "contradiction": ["0"] * m}
    dense = parse_proof(json.dumps(doc))
    doc["tableau"] = [{"size": n, "entries": {str(j): str(x) for j, x in enumerate(r) if x}} for r in rows]
    sparse = parse_proof(json.dumps(doc), Backend.SPARSE)
    assert dense.tableau == sparse.tableau == Tableau.from_lists(rows, n)


def test_query_file(ex1_query):
    assert ex1_query.tableau.rows == tuple(vector(F(*r)) for r in EX1_ROWS)
    assert ex1_query.upper == vector(F(*EX1_UPPER))
    assert ex1_query.lower == vector(F(*EX1_LOWER))
    assert parse_query(serialize_query(ex1_query)) == ex1_query


def test_query_rejects_inverted_bounds():
    doc = json.loads((FIXTURES / "ex1.query.json").read_bytes())
    doc["lowerBounds"][3] = "5"
    with pytest.raises(SchemaError) as info:
        parse_query(json.dumps(doc))
    assert info.value.path == "$.lowerBounds[3]"


@pytest.mark.parametrize("edit", [
    lambda d: d["tableau"][0].pop(),
    lambda d: d["upperBounds"].pop(),
    lambda d: d["constraints"].append({"id": 0, "type": "relu", "b": 0, "f": 1}),
    lambda d: d["constraints"][0].update(f=2),
    lambda d: d.update(root={}),
])
def test_query_schema_rejections(edit):
    doc = json.loads((FIXTURES / "ex1.query.json").read_bytes())
    edit(doc)
    with pytest.raises(SchemaError):
        parse_query(json.dumps(doc))


def test_network_file(fig1_net):
    assert fig1_net.layer_sizes == (2, 2, 1, 1)
    assert fig1_net.num_relus == 3
    assert [layer.weights for layer in fig1_net.layers] == [((2, 0), (0, 1)), ((-1, 1),), ((1,),)]
    assert all(b == 0 for layer in fig1_net.layers for b in layer.biases)
    assert parse_network(serialize_network(fig1_net)) == fig1_net


def test_property_file(ex1_prop):
    assert ex1_prop.inputs == ((-1, 1), (-1, 1))
    assert ex1_prop.outputs == ((2, 3),)
    assert ex1_prop.overrides == {"b3": (-2, 2), "f3": (0, 3)}
    assert parse_property(serialize_property(ex1_prop)) == ex1_prop


def test_network_shape_mismatch():
    doc = json.loads((FIXTURES / "fig1.net.json").read_bytes())
    doc["layers"][1]["weights"][0].append("1")
    with pytest.raises(SchemaError):
        parse_network(json.dumps(doc))


def test_produced_proofs_round_trip():
    from farkas_check.fuzz import run_fuzz
    report = run_fuzz(21, 30, mutate=False, keep_cases=True)
    rng = random.Random(0)
    for case in report.cases:
        if hasattr(case.result, "proof"):
            p = case.result.proof
            sparse = rng.random() < 0.5
            assert parse_proof(serialize_proof(p, sparse=sparse)) == p
