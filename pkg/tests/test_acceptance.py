"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL summary that conftest prints at the
end of the run, then asserts. Tolerances are exact.
"""

import copy
import csv
import io
import json
import random
import time
from fractions import Fraction

from conftest import ACCEPTANCE, B3, EX1_LOWER, EX1_ROWS, EX1_UPPER, F1, F2, FIXTURES, REPO, Y, F, fig2_bytes
from oracles import corner_range, grid, satisfies, simplex_feasible
from farkas_check.checker import (
    CheckerState,
    Mode,
    check_contradiction,
    check_lemma,
    check_proof,
    collect_failures,
    contradiction_range,
    derive_bound_from_farkas,
    relu_rule,
)
from farkas_check.cli import BENCH_COLUMNS, main
from farkas_check.fuzz import run_fuzz
from farkas_check.linalg import Backend, Tableau, dot, row_combination, scale, vector
from farkas_check.proof_codec import CodecError, parse_proof, serialize_proof
from farkas_check.proof_model import BoundType
from farkas_check.proof_producer import Feasible, Sat, fm_feasible
from farkas_check.query_encoder import check_sat_witness, encode


def record(n, ok, detail):
    ACCEPTANCE[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def traced_check(p, mode=Mode.FULL, **kw):
    states = {}
    verdict = check_proof(p, mode, trace=lambda path, s: states.setdefault(path, s), **kw)
    return verdict, states


def snapshot(states):
    return {path: ([r.tolist() for r in s.tableau.rows], s.upper.tolist(), s.lower.tolist())
            for path, s in states.items()}


# 1 -------------------------------------------------------------------------

def test_criterion_1_two_leaf_golden():
    start = time.perf_counter()
    verdicts = {b: traced_check(parse_proof(fig2_bytes(), b)) for b in Backend}
    elapsed = time.perf_counter() - start
    p = parse_proof(fig2_bytes())
    verdict, states = verdicts[Backend.DENSE]
    left = states[(0,)]
    w = p.root.children[0].contradiction
    combo = row_combination(w, left.tableau)
    expected = [0] * 9
    expected[F1], expected[F2], expected[Y] = -1, 1, -1
    lo, hi = contradiction_range(w, left)
    oracle_hi = corner_range(combo.tolist(), left.upper.tolist(), left.lower.tolist())[1]
    ok = (all(v.valid for v, _ in verdicts.values()) and combo.tolist() == expected
          and hi == oracle_hi == -1 and elapsed < 1.0)
    record(1, ok, f"fig2 VALID on both backends; left combination {[str(v) for v in combo]}, max {hi}; {elapsed * 1000:.1f} ms")


# 2 -------------------------------------------------------------------------

def test_criterion_2_root_lemma():
    p = parse_proof(fig2_bytes())
    state = CheckerState.from_proof(p)
    bound = derive_bound_from_farkas(vector(F(0, 0, 1, 0)), B3, BoundType.UPPER, state)
    lem = p.root.lemmas[0]
    rule = relu_rule(lem, state.constraints[lem.constraint_id])
    ok = bound == 1 and rule == "v" and check_lemma(lem, state, Mode.FULL)
    record(2, ok, f"derived u(b3) = {bound}, lemma matches rule ({rule})")


# 3 -------------------------------------------------------------------------

def test_criterion_3_right_leaf_lower_branch():
    p = parse_proof(fig2_bytes())
    _, states = traced_check(p)
    right = states[(1,)]
    w = vector(F(0, 0, 0, 1))
    lo, hi = contradiction_range(w, right)
    combo = row_combination(w, right.tableau).tolist()
    oracle = corner_range(combo, right.upper.tolist(), right.lower.tolist())
    one_sided = check_proof(p, two_sided=False)
    ok = ((lo, hi) == oracle and lo == 2 and check_contradiction(w, right)
          and not check_contradiction(w, right, two_sided=False)
          and not one_sided.valid and one_sided.path == (1,))
    record(3, ok, f"right leaf min {lo} (corner oracle {oracle[0]}); one-sided rule rejects at {one_sided.path}")


# 4 -------------------------------------------------------------------------

def _set(path, value):
    def edit(doc):
        *head, last = path
        node = doc
        for k in head:
            node = node[k]
        node[last] = value
    return edit


def _swap_splits(doc):
    a, b = doc["root"]["children"]
    a["split"], b["split"] = b["split"], a["split"]


def _swap_split_bounds(doc):
    a, b = doc["root"]["children"]
    a["split"]["bounds"], b["split"]["bounds"] = b["split"]["bounds"], a["split"]["bounds"]


LEFT = ("root", "children", 0)
RIGHT = ("root", "children", 1)
LEMMA = ("root", "lemmas", 0)

# name -> (edit, FULL reason, FULL path or None if any, lemma-only)
MUTATIONS = {
    "flip left contradiction entry": (_set(LEFT + ("contradiction", 4), "-1"), "BAD_CONTRADICTION", [0], False),
    "zero left contradiction": (_set(LEFT + ("contradiction",), ["0"] * 5), "BAD_CONTRADICTION", [0], False),
    "zero right contradiction": (_set(RIGHT + ("contradiction",), ["0"] * 4), "BAD_CONTRADICTION", [1], False),
    "loosen root l(y)": (_set(("lowerBounds", 8), "0"), "BAD_CONTRADICTION", [0], False),
    "zero lemma farkas": (_set(LEMMA + ("farkas",), ["0"] * 4), "BAD_LEMMA", [], True),
    "lemma farkas extra row": (_set(LEMMA + ("farkas",), ["0", "1", "1", "0"]), "BAD_LEMMA", [], True),
    "lemma affected value": (_set(LEMMA + ("affected", "value"), "1/2"), "BAD_LEMMA", [], True),
    "lemma causing value": (_set(LEMMA + ("causing", "value"), "1/2"), "BAD_LEMMA", [], True),
    "lemma causing kind": (_set(LEMMA + ("causing", "kind"), "lower"), "BAD_LEMMA", [], True),
    "lemma constraint id": (_set(LEMMA + ("constraint",), 0), "STRUCTURE", None, False),
    "corrupt tableau entry": (_set(("tableau", 2, 6), "2"), "BAD_LEMMA", [], False),
    "swap split objects": (_swap_splits, "STRUCTURE", None, False),
    "swap split branches": (_swap_split_bounds, "BAD_SPLIT_PAIR", [], False),
    "loosen inactive split bound": (_set(RIGHT + ("split", "bounds", 1, "value"), "1"), "BAD_SPLIT_PAIR", [], False),
    "loosen active split bound": (_set(LEFT + ("split", "bounds", 0, "value"), "-1"), "BAD_SPLIT_PAIR", [], False),
    "extra nonzero in split equation": (_set(LEFT + ("split", "equations", 0, 0), "1"), "BAD_SPLIT_PAIR", [], False),
    "drop a child": (lambda d: d["root"]["children"].pop(), "BAD_SPLIT_PAIR", [], False),
    "shorten contradiction": (lambda d: d["root"]["children"][0]["contradiction"].pop(), "STRUCTURE", None, False),
    "shorten upper bounds": (lambda d: d["upperBounds"].pop(), "STRUCTURE", None, False),
}


def mutated_docs():
    base = json.loads(fig2_bytes())
    for name, (edit, *_rest) in MUTATIONS.items():
        doc = copy.deepcopy(base)
        edit(doc)
        yield name, doc


def _cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, [json.loads(line) for line in out.splitlines()]


def test_criterion_4_mutation_suite(capsys, tmp_path):
    problems = []
    partial_valid = set()
    for name, doc in mutated_docs():
        _, reason, path, _ = MUTATIONS[name]
        f = tmp_path / "m.proof.json"
        f.write_text(json.dumps(doc))
        code, out = _cli(capsys, "check", str(f), "--mode", "full")
        got = out[0] if out else {}
        if code != 1 or got.get("reason") != reason or (path is not None and got.get("path") != path):
            problems.append(f"{name}: exit {code} {got}")
        code, _ = _cli(capsys, "check", str(f), "--mode", "partial")
        if code == 0:
            partial_valid.add(name)
    lemma_only = {name for name, m in MUTATIONS.items() if m[3]}
    if partial_valid != lemma_only:
        problems.append(f"PARTIAL accepted {sorted(partial_valid)}, lemma-only {sorted(lemma_only)}")
    # reordering the children is not a corruption
    reordered = json.loads(fig2_bytes())
    reordered["root"]["children"].reverse()
    if not check_proof(parse_proof(json.dumps(reordered))).valid:
        problems.append("reordered children rejected")
    ok = not problems and len(MUTATIONS) >= 12
    record(4, ok, f"{len(MUTATIONS)} mutations, {len(lemma_only)} lemma-only accepted by PARTIAL"
           + ("" if ok else f"; {problems}"))


# 5 -------------------------------------------------------------------------

def random_system(rng):
    n = rng.randint(1, 10)
    m = rng.randint(1, 6)
    density = rng.choice([0.3, 0.6, 1.0])
    rows = [[Fraction(rng.randint(-3, 3), rng.randint(1, 3)) if rng.random() < density else Fraction(0)
             for _ in range(n)] for _ in range(m)]
    lower = [Fraction(rng.randint(-4, 4), rng.randint(1, 2)) for _ in range(n)]
    upper = [lo + rng.choice([Fraction(0), Fraction(1, 2), Fraction(1), Fraction(2)]) for lo in lower]
    return rows, upper, lower


def sample_points(rng, upper, lower, limit=729):
    if 3 ** len(upper) <= limit:
        return list(grid(upper, lower, 2))
    axes = [sorted({lo, (lo + hi) / 2, hi}) for lo, hi in zip(lower, upper)]
    return [[rng.choice(a) for a in axes] for _ in range(limit)]


def test_criterion_5_farkas_soundness():
    rng = random.Random(5)
    start = time.perf_counter()
    infeasible = accepted = counterexamples = disagreements = 0
    for _ in range(500):
        rows, upper, lower = random_system(rng)
        a = Tableau.from_lists(rows, len(upper))
        res = fm_feasible(a, vector(upper), vector(lower))
        oracle = simplex_feasible(rows, upper, lower)
        if isinstance(res, Feasible):
            if oracle is None or not satisfies(rows, upper, lower, res.witness):
                disagreements += 1
            continue
        infeasible += 1
        if not check_contradiction(res.certificate, CheckerState(a, vector(upper), vector(lower))):
            disagreements += 1
            continue
        accepted += 1
        if oracle is not None or any(satisfies(rows, upper, lower, x) for x in sample_points(rng, upper, lower)):
            counterexamples += 1
    elapsed = time.perf_counter() - start
    ok = counterexamples == 0 and disagreements == 0 and accepted == infeasible > 0 and elapsed < 300
    record(5, ok, f"500 systems, {infeasible} infeasible, {accepted} certificates accepted, "
           f"{counterexamples} counterexamples, {disagreements} disagreements; {elapsed:.1f} s")


# 6 -------------------------------------------------------------------------

def corpus_texts():
    texts = {"fig2": fig2_bytes(), "fig2_badleaf": (FIXTURES / "fig2_badleaf.proof.json").read_bytes()}
    for f in sorted((FIXTURES / "reject").glob("*.proof.json")):
        texts[f"reject/{f.name}"] = f.read_bytes()
    for f in sorted((REPO / "bench").glob("*.proof.json")):
        texts[f"bench/{f.name}"] = f.read_bytes()
    for name, doc in mutated_docs():
        texts[f"mutation/{name}"] = json.dumps(doc)
    report = run_fuzz(6, 80, mutate=False, keep_cases=True)
    for i, case in enumerate(report.cases):
        if not isinstance(case.result, Sat):
            texts[f"fuzz/{i}"] = serialize_proof(case.result.proof, sparse=bool(i % 2))
    return texts


def run_backend(text, backend, mode):
    try:
        p = parse_proof(text, backend, validate=False)
    except CodecError as e:
        return ("error", type(e).__name__)
    verdict, states = traced_check(p, mode)
    failures = [v.to_json() for v in collect_failures(p, mode)]
    return verdict.to_json(), failures, snapshot(states)


def test_criterion_6_backend_equivalence():
    texts = corpus_texts()
    mismatched = [(name, mode.value) for name, text in texts.items() for mode in Mode
                  if run_backend(text, Backend.DENSE, mode) != run_backend(text, Backend.SPARSE, mode)]
    record(6, not mismatched, f"{len(texts)} proofs x 2 modes, {len(mismatched)} dense/sparse mismatches"
           + (f": {mismatched[:5]}" if mismatched else ""))


# 7 -------------------------------------------------------------------------

def input_samples(rng, box, k):
    corners = [list(c) for c in grid([hi for _, hi in box], [lo for lo, _ in box], 1)]
    randoms = [[lo + (hi - lo) * Fraction(rng.randint(0, 997), 997) for lo, hi in box]
               for _ in range(k - min(k, len(corners)))]
    return corners[:k] + randoms


def test_criterion_7_pipeline():
    start = time.perf_counter()
    report = run_fuzz(77, 200, max_relus=6, max_inputs=3, mutate=False, keep_cases=True)
    rng = random.Random(7)
    unsat = valid = sat = witness_ok = found = 0
    for case in report.cases:
        if isinstance(case.result, Sat):
            sat += 1
            witness_ok += check_sat_witness(case.net, case.prop, case.result.witness[:case.net.input_size])
            continue
        unsat += 1
        valid += check_proof(case.result.proof, Mode.FULL).valid
        found += sum(check_sat_witness(case.net, case.prop, x) for x in input_samples(rng, case.prop.inputs, 1000))
    elapsed = time.perf_counter() - start
    ok = valid == unsat and witness_ok == sat and found == 0 and elapsed < 600 and unsat > 0 and sat > 0
    record(7, ok, f"200 networks: {unsat} UNSAT ({valid} VALID), {sat} SAT ({witness_ok} witnesses ok), "
           f"{found} sampled witnesses for UNSAT; {elapsed:.1f} s")


# 8 -------------------------------------------------------------------------

def test_criterion_8_encode_golden(fig1_net, ex1_prop):
    results = []
    for backend in Backend:
        q = encode(fig1_net, ex1_prop, backend)
        results.append([r.tolist() for r in q.tableau.rows] == [F(*r) for r in EX1_ROWS]
                       and q.upper.tolist() == F(*EX1_UPPER) and q.lower.tolist() == F(*EX1_LOWER))
    record(8, all(results), "4x9 tableau, u and l match entry for entry on both backends")


# 9 -------------------------------------------------------------------------

def test_criterion_9_homogeneity():
    rng = random.Random(9)
    bad = 0
    for i in range(1000):
        backend = Backend.SPARSE if i % 2 else Backend.DENSE
        n = rng.randint(0, 12)

        def rand_vec():
            return vector([Fraction(rng.randint(-9, 9), rng.randint(1, 7)) if rng.random() < 0.6 else Fraction(0)
                           for _ in range(n)], backend)

        x, y = rand_vec(), rand_vec()
        c = Fraction(0) if rng.random() < 0.1 else Fraction(rng.randint(-20, 20), rng.randint(1, 9))
        ok = dot(x, scale(y, c)) == c * dot(x, y)
        ok &= dot(x, scale(y, 0)) == 0
        if c:
            ok &= (dot(x, scale(y, c)) == 0) == (dot(x, y) == 0)
        bad += not ok
    record(9, bad == 0, f"1000 triples, {bad} violations")


# 10 ------------------------------------------------------------------------

def test_criterion_10_bench(capsys):
    problems = []
    total = 0
    for suite in (REPO / "bench", FIXTURES):
        code = main(["bench", "--suite", str(suite)])
        out = capsys.readouterr().out
        reader = csv.DictReader(io.StringIO(out))
        rows = list(reader)
        proofs = sorted(p.name for p in suite.glob("*.proof.json"))
        configs = {(r["backend"], r["mode"]) for r in rows}
        if code != 0 or tuple(reader.fieldnames) != BENCH_COLUMNS or len(rows) != 4 * len(proofs):
            problems.append(f"{suite.name}: exit {code}, {len(rows)} rows for {len(proofs)} proofs")
        if configs != {(b.value, m.value) for b in Backend for m in Mode}:
            problems.append(f"{suite.name}: configurations {sorted(configs)}")
        for r in rows:
            if float(r["wall_ms"]) < 0 or int(r["nodes"]) < 1 or r["verdict"] not in ("VALID", "INVALID"):
                problems.append(f"{suite.name}: bad row {r}")
        for name in proofs:
            if len({r["verdict"] for r in rows if r["proof"] == name and r["mode"] == "full"}) != 1:
                problems.append(f"{name}: backends disagree")
        total += len(rows)
    record(10, not problems, f"{total} CSV rows over 4 backend x mode configurations" + (f"; {problems}" if problems else ""))

