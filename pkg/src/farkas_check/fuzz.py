"""Random end-to-end runs: network -> query -> proof -> check, plus mutations.

Structural mutations break the proof's shape or its split pairing and must
always be caught in FULL mode. Magnitude mutations change a number; some
of them leave a proof that is still valid (a looser lemma, a contradiction
vector that still certifies), so their detection rate is reported only.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional

from .checker import Mode, check_proof
from .exact_arith import ONE, ZERO
from .linalg import Backend, Tableau, Vector, vector
from .proof_model import BoundType, Equation, Path, Proof, ProofNode, Split, iter_nodes
from .proof_producer import Sat, prove
from .query_encoder import BoxProperty, Layer, Network, check_sat_witness, encode, evaluate, interval_bounds


def _small(rng: random.Random, lo: int = -3, hi: int = 3) -> Fraction:
    # mostly integers, sometimes halves
    v = Fraction(rng.randint(lo, hi))
    if rng.random() < 0.2:
        v += Fraction(1, 2)
    return v


def random_network(rng: random.Random, max_relus: int = 6, max_inputs: int = 3) -> Network:
    n_in = rng.randint(1, max_inputs)
    budget = rng.randint(1, max_relus) if max_relus else 0
    sizes = []
    while budget > 0 and len(sizes) < 3:
        s = rng.randint(1, min(budget, 3))
        sizes.append(s)
        budget -= s
    sizes.append(rng.randint(1, 2))
    layers = []
    prev = n_in
    for s in sizes:
        weights = tuple(tuple(_small(rng) for _ in range(prev)) for _ in range(s))
        biases = tuple(_small(rng, -1, 1) if rng.random() < 0.3 else ZERO for _ in range(s))
        layers.append(Layer(weights, biases))
        prev = s
    return Network(n_in, tuple(layers))


def random_input(rng: random.Random, prop: BoxProperty, grid: int = 4) -> list[Fraction]:
    return [lo + (hi - lo) * Fraction(rng.randint(0, grid), grid) for lo, hi in prop.inputs]


def random_property(rng: random.Random, net: Network) -> BoxProperty:
    inputs = []
    for _ in range(net.input_size):
        a = Fraction(rng.randint(-4, 3), 2)
        inputs.append((a, a + Fraction(rng.randint(0, 4), 2)))
    probe = BoxProperty(tuple(inputs), tuple((ZERO, ZERO) for _ in range(net.output_size)))
    _, out_iv = interval_bounds(net, probe.inputs)
    samples = [evaluate(net, random_input(rng, probe)) for _ in range(8)]
    outputs = []
    for k, (lo, hi) in enumerate(out_iv):
        seen = sorted(s[k] for s in samples)
        if rng.random() < 0.4:
            # around an observed value: satisfiable
            c = rng.choice(seen)
            outputs.append((c - Fraction(rng.randint(0, 2), 2), c + Fraction(rng.randint(0, 2), 2)))
        else:
            # above everything sampled but inside the interval hull: often unsatisfiable
            top = seen[-1]
            if top < hi:
                a = top + (hi - top) * Fraction(rng.randint(1, 3), 10)
                outputs.append((a, hi + 1))
            else:
                outputs.append((hi + 1, hi + 2))
    return BoxProperty(tuple(inputs), tuple(outputs))


# --- mutations --------------------------------------------------------------

def _replace_node(root: ProofNode, path: Path, fn: Callable[[ProofNode], ProofNode]) -> ProofNode:
    if not path:
        return fn(root)
    kids = list(root.children)
    kids[path[0]] = _replace_node(kids[path[0]], path[1:], fn)
    return replace(root, children=tuple(kids))


def _pick(rng: random.Random, p: Proof, pred) -> Optional[tuple[Path, ProofNode]]:
    nodes = [(path, n) for path, n in iter_nodes(p.root) if pred(n)]
    return rng.choice(nodes) if nodes else None


def _bump(v: Vector, i: int, delta: Fraction) -> Vector:
    return v.replace(i, v[i] + delta)


def _at(p: Proof, path: Path, fn) -> Proof:
    return replace(p, root=_replace_node(p.root, path, fn))


def mut_shorten_contradiction(p, rng):
    hit = _pick(rng, p, lambda n: n.is_leaf)
    if hit is None:
        return None
    path, node = hit
    w = node.contradiction
    short = vector(w.tolist()[:-1], w.backend)
    return _at(p, path, lambda n: replace(n, contradiction=short))


def mut_drop_child(p, rng):
    hit = _pick(rng, p, lambda n: n.children)
    if hit is None:
        return None
    path, node = hit
    k = rng.randrange(len(node.children))
    return _at(p, path, lambda n: replace(n, children=n.children[:k] + n.children[k + 1:]))


def mut_duplicate_child(p, rng):
    hit = _pick(rng, p, lambda n: n.children)
    if hit is None:
        return None
    path, node = hit
    return _at(p, path, lambda n: replace(n, children=(n.children[0], n.children[0])))


def mut_unknown_constraint(p, rng):
    hit = _pick(rng, p, lambda n: n.lemmas)
    if hit is None:
        return None
    path, node = hit
    k = rng.randrange(len(node.lemmas))
    bad = max(c.id for c in p.constraints) + 1
    lems = list(node.lemmas)
    lems[k] = replace(lems[k], constraint_id=bad)
    return _at(p, path, lambda n: replace(n, lemmas=tuple(lems)))


def mut_flip_split_kind(p, rng):
    hit = _pick(rng, p, lambda n: n.split.bounds)
    if hit is None:
        return None
    path, node = hit
    bounds = list(node.split.bounds)
    k = rng.randrange(len(bounds))
    flipped = BoundType.LOWER if bounds[k].kind is BoundType.UPPER else BoundType.UPPER
    bounds[k] = replace(bounds[k], kind=flipped)
    return _at(p, path, lambda n: replace(n, split=Split(tuple(bounds), n.split.equations)))


def mut_split_equation_extra(p, rng):
    hit = _pick(rng, p, lambda n: n.split.equations)
    if hit is None:
        return None
    path, node = hit
    row = node.split.equations[0].row
    free = [i for i in range(len(row)) if not row[i]]
    if not free:
        return None
    row = row.replace(rng.choice(free), ONE)
    eqs = (Equation(row),) + node.split.equations[1:]
    return _at(p, path, lambda n: replace(n, split=Split(n.split.bounds, eqs)))


def mut_contradiction_entry(p, rng):
    hit = _pick(rng, p, lambda n: n.is_leaf)
    if hit is None:
        return None
    path, node = hit
    i = rng.randrange(len(node.contradiction))
    w = _bump(node.contradiction, i, rng.choice([-1, 1]) * Fraction(rng.randint(1, 2)))
    return _at(p, path, lambda n: replace(n, contradiction=w))


def mut_farkas_entry(p, rng):
    hit = _pick(rng, p, lambda n: n.lemmas)
    if hit is None:
        return None
    path, node = hit
    k = rng.randrange(len(node.lemmas))
    lem = node.lemmas[k]
    i = rng.randrange(len(lem.farkas))
    lems = list(node.lemmas)
    lems[k] = replace(lem, farkas=_bump(lem.farkas, i, Fraction(rng.choice([-1, 1]))))
    return _at(p, path, lambda n: replace(n, lemmas=tuple(lems)))


def mut_lemma_affected(p, rng):
    hit = _pick(rng, p, lambda n: n.lemmas)
    if hit is None:
        return None
    path, node = hit
    k = rng.randrange(len(node.lemmas))
    lems = list(node.lemmas)
    lems[k] = replace(lems[k], affected_value=lems[k].affected_value + rng.choice([-1, 1]) * Fraction(1, 2))
    return _at(p, path, lambda n: replace(n, lemmas=tuple(lems)))


def mut_lemma_loosen(p, rng):
    """Loosen causing and affected values together (rules iii and v only)."""
    def loosenable(n):
        return any(l.causing_kind is l.affected_kind is BoundType.UPPER and l.causing_value == l.affected_value
                   and l.causing_value > 0 for l in n.lemmas)
    hit = _pick(rng, p, loosenable)
    if hit is None:
        return None
    path, node = hit
    lems = list(node.lemmas)
    k = next(i for i, l in enumerate(lems) if l.causing_kind is l.affected_kind is BoundType.UPPER
             and l.causing_value == l.affected_value and l.causing_value > 0)
    v = lems[k].causing_value + 1
    lems[k] = replace(lems[k], causing_value=v, affected_value=v)
    return _at(p, path, lambda n: replace(n, lemmas=tuple(lems)))


def mut_tableau_entry(p, rng):
    if not p.tableau.rows:
        return None
    r = rng.randrange(p.tableau.num_rows)
    row = p.tableau.rows[r]
    i = rng.randrange(len(row))
    rows = list(p.tableau.rows)
    rows[r] = _bump(row, i, Fraction(rng.choice([-1, 1])))
    return replace(p, tableau=Tableau(p.tableau.num_cols, tuple(rows)))


def mut_root_bound(p, rng):
    i = rng.randrange(p.tableau.num_cols)
    if rng.random() < 0.5:
        return replace(p, upper=_bump(p.upper, i, ONE))
    return replace(p, lower=_bump(p.lower, i, -ONE))


STRUCTURAL = {
    "shorten_contradiction": mut_shorten_contradiction,
    "drop_child": mut_drop_child,
    "duplicate_child": mut_duplicate_child,
    "unknown_constraint": mut_unknown_constraint,
    "flip_split_kind": mut_flip_split_kind,
    "split_equation_extra": mut_split_equation_extra,
}

MAGNITUDE = {
    "contradiction_entry": mut_contradiction_entry,
    "farkas_entry": mut_farkas_entry,
    "lemma_affected": mut_lemma_affected,
    "lemma_loosen": mut_lemma_loosen,
    "tableau_entry": mut_tableau_entry,
    "root_bound": mut_root_bound,
}


# --- harness ----------------------------------------------------------------

@dataclass
class MutationRow:
    name: str
    structural: bool
    applied: int = 0
    detected: int = 0

    @property
    def rate(self) -> float:
        return self.detected / self.applied if self.applied else float("nan")


@dataclass
class Case:
    net: Network
    prop: BoxProperty
    result: object


@dataclass
class FuzzReport:
    seed: int
    count: int = 0
    sat: int = 0
    unsat: int = 0
    unsat_valid: int = 0
    witness_ok: int = 0
    sampled_counterexamples: int = 0
    mutations: dict = field(default_factory=dict)
    cases: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        structural_ok = all(r.detected == r.applied for r in self.mutations.values() if r.structural)
        return (self.unsat_valid == self.unsat and self.witness_ok == self.sat
                and self.sampled_counterexamples == 0 and structural_ok)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "count": self.count,
            "sat": self.sat,
            "unsat": self.unsat,
            "unsatValid": self.unsat_valid,
            "witnessOk": self.witness_ok,
            "sampledCounterexamples": self.sampled_counterexamples,
            "mutations": {
                name: {"structural": r.structural, "applied": r.applied, "detected": r.detected}
                for name, r in self.mutations.items()
            },
            "ok": self.ok,
        }

    def table(self) -> str:
        lines = [
            f"seed {self.seed}: {self.count} queries, {self.sat} SAT, {self.unsat} UNSAT",
            f"UNSAT proofs VALID (full): {self.unsat_valid}/{self.unsat}",
            f"SAT witnesses confirmed:   {self.witness_ok}/{self.sat}",
            f"sampled counterexamples to UNSAT: {self.sampled_counterexamples}",
            "",
            f"{'mutation':<24}{'kind':<12}{'applied':>8}{'detected':>10}{'rate':>8}",
        ]
        for name, r in self.mutations.items():
            rate = f"{r.rate:.2f}" if r.applied else "-"
            kind = "structural" if r.structural else "magnitude"
            lines.append(f"{name:<24}{kind:<12}{r.applied:>8}{r.detected:>10}{rate:>8}")
        return "\n".join(lines)


def run_fuzz(seed: int, count: int, max_relus: int = 6, max_inputs: int = 3,
             samples: int = 0, mutate: bool = True, backend: Backend = Backend.DENSE,
             keep_cases: bool = False) -> FuzzReport:
    rng = random.Random(seed)
    report = FuzzReport(seed)
    for name in STRUCTURAL:
        report.mutations[name] = MutationRow(name, True)
    for name in MAGNITUDE:
        report.mutations[name] = MutationRow(name, False)

    for i in range(count):
        net = random_network(rng, max_relus, max_inputs)
        prop = random_property(rng, net)
        query = encode(net, prop, backend)
        # alternate so both lemma-heavy and split-heavy trees show up
        result = prove(query, max_relus=max(max_relus, 1), lemmas=(i % 2 == 0))
        report.count += 1
        if keep_cases:
            report.cases.append(Case(net, prop, result))
        if isinstance(result, Sat):
            report.sat += 1
            if check_sat_witness(net, prop, result.witness[:net.input_size]):
                report.witness_ok += 1
            continue
        report.unsat += 1
        proof = result.proof
        if check_proof(proof, Mode.FULL).valid:
            report.unsat_valid += 1
        for _ in range(samples):
            if check_sat_witness(net, prop, random_input(rng, prop, grid=8)):
                report.sampled_counterexamples += 1
        if not mutate:
            continue
        for name, fn in {**STRUCTURAL, **MAGNITUDE}.items():
            mutated = fn(proof, rng)
            if mutated is None:
                continue
            row = report.mutations[name]
            row.applied += 1
            if not check_proof(mutated, Mode.FULL).valid:
                row.detected += 1
    return report
