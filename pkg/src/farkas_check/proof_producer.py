"""A small proof-producing verifier for ReLU queries.

Leaves are decided by Fourier-Motzkin elimination over exact rationals.
Every derived inequality remembers the tableau-row multipliers that built
it, so an infeasible system comes with the vector ``w`` a checker needs.
Feasible systems yield a witness by back-substitution.

Search is complete case splitting: at a node whose LP is feasible but whose
witness violates some ReLU, the lowest-id violated constraint is split,
ACTIVE branch first. Before deciding a node, the five ReLU tightening rules
are run to a fixpoint and each firing is recorded as a lemma.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .checker import CheckerState, apply_lemma, apply_split, contradiction_range
from .exact_arith import ONE, ZERO
from .linalg import Backend, Tableau, Vector, vector, zeros
from .proof_model import (
    BoundType,
    BoundUpdate,
    Equation,
    Lemma,
    Proof,
    ProofNode,
    Query,
    ReluConstraint,
    Split,
)

DEFAULT_MAX_VARS = 32
DEFAULT_MAX_RELUS = 8
MAX_TIGHTEN_ROUNDS = 10_000
# smallest bound change worth a lemma, unless it settles a sign or empties the box
MIN_TIGHTEN_GAIN = Fraction(1, 1024)


class SizeLimitError(ValueError):
    pass


class ProducerError(RuntimeError):
    pass


@dataclass(frozen=True)
class Feasible:
    witness: tuple[Fraction, ...]


@dataclass(frozen=True)
class Infeasible:
    certificate: Vector


@dataclass
class _Con:
    """``coeffs . x  (>= | =)  rhs``, built as ``sum_r y[r] * row_r`` plus bound constraints."""

    coeffs: dict
    rhs: Fraction
    y: dict
    hist: frozenset = frozenset()

    def combine(self, k: Fraction, other: "_Con") -> "_Con":
        """self + k * other."""
        coeffs = dict(self.coeffs)
        for v, c in other.coeffs.items():
            s = coeffs.get(v, ZERO) + k * c
            if s:
                coeffs[v] = s
            else:
                coeffs.pop(v, None)
        y = dict(self.y)
        for r, c in other.y.items():
            s = y.get(r, ZERO) + k * c
            if s:
                y[r] = s
            else:
                y.pop(r, None)
        return _Con(coeffs, self.rhs + k * other.rhs, y, self.hist | other.hist)

    def scaled(self, k: Fraction) -> "_Con":
        return _Con({v: k * c for v, c in self.coeffs.items()}, k * self.rhs,
                    {r: k * c for r, c in self.y.items()}, self.hist)


def _normalize(con: _Con) -> _Con:
    # positive scaling so the lowest-index coefficient is +-1
    first = con.coeffs[min(con.coeffs)]
    return con.scaled(1 / abs(first)) if abs(first) != 1 else con


class _Contradiction(Exception):
    def __init__(self, con: _Con):
        self.con = con


def _fm_core(a: Tableau, upper: Sequence[Fraction], lower: Sequence[Fraction]):
    n = a.num_cols
    eqs = [_Con(dict(row.items()), ZERO, {r: ONE}) for r, row in enumerate(a.rows)]
    ineqs: list[_Con] = []
    stages: list[tuple] = []

    for i in range(n):
        if lower[i] > upper[i]:
            raise _Contradiction(_Con({}, lower[i] - upper[i], {}))
    fixed = [i for i in range(n) if lower[i] == upper[i]]
    free = [i for i in range(n) if lower[i] != upper[i]]
    for i in free:
        ineqs.append(_Con({i: ONE}, lower[i], {}, frozenset({2 * i})))
        ineqs.append(_Con({i: -ONE}, -upper[i], {}, frozenset({2 * i + 1})))

    def check_eq(con: _Con) -> bool:
        """Keep an equality? Raises on 0 = c with c != 0."""
        if con.coeffs:
            return True
        if con.rhs:
            raise _Contradiction(con if con.rhs > 0 else con.scaled(-ONE))
        return False

    def check_ineq(con: _Con) -> bool:
        if con.coeffs:
            return True
        if con.rhs > 0:
            raise _Contradiction(con)
        return False

    steps = 0
    # pinned variables: substitute their value everywhere
    for j in fixed:
        value = lower[j]
        stages.append(("fix", j, value))
        new_eqs = []
        for e in eqs:
            c = e.coeffs.pop(j, None)
            if c is not None:
                e = _Con(e.coeffs, e.rhs - c * value, e.y, e.hist)
            if check_eq(e):
                new_eqs.append(e)
        eqs = new_eqs

    eqs = [e for e in eqs if check_eq(e)]
    remaining = set(free)
    while remaining:
        if eqs:
            eq = min(eqs, key=lambda e: (len(e.coeffs), min(e.coeffs)))
            j = min(eq.coeffs, key=lambda v: (sum(1 for c in ineqs if v in c.coeffs), v))
            pivot = eq.coeffs[j]
            stages.append(("eq", j, eq))
            remaining.discard(j)
            new_eqs = []
            for e in eqs:
                if e is eq:
                    continue
                if j in e.coeffs:
                    e = e.combine(-e.coeffs[j] / pivot, eq)
                if check_eq(e):
                    new_eqs.append(e)
            eqs = new_eqs
            new_ineqs = []
            for c in ineqs:
                if j in c.coeffs:
                    c = c.combine(-c.coeffs[j] / pivot, eq)
                if check_ineq(c):
                    new_ineqs.append(c)
            ineqs = new_ineqs
            continue

        def cost(v):
            p = sum(1 for c in ineqs if c.coeffs.get(v, ZERO) > 0)
            q = sum(1 for c in ineqs if c.coeffs.get(v, ZERO) < 0)
            return (p * q - p - q, v)

        j = min(remaining, key=cost)
        remaining.discard(j)
        steps += 1
        pos = [c for c in ineqs if c.coeffs.get(j, ZERO) > 0]
        neg = [c for c in ineqs if c.coeffs.get(j, ZERO) < 0]
        rest = [c for c in ineqs if j not in c.coeffs]
        stages.append(("fm", j, pos, neg))
        kept: dict[tuple, list[_Con]] = {}

        def keep(c: _Con) -> None:
            # drop c only if some kept row is at least as strong with a smaller history;
            # a stronger row with a larger history would defeat the pruning below
            c = _normalize(c)
            same = kept.setdefault(tuple(sorted(c.coeffs.items())), [])
            if any(e.rhs >= c.rhs and e.hist <= c.hist for e in same):
                return
            same[:] = [e for e in same if not (c.rhs >= e.rhs and c.hist <= e.hist)]
            same.append(c)

        for c in rest:
            keep(c)
        for p in pos:
            for q in neg:
                combo = p.combine(p.coeffs[j] / -q.coeffs[j], q)
                if len(combo.hist) > steps + 1:
                    continue  # Chernikov: implied by inequalities with smaller history
                if not check_ineq(combo):
                    continue
                keep(combo)
        ineqs = [c for same in kept.values() for c in same]
    return stages


def _back_substitute(stages, n: int) -> list[Fraction]:
    x: list[Optional[Fraction]] = [None] * n

    def rest_value(con: _Con, j: int) -> Fraction:
        return sum((c * x[v] for v, c in con.coeffs.items() if v != j), ZERO)

    for stage in reversed(stages):
        kind, j = stage[0], stage[1]
        if kind == "fix":
            x[j] = stage[2]
        elif kind == "eq":
            eq = stage[2]
            x[j] = (eq.rhs - rest_value(eq, j)) / eq.coeffs[j]
        else:
            _, _, pos, neg = stage
            lo = max(((c.rhs - rest_value(c, j)) / c.coeffs[j] for c in pos), default=None)
            hi = min(((c.rhs - rest_value(c, j)) / c.coeffs[j] for c in neg), default=None)
            value = ZERO
            if lo is not None and value < lo:
                value = lo
            if hi is not None and value > hi:
                value = hi
            x[j] = value
    return [ZERO if v is None else v for v in x]


def fm_feasible(a: Tableau, upper: Vector, lower: Vector,
                max_vars: int = DEFAULT_MAX_VARS) -> Union[Feasible, Infeasible]:
    """Decide ``a x = 0, lower <= x <= upper`` exactly.

    Returns a witness, or a row-multiplier vector ``w`` whose combination
    ``w^T a x`` is negative everywhere on the box. Both are re-verified
    before being returned.
    """
    if a.num_cols > max_vars:
        raise SizeLimitError(f"{a.num_cols} variables exceeds the limit of {max_vars}")
    if len(upper) != a.num_cols or len(lower) != a.num_cols:
        raise ValueError("bound vectors do not match the tableau width")
    u, l = list(upper), list(lower)
    backend = upper.backend
    try:
        stages = _fm_core(a, u, l)
    except _Contradiction as exc:
        y = exc.con.y
        w = vector([y.get(r, ZERO) for r in range(a.num_rows)], backend)
        state = CheckerState(a, upper, lower)
        lo, hi = contradiction_range(w, state)
        if lo > 0:
            w = -w
        elif not hi < 0 and not state.box_is_empty():
            raise ProducerError("elimination produced an invalid certificate")
        return Infeasible(w)
    x = _back_substitute(stages, a.num_cols)
    for row in a.rows:
        if sum((c * x[k] for k, c in row.items()), ZERO) != 0:
            raise ProducerError("elimination produced a witness violating an equation")
    if any(not lo <= v <= hi for v, lo, hi in zip(x, l, u)):
        raise ProducerError("elimination produced a witness outside the box")
    return Feasible(tuple(x))


# --- bound tightening -------------------------------------------------------

def _row_bound(row: Vector, var: int, kind: BoundType, upper: Vector, lower: Vector) -> Fraction:
    """Bound on ``x[var]`` from one equation ``row . x = 0``."""
    c = row[var]
    total = ZERO
    for k, v in row.items():
        if k == var:
            continue
        t = -v / c
        if (t > 0) == (kind is BoundType.UPPER):
            total += t * upper[k]
        else:
            total += t * lower[k]
    return total


def best_bound(state: CheckerState, var: int, kind: BoundType) -> tuple[Fraction, Vector]:
    """Tightest single-row bound on ``x[var]`` and the signed unit vector proving it.

    The zero vector stands for the variable's current bound.
    """
    a = state.tableau
    backend = state.upper.backend
    best = state.bound(var, kind)
    best_w = zeros(a.num_rows, backend)
    for r, row in enumerate(a.rows):
        c = row[var]
        if not c:
            continue
        value = _row_bound(row, var, kind, state.upper, state.lower)
        tighter = value < best if kind is BoundType.UPPER else value > best
        if tighter:
            best = value
            best_w = zeros(a.num_rows, backend).replace(r, -ONE if c > 0 else ONE)
    return best, best_w


@dataclass(frozen=True)
class TightenResult:
    state: CheckerState
    lemmas: tuple[Lemma, ...]
    # first lemma that would have emptied the box; not applied to ``state``
    collapse: Optional[Lemma] = None


_U, _L = BoundType.UPPER, BoundType.LOWER


def _worth_applying(state: CheckerState, var: int, kind: BoundType, value: Fraction) -> bool:
    lo, hi = state.lower[var], state.upper[var]
    if kind is _U:
        return value < hi and (hi - value >= MIN_TIGHTEN_GAIN or value <= 0 < hi or value < lo)
    return value > lo and (value - lo >= MIN_TIGHTEN_GAIN or lo <= 0 < value or value > hi)


def _rule_candidates(c: ReluConstraint, state: CheckerState):
    """Yield (causing var, kind, value, farkas, affected var, kind, value)."""
    v, w = best_bound(state, c.f, _U)
    yield c.f, _U, v, w, c.b, _U, v                          # (iii)
    v, w = best_bound(state, c.b, _U)
    if v <= 0:
        yield c.b, _U, v, w, c.f, _U, ZERO                   # (iv)
    else:
        yield c.b, _U, v, w, c.f, _U, v                      # (v)
    v, w = best_bound(state, c.f, _L)
    if v > 0:
        yield c.f, _L, v, w, c.b, _L, v                      # (i)
    v, w = best_bound(state, c.b, _L)
    if v > 0:
        yield c.b, _L, v, w, c.f, _L, v                      # (ii)


def tighten(state: CheckerState, max_rounds: int = MAX_TIGHTEN_ROUNDS) -> TightenResult:
    """Run the ReLU rules to a fixpoint, recording each firing as a lemma.

    Candidates are recomputed after every firing, so each lemma is checked
    against exactly the state the checker will have at that point. Interval
    propagation can creep toward a limit forever, so a lemma only fires if
    it moves a bound by at least ``MIN_TIGHTEN_GAIN``, settles the bound's
    sign, or empties the box. Every bound then moves finitely often and the
    result is a true fixpoint: tightening it again changes nothing.
    """
    lemmas: list[Lemma] = []
    constraints = sorted(state.constraints.values(), key=lambda c: c.id)
    for _ in range(max_rounds):
        changed = False
        for c in constraints:
            progress = True
            while progress:
                progress = False
                for cv, ck, cval, w, av, ak, aval in _rule_candidates(c, state):
                    if not _worth_applying(state, av, ak, aval):
                        continue
                    lem = Lemma(cv, ck, cval, av, ak, aval, c.id, w)
                    new_state = apply_lemma(lem, state)
                    if new_state.lower[av] > new_state.upper[av]:
                        return TightenResult(state, tuple(lemmas), lem)
                    lemmas.append(lem)
                    state = new_state
                    changed = progress = True
                    break
        if not changed:
            break
    return TightenResult(state, tuple(lemmas))


# --- search -----------------------------------------------------------------

@dataclass(frozen=True)
class Sat:
    witness: tuple[Fraction, ...]


@dataclass(frozen=True)
class Unsat:
    proof: Proof


class _Found(Exception):
    def __init__(self, witness):
        self.witness = witness


def active_split(c: ReluConstraint, n: int, backend: Backend = Backend.DENSE) -> Split:
    row = zeros(n, backend).replace(c.b, ONE).replace(c.f, -ONE)
    return Split((BoundUpdate(c.b, _L, ZERO),), (Equation(row),))


def inactive_split(c: ReluConstraint) -> Split:
    return Split((BoundUpdate(c.f, _U, ZERO), BoundUpdate(c.b, _U, ZERO)))


@dataclass
class ProverStats:
    nodes: int = 0
    leaves: int = 0
    lemmas: int = 0
    fm_calls: int = 0


def prove(query: Query, *, max_relus: int = DEFAULT_MAX_RELUS, max_vars: int = DEFAULT_MAX_VARS,
          lemmas: bool = True, stats: Optional[ProverStats] = None) -> Union[Sat, Unsat]:
    """Decide a ReLU query, returning a witness or a checkable proof tree."""
    n = query.tableau.num_cols
    if len(query.constraints) > max_relus:
        raise SizeLimitError(f"{len(query.constraints)} ReLU constraints exceeds the limit of {max_relus}")
    if n > max_vars:
        raise SizeLimitError(f"{n} variables exceeds the limit of {max_vars}")
    for c in query.constraints:
        if query.lower[c.f] < 0:
            raise ProducerError(f"constraint {c.id}: post-activation variable needs a lower bound >= 0")
    stats = stats if stats is not None else ProverStats()
    backend = query.upper.backend
    constraints = sorted(query.constraints, key=lambda c: c.id)

    def leaf(split, lems, state) -> Optional[ProofNode]:
        stats.fm_calls += 1
        res = fm_feasible(state.tableau, state.upper, state.lower, max_vars)
        if isinstance(res, Infeasible):
            stats.leaves += 1
            return ProofNode(split, lems, None, res.certificate)
        return None

    def build(split: Split, parent: CheckerState, on_path: frozenset) -> ProofNode:
        stats.nodes += 1
        state = apply_split(parent, split)
        lems: tuple[Lemma, ...] = ()
        if lemmas:
            t = tighten(state)
            state, lems = t.state, t.lemmas
            if t.collapse is not None:
                node = leaf(split, lems, state)
                if node is not None:
                    stats.lemmas += len(lems)
                    return node
                lems = lems + (t.collapse,)
                state = apply_lemma(t.collapse, state)
                stats.leaves += 1
                stats.lemmas += len(lems)
                return ProofNode(split, lems, None, zeros(state.tableau.num_rows, backend))
        stats.lemmas += len(lems)
        stats.fm_calls += 1
        res = fm_feasible(state.tableau, state.upper, state.lower, max_vars)
        if isinstance(res, Infeasible):
            stats.leaves += 1
            return ProofNode(split, lems, None, res.certificate)
        x = res.witness
        violated = [c for c in constraints if x[c.f] != max(x[c.b], ZERO)]
        if not violated:
            raise _Found(x)
        c = violated[0]
        if c.id in on_path:
            raise ProducerError(f"constraint {c.id} still violated after splitting on it")
        children = (
            build(active_split(c, n, backend), state, on_path | {c.id}),
            build(inactive_split(c), state, on_path | {c.id}),
        )
        return ProofNode(split, lems, children, None)

    root_state = CheckerState(query.tableau, query.upper, query.lower, {c.id: c for c in constraints})
    try:
        root = build(Split(), root_state, frozenset())
    except _Found as found:
        return Sat(found.witness)
    return Unsat(Proof(query.tableau, query.upper, query.lower, query.constraints, root, query.names))
