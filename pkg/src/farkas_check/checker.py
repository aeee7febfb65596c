"""Proof-tree checker.

The traversal is depth-first and left to right. At each node the split is
applied to a node-local state (bounds tightened, equations appended to the
tableau), lemmas are checked (FULL mode) and applied, and then either the
leaf's contradiction vector is checked or the children's splits are
matched against a ReLU constraint before recursing. States are immutable,
so siblings never see each other's updates.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Optional, Sequence

from .exact_arith import ZERO
from .linalg import (
    Backend,
    Tableau,
    Vector,
    add,
    row_combination,
    row_lower_bound,
    row_upper_bound,
    scale,
    unit,
)
from .proof_model import (
    BoundType,
    Lemma,
    Path,
    Proof,
    ProofNode,
    ReluConstraint,
    Split,
    format_path,
    validate_structure,
)

DEFAULT_MAX_DEPTH = 64


class Mode(enum.Enum):
    FULL = "full"
    PARTIAL = "partial"


class Reason(enum.Enum):
    BAD_CONTRADICTION = "BAD_CONTRADICTION"
    BAD_LEMMA = "BAD_LEMMA"
    BAD_SPLIT_PAIR = "BAD_SPLIT_PAIR"
    STRUCTURE = "STRUCTURE"


class Phase(enum.Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"


class UnknownConstraintError(LookupError):
    pass


@dataclass(frozen=True)
class Verdict:
    valid: bool
    reason: Optional[Reason] = None
    path: Path = ()
    detail: str = ""

    def to_json(self) -> dict:
        if self.valid:
            return {"verdict": "VALID"}
        return {
            "verdict": "INVALID",
            "reason": self.reason.value,
            "path": list(self.path),
            "node": format_path(self.path),
            "detail": self.detail,
        }


VALID = Verdict(True)


@dataclass
class RunStats:
    nodes_checked: int = 0
    lemmas_checked: int = 0
    lemmas_skipped: int = 0
    max_depth: int = 0
    equations_appended: int = 0
    resplits: int = 0
    wall_time_ms: float = 0.0
    backend: str = Backend.DENSE.value
    mode: str = Mode.FULL.value

    def to_json(self) -> dict:
        return {
            "nodesChecked": self.nodes_checked,
            "lemmasChecked": self.lemmas_checked,
            "lemmasSkipped": self.lemmas_skipped,
            "maxDepth": self.max_depth,
            "equationsAppended": self.equations_appended,
            "resplits": self.resplits,
            "wallTimeMs": self.wall_time_ms,
            "backend": self.backend,
            "mode": self.mode,
        }


@dataclass(frozen=True)
class CheckerState:
    tableau: Tableau
    upper: Vector
    lower: Vector
    constraints: Mapping[int, ReluConstraint] = field(default_factory=dict)

    @classmethod
    def from_proof(cls, p: Proof) -> "CheckerState":
        return cls(p.tableau, p.upper, p.lower, {c.id: c for c in p.constraints})

    def bound(self, var: int, kind: BoundType) -> Fraction:
        return self.upper[var] if kind is BoundType.UPPER else self.lower[var]

    def tighten(self, var: int, kind: BoundType, value: Fraction) -> "CheckerState":
        """Replace a bound only if ``value`` is strictly tighter."""
        if kind is BoundType.UPPER:
            if value < self.upper[var]:
                return CheckerState(self.tableau, self.upper.replace(var, value), self.lower, self.constraints)
        elif value > self.lower[var]:
            return CheckerState(self.tableau, self.upper, self.lower.replace(var, value), self.constraints)
        return self

    def box_is_empty(self) -> bool:
        return any(l > u for l, u in zip(self.lower, self.upper))


def apply_split(state: CheckerState, split: Split) -> CheckerState:
    # a split bound that is not tighter is accepted and has no effect
    for bu in split.bounds:
        state = state.tighten(bu.var, bu.kind, bu.value)
    if split.equations:
        state = CheckerState(
            state.tableau.append(e.row for e in split.equations),
            state.upper,
            state.lower,
            state.constraints,
        )
    return state


def contradiction_range(w: Vector, state: CheckerState) -> tuple[Fraction, Fraction]:
    """Exact (min, max) of ``w^T A x`` over the current box."""
    combo = row_combination(w, state.tableau)
    return (
        row_lower_bound(combo, state.upper, state.lower),
        row_upper_bound(combo, state.upper, state.lower),
    )


def check_contradiction(w: Vector, state: CheckerState, two_sided: bool = True) -> bool:
    """True iff ``w`` certifies that ``A x = 0, l <= x <= u`` has no solution.

    Accepted when the combination's maximum over the box is negative or,
    with ``two_sided``, when its minimum is positive. An empty box
    (some ``l > u``) has no points at all and is accepted for any ``w``
    of the right length.
    """
    lo, hi = contradiction_range(w, state)
    if hi < 0 or (two_sided and lo > 0):
        return True
    return state.box_is_empty()


def derive_bound_from_farkas(w: Vector, var: int, kind: BoundType, state: CheckerState) -> Fraction:
    """Bound on ``x[var]`` implied by ``0 = (w^T A) x`` and the box.

    The combination is rescaled so that ``x[var]`` has coefficient -1, which
    turns it into ``x[var] = sum_{j != var} e_j x_j``; the bound is the max
    (or min) of the right-hand side. If ``x[var]`` does not occur, the
    identity ``x[var] = x[var] + (w^T A) x`` is used instead: a zero
    combination restates the current bound, anything else loosens it.
    """
    combo = row_combination(w, state.tableau)
    n = len(combo)
    if not 0 <= var < n:
        raise IndexError(f"variable {var} out of range")
    coeff = combo[var]
    if coeff:
        combo = scale(combo, -1 / coeff)
    expr = add(combo, unit(n, var, combo.backend))
    if kind is BoundType.UPPER:
        return row_upper_bound(expr, state.upper, state.lower)
    return row_lower_bound(expr, state.upper, state.lower)


def relu_rule(lem: Lemma, c: ReluConstraint) -> Optional[str]:
    """Name of the ReLU rule (i..v) that licenses ``lem``, if any."""
    cause = (lem.causing_var, lem.causing_kind)
    effect = (lem.affected_var, lem.affected_kind)
    v, z = lem.causing_value, lem.affected_value
    U, L = BoundType.UPPER, BoundType.LOWER
    if cause == (c.f, L) and v > 0 and effect == (c.b, L) and z == v:
        return "i"
    if cause == (c.b, L) and v > 0 and effect == (c.f, L) and z == v:
        return "ii"
    if cause == (c.f, U) and effect == (c.b, U) and z == v:
        return "iii"
    if cause == (c.b, U) and v <= 0 and effect == (c.f, U) and z == 0:
        return "iv"
    if cause == (c.b, U) and v > 0 and effect == (c.f, U) and z == v:
        return "v"
    return None


def lemma_failure(lem: Lemma, state: CheckerState) -> Optional[str]:
    """Why ``lem`` fails a full check, or None if it passes."""
    c = state.constraints.get(lem.constraint_id)
    if c is None:
        raise UnknownConstraintError(f"unknown constraint id {lem.constraint_id}")
    derived = derive_bound_from_farkas(lem.farkas, lem.causing_var, lem.causing_kind, state)
    if lem.causing_kind is BoundType.UPPER:
        if derived > lem.causing_value:
            return f"Farkas vector proves upper bound {derived}, lemma claims {lem.causing_value}"
    elif derived < lem.causing_value:
        return f"Farkas vector proves lower bound {derived}, lemma claims {lem.causing_value}"
    if relu_rule(lem, c) is None:
        return (f"{lem.causing_kind.value} bound {lem.causing_value} on x{lem.causing_var} does not yield "
                f"{lem.affected_kind.value} bound {lem.affected_value} on x{lem.affected_var} "
                f"under constraint {c.id}")
    return None


def check_lemma(lem: Lemma, state: CheckerState, mode: Mode = Mode.FULL) -> bool:
    if lem.constraint_id not in state.constraints:
        raise UnknownConstraintError(f"unknown constraint id {lem.constraint_id}")
    if mode is Mode.PARTIAL:
        return True
    return lemma_failure(lem, state) is None


def apply_lemma(lem: Lemma, state: CheckerState) -> CheckerState:
    return state.tighten(lem.affected_var, lem.affected_kind, lem.affected_value)


def split_phase(split: Split, c: ReluConstraint) -> Optional[Phase]:
    """Classify ``split`` as one of the two linear phases of ``c``.

    ACTIVE is exactly one equation ``s*(b - f) = 0`` plus ``l(b) := 0``;
    INACTIVE is exactly the bounds ``u(f) := 0`` and ``u(b) := 0``.
    """
    bounds = {(bu.var, bu.kind, bu.value) for bu in split.bounds}
    if len(bounds) != len(split.bounds):
        return None
    if len(split.equations) == 1:
        entries = dict(split.equations[0].row.items())
        if set(entries) == {c.b, c.f} and entries[c.b] == -entries[c.f]:
            if bounds == {(c.b, BoundType.LOWER, ZERO)}:
                return Phase.ACTIVE
        return None
    if not split.equations and bounds == {(c.f, BoundType.UPPER, ZERO), (c.b, BoundType.UPPER, ZERO)}:
        return Phase.INACTIVE
    return None


def match_children_splits(children: Sequence[ProofNode], state: CheckerState) -> Optional[ReluConstraint]:
    if len(children) != 2:
        return None
    for c in state.constraints.values():
        phases = {split_phase(ch.split, c) for ch in children}
        if phases == {Phase.ACTIVE, Phase.INACTIVE}:
            return c
    return None


def check_children_splits(children: Sequence[ProofNode], state: CheckerState) -> bool:
    return match_children_splits(children, state) is not None


TraceHook = Callable[[Path, CheckerState], None]


class _Walker:
    def __init__(self, mode: Mode, stats: RunStats, trace: Optional[TraceHook],
                 max_depth: int, two_sided: bool):
        self.mode = mode
        self.stats = stats
        self.trace = trace
        self.max_depth = max_depth
        self.two_sided = two_sided

    def walk(self, node: ProofNode, state: CheckerState, path: Path,
             split_ids: frozenset) -> Iterator[Verdict]:
        stats = self.stats
        depth = len(path)
        if depth > self.max_depth:
            yield Verdict(False, Reason.STRUCTURE, path, f"tree depth exceeds limit {self.max_depth}")
            return
        stats.nodes_checked += 1
        stats.max_depth = max(stats.max_depth, depth)
        stats.equations_appended += len(node.split.equations)
        state = apply_split(state, node.split)

        for k, lem in enumerate(node.lemmas):
            if self.mode is Mode.FULL:
                stats.lemmas_checked += 1
                why = lemma_failure(lem, state)
                if why is not None:
                    yield Verdict(False, Reason.BAD_LEMMA, path, f"lemma {k}: {why}")
                    return
            else:
                stats.lemmas_skipped += 1
            state = apply_lemma(lem, state)

        if self.trace is not None:
            self.trace(path, state)

        if node.is_leaf:
            if not check_contradiction(node.contradiction, state, self.two_sided):
                lo, hi = contradiction_range(node.contradiction, state)
                yield Verdict(False, Reason.BAD_CONTRADICTION, path,
                              f"combination ranges over [{lo}, {hi}], which contains 0")
            return

        c = match_children_splits(node.children, state)
        if c is None:
            yield Verdict(False, Reason.BAD_SPLIT_PAIR, path,
                          f"{len(node.children)} children do not form the two phases of any ReLU constraint")
            return
        if c.id in split_ids:
            stats.resplits += 1
        for i, child in enumerate(node.children):
            yield from self.walk(child, state, path + (i,), split_ids | {c.id})


def _failures(p: Proof, mode: Mode, stats: RunStats, trace: Optional[TraceHook],
              max_depth: int, two_sided: bool) -> Iterator[Verdict]:
    defects = validate_structure(p)
    if defects:
        for d in defects:
            yield Verdict(False, Reason.STRUCTURE, d.path, f"{d.kind.value}: {d.message}")
        return
    walker = _Walker(mode, stats, trace, max_depth, two_sided)
    yield from walker.walk(p.root, CheckerState.from_proof(p), (), frozenset())


def check_proof(p: Proof, mode: Mode = Mode.FULL, *, stats: Optional[RunStats] = None,
                trace: Optional[TraceHook] = None, max_depth: int = DEFAULT_MAX_DEPTH,
                two_sided: bool = True) -> Verdict:
    """First failing node in depth-first order, or VALID."""
    stats = stats if stats is not None else RunStats()
    stats.mode = mode.value
    stats.backend = p.upper.backend.value
    start = time.perf_counter()
    try:
        for failure in _failures(p, mode, stats, trace, max_depth, two_sided):
            return failure
        return VALID
    finally:
        stats.wall_time_ms = (time.perf_counter() - start) * 1000.0


def collect_failures(p: Proof, mode: Mode = Mode.FULL, *, stats: Optional[RunStats] = None,
                     trace: Optional[TraceHook] = None, max_depth: int = DEFAULT_MAX_DEPTH,
                     two_sided: bool = True) -> list[Verdict]:
    """Every failing node, without stopping at the first.

    A failing node's subtree is not explored further.
    """
    stats = stats if stats is not None else RunStats()
    stats.mode = mode.value
    stats.backend = p.upper.backend.value
    start = time.perf_counter()
    try:
        return list(_failures(p, mode, stats, trace, max_depth, two_sided))
    finally:
        stats.wall_time_ms = (time.perf_counter() - start) * 1000.0


def check_node(node: ProofNode, state: CheckerState, mode: Mode = Mode.FULL,
               path: Path = (), two_sided: bool = True) -> Verdict:
    """Check a subtree from an explicit state (no structural validation)."""
    walker = _Walker(mode, RunStats(), None, DEFAULT_MAX_DEPTH, two_sided)
    for failure in walker.walk(node, state, path, frozenset()):
        return failure
    return VALID
