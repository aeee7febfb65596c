"""Typed proof trees.

A proof carries the root query (tableau, bounds, ReLU constraints) and a
tree of nodes. Every node has a split (empty only at the root) and a list
of lemmas; inner nodes have children, leaves have a contradiction vector.

Variables are 0-based tableau columns. A leaf's contradiction vector is
indexed by the root rows first, then by the split equations met on the way
down from the root, in visiting order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, Optional

from .linalg import Backend, Tableau, Vector, convert


class BoundType(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class BoundUpdate:
    var: int
    kind: BoundType
    value: Fraction


@dataclass(frozen=True)
class Equation:
    """``row . x = 0``."""

    row: Vector


@dataclass(frozen=True)
class Split:
    bounds: tuple[BoundUpdate, ...] = ()
    equations: tuple[Equation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple(self.bounds))
        object.__setattr__(self, "equations", tuple(self.equations))

    @property
    def is_empty(self) -> bool:
        return not self.bounds and not self.equations


@dataclass(frozen=True)
class ReluConstraint:
    id: int
    b: int
    f: int


@dataclass(frozen=True)
class Lemma:
    causing_var: int
    causing_kind: BoundType
    causing_value: Fraction
    affected_var: int
    affected_kind: BoundType
    affected_value: Fraction
    constraint_id: int
    farkas: Vector


@dataclass(frozen=True)
class ProofNode:
    split: Split = field(default_factory=Split)
    lemmas: tuple[Lemma, ...] = ()
    children: Optional[tuple["ProofNode", ...]] = None
    contradiction: Optional[Vector] = None

    def __post_init__(self):
        object.__setattr__(self, "lemmas", tuple(self.lemmas))
        if self.children is not None:
            object.__setattr__(self, "children", tuple(self.children))

    @property
    def is_leaf(self) -> bool:
        return self.contradiction is not None


@dataclass(frozen=True)
class Query:
    tableau: Tableau
    upper: Vector
    lower: Vector
    constraints: tuple[ReluConstraint, ...]
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))


@dataclass(frozen=True)
class Proof:
    tableau: Tableau
    upper: Vector
    lower: Vector
    constraints: tuple[ReluConstraint, ...]
    root: ProofNode
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def query(self) -> Query:
        return Query(self.tableau, self.upper, self.lower, self.constraints, self.names)


Path = tuple[int, ...]


def format_path(path: Path) -> str:
    return "/".join(["root", *map(str, path)])


def iter_nodes(root: ProofNode, path: Path = ()) -> Iterator[tuple[Path, ProofNode]]:
    """Depth-first, left to right."""
    yield path, root
    for i, child in enumerate(root.children or ()):
        yield from iter_nodes(child, path + (i,))


class DefectKind(enum.Enum):
    BOUNDS_LENGTH = "bounds_length"
    BOUNDS_ORDER = "bounds_order"
    ROW_LENGTH = "row_length"
    BAD_CONSTRAINT = "bad_constraint"
    DUPLICATE_CONSTRAINT = "duplicate_constraint"
    VAR_RANGE = "var_range"
    ZERO_EQUATION = "zero_equation"
    EMPTY_SPLIT = "empty_split"
    NODE_SHAPE = "node_shape"
    VECTOR_LENGTH = "vector_length"
    UNKNOWN_CONSTRAINT = "unknown_constraint"
    LEMMA_VARS = "lemma_vars"


@dataclass(frozen=True)
class Defect:
    path: Path
    kind: DefectKind
    message: str

    def __str__(self) -> str:
        return f"{format_path(self.path)}: {self.kind.value}: {self.message}"


def validate_structure(p: Proof) -> list[Defect]:
    """List every structural defect of ``p``; empty means well formed.

    Never raises on a well-typed tree. Root-level problems are reported at
    the root path.
    """
    defects: list[Defect] = []

    def bad(path, kind, msg):
        defects.append(Defect(path, kind, msg))

    n = p.tableau.num_cols
    m = p.tableau.num_rows
    for r, row in enumerate(p.tableau.rows):
        if len(row) != n:
            bad((), DefectKind.ROW_LENGTH, f"tableau row {r} has length {len(row)}, expected {n}")
    for name, vec in (("upper", p.upper), ("lower", p.lower)):
        if len(vec) != n:
            bad((), DefectKind.BOUNDS_LENGTH, f"{name} bounds have length {len(vec)}, expected {n}")
    if len(p.upper) == n and len(p.lower) == n:
        for i, (u, l) in enumerate(zip(p.upper, p.lower)):
            if l > u:
                bad((), DefectKind.BOUNDS_ORDER, f"lower bound {l} exceeds upper bound {u} at variable {i}")

    by_id: dict[int, ReluConstraint] = {}
    for c in p.constraints:
        if c.id in by_id:
            bad((), DefectKind.DUPLICATE_CONSTRAINT, f"constraint id {c.id} appears twice")
            continue
        by_id[c.id] = c
        if c.b == c.f:
            bad((), DefectKind.BAD_CONSTRAINT, f"constraint {c.id} uses variable {c.b} as both b and f")
        for v in (c.b, c.f):
            if not 0 <= v < n:
                bad((), DefectKind.VAR_RANGE, f"constraint {c.id} references variable {v} outside 0..{n - 1}")

    def visit(node: ProofNode, path: Path, rows: int) -> None:
        split = node.split
        if path and split.is_empty:
            bad(path, DefectKind.EMPTY_SPLIT, "non-root node with an empty split")
        for bu in split.bounds:
            if not 0 <= bu.var < n:
                bad(path, DefectKind.VAR_RANGE, f"split bound on variable {bu.var} outside 0..{n - 1}")
        for k, eq in enumerate(split.equations):
            if len(eq.row) != n:
                bad(path, DefectKind.ROW_LENGTH, f"split equation {k} has length {len(eq.row)}, expected {n}")
            elif not any(True for _ in eq.row.items()):
                bad(path, DefectKind.ZERO_EQUATION, f"split equation {k} is the zero row")
        rows += len(split.equations)

        for k, lem in enumerate(node.lemmas):
            c = by_id.get(lem.constraint_id)
            if c is None:
                bad(path, DefectKind.UNKNOWN_CONSTRAINT, f"lemma {k} references unknown constraint {lem.constraint_id}")
            else:
                for role, v in (("causing", lem.causing_var), ("affected", lem.affected_var)):
                    if v not in (c.b, c.f):
                        bad(path, DefectKind.LEMMA_VARS,
                            f"lemma {k} {role} variable {v} is not part of constraint {c.id}")
            if len(lem.farkas) != rows:
                bad(path, DefectKind.VECTOR_LENGTH,
                    f"lemma {k} Farkas vector has length {len(lem.farkas)}, expected {rows}")

        has_children = node.children is not None
        if has_children == node.is_leaf:
            bad(path, DefectKind.NODE_SHAPE, "node must have either children or a contradiction vector")
        if has_children and not node.children:
            bad(path, DefectKind.NODE_SHAPE, "inner node with no children")
        if node.is_leaf and len(node.contradiction) != rows:
            bad(path, DefectKind.VECTOR_LENGTH,
                f"contradiction vector has length {len(node.contradiction)}, expected {rows}")
        for i, child in enumerate(node.children or ()):
            visit(child, path + (i,), rows)

    visit(p.root, (), m)
    return defects


def _convert_node(node: ProofNode, backend: Backend) -> ProofNode:
    split = Split(node.split.bounds, tuple(Equation(convert(e.row, backend)) for e in node.split.equations))
    lemmas = tuple(replace(lem, farkas=convert(lem.farkas, backend)) for lem in node.lemmas)
    children = None
    if node.children is not None:
        children = tuple(_convert_node(c, backend) for c in node.children)
    contradiction = None if node.contradiction is None else convert(node.contradiction, backend)
    return ProofNode(split, lemmas, children, contradiction)


def proof_to_backend(p: Proof, backend: Backend) -> Proof:
    return Proof(
        p.tableau.to_backend(backend),
        convert(p.upper, backend),
        convert(p.lower, backend),
        p.constraints,
        _convert_node(p.root, backend),
        p.names,
    )
