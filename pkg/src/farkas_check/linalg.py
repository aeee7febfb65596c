"""Rational vectors and tableaus with a dense and a sparse backend.

``DenseVector`` stores every entry in a tuple. ``SparseVector`` stores only
the nonzero entries in a dict keyed by 0-based index and always iterates
them in ascending index order. Both are immutable and compare equal by
value, whatever the backend.

Dimension checks are eager: mismatched lengths raise ``DimensionError``
instead of being padded with zeros.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .exact_arith import ZERO, to_rational


class DimensionError(ValueError):
    pass


class Backend(enum.Enum):
    DENSE = "dense"
    SPARSE = "sparse"


class DenseVector:
    __slots__ = ("_data",)
    backend = Backend.DENSE

    def __init__(self, values: Iterable = ()):
        self._data = tuple(to_rational(v) for v in values)

    @classmethod
    def _wrap(cls, data: tuple) -> "DenseVector":
        v = cls.__new__(cls)
        v._data = data
        return v

    def __len__(self) -> int:
        return len(self._data)

    def __getitem__(self, i: int) -> Fraction:
        return self._data[i]

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self._data)

    def items(self) -> Iterator[tuple[int, Fraction]]:
        """Nonzero entries in ascending index order."""
        return ((i, v) for i, v in enumerate(self._data) if v)

    def tolist(self) -> list[Fraction]:
        return list(self._data)

    def replace(self, i: int, value) -> "DenseVector":
        if not 0 <= i < len(self._data):
            raise DimensionError(f"index {i} out of range for length {len(self._data)}")
        data = list(self._data)
        data[i] = to_rational(value)
        return DenseVector._wrap(tuple(data))

    def __neg__(self) -> "DenseVector":
        return DenseVector._wrap(tuple(-v for v in self._data))

    def __eq__(self, other) -> bool:
        if isinstance(other, DenseVector):
            return self._data == other._data
        if isinstance(other, SparseVector):
            return other == self
        return NotImplemented

    def __hash__(self) -> int:
        return hash((len(self), tuple(self.items())))

    def __repr__(self) -> str:
        return f"DenseVector([{', '.join(str(v) for v in self._data)}])"


class SparseVector:
    __slots__ = ("_size", "_entries")
    backend = Backend.SPARSE

    def __init__(self, size: int, entries: Mapping[int, object] | Iterable[tuple[int, object]] = ()):
        if size < 0:
            raise DimensionError("negative vector length")
        pairs = entries.items() if isinstance(entries, Mapping) else entries
        data: dict[int, Fraction] = {}
        for k, v in pairs:
            k = int(k)
            if not 0 <= k < size:
                raise DimensionError(f"sparse key {k} out of range for length {size}")
            if k in data:
                raise DimensionError(f"duplicate sparse key {k}")
            v = to_rational(v)
            if v:
                data[k] = v
        self._size = size
        self._entries = dict(sorted(data.items()))

    @classmethod
    def _wrap(cls, size: int, entries: dict) -> "SparseVector":
        # entries must already be sorted, nonzero and in range
        v = cls.__new__(cls)
        v._size = size
        v._entries = entries
        return v

    def __len__(self) -> int:
        return self._size

    def __getitem__(self, i: int) -> Fraction:
        if not 0 <= i < self._size:
            raise IndexError(f"index {i} out of range for length {self._size}")
        return self._entries.get(i, ZERO)

    def __iter__(self) -> Iterator[Fraction]:
        get = self._entries.get
        return (get(i, ZERO) for i in range(self._size))

    def items(self) -> Iterator[tuple[int, Fraction]]:
        return iter(self._entries.items())

    @property
    def nnz(self) -> int:
        return len(self._entries)

    def tolist(self) -> list[Fraction]:
        return list(self)

    def replace(self, i: int, value) -> "SparseVector":
        if not 0 <= i < self._size:
            raise DimensionError(f"index {i} out of range for length {self._size}")
        value = to_rational(value)
        data = dict(self._entries)
        if value:
            data[i] = value
        else:
            data.pop(i, None)
        return SparseVector._wrap(self._size, dict(sorted(data.items())))

    def __neg__(self) -> "SparseVector":
        return SparseVector._wrap(self._size, {k: -v for k, v in self._entries.items()})

    def __eq__(self, other) -> bool:
        if isinstance(other, SparseVector):
            return self._size == other._size and self._entries == other._entries
        if isinstance(other, DenseVector):
            return self._size == len(other) and self._entries == dict(other.items())
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self._size, tuple(self._entries.items())))

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v}" for k, v in self._entries.items())
        return f"SparseVector({self._size}, {{{body}}})"


Vector = Union[DenseVector, SparseVector]


def vector(values: Sequence, backend: Backend = Backend.DENSE) -> Vector:
    if backend is Backend.DENSE:
        return DenseVector(values)
    return SparseVector(len(values), enumerate(values))


def zeros(n: int, backend: Backend = Backend.DENSE) -> Vector:
    if backend is Backend.DENSE:
        return DenseVector._wrap((ZERO,) * n)
    return SparseVector._wrap(n, {})


def unit(n: int, i: int, backend: Backend = Backend.DENSE, value=1) -> Vector:
    return zeros(n, backend).replace(i, value)


def convert(v: Vector, backend: Backend) -> Vector:
    if v.backend is backend:
        return v
    if backend is Backend.DENSE:
        return DenseVector._wrap(tuple(v))
    return SparseVector._wrap(len(v), dict(v.items()))


def _same_length(*vs: Vector) -> int:
    n = len(vs[0])
    for v in vs[1:]:
        if len(v) != n:
            raise DimensionError(f"length mismatch: {n} vs {len(v)}")
    return n


def dot(x: Vector, y: Vector) -> Fraction:
    _same_length(x, y)
    if x.backend is Backend.DENSE and y.backend is Backend.DENSE:
        return sum((a * b for a, b in zip(x._data, y._data) if a and b), ZERO)
    if x.backend is Backend.SPARSE and y.backend is Backend.SPARSE:
        if x.nnz > y.nnz:
            x, y = y, x
        other = y._entries
        return sum((v * other[k] for k, v in x._entries.items() if k in other), ZERO)
    if x.backend is Backend.DENSE:
        x, y = y, x
    return sum((v * y[k] for k, v in x.items()), ZERO)


def scale(y: Vector, c) -> Vector:
    c = to_rational(c)
    if y.backend is Backend.DENSE:
        return DenseVector._wrap(tuple(c * v for v in y._data))
    if not c:
        return SparseVector._wrap(len(y), {})
    return SparseVector._wrap(len(y), {k: c * v for k, v in y._entries.items()})


def add(x: Vector, y: Vector) -> Vector:
    """Sum in the backend of ``x``."""
    n = _same_length(x, y)
    if x.backend is Backend.DENSE:
        data = list(x._data)
        for k, v in y.items():
            data[k] += v
        return DenseVector._wrap(tuple(data))
    acc = dict(x._entries)
    for k, v in y.items():
        s = acc.get(k, ZERO) + v
        if s:
            acc[k] = s
        else:
            acc.pop(k, None)
    return SparseVector._wrap(n, dict(sorted(acc.items())))


@dataclass(frozen=True)
class Tableau:
    """Equality rows ``row . x = 0`` over ``num_cols`` variables.

    Row lengths are not enforced here so malformed proofs can still be
    represented and reported; operations check dimensions when they run.
    """

    num_cols: int
    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def append(self, new_rows: Iterable[Vector]) -> "Tableau":
        new_rows = tuple(new_rows)
        if not new_rows:
            return self
        return Tableau(self.num_cols, self.rows + new_rows)

    def to_backend(self, backend: Backend) -> "Tableau":
        return Tableau(self.num_cols, tuple(convert(r, backend) for r in self.rows))

    @classmethod
    def from_lists(cls, rows: Sequence[Sequence], num_cols: int | None = None,
                   backend: Backend = Backend.DENSE) -> "Tableau":
        if num_cols is None:
            num_cols = len(rows[0]) if rows else 0
        return cls(num_cols, tuple(vector(r, backend) for r in rows))


def row_combination(w: Vector, a: Tableau) -> Vector:
    """Return ``sum_r w[r] * a.rows[r]`` as a vector of length ``a.num_cols``."""
    if len(w) != a.num_rows:
        raise DimensionError(f"multiplier length {len(w)} != {a.num_rows} tableau rows")
    n = a.num_cols
    for r in a.rows:
        if len(r) != n:
            raise DimensionError(f"tableau row of length {len(r)} in a {n}-column tableau")
    if w.backend is Backend.DENSE:
        acc = [ZERO] * n
        for coeff, row in zip(w._data, a.rows):
            if not coeff:
                continue
            for k, v in row.items():
                acc[k] += coeff * v
        return DenseVector._wrap(tuple(acc))
    sacc: dict[int, Fraction] = {}
    for r, coeff in w.items():
        for k, v in a.rows[r].items():
            sacc[k] = sacc.get(k, ZERO) + coeff * v
    return SparseVector._wrap(n, {k: v for k, v in sorted(sacc.items()) if v})


def row_upper_bound(row: Vector, upper: Vector, lower: Vector) -> Fraction:
    """Maximum of ``row . x`` over the box ``lower <= x <= upper``.

    Zero coefficients contribute nothing, so both backends agree exactly.
    """
    _same_length(row, upper, lower)
    if row.backend is Backend.DENSE:
        total = ZERO
        for c, u, l in zip(row._data, upper, lower):
            if c < 0:
                total += c * l
            elif c > 0:
                total += c * u
        return total
    total = ZERO
    for i, c in row.items():
        total += c * (lower[i] if c < 0 else upper[i])
    return total


def row_lower_bound(row: Vector, upper: Vector, lower: Vector) -> Fraction:
    """Minimum of ``row . x`` over the box ``lower <= x <= upper``."""
    _same_length(row, upper, lower)
    if row.backend is Backend.DENSE:
        total = ZERO
        for c, u, l in zip(row._data, upper, lower):
            if c < 0:
                total += c * u
            elif c > 0:
                total += c * l
        return total
    total = ZERO
    for i, c in row.items():
        total += c * (upper[i] if c < 0 else lower[i])
    return total
