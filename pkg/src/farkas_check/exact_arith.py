"""Exact rational scalars.

Every number the checker touches is a :class:`fractions.Fraction`. This
module adds the string forms used by the file formats and a three-way
comparison; floats are rejected outright so nothing lossy can slip in.
"""

from __future__ import annotations

import enum
import re
from fractions import Fraction

Rational = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)

_SCALAR_RE = re.compile(
    r"""
    \s*
    (?P<sign>[-+])?
    (?:
        (?P<num>\d+)\s*/\s*(?P<den>\d+)              # p/q
      | (?P<int>\d+)(?:\.(?P<frac>\d*))?             # 12 or 12. or 12.5
      | \.(?P<frac_only>\d+)                         # .5
    )
    (?:[eE](?P<exp>[-+]?\d+))?
    \s*\Z
    """,
    re.VERBOSE,
)


class Ordering(enum.IntEnum):
    LT = -1
    EQ = 0
    GT = 1


def parse_rational(text: str) -> Fraction:
    """Parse ``"3"``, ``"-0.25"``, ``"1e-3"`` or ``"7/10"`` exactly.

    Decimal strings are read digit by digit, never through ``float``,
    so ``"0.1"`` is exactly ``1/10``.
    """
    if not isinstance(text, str):
        raise TypeError(f"expected a string scalar, got {type(text).__name__}")
    m = _SCALAR_RE.match(text)
    if m is None:
        raise ValueError(f"not a rational literal: {text!r}")
    if m["num"] is not None:
        den = int(m["den"])
        if den == 0:
            raise ZeroDivisionError(f"zero denominator in {text!r}")
        if m["exp"] is not None:
            raise ValueError(f"exponent not allowed on p/q form: {text!r}")
        value = Fraction(int(m["num"]), den)
    else:
        if m["int"] is not None:
            whole, frac = m["int"], m["frac"] or ""
        else:
            whole, frac = "0", m["frac_only"]
        value = Fraction(int(whole + frac), 10 ** len(frac))
        if m["exp"] is not None:
            value *= Fraction(10) ** int(m["exp"])
    return -value if m["sign"] == "-" else value


def to_rational(value: int | Fraction | str) -> Fraction:
    """Coerce ints, Fractions and literal strings; refuse floats."""
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def format_rational(value: Fraction) -> str:
    """Canonical ``"p/q"`` form. Integers still carry ``/1``."""
    value = to_rational(value)
    return f"{value.numerator}/{value.denominator}"


def compare(a: Fraction, b: Fraction) -> Ordering:
    if a < b:
        return Ordering.LT
    if a > b:
        return Ordering.GT
    return Ordering.EQ
