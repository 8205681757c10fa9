"""Exact rational helpers shared by the metric modules and the emitters."""

from __future__ import annotations

from fractions import Fraction
from typing import Union

Rat = Union[int, Fraction]


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not an exact rational: {x!r}")


def rat_str(x: Rat) -> str:
    """Canonical p/q form, denominator always present ("5/1", "-3/2")."""
    f = as_fraction(x)
    return f"{f.numerator}/{f.denominator}"


def parse_rat(s: str) -> Fraction:
    return Fraction(s)


def round_half_down(x: Rat) -> int:
    """Nearest integer, ties toward minus infinity (2.5 -> 2, -2.5 -> -3)."""
    f = as_fraction(x)
    q, r = divmod(f.numerator, f.denominator)
    # r/den is the fractional part in [0, 1); round up only strictly past 1/2
    if 2 * r > f.denominator:
        return q + 1
    return q
