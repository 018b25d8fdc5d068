"""Exact sparse multivariate polynomial arithmetic over the rationals.

A monomial is a tuple of (variable index, exponent) pairs, sorted by
variable index, with no zero exponents; the empty tuple is the constant
monomial 1.  A polynomial maps monomials to nonzero Fraction coefficients,
so equal polynomials always have equal term maps and identity testing is
exact.  Variable indices refer to positions in a problem-level ordered
name table kept elsewhere; polynomials themselves carry no names.

All values are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

# Sorted ((var_index, exponent), ...) with exponents > 0; () is the monomial 1.
Monomial = tuple[tuple[int, int], ...]

MONOMIAL_ONE: Monomial = ()


class MissingVariableError(KeyError):
    """A polynomial was evaluated at a point missing one of its variables."""


def monomial_degree(m: Monomial) -> int:
    """Total degree: sum of exponents."""
    return sum(e for _, e in m)


def monomial_mul(a: Monomial, b: Monomial) -> Monomial:
    """Product of two monomials (exponents add)."""
    if not a:
        return b
    if not b:
        return a
    exps: dict[int, int] = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


def grlex_key(m: Monomial) -> tuple:
    """Sort key for graded lexicographic order, ascending.

    Within one total degree, a monomial with more weight on lower variable
    indices sorts first (so for vars x, y the degree-1 block is [x, y]).
    Exponents are negated in the key; two distinct same-degree monomials never
    have one key a prefix of the other, so tuple comparison is sound.
    """
    return (monomial_degree(m), tuple((v, -e) for v, e in m))


def grlex_key_desc(m: Monomial) -> tuple:
    """Display order: degree descending, leading-variable-heavy terms first."""
    return (-monomial_degree(m), tuple((v, -e) for v, e in m))


def monomial_divides(a: Monomial, b: Monomial) -> bool:
    """True when monomial a divides monomial b."""
    exps = dict(b)
    return all(exps.get(v, 0) >= e for v, e in a)


class Polynomial:
    """Immutable sparse polynomial with Fraction coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, Fraction] | None = None):
        clean: dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                c = Fraction(c)
                if c != 0:
                    clean[m] = c
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("Polynomial is immutable")

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero() -> "Polynomial":
        return Polynomial()

    @staticmethod
    def constant(value: Fraction | int) -> "Polynomial":
        return Polynomial({MONOMIAL_ONE: Fraction(value)})

    @staticmethod
    def one() -> "Polynomial":
        return Polynomial.constant(1)

    @staticmethod
    def variable(index: int) -> "Polynomial":
        return Polynomial({((index, 1),): Fraction(1)})

    @staticmethod
    def from_monomial(m: Monomial, coeff: Fraction | int = 1) -> "Polynomial":
        return Polynomial({m: Fraction(coeff)})

    # -- ring operations ----------------------------------------------

    def __add__(self, other: "Polynomial") -> "Polynomial":
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, Fraction(0)) + c
            if s == 0:
                out.pop(m, None)
            else:
                out[m] = s
        return Polynomial(out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, Fraction(0)) - c
            if s == 0:
                out.pop(m, None)
            else:
                out[m] = s
        return Polynomial(out)

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self.terms.items()})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out: dict[Monomial, Fraction] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = monomial_mul(ma, mb)
                s = out.get(m, Fraction(0)) + ca * cb
                if s == 0:
                    out.pop(m, None)
                else:
                    out[m] = s
        return Polynomial(out)

    def scale(self, factor: Fraction | int) -> "Polynomial":
        factor = Fraction(factor)
        return Polynomial({m: c * factor for m, c in self.terms.items()})

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative polynomial power")
        result = Polynomial.one()
        base = self
        n = k
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- queries -------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; 0 for the zero polynomial."""
        if not self.terms:
            return 0
        return max(monomial_degree(m) for m in self.terms)

    def variables(self) -> set[int]:
        out: set[int] = set()
        for m in self.terms:
            for v, _ in m:
                out.add(v)
        return out

    def coeff(self, m: Monomial) -> Fraction:
        return self.terms.get(m, Fraction(0))

    def sorted_terms(self, descending: bool = True) -> list[tuple[Monomial, Fraction]]:
        """Terms in graded-lex order (descending by default, for display)."""
        key = grlex_key_desc if descending else grlex_key
        return sorted(self.terms.items(), key=lambda t: key(t[0]))

    def evaluate(self, point: Mapping[int, Fraction]) -> Fraction:
        """Exact value at a rational point assigning every variable used."""
        total = Fraction(0)
        for m, c in self.terms.items():
            val = c
            for v, e in m:
                if v not in point:
                    raise MissingVariableError(f"variable index {v} unassigned")
                val *= Fraction(point[v]) ** e
            total += val
        return total

    # -- value semantics ------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __repr__(self) -> str:
        return f"Polynomial({self.to_text()})"

    # -- rendering -------------------------------------------------------

    def to_text(self, names: Sequence[str] | None = None) -> str:
        """Canonical text: terms in descending graded-lex, "num/den" coefficients."""
        if not self.terms:
            return "0"
        parts: list[str] = []
        for m, c in self.sorted_terms():
            mono = "*".join(
                (name_of(v, names) if e == 1 else f"{name_of(v, names)}^{e}") for v, e in m
            )
            if not mono:
                piece = format_fraction(c)
            elif c == 1:
                piece = mono
            elif c == -1:
                piece = f"-{mono}"
            else:
                piece = f"{format_fraction(c)}*{mono}"
            if not parts:
                parts.append(piece)
            elif piece.startswith("-"):
                parts.append(f"- {piece[1:]}")
            else:
                parts.append(f"+ {piece}")
        return " ".join(parts)


def name_of(index: int, names: Sequence[str] | None) -> str:
    if names is not None and 0 <= index < len(names):
        return names[index]
    return f"x{index}"


def format_fraction(c: Fraction) -> str:
    """Render as "num" or "num/den" (denominator always positive)."""
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def parse_fraction(text: str) -> Fraction:
    """Inverse of format_fraction; rejects floats and empty strings."""
    text = text.strip()
    if not text or any(ch in text for ch in ".eE "):
        raise ValueError(f"bad rational literal: {text!r}")
    return Fraction(text)


def poly_sum(ps: Iterable[Polynomial]) -> Polynomial:
    total = Polynomial.zero()
    for p in ps:
        total = total + p
    return total


def poly_product(ps: Iterable[Polynomial]) -> Polynomial:
    total = Polynomial.one()
    for p in ps:
        total = total * p
    return total


def monomials_upto(var_indices: Sequence[int], max_degree: int) -> Iterator[Monomial]:
    """All monomials over the given variables with total degree <= max_degree.

    Yielded in ascending graded-lex order over the given variable order.
    """
    n = len(var_indices)

    def rec(pos: int, remaining: int) -> Iterator[list[tuple[int, int]]]:
        if pos == n:
            yield []
            return
        for e in range(remaining + 1):
            for rest in rec(pos + 1, remaining - e):
                yield ([(var_indices[pos], e)] if e else []) + rest

    collected = [tuple(sorted(m)) for m in rec(0, max_degree)]
    collected.sort(key=grlex_key)
    yield from collected
