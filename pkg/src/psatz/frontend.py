"""Conjecture parsing and negation/normalization.

Conjectures are S-expressions over IMPLIES, AND, the relations
{=, <, <=, >, >=, /=} and the arithmetic operators {+, -, *, EXPT}, with
all variables implicitly real.  A conjecture is negated and its atoms
normalized so that every constraint reads "poly REL 0" with REL drawn
from {=, >=, >, /=}; the result is the constraint system a refutation
certificate is searched for.

`-` with two or more arguments folds left, Lisp style; with one argument
it is unary negation.  Only integer and ratio literals are accepted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from . import sexp
from .poly import Polynomial

Expr = Union["Var", "Lit", "Add", "Sub", "Mul", "Expt", "Rel", "And", "Implies"]

ARITH_OPS = {"+", "-", "*", "EXPT"}
REL_OPS = {"=", "<", "<=", ">", ">=", "/="}
BOOL_OPS = {"IMPLIES", "AND"}


class ParseError(ValueError):
    pass


class UnsupportedStructureError(ValueError):
    """Boolean structure beyond implications over conjunctions of atoms."""


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lit:
    value: Fraction


@dataclass(frozen=True)
class Add:
    args: tuple


@dataclass(frozen=True)
class Sub:
    args: tuple


@dataclass(frozen=True)
class Mul:
    args: tuple


@dataclass(frozen=True)
class Expt:
    base: Expr
    power: int


@dataclass(frozen=True)
class Rel:
    op: str  # one of REL_OPS
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Implies:
    hyp: Expr
    concl: Expr


class RelKind(enum.Enum):
    EQ = "="
    GEQ = ">="
    GT = ">"
    NEQ = "/="


@dataclass(frozen=True)
class Constraint:
    """A normalized atom: poly `kind` 0.

    `negated` marks the constraint that arose from negating the conjecture's
    conclusion; the emitter renders such a polynomial as 0 minus its
    pre-negation form.
    """

    poly: Polynomial
    kind: RelKind
    negated: bool = False


@dataclass(frozen=True)
class NormalizedSystem:
    """The negated conjecture as constraint lists over a shared variable order."""

    equations: tuple[Constraint, ...]
    nonnegs: tuple[Constraint, ...]
    nonzeros: tuple[Constraint, ...]
    var_names: tuple[str, ...]
    source: Expr

    def all_constraints(self) -> tuple[Constraint, ...]:
        """Equations, then nonnegatives, then nonzeros (the PROB-i order)."""
        return self.equations + self.nonnegs + self.nonzeros

    def monoid_pool(self) -> tuple[Constraint, ...]:
        """Constraints whose polynomials may enter the monoid term.

        Nonzero (/=) constraints first, then strict (>) nonnegatives; a
        certificate's monoid indices point into this tuple.
        """
        strict = tuple(c for c in self.nonnegs if c.kind is RelKind.GT)
        return self.nonzeros + strict

    def max_degree(self) -> int:
        degs = [c.poly.degree() for c in self.all_constraints()]
        return max(degs) if degs else 0


# ---------------------------------------------------------------------------
# parsing


def parse(text: str) -> Expr:
    """Parse one conjecture S-expression into an Expr tree."""
    try:
        form = sexp.read_one(text)
    except sexp.SexpSyntaxError as exc:
        raise ParseError(str(exc)) from exc
    return _build_formula(form)


def _build_formula(form: sexp.Sexp) -> Expr:
    if not isinstance(form, list):
        raise ParseError(f"expected a formula, got atom {sexp.print_sexp(form)}")
    if not form:
        raise ParseError("empty form")
    head = form[0]
    if not isinstance(head, str):
        raise ParseError(f"operator expected, got {sexp.print_sexp(head)}")
    if head == "IMPLIES":
        if len(form) != 3:
            raise ParseError(f"IMPLIES takes 2 arguments, got {len(form) - 1}")
        return Implies(_build_formula(form[1]), _build_formula(form[2]))
    if head == "AND":
        if len(form) < 2:
            raise ParseError("AND needs at least one argument")
        return And(tuple(_build_formula(a) for a in form[1:]))
    if head in REL_OPS:
        if len(form) != 3:
            raise ParseError(f"{head} takes 2 arguments, got {len(form) - 1}")
        return Rel(head, _build_arith(form[1]), _build_arith(form[2]))
    if head in ARITH_OPS:
        raise ParseError(f"arithmetic form ({head} ...) is not a formula")
    raise ParseError(f"unknown operator {head}")


def _build_arith(form: sexp.Sexp) -> Expr:
    if isinstance(form, Fraction):
        return Lit(form)
    if isinstance(form, str):
        return Var(form)
    if isinstance(form, sexp.SexpString):
        raise ParseError("string literal in arithmetic position")
    if not form:
        raise ParseError("empty form in arithmetic position")
    head = form[0]
    if not isinstance(head, str):
        raise ParseError(f"operator expected, got {sexp.print_sexp(head)}")
    if head in BOOL_OPS or head in REL_OPS:
        raise ParseError(f"boolean form ({head} ...) inside arithmetic")
    args = form[1:]
    if head == "+":
        if not args:
            raise ParseError("+ needs at least one argument")
        return Add(tuple(_build_arith(a) for a in args))
    if head == "-":
        if not args:
            raise ParseError("- needs at least one argument")
        return Sub(tuple(_build_arith(a) for a in args))
    if head == "*":
        if not args:
            raise ParseError("* needs at least one argument")
        return Mul(tuple(_build_arith(a) for a in args))
    if head == "EXPT":
        if len(args) != 2:
            raise ParseError(f"EXPT takes 2 arguments, got {len(args)}")
        exponent = args[1]
        if not isinstance(exponent, Fraction) or exponent.denominator != 1 or exponent < 0:
            raise ParseError("EXPT exponent must be a literal natural number")
        return Expt(_build_arith(args[0]), int(exponent))
    raise ParseError(f"unknown operator {head}")


def print_expr(e: Expr) -> str:
    """Render an Expr back to S-expression text (inverse of parse)."""
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lit):
        return sexp.print_sexp(e.value)
    if isinstance(e, Add):
        return "(+ " + " ".join(print_expr(a) for a in e.args) + ")"
    if isinstance(e, Sub):
        return "(- " + " ".join(print_expr(a) for a in e.args) + ")"
    if isinstance(e, Mul):
        return "(* " + " ".join(print_expr(a) for a in e.args) + ")"
    if isinstance(e, Expt):
        return f"(EXPT {print_expr(e.base)} {e.power})"
    if isinstance(e, Rel):
        return f"({e.op} {print_expr(e.lhs)} {print_expr(e.rhs)})"
    if isinstance(e, And):
        return "(AND " + " ".join(print_expr(a) for a in e.args) + ")"
    if isinstance(e, Implies):
        return f"(IMPLIES {print_expr(e.hyp)} {print_expr(e.concl)})"
    raise TypeError(f"not an Expr: {e!r}")


def collect_vars(e: Expr) -> list[str]:
    """Variable names in first-occurrence order (the problem's canonical order)."""
    seen: list[str] = []

    def walk(node: Expr) -> None:
        if isinstance(node, Var):
            if node.name not in seen:
                seen.append(node.name)
        elif isinstance(node, Lit):
            pass
        elif isinstance(node, (Add, Sub, Mul, And)):
            for a in node.args:
                walk(a)
        elif isinstance(node, Expt):
            walk(node.base)
        elif isinstance(node, Rel):
            walk(node.lhs)
            walk(node.rhs)
        elif isinstance(node, Implies):
            walk(node.hyp)
            walk(node.concl)
        else:
            raise TypeError(f"not an Expr: {node!r}")

    walk(e)
    return seen


# ---------------------------------------------------------------------------
# arithmetic translation and evaluation


def to_polynomial(e: Expr, var_index: dict[str, int]) -> Polynomial:
    """Expand a pure arithmetic subtree into a canonical polynomial."""
    if isinstance(e, Var):
        try:
            return Polynomial.variable(var_index[e.name])
        except KeyError:
            raise KeyError(f"variable {e.name} not in the variable table") from None
    if isinstance(e, Lit):
        return Polynomial.constant(e.value)
    if isinstance(e, Add):
        total = Polynomial.zero()
        for a in e.args:
            total = total + to_polynomial(a, var_index)
        return total
    if isinstance(e, Sub):
        if len(e.args) == 1:
            return -to_polynomial(e.args[0], var_index)
        total = to_polynomial(e.args[0], var_index)
        for a in e.args[1:]:
            total = total - to_polynomial(a, var_index)
        return total
    if isinstance(e, Mul):
        total = Polynomial.one()
        for a in e.args:
            total = total * to_polynomial(a, var_index)
        return total
    if isinstance(e, Expt):
        return to_polynomial(e.base, var_index) ** e.power
    raise UnsupportedStructureError(f"boolean node {type(e).__name__} in arithmetic position")


def eval_expr(e: Expr, env: dict[str, Fraction]):
    """Evaluate: arithmetic nodes to Fraction, boolean nodes to bool."""
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Add):
        return sum((eval_expr(a, env) for a in e.args), Fraction(0))
    if isinstance(e, Sub):
        if len(e.args) == 1:
            return -eval_expr(e.args[0], env)
        total = eval_expr(e.args[0], env)
        for a in e.args[1:]:
            total -= eval_expr(a, env)
        return total
    if isinstance(e, Mul):
        total = Fraction(1)
        for a in e.args:
            total *= eval_expr(a, env)
        return total
    if isinstance(e, Expt):
        return eval_expr(e.base, env) ** e.power
    if isinstance(e, Rel):
        lhs, rhs = eval_expr(e.lhs, env), eval_expr(e.rhs, env)
        return {
            "=": lhs == rhs,
            "<": lhs < rhs,
            "<=": lhs <= rhs,
            ">": lhs > rhs,
            ">=": lhs >= rhs,
            "/=": lhs != rhs,
        }[e.op]
    if isinstance(e, And):
        return all(eval_expr(a, env) for a in e.args)
    if isinstance(e, Implies):
        return (not eval_expr(e.hyp, env)) or eval_expr(e.concl, env)
    raise TypeError(f"not an Expr: {e!r}")


def constraint_holds(c: Constraint, point: dict[int, Fraction]) -> bool:
    v = c.poly.evaluate(point)
    if c.kind is RelKind.EQ:
        return v == 0
    if c.kind is RelKind.GEQ:
        return v >= 0
    if c.kind is RelKind.GT:
        return v > 0
    return v != 0


# ---------------------------------------------------------------------------
# negation and normalization


def _normalize_atom(rel: Rel, var_index: dict[str, int]) -> Constraint:
    """Move an atom to "poly REL 0" form with REL in {=, >=, >, /=}."""
    lhs = to_polynomial(rel.lhs, var_index)
    rhs = to_polynomial(rel.rhs, var_index)
    if rel.op == "<":
        return Constraint(rhs - lhs, RelKind.GT)
    if rel.op == "<=":
        return Constraint(rhs - lhs, RelKind.GEQ)
    if rel.op == ">":
        return Constraint(lhs - rhs, RelKind.GT)
    if rel.op == ">=":
        return Constraint(lhs - rhs, RelKind.GEQ)
    if rel.op == "=":
        return Constraint(lhs - rhs, RelKind.EQ)
    if rel.op == "/=":
        return Constraint(lhs - rhs, RelKind.NEQ)
    raise ValueError(f"unknown relation {rel.op}")


def _negate_atom(rel: Rel, var_index: dict[str, int]) -> Constraint:
    """Normalize, then negate: the conclusion becomes one more constraint."""
    c = _normalize_atom(rel, var_index)
    if c.kind is RelKind.GEQ:
        return Constraint(-c.poly, RelKind.GT, negated=True)
    if c.kind is RelKind.GT:
        return Constraint(-c.poly, RelKind.GEQ, negated=True)
    if c.kind is RelKind.EQ:
        return Constraint(c.poly, RelKind.NEQ, negated=True)
    return Constraint(c.poly, RelKind.EQ, negated=True)


def _hypothesis_atoms(e: Expr) -> list[Rel]:
    if isinstance(e, Rel):
        return [e]
    if isinstance(e, And):
        atoms: list[Rel] = []
        for a in e.args:
            if not isinstance(a, Rel):
                raise UnsupportedStructureError(
                    "hypothesis must be a conjunction of relational atoms"
                )
            atoms.append(a)
        return atoms
    raise UnsupportedStructureError(f"unsupported hypothesis structure {type(e).__name__}")


def negate_normalize(e: Expr) -> NormalizedSystem:
    """Negate a conjecture and normalize into equation/nonneg/nonzero lists.

    Accepts a bare atom or IMPLIES(atom | AND(atoms...), atom).  Hypothesis
    atoms pass through normalization; the conclusion atom is negated.
    """
    if isinstance(e, Implies):
        if not isinstance(e.concl, Rel):
            raise UnsupportedStructureError("conclusion must be a single relational atom")
        hyp_atoms = _hypothesis_atoms(e.hyp)
        concl = e.concl
    elif isinstance(e, Rel):
        hyp_atoms = []
        concl = e
    else:
        raise UnsupportedStructureError(
            f"conjecture must be an atom or an implication, got {type(e).__name__}"
        )

    # Sorted names, not first occurrence: emitted scripts list the variables
    # of the quadratic example as (A B C X), and golden comparisons need the
    # same order here.
    names = sorted(collect_vars(e))
    var_index = {n: i for i, n in enumerate(names)}

    constraints = [_normalize_atom(a, var_index) for a in hyp_atoms]
    constraints.append(_negate_atom(concl, var_index))

    equations = tuple(c for c in constraints if c.kind is RelKind.EQ)
    nonnegs = tuple(c for c in constraints if c.kind in (RelKind.GEQ, RelKind.GT))
    nonzeros = tuple(c for c in constraints if c.kind is RelKind.NEQ)
    return NormalizedSystem(equations, nonnegs, nonzeros, tuple(names), e)
