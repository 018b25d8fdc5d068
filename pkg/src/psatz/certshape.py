"""Degree-bounded certificate templates for the refutation search.

A shape fixes, ahead of the numerical solve, which monoid product appears
(with what power), which products of nonnegative constraints carry unknown
SOS multipliers, and which monomials span each unknown ideal cofactor.
Shapes are enumerated deterministically, cheapest first, and the driver
escalates the degree budget when every shape at one budget fails.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

from .frontend import NormalizedSystem, RelKind
from .poly import Monomial, Polynomial, monomials_upto, poly_product


class BasisSizeError(ValueError):
    """A monomial basis exceeded the configured size cap."""


@dataclass(frozen=True)
class DegreeBudget:
    """Limits on the degree of any certificate summand.

    total_degree bounds every summand (even, and at least the largest
    constraint degree); ideal_cofactor_degree additionally caps each ideal
    cofactor; monoid factors may be raised up to max_monoid_power.
    """

    total_degree: int
    ideal_cofactor_degree: int
    max_monoid_power: int = 2

    def __post_init__(self):
        if self.total_degree % 2 != 0 or self.total_degree < 0:
            raise ValueError("total_degree must be an even natural")
        if self.ideal_cofactor_degree < 0 or self.max_monoid_power < 0:
            raise ValueError("budget caps must be naturals")


@dataclass(frozen=True)
class CertificateShape:
    """One SDP-sized template: monoid choice, cone products, cofactor spans."""

    monoid_selection: tuple[tuple[int, int], ...]  # (pool index, power)
    cone_products: tuple[tuple[int, ...], ...]  # subsets of nonneg indices; () first
    ideal_templates: tuple[tuple[Monomial, ...], ...]  # one span per equation
    sos_bases: tuple[tuple[Monomial, ...], ...]  # one Gram basis per cone product

    def unknown_count(self) -> int:
        grams = sum(len(z) * (len(z) + 1) // 2 for z in self.sos_bases)
        return grams + sum(len(t) for t in self.ideal_templates)


def monomial_basis(var_indices, max_degree: int, cap: int = 2000) -> tuple[Monomial, ...]:
    """All monomials of total degree <= max_degree, ascending graded-lex.

    The count is C(n + d, d); a BasisSizeError is raised past the cap so a
    runaway budget fails fast instead of building an enormous Gram matrix.
    """
    var_indices = tuple(var_indices)
    expected = comb(len(var_indices) + max_degree, max_degree)
    if expected > cap:
        raise BasisSizeError(
            f"monomial basis would have {expected} elements (cap {cap})"
        )
    return tuple(monomials_upto(var_indices, max_degree))


def monoid_product(sys: NormalizedSystem, selection) -> Polynomial:
    """The fixed polynomial named by a monoid selection (1 for the empty one)."""
    pool = sys.monoid_pool()
    return poly_product(pool[i].poly ** power for i, power in selection)


def monoid_exponent(sys: NormalizedSystem, selection) -> int:
    """1 when every selected factor is strictly positive, else 2.

    Strict (>) constraints justify using the product unsquared; a mere
    nonzero (/=) factor only guarantees positivity after squaring.
    """
    pool = sys.monoid_pool()
    if all(pool[i].kind is RelKind.GT for i, _ in selection):
        return 1
    return 2


def enumerate_shapes(
    sys: NormalizedSystem,
    budget: DegreeBudget,
    max_cone_subset: int = 2,
    basis_cap: int = 2000,
) -> tuple[CertificateShape, ...]:
    """Deterministic, duplicate-free shape sequence, cheapest first.

    Includes the empty monoid and every single pool element at powers
    1..max_monoid_power that fit the budget.  Cone products run over all
    subsets of the nonnegative constraints up to max_cone_subset whose
    product degree fits; the bare-SOS empty product is always present.
    Returns the empty sequence when the budget cannot fit the constraints.
    """
    total = budget.total_degree
    if sys.max_degree() > total:
        return ()
    var_indices = range(len(sys.var_names))

    nonneg_degs = [c.poly.degree() for c in sys.nonnegs]
    cone_products: list[tuple[int, ...]] = []
    sos_bases: list[tuple[Monomial, ...]] = []
    for size in range(0, max_cone_subset + 1):
        for subset in itertools.combinations(range(len(sys.nonnegs)), size):
            prod_deg = sum(nonneg_degs[i] for i in subset)
            if prod_deg > total:
                continue
            try:
                basis = monomial_basis(var_indices, (total - prod_deg) // 2, basis_cap)
            except BasisSizeError:
                if not subset:
                    return ()  # the mandatory empty product cannot fit
                continue
            cone_products.append(subset)
            sos_bases.append(basis)

    templates = []
    for c in sys.equations:
        span = min(budget.ideal_cofactor_degree, total - c.poly.degree())
        try:
            templates.append(monomial_basis(var_indices, span, basis_cap))
        except BasisSizeError:
            return ()

    selections: list[tuple[tuple[int, int], ...]] = [()]
    pool = sys.monoid_pool()
    for i, c in enumerate(pool):
        for power in range(1, budget.max_monoid_power + 1):
            selection = ((i, power),)
            e = monoid_exponent(sys, selection)
            if e * power * c.poly.degree() <= total:
                selections.append(selection)

    shapes = [
        CertificateShape(sel, tuple(cone_products), tuple(templates), tuple(sos_bases))
        for sel in selections
    ]
    shapes.sort(key=lambda s: s.unknown_count())  # stable: generation order on ties
    return tuple(shapes)


def default_budgets(sys: NormalizedSystem, max_degree: int | None = None,
                    max_monoid_power: int = 2) -> tuple[DegreeBudget, ...]:
    """The escalation schedule d0, d0+2, d0+4, d0+6 (optionally capped)."""
    d0 = max(2, sys.max_degree())
    if d0 % 2:
        d0 += 1
    top = d0 + 6 if max_degree is None else max_degree
    budgets = []
    d = d0
    while d <= top:
        budgets.append(DegreeBudget(d, d, max_monoid_power))
        d += 2
    return tuple(budgets)
