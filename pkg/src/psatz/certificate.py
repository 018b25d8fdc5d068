"""Exact refutation certificates and their verifier.

A certificate pairs with a normalized system and exhibits ideal cofactors,
cone terms (weighted sums of squares attached to products of nonnegative
constraints), and a monoid term over the strict/nonzero constraints, such
that the assembled sum is the zero polynomial.  Under the constraints the
ideal part vanishes, the cone part is nonnegative and the monoid part is
strictly positive, so the system is unsatisfiable.

The verifier uses nothing but exact polynomial arithmetic; no floating
point reaches this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .frontend import NormalizedSystem, RelKind
from .poly import Monomial, Polynomial, format_fraction, grlex_key, parse_fraction
from .certshape import monoid_exponent, monoid_product


class CertificateFormatError(ValueError):
    """Malformed certificate JSON (bad rational, bad index, wrong shape)."""


@dataclass(frozen=True)
class SosDecomposition:
    """A weighted sum of squares: value = sum of weight * poly**2, weights > 0."""

    squares: tuple[tuple[Fraction, Polynomial], ...]

    def value(self) -> Polynomial:
        total = Polynomial.zero()
        for w, p in self.squares:
            total = total + (p * p).scale(w)
        return total


@dataclass(frozen=True)
class Certificate:
    ideal_cofactors: tuple[tuple[int, Polynomial], ...]  # (equation index, cofactor)
    cone_terms: tuple[tuple[tuple[int, ...], SosDecomposition], ...]  # (subset, sos)
    monoid_term: tuple[tuple[int, int], ...]  # (pool index, power)

    def square_count(self) -> int:
        return sum(len(sos.squares) for _, sos in self.cone_terms)

    def degree(self, sys: NormalizedSystem) -> int:
        """Largest degree among the certificate's summands."""
        return max(
            [monoid_part(sys, self).degree()]
            + [p.degree() for p in cone_parts(sys, self)]
            + [p.degree() for p in ideal_parts(sys, self)]
        )


@dataclass(frozen=True)
class VerifyReport:
    identity_ok: bool
    residual_poly: Polynomial
    sign_ledger: tuple[tuple[str, ...], ...]
    issues: tuple[str, ...] = ()


def monoid_part(sys: NormalizedSystem, cert: Certificate) -> Polynomial:
    m = monoid_product(sys, cert.monoid_term)
    return m ** monoid_exponent(sys, cert.monoid_term)


def cone_parts(sys: NormalizedSystem, cert: Certificate) -> list[Polynomial]:
    parts = []
    for subset, sos in cert.cone_terms:
        prod = Polynomial.one()
        for i in subset:
            prod = prod * sys.nonnegs[i].poly
        parts.append(sos.value() * prod)
    return parts


def ideal_parts(sys: NormalizedSystem, cert: Certificate) -> list[Polynomial]:
    return [sys.equations[j].poly * b for j, b in cert.ideal_cofactors]


def assemble(sys: NormalizedSystem, cert: Certificate) -> Polynomial:
    """The full certificate sum; a valid certificate assembles to zero."""
    total = monoid_part(sys, cert)
    for p in cone_parts(sys, cert):
        total = total + p
    for p in ideal_parts(sys, cert):
        total = total + p
    return total


def _structural_issues(sys: NormalizedSystem, cert: Certificate) -> list[str]:
    issues = []
    pool = sys.monoid_pool()
    seen_eq = set()
    for j, _ in cert.ideal_cofactors:
        if not 0 <= j < len(sys.equations):
            issues.append(f"ideal cofactor references equation {j} out of range")
        elif j in seen_eq:
            issues.append(f"duplicate ideal cofactor for equation {j}")
        seen_eq.add(j)
    for subset, sos in cert.cone_terms:
        if list(subset) != sorted(set(subset)):
            issues.append(f"cone product {subset} is not a sorted set of indices")
        for i in subset:
            if not 0 <= i < len(sys.nonnegs):
                issues.append(f"cone product index {i} out of range")
        for w, _ in sos.squares:
            if w <= 0:
                issues.append(f"sos weight {w} is not positive")
    for i, power in cert.monoid_term:
        if not 0 <= i < len(pool):
            issues.append(f"monoid index {i} out of range")
        if power < 1:
            issues.append(f"monoid power {power} is not positive")
    return issues


def verify(sys: NormalizedSystem, cert: Certificate) -> VerifyReport:
    """Exact check: structural invariants plus assembled-sum-is-zero.

    The sign ledger records, per summand, why unsatisfiability follows:
    the ideal part is zero under the equations, each cone term nonnegative
    under the nonnegatives, the monoid part strictly positive.
    """
    issues = tuple(_structural_issues(sys, cert))
    if issues:
        return VerifyReport(False, Polynomial.zero(), (), issues)
    residual = assemble(sys, cert)
    ledger: list[tuple[str, ...]] = []
    if cert.monoid_term and monoid_exponent(sys, cert.monoid_term) == 2:
        ledger.append(("monoid", "MonoidSquaredPositive"))
    else:
        ledger.append(("monoid", "MonoidPositive"))
    for subset, _ in cert.cone_terms:
        ledger.append(("cone", ",".join(map(str, subset)), "ConeNonneg"))
    for j, _ in cert.ideal_cofactors:
        ledger.append(("ideal", str(j), "IdealZero"))
    return VerifyReport(residual.is_zero(), residual, tuple(ledger))


# ---------------------------------------------------------------------------
# JSON interchange


def _poly_to_json(p: Polynomial) -> list:
    return [
        {"coeff": format_fraction(c), "monomial": [[v, e] for v, e in m]}
        for m, c in p.sorted_terms()
    ]


def _poly_from_json(data) -> Polynomial:
    if not isinstance(data, list):
        raise CertificateFormatError("polynomial must be a list of terms")
    terms: dict[Monomial, Fraction] = {}
    for entry in data:
        try:
            coeff = parse_fraction(entry["coeff"])
            mono = tuple(sorted((int(v), int(e)) for v, e in entry["monomial"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CertificateFormatError(f"bad polynomial term: {exc}") from exc
        if any(e <= 0 for _, e in mono) or len({v for v, _ in mono}) != len(mono):
            raise CertificateFormatError(f"bad monomial {mono}")
        terms[mono] = terms.get(mono, Fraction(0)) + coeff
    return Polynomial(terms)


def certificate_to_json(cert: Certificate, var_names=None) -> str:
    doc = {
        "format": "psatz-certificate-v1",
        "ideal_cofactors": [
            {"equation": j, "cofactor": _poly_to_json(b)} for j, b in cert.ideal_cofactors
        ],
        "cone_terms": [
            {
                "product": list(subset),
                "squares": [
                    {"weight": format_fraction(w), "square": _poly_to_json(p)}
                    for w, p in sos.squares
                ],
            }
            for subset, sos in cert.cone_terms
        ],
        "monoid": [{"constraint": i, "power": k} for i, k in cert.monoid_term],
    }
    if var_names is not None:
        doc["vars"] = list(var_names)
    return json.dumps(doc, indent=2, sort_keys=True)


def certificate_from_json(text: str) -> Certificate:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CertificateFormatError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CertificateFormatError("certificate document must be an object")
    try:
        ideal = tuple(
            (int(e["equation"]), _poly_from_json(e["cofactor"]))
            for e in doc.get("ideal_cofactors", [])
        )
        cone = []
        for e in doc.get("cone_terms", []):
            squares = []
            for s in e.get("squares", []):
                w = parse_fraction(s["weight"])
                if w <= 0:
                    raise CertificateFormatError(f"bad rational: weight {s['weight']} must be positive")
                squares.append((w, _poly_from_json(s["square"])))
            cone.append((tuple(int(i) for i in e["product"]), SosDecomposition(tuple(squares))))
        monoid = tuple(
            (int(e["constraint"]), int(e["power"])) for e in doc.get("monoid", [])
        )
    except CertificateFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateFormatError(f"bad certificate document: {exc}") from exc
    return Certificate(ideal, tuple(cone), monoid)
