"""Exact rational recovery of certificates from floating-point SDP output.

Gram matrices are rounded to a common power-of-two denominator, the exact
polynomial residual of the certificate identity is recomputed over the
rationals, and the residual is absorbed by re-solving exactly for the ideal
cofactors together with corrections to the diagonal of the bare-SOS Gram
matrix.  Surviving Gram matrices are split into explicit weighted squares
by a square-root-free LDL^T factorization with diagonal pivoting, which
also serves as the exact PSD check.  The denominator schedule doubles from
1 upward; the first denominator whose pieces verify exactly wins.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .certificate import Certificate, SosDecomposition, verify
from .certshape import CertificateShape, monoid_exponent, monoid_product
from .frontend import NormalizedSystem
from .poly import Monomial, Polynomial, grlex_key, monomial_mul
from .sdp import SdpSolution, SdpStatus

RationalMatrix = list[list[Fraction]]


class NotPsdError(ValueError):
    def __init__(self, pivot: Fraction):
        super().__init__(f"matrix is not positive semidefinite (pivot {pivot})")
        self.pivot = pivot


class IrreparableResidualError(ValueError):
    """The rounding residual touches monomials no unknown can reach."""


class RecoveryFailedError(ValueError):
    """No denominator in the schedule produced an exactly verifying certificate."""


@dataclass(frozen=True)
class RoundingSchedule:
    denominators: tuple[int, ...]

    def __post_init__(self):
        if list(self.denominators) != sorted(set(self.denominators)):
            raise ValueError("denominators must be strictly increasing")


def default_schedule(max_denominator: int = 2**64) -> RoundingSchedule:
    dens = []
    d = 1
    while d <= max_denominator:
        dens.append(d)
        d *= 2
    return RoundingSchedule(tuple(dens))


def round_matrix(mat, denom: int) -> RationalMatrix:
    """Entrywise nearest rational with the given denominator, ties to even.

    The input is symmetrized first, so symmetry survives exactly.
    """
    n = len(mat)
    out = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            avg = (Fraction(float(mat[i][j])) + Fraction(float(mat[j][i]))) / 2
            q = Fraction(round(avg * denom), denom)
            out[i][j] = q
            out[j][i] = q
    return out


def ldlt_sos(q: RationalMatrix, basis: tuple[Monomial, ...] | list[Monomial]) -> SosDecomposition:
    """Exact LDL^T with diagonal pivoting, returned as weighted squares.

    Pivots are chosen largest-first among the remaining diagonal; a negative
    pivot, or a zero pivot with a nonzero off-diagonal remainder, means the
    matrix is not PSD (exactly), and a NotPsdError carries the pivot.
    Zero-pivot rows with zero remainders are dropped, so rank-deficient Gram
    matrices come out as fewer squares.
    """
    n = len(q)
    a = [[Fraction(x) for x in row] for row in q]
    for i in range(n):
        for j in range(i + 1, n):
            if a[i][j] != a[j][i]:
                raise ValueError("matrix is not symmetric")
    perm = list(range(n))
    squares: list[tuple[Fraction, Polynomial]] = []
    for k in range(n):
        pivot_row = max(range(k, n), key=lambda r: a[r][r])
        pivot = a[pivot_row][pivot_row]
        if pivot < 0:
            raise NotPsdError(pivot)
        if pivot == 0:
            remaining = any(
                a[i][j] != 0 for i in range(k, n) for j in range(k, n)
            )
            if remaining:
                raise NotPsdError(Fraction(0))
            break
        if pivot_row != k:
            a[k], a[pivot_row] = a[pivot_row], a[k]
            for row in a:
                row[k], row[pivot_row] = row[pivot_row], row[k]
            perm[k], perm[pivot_row] = perm[pivot_row], perm[k]
        col = [a[i][k] / pivot for i in range(k + 1, n)]
        square = Polynomial.from_monomial(basis[perm[k]])
        for offset, l in enumerate(col):
            if l != 0:
                square = square + Polynomial.from_monomial(basis[perm[k + 1 + offset]], l)
        squares.append((pivot, square))
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] -= col[i - k - 1] * col[j - k - 1] * pivot
    return SosDecomposition(tuple(squares))


def gram_value(q: RationalMatrix, basis) -> Polynomial:
    """z' Q z expanded exactly."""
    total: dict[Monomial, Fraction] = {}
    n = len(q)
    for i in range(n):
        for j in range(n):
            c = q[i][j]
            if c == 0:
                continue
            m = monomial_mul(basis[i], basis[j])
            s = total.get(m, Fraction(0)) + c
            if s == 0:
                total.pop(m, None)
            else:
                total[m] = s
    return Polynomial(total)


@dataclass
class CertificatePieces:
    """Rounded Gram matrices plus exact ideal cofactors, one per equation."""

    grams: list[RationalMatrix]
    cofactors: list[Polynomial]


def _solve_exact(columns: list[Polynomial], target: Polynomial) -> list[Fraction] | None:
    """Particular rational solution of sum_i x_i * columns[i] = target.

    Gauss elimination over the monomial rows; free unknowns are left at
    zero, so solutions stay sparse and deterministic.  None if inconsistent.
    """
    monos: set[Monomial] = set(target.terms)
    for col in columns:
        monos.update(col.terms)
    rows = sorted(monos, key=grlex_key)
    row_index = {m: i for i, m in enumerate(rows)}
    ncols = len(columns)
    mat = [[Fraction(0)] * (ncols + 1) for _ in rows]
    for c, col in enumerate(columns):
        for m, v in col.terms.items():
            mat[row_index[m]][c] = v
    for m, v in target.terms.items():
        mat[row_index[m]][ncols] = v

    pivot_of_col: dict[int, int] = {}
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if mat[i][c] != 0), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        inv = 1 / mat[r][c]
        mat[r] = [x * inv for x in mat[r]]
        for i in range(len(rows)):
            if i != r and mat[i][c] != 0:
                factor = mat[i][c]
                mat[i] = [x - factor * y for x, y in zip(mat[i], mat[r])]
        pivot_of_col[c] = r
        r += 1
        if r == len(rows):
            break
    for i in range(r, len(rows)):
        if mat[i][ncols] != 0:
            return None
    solution = [Fraction(0)] * ncols
    for c, pr in pivot_of_col.items():
        solution[c] = mat[pr][ncols]
    return solution


def repair_identity(
    sys: NormalizedSystem, shape: CertificateShape, pieces: CertificatePieces
) -> CertificatePieces:
    """Absorb the exact identity residual so the certificate sums to zero.

    The residual of the rounded pieces is recomputed over the rationals and
    eliminated by exact corrections to the linear unknowns of the identity:
    the ideal cofactor coefficients, the scalar (1x1) SOS multipliers, and
    the diagonal of the empty-product Gram matrix (whose diagonal entries
    reach exactly the squares of its basis monomials).  Scalar multipliers
    are included because their exact values need not have power-of-two
    denominators at all.  Corrections are solved with free unknowns pinned
    to zero, so unforced pieces keep their rounded values.  Raises
    IrreparableResidualError when the residual has a monomial outside
    everything those unknowns span; callers then retry with a larger
    denominator or the next shape.
    """
    fixed = monoid_product(sys, shape.monoid_selection) ** monoid_exponent(
        sys, shape.monoid_selection
    )
    residual = fixed
    cone_polys: list[Polynomial] = []
    for subset, basis, gram in zip(shape.cone_products, shape.sos_bases, pieces.grams):
        prod = Polynomial.one()
        for i in subset:
            prod = prod * sys.nonnegs[i].poly
        cone_polys.append(prod)
        residual = residual + gram_value(gram, basis) * prod
    for eq_index, cof in enumerate(pieces.cofactors):
        residual = residual + cof * sys.equations[eq_index].poly
    target = -residual

    columns: list[Polynomial] = []
    slots: list[tuple[str, int, object]] = []
    for eq_index, template in enumerate(shape.ideal_templates):
        p = sys.equations[eq_index].poly
        for mono in template:
            columns.append(Polynomial.from_monomial(mono) * p)
            slots.append(("ideal", eq_index, mono))
    for b, basis in enumerate(shape.sos_bases):
        if len(basis) == 1:
            columns.append(Polynomial.from_monomial(monomial_mul(basis[0], basis[0])) * cone_polys[b])
            slots.append(("diag", b, 0))
    try:
        empty_block = shape.cone_products.index(())
    except ValueError:
        empty_block = None
    if empty_block is not None and len(shape.sos_bases[empty_block]) > 1:
        for i, mono in enumerate(shape.sos_bases[empty_block]):
            columns.append(Polynomial.from_monomial(monomial_mul(mono, mono)))
            slots.append(("diag", empty_block, i))

    solution = _solve_exact(columns, target)
    if solution is None:
        raise IrreparableResidualError("residual outside the span of the repair unknowns")

    cofactors = list(pieces.cofactors) or [Polynomial.zero() for _ in sys.equations]
    grams = [[row[:] for row in g] for g in pieces.grams]
    for value, (kind, a, bslot) in zip(solution, slots):
        if value == 0:
            continue
        if kind == "ideal":
            cofactors[a] = cofactors[a] + Polynomial.from_monomial(bslot, value)
        else:
            grams[a][bslot][bslot] += value
    return CertificatePieces(grams, cofactors)


def recover(
    sys: NormalizedSystem,
    shape: CertificateShape,
    sol: SdpSolution,
    sched: RoundingSchedule | None = None,
) -> Certificate:
    """Round, repair and decompose until the certificate verifies exactly."""
    if sol.status is not SdpStatus.FEASIBLE:
        raise ValueError("recover requires a Feasible SDP solution")
    if sched is None:
        sched = default_schedule()
    for denom in sched.denominators:
        # Free values follow the relaxation's slot order: equations in
        # order, template monomials within each.
        cofactors = []
        idx = 0
        for template in shape.ideal_templates:
            terms = {}
            for mono in template:
                v = Fraction(round(Fraction(float(sol.free_values[idx])) * denom), denom)
                idx += 1
                if v:
                    terms[mono] = v
            cofactors.append(Polynomial(terms))
        rounded = CertificatePieces(
            [round_matrix(X, denom) for X in sol.block_values], cofactors
        )
        try:
            pieces = repair_identity(sys, shape, rounded)
        except IrreparableResidualError:
            continue
        try:
            cone_terms = []
            for subset, basis, gram in zip(
                shape.cone_products, shape.sos_bases, pieces.grams
            ):
                sos = ldlt_sos(gram, basis)
                if sos.squares:
                    cone_terms.append((subset, sos))
        except NotPsdError:
            continue
        ideal = tuple(
            (j, cof) for j, cof in enumerate(pieces.cofactors) if not cof.is_zero()
        )
        cert = Certificate(ideal, tuple(cone_terms), shape.monoid_selection)
        report = verify(sys, cert)
        if report.identity_ok:
            return cert
    raise RecoveryFailedError(
        f"no exact certificate within denominators up to {sched.denominators[-1]}"
    )
