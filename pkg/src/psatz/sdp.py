"""Semidefinite relaxation construction and a dense interior-point solver.

build_relaxation turns a certificate shape into a block SDP by coefficient
matching: the target identity

    M^e  +  sum_S (z_S' Q_S z_S) * prod_{i in S} q_i  +  sum_j b_j * p_j  =  0

yields one linear equation per monomial, with one PSD unknown Q_S per cone
product and one free scalar per ideal-cofactor template entry.

solve runs a Mehrotra predictor-corrector path-following method on the
feasibility problem.  The problem is embedded with an identity-scaled
slack: start from X = I, t = 1 with the constraints relaxed along
d = b - A(I), minimize t plus a small trace term.  The start is strictly
feasible for the embedding on both sides, t -> 0 recovers the original
constraints, and a positive certified lower bound on t is the improving-ray
infeasibility heuristic.  Everything here is binary64; exactness is
restored downstream by rationalization.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from .certshape import CertificateShape, monoid_exponent, monoid_product
from .frontend import NormalizedSystem
from .poly import Monomial, Polynomial, grlex_key, monomial_mul


class OversizeError(ValueError):
    """The relaxation would have more unknowns than the configured cap."""


class SdpStatus(enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class SdpProblem:
    """Block-diagonal feasibility problem with free scalar unknowns.

    Constraint k reads  sum_b <A[b][k], X_b> + E[k] . y = rhs[k]  with every
    X_b positive semidefinite and y unconstrained in sign.
    """

    block_dims: tuple[int, ...]
    free_count: int
    A: list[np.ndarray]  # per block: (m, dim, dim), each A[b][k] symmetric
    E: np.ndarray  # (m, free_count)
    rhs: np.ndarray  # (m,)
    labels: tuple[Monomial, ...] = ()  # constraint row -> monomial, for debugging

    @property
    def constraint_count(self) -> int:
        return len(self.rhs)

    def unknown_count(self) -> int:
        return sum(d * (d + 1) // 2 for d in self.block_dims) + self.free_count

    def residual(self, block_values, free_values) -> float:
        """Max violation of the constraints at a candidate point."""
        r = np.array(self.rhs, dtype=float)
        for b, X in enumerate(block_values):
            r = r - np.einsum("kij,ij->k", self.A[b], np.asarray(X, dtype=float))
        if self.free_count:
            r = r - self.E @ np.asarray(free_values, dtype=float)
        return float(np.max(np.abs(r))) if len(r) else 0.0


@dataclass
class SdpSolution:
    block_values: list[np.ndarray]
    free_values: np.ndarray
    status: SdpStatus
    residual: float
    min_eig: float
    iterations: int = 0
    message: str = ""


@dataclass(frozen=True)
class CoeffMap:
    """Which certificate coefficient each SDP unknown stands for."""

    cone_products: tuple[tuple[int, ...], ...]  # block b <-> cone product subset
    gram_bases: tuple[tuple[Monomial, ...], ...]  # block b <-> Gram monomial vector
    free_slots: tuple[tuple[int, Monomial], ...]  # free var -> (equation, template monomial)


def build_relaxation(
    sys: NormalizedSystem,
    shape: CertificateShape,
    unknown_cap: int = 4000,
) -> tuple[SdpProblem, CoeffMap]:
    """Coefficient-match the certificate identity into an SdpProblem.

    Coefficients are accumulated exactly over the rationals and converted to
    float only when the arrays are materialized.
    """
    if shape.unknown_count() > unknown_cap:
        raise OversizeError(
            f"shape has {shape.unknown_count()} unknowns (cap {unknown_cap})"
        )

    fixed = monoid_product(sys, shape.monoid_selection) ** monoid_exponent(
        sys, shape.monoid_selection
    )

    # Expand z_i * z_j * q_S once per block; collect the monomial universe.
    monos: set[Monomial] = set(fixed.terms)
    block_entries: list[dict[tuple[int, int], Polynomial]] = []
    for subset, basis in zip(shape.cone_products, shape.sos_bases):
        q = Polynomial.one()
        for i in subset:
            q = q * sys.nonnegs[i].poly
        entries: dict[tuple[int, int], Polynomial] = {}
        for i, zi in enumerate(basis):
            for j in range(i, len(basis)):
                prod = Polynomial.from_monomial(monomial_mul(zi, basis[j])) * q
                entries[(i, j)] = prod
                monos.update(prod.terms)
        block_entries.append(entries)

    free_slots: list[tuple[int, Monomial]] = []
    free_polys: list[Polynomial] = []
    for eq_index, template in enumerate(shape.ideal_templates):
        p = sys.equations[eq_index].poly
        for mono in template:
            shifted = Polynomial.from_monomial(mono) * p
            free_slots.append((eq_index, mono))
            free_polys.append(shifted)
            monos.update(shifted.terms)

    ordered = sorted(monos, key=grlex_key)
    row = {m: k for k, m in enumerate(ordered)}
    m_count = len(ordered)

    A: list[np.ndarray] = []
    for basis, entries in zip(shape.sos_bases, block_entries):
        dim = len(basis)
        mat = np.zeros((m_count, dim, dim))
        for (i, j), prod in entries.items():
            for mono, coeff in prod.terms.items():
                c = float(coeff)
                mat[row[mono], i, j] += c
                if i != j:
                    mat[row[mono], j, i] += c
        A.append(mat)

    E = np.zeros((m_count, len(free_slots)))
    for col, shifted in enumerate(free_polys):
        for mono, coeff in shifted.terms.items():
            E[row[mono], col] += float(coeff)

    rhs = np.zeros(m_count)
    for mono, coeff in fixed.terms.items():
        rhs[row[mono]] = -float(coeff)

    prob = SdpProblem(
        block_dims=tuple(len(b) for b in shape.sos_bases),
        free_count=len(free_slots),
        A=A,
        E=E,
        rhs=rhs,
        labels=tuple(ordered),
    )
    cmap = CoeffMap(shape.cone_products, shape.sos_bases, tuple(free_slots))
    return prob, cmap


# ---------------------------------------------------------------------------
# interior-point solver


def _chol_with_jitter(M: np.ndarray):
    """Cholesky with escalating diagonal jitter; None when hopeless."""
    scale = max(float(np.max(np.abs(np.diag(M)))), 1.0)
    jitter = 0.0
    for _ in range(4):
        try:
            return np.linalg.cholesky(M + jitter * np.eye(len(M)))
        except np.linalg.LinAlgError:
            jitter = scale * 1e-12 if jitter == 0.0 else jitter * 1e4
    return None


def _solve_cholesky(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve (L L') x = B given the Cholesky factor L."""
    y = np.linalg.solve(L, B)
    return np.linalg.solve(L.T, y)


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha dX still positive semidefinite."""
    L = _chol_with_jitter(X)
    if L is None:
        return 0.0
    Linv_dX = np.linalg.solve(L, dX)
    W = np.linalg.solve(L, Linv_dX.T).T
    W = 0.5 * (W + W.T)
    lam = float(np.min(np.linalg.eigvalsh(W)))
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def solve(
    prob: SdpProblem,
    tol: float = 1e-8,
    max_iter: int = 200,
    trace_reg: float = 1e-6,
    deadline: float | None = None,
) -> SdpSolution:
    """Primal-dual path-following solve of the feasibility problem.

    Deterministic for identical inputs: fixed iteration order, LAPACK
    factorizations only, no randomized pivoting.  Returns FEASIBLE only
    when the recomputed constraint residual is at most tol and the smallest
    block eigenvalue is at least -tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = prob.constraint_count
    dims = list(prob.block_dims)
    f = prob.free_count
    if m == 0:
        blocks = [np.zeros((d, d)) for d in dims]
        return SdpSolution(blocks, np.zeros(f), SdpStatus.FEASIBLE, 0.0, 0.0, 0, "no constraints")

    # Rows are scaled to unit max coefficient: the iteration works on the
    # scaled data, while residuals reported outward use the original data.
    row_scale = np.ones(m)
    for k in range(m):
        mag = max(
            [float(np.max(np.abs(prob.A[b][k]))) for b in range(len(dims))]
            + ([float(np.max(np.abs(prob.E[k])))] if f else [])
            + [abs(float(prob.rhs[k]))]
        )
        row_scale[k] = mag if mag > 0 else 1.0

    # Embedding: extra 1x1 block t with column d = rhs - A(I), objective
    # t + trace_reg * tr(X); (X, y, t) = (I, 0, 1) is primal feasible and
    # (lambda, Z) = (0, C) is strictly dual feasible.
    b_vec = np.array(prob.rhs, dtype=float) / row_scale
    d_col = b_vec.copy()
    scaled_A = [np.array(Ab, dtype=float) / row_scale[:, None, None] for Ab in prob.A]
    for Ab in scaled_A:
        d_col -= np.einsum("kii->k", Ab)

    A_all = scaled_A + [d_col.reshape(m, 1, 1)]
    dims_all = dims + [1]
    C_all = [trace_reg * np.eye(dim) for dim in dims] + [np.eye(1)]
    E = np.array(prob.E, dtype=float).reshape(m, f) / row_scale[:, None]

    X = [np.eye(dim) for dim in dims_all]
    Z = [C.copy() for C in C_all]
    y = np.zeros(f)
    lam = np.zeros(m)
    n_total = sum(dims_all)

    def operator_A(Xs):
        out = np.zeros(m)
        for Ab, Xb in zip(A_all, Xs):
            out += np.einsum("kij,ij->k", Ab, Xb)
        return out

    def adjoint_A(v):
        return [np.einsum("k,kij->ij", v, Ab) for Ab in A_all]

    def original_residual() -> float:
        return prob.residual(X[:-1], y)

    best: tuple[float, list[np.ndarray], np.ndarray] | None = None

    def remember_best() -> None:
        nonlocal best
        res = original_residual()
        if best is None or res < best[0]:
            best = (res, [Xb.copy() for Xb in X[:-1]], y.copy())

    def package(status: SdpStatus, it: int, message: str = "") -> SdpSolution:
        # The best iterate seen stands in for a blown-up final one; status
        # is re-derived from an independently computed residual either way.
        remember_best()
        blocks, yv = best[1], best[2]
        res = prob.residual(blocks, yv)
        if dims:
            min_eig = min(float(np.min(np.linalg.eigvalsh(Xb))) for Xb in blocks)
        else:
            min_eig = 0.0
        point_ok = res <= tol and min_eig >= -tol
        if status is SdpStatus.FEASIBLE and not point_ok:
            status = SdpStatus.NUMERICAL_FAILURE
            message = message or "claimed feasible point failed the residual recheck"
        elif status in (SdpStatus.MAX_ITERATIONS, SdpStatus.NUMERICAL_FAILURE) and point_ok:
            status = SdpStatus.FEASIBLE
        return SdpSolution(blocks, yv.copy(), status, res, min_eig, it, message)

    b_scale = 1.0 + float(np.max(np.abs(b_vec)))
    iterations = 0
    for iteration in range(max_iter):
        iterations = iteration + 1
        if deadline is not None and time.monotonic() > deadline:
            return package(SdpStatus.MAX_ITERATIONS, iterations, "deadline reached")

        gap = sum(float(np.sum(Xb * Zb)) for Xb, Zb in zip(X, Z))
        mu = gap / n_total
        if not np.isfinite(gap):
            return package(SdpStatus.NUMERICAL_FAILURE, iterations, "iterate blew up")

        rp = b_vec - operator_A(X) - (E @ y if f else 0.0)
        Rd = [C - Zb - Aadj for C, Zb, Aadj in zip(C_all, Z, adjoint_A(lam))]
        rf = -(E.T @ lam) if f else np.zeros(0)

        # Success: the original (un-embedded) constraints hold to tolerance.
        # The mu floor keeps iterating a little past bare feasibility so the
        # blocks settle near the minimum-trace face, which rounds better.
        res_orig = original_residual()
        remember_best()
        if res_orig <= 0.5 * tol and mu <= max(0.1 * tol, 1e-10) * b_scale:
            return package(SdpStatus.FEASIBLE, iterations)

        # Improving-ray heuristic: with near-feasible duals, b'lam bounds the
        # embedded objective from below; trace_reg * tr(X) slack removed.
        dual_obj = float(b_vec @ lam)
        dres = max(float(np.max(np.abs(R))) for R in Rd)
        tr_all = sum(float(np.trace(Xb)) for Xb in X[:-1])
        lower_t = dual_obj - trace_reg * tr_all
        if (
            dual_obj > 0
            and lower_t > max(1e-6 * b_scale, 1e3 * tol)
            and dres <= 1e-8 * (1.0 + trace_reg)
            and float(np.max(np.abs(rp))) <= 1e-8 * b_scale
            and mu <= 1e-3 * lower_t / n_total
        ):
            return package(SdpStatus.INFEASIBLE, iterations, f"dual objective {dual_obj:.3e}")

        Zinv = []
        for Zb in Z:
            try:
                Zinv.append(np.linalg.inv(Zb))
            except np.linalg.LinAlgError:
                return package(SdpStatus.NUMERICAL_FAILURE, iterations, "singular Z block")

        # Schur complement M[k,l] = sum_b <A_k, X A_l Zinv>; symmetric PD.
        M = np.zeros((m, m))
        for Ab, Xb, Zib in zip(A_all, X, Zinv):
            T = np.einsum("ij,ljk,km->lim", Xb, Ab, Zib, optimize=True)
            M += np.einsum("kij,lij->kl", Ab, T, optimize=True)
        M = 0.5 * (M + M.T)
        if not np.isfinite(M).all():
            return package(SdpStatus.NUMERICAL_FAILURE, iterations, "Schur matrix not finite")
        LM = _chol_with_jitter(M)
        if LM is None:
            return package(SdpStatus.NUMERICAL_FAILURE, iterations, "Schur factorization failed")

        def direction(Rc):
            """Solve the Newton system for a given complementarity target."""
            g = [
                Rcb @ Zib - Xb @ Rdb @ Zib
                for Rcb, Rdb, Xb, Zib in zip(Rc, Rd, X, Zinv)
            ]
            h = rp - operator_A(g)
            if f:
                MinvE = _solve_cholesky(LM, E)
                Minvh = _solve_cholesky(LM, h)
                S = E.T @ MinvE
                S = 0.5 * (S + S.T)
                LS = _chol_with_jitter(S)
                if LS is None:
                    return None
                dy = _solve_cholesky(LS, E.T @ Minvh - rf)
                dlam = Minvh - MinvE @ dy
            else:
                dy = np.zeros(0)
                dlam = _solve_cholesky(LM, h)
            dZ = [Rdb - Aadj for Rdb, Aadj in zip(Rd, adjoint_A(dlam))]
            dX = []
            for Rcb, Xb, dZb, Zib in zip(Rc, X, dZ, Zinv):
                raw = Rcb @ Zib - Xb @ dZb @ Zib
                dX.append(0.5 * (raw + raw.T))
            return dX, dy, dlam, dZ

        # Predictor (affine scaling).
        Rc_aff = [-(Xb @ Zb) for Xb, Zb in zip(X, Z)]
        aff = direction(Rc_aff)
        if aff is None:
            return package(SdpStatus.NUMERICAL_FAILURE, iterations, "Newton solve failed")
        dX_a, dy_a, dlam_a, dZ_a = aff
        ap = min(1.0, min((_max_step(Xb, dXb) for Xb, dXb in zip(X, dX_a)), default=1.0))
        ad = min(1.0, min((_max_step(Zb, dZb) for Zb, dZb in zip(Z, dZ_a)), default=1.0))
        gap_aff = sum(
            float(np.sum((Xb + ap * dXb) * (Zb + ad * dZb)))
            for Xb, dXb, Zb, dZb in zip(X, dX_a, Z, dZ_a)
        )
        sigma = min(1.0, max(0.0, (max(gap_aff, 0.0) / gap)) ** 3) if gap > 0 else 0.1

        # Corrector with Mehrotra second-order term.
        Rc = [
            sigma * mu * np.eye(dim) - Xb @ Zb - dXb @ dZb
            for dim, Xb, Zb, dXb, dZb in zip(dims_all, X, Z, dX_a, dZ_a)
        ]
        corr = direction(Rc)
        if corr is None:
            return package(SdpStatus.NUMERICAL_FAILURE, iterations, "Newton solve failed")
        dX, dy, dlam, dZ = corr

        tau = 0.9 + 0.08 * min(ap, ad)
        alpha_p = min(1.0, tau * min((_max_step(Xb, dXb) for Xb, dXb in zip(X, dX)), default=1.0))
        alpha_d = min(1.0, tau * min((_max_step(Zb, dZb) for Zb, dZb in zip(Z, dZ)), default=1.0))
        if alpha_p <= 1e-14 and alpha_d <= 1e-14:
            return package(SdpStatus.NUMERICAL_FAILURE, iterations, "step length collapsed")

        X = [Xb + alpha_p * dXb for Xb, dXb in zip(X, dX)]
        y = y + alpha_p * dy
        lam = lam + alpha_d * dlam
        Z = [Zb + alpha_d * dZb for Zb, dZb in zip(Z, dZ)]

    # One last residual check: the loop may have converged on its final step.
    if original_residual() <= 0.5 * tol:
        return package(SdpStatus.FEASIBLE, iterations)
    return package(SdpStatus.MAX_ITERATIONS, iterations)
