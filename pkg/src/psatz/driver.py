"""Pipeline orchestration: parse, normalize, search, recover, verify, emit.

prove() walks the degree-budget escalation schedule, enumerates certificate
shapes at each budget, solves each shape's SDP, and rationalizes the first
feasible solution into an exactly verified certificate.  A certificate that
verifies is final; exhausting the schedule yields NoCertificateFound, which
is a search failure, not a claim that the conjecture is false.

check() re-normalizes a conjecture and runs the exact verifier against a
certificate loaded from JSON, so emitted certificates can be re-audited
without re-running the search.
"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import certshape, emitter, rationalize, sdp
from .certificate import (
    Certificate,
    CertificateFormatError,
    certificate_from_json,
    certificate_to_json,
    verify,
)
from .frontend import (
    Expr,
    NormalizedSystem,
    ParseError,
    UnsupportedStructureError,
    negate_normalize,
    parse,
)
from .sdpa import ExternalSdpSolver


class Outcome(enum.Enum):
    PROVED = "Proved"
    NO_CERTIFICATE = "NoCertificateFound"
    TIMEOUT = "Timeout"
    PARSE_ERROR = "ParseError"
    CHECK_OK = "CheckOk"
    CHECK_FAILED = "CheckFailed"


EXIT_CODES = {
    Outcome.PROVED: 0,
    Outcome.CHECK_OK: 0,
    Outcome.NO_CERTIFICATE: 1,
    Outcome.CHECK_FAILED: 1,
    Outcome.PARSE_ERROR: 2,
    Outcome.TIMEOUT: 3,
}


@dataclass
class RunConfig:
    input_path: str | None = None  # None reads standard input
    mode: str = "prove"  # prove | check | parse
    max_degree: int | None = None
    max_cone_subset: int = 2
    max_monoid_power: int = 2
    basis_cap: int = 2000
    sdp_unknown_cap: int = 4000
    sdp_tol: float = 1e-8
    sdp_max_iter: int = 200
    denominator_max: int = 2**64
    emit: str = "both"  # proof | certificate | both | none
    time_limit: float = 60.0
    verbosity: int = 0
    sdp_backend: str = "builtin"  # builtin | external:<path>
    parallel: bool = False
    output_dir: str | None = None
    cert_path: str | None = None  # check mode

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")
        for cap in (self.max_cone_subset, self.basis_cap, self.sdp_unknown_cap,
                    self.denominator_max):
            if cap <= 0:
                raise ValueError("caps must be positive")


@dataclass
class RunReport:
    outcome: Outcome
    shapes_tried: int = 0
    sdp_iterations: int = 0
    elapsed: float = 0.0
    certificate_summary: str | None = None
    message: str = ""
    certificate: Certificate | None = None
    script_path: str | None = None
    cert_json_path: str | None = None

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.outcome]

    def lines(self) -> list[str]:
        out = [f"outcome: {self.outcome.value}"]
        if self.message:
            out.append(f"detail: {self.message}")
        if self.outcome in (Outcome.PROVED, Outcome.NO_CERTIFICATE, Outcome.TIMEOUT):
            out.append(f"shapes tried: {self.shapes_tried}")
            out.append(f"sdp iterations: {self.sdp_iterations}")
        if self.certificate_summary:
            out.append(f"certificate: {self.certificate_summary}")
        for label, path in (("proof", self.script_path), ("certificate-json", self.cert_json_path)):
            if path:
                out.append(f"wrote {label}: {path}")
        out.append(f"elapsed: {self.elapsed:.3f}s")
        return out


def _read_input(cfg: RunConfig) -> str:
    if cfg.input_path in (None, "-"):
        import sys

        return sys.stdin.read()
    return Path(cfg.input_path).read_text()


def _make_solver(cfg: RunConfig):
    if cfg.sdp_backend.startswith("external:"):
        return ExternalSdpSolver(cfg.sdp_backend.split(":", 1)[1]).solve
    if cfg.sdp_backend != "builtin":
        raise ValueError(f"unknown sdp backend {cfg.sdp_backend!r}")
    return sdp.solve


def _output_stem(cfg: RunConfig) -> Path:
    if cfg.input_path in (None, "-"):
        base = Path("conjecture")
    else:
        base = Path(cfg.input_path)
    directory = Path(cfg.output_dir) if cfg.output_dir else (base.parent if base.parent != Path("") else Path("."))
    return directory / base.stem


def _attempt_shape(sys_n, shape, cfg, solve_fn, deadline):
    """One shape: build, solve, rationalize; returns (cert|None, iterations)."""
    try:
        prob, _ = sdp.build_relaxation(sys_n, shape, unknown_cap=cfg.sdp_unknown_cap)
    except sdp.OversizeError:
        return None, 0
    sol = solve_fn(prob, tol=cfg.sdp_tol, max_iter=cfg.sdp_max_iter, deadline=deadline)
    if sol.status is not sdp.SdpStatus.FEASIBLE:
        return None, sol.iterations
    sched = rationalize.default_schedule(cfg.denominator_max)
    try:
        cert = rationalize.recover(sys_n, shape, sol, sched)
    except rationalize.RecoveryFailedError:
        return None, sol.iterations
    return cert, sol.iterations


def search_certificate(sys_n: NormalizedSystem, cfg: RunConfig) -> tuple[Certificate | None, int, int, bool]:
    """Escalate budgets and shapes; first exactly-verified certificate wins.

    Returns (certificate, shapes_tried, total_iterations, timed_out).
    """
    solve_fn = _make_solver(cfg)
    deadline = time.monotonic() + cfg.time_limit
    shapes_tried = 0
    iterations = 0
    budgets = certshape.default_budgets(sys_n, cfg.max_degree, cfg.max_monoid_power)
    for budget in budgets:
        shapes = certshape.enumerate_shapes(
            sys_n, budget, cfg.max_cone_subset, cfg.basis_cap
        )
        if cfg.verbosity:
            print(f"# budget {budget.total_degree}: {len(shapes)} shapes")
        if not cfg.parallel:
            for shape in shapes:
                if time.monotonic() > deadline:
                    return None, shapes_tried, iterations, True
                shapes_tried += 1
                cert, iters = _attempt_shape(sys_n, shape, cfg, solve_fn, deadline)
                iterations += iters
                if cert is not None:
                    return cert, shapes_tried, iterations, False
        else:
            # First-success-by-index so parallel runs return the same
            # certificate the sequential order would.
            with ThreadPoolExecutor() as pool:
                futures = [
                    pool.submit(_attempt_shape, sys_n, shape, cfg, solve_fn, deadline)
                    for shape in shapes
                ]
                winner = None
                for future in futures:
                    if time.monotonic() > deadline and winner is None:
                        for f in futures:
                            f.cancel()
                        return None, shapes_tried, iterations, True
                    cert, iters = future.result()
                    shapes_tried += 1
                    iterations += iters
                    if cert is not None:
                        winner = cert
                        for f in futures:
                            f.cancel()
                        break
                if winner is not None:
                    return winner, shapes_tried, iterations, False
        if time.monotonic() > deadline:
            return None, shapes_tried, iterations, True
    return None, shapes_tried, iterations, False


def _summarize(sys_n: NormalizedSystem, cert: Certificate) -> str:
    return (
        f"degree {cert.degree(sys_n)}, {cert.square_count()} square(s), "
        f"{len(cert.ideal_cofactors)} ideal cofactor(s), "
        f"{len(cert.monoid_term)} monoid factor(s)"
    )


def prove(cfg: RunConfig) -> RunReport:
    start = time.monotonic()
    try:
        conj = parse(_read_input(cfg))
        sys_n = negate_normalize(conj)
    except (ParseError, UnsupportedStructureError) as exc:
        return RunReport(Outcome.PARSE_ERROR, message=str(exc), elapsed=time.monotonic() - start)

    cert, shapes_tried, iterations, timed_out = search_certificate(sys_n, cfg)
    elapsed = time.monotonic() - start
    if cert is None:
        outcome = Outcome.TIMEOUT if timed_out else Outcome.NO_CERTIFICATE
        message = (
            "time limit reached"
            if timed_out
            else "budget exhausted; this does not mean the conjecture is false"
        )
        return RunReport(outcome, shapes_tried, iterations, elapsed, message=message)

    report = RunReport(
        Outcome.PROVED,
        shapes_tried,
        iterations,
        elapsed,
        certificate_summary=_summarize(sys_n, cert),
        certificate=cert,
    )
    stem = _output_stem(cfg)
    if cfg.emit in ("proof", "both"):
        script = emitter.emit(conj, sys_n, cert)
        problems = emitter.lint(script)
        if problems:
            report.message = "; ".join(f"lint {d.code}: {d.message}" for d in problems)
        path = stem.with_suffix(".lisp")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(script.rendered)
        report.script_path = str(path)
    if cfg.emit in ("certificate", "both"):
        path = stem.with_suffix(".cert.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(certificate_to_json(cert, sys_n.var_names))
        report.cert_json_path = str(path)
    report.elapsed = time.monotonic() - start
    return report


def check(cfg: RunConfig) -> RunReport:
    start = time.monotonic()
    try:
        conj = parse(_read_input(cfg))
        sys_n = negate_normalize(conj)
    except (ParseError, UnsupportedStructureError) as exc:
        return RunReport(Outcome.PARSE_ERROR, message=str(exc), elapsed=time.monotonic() - start)
    if not cfg.cert_path:
        return RunReport(Outcome.PARSE_ERROR, message="check mode needs --cert",
                         elapsed=time.monotonic() - start)
    try:
        cert = certificate_from_json(Path(cfg.cert_path).read_text())
    except (OSError, CertificateFormatError) as exc:
        return RunReport(Outcome.PARSE_ERROR, message=f"certificate: {exc}",
                         elapsed=time.monotonic() - start)
    report = verify(sys_n, cert)
    elapsed = time.monotonic() - start
    if report.identity_ok:
        return RunReport(Outcome.CHECK_OK, elapsed=elapsed,
                         certificate_summary=_summarize(sys_n, cert), certificate=cert)
    detail = "; ".join(report.issues) if report.issues else (
        f"identity residual nonzero: {report.residual_poly.to_text(sys_n.var_names)}"
    )
    return RunReport(Outcome.CHECK_FAILED, elapsed=elapsed, message=detail)


def parse_only(cfg: RunConfig) -> RunReport:
    start = time.monotonic()
    try:
        conj = parse(_read_input(cfg))
        sys_n = negate_normalize(conj)
    except (ParseError, UnsupportedStructureError) as exc:
        return RunReport(Outcome.PARSE_ERROR, message=str(exc), elapsed=time.monotonic() - start)
    counts = (
        f"{len(sys_n.equations)} equation(s), {len(sys_n.nonnegs)} nonneg(s), "
        f"{len(sys_n.nonzeros)} nonzero(s), vars {' '.join(sys_n.var_names)}"
    )
    return RunReport(Outcome.CHECK_OK, elapsed=time.monotonic() - start, message=counts)
