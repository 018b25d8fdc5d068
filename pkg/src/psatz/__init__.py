"""psatz: Positivstellensatz certificate search with exact verification.

Pipeline: parse a conjecture S-expression, negate and normalize it into a
polynomial constraint system, search degree-bounded certificate shapes via
semidefinite programming, recover exact rational certificates from the
floating-point solutions, verify them with exact polynomial arithmetic,
and emit theorem-prover proof scripts.
"""

from .certificate import (
    Certificate,
    SosDecomposition,
    VerifyReport,
    assemble,
    certificate_from_json,
    certificate_to_json,
    verify,
)
from .driver import Outcome, RunConfig, RunReport, check, parse_only, prove
from .emitter import ProofScript, emit, lint, reexpand
from .frontend import NormalizedSystem, ParseError, RelKind, negate_normalize, parse
from .poly import Polynomial

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "NormalizedSystem",
    "Outcome",
    "ParseError",
    "Polynomial",
    "ProofScript",
    "RelKind",
    "RunConfig",
    "RunReport",
    "SosDecomposition",
    "VerifyReport",
    "assemble",
    "certificate_from_json",
    "certificate_to_json",
    "check",
    "emit",
    "lint",
    "negate_normalize",
    "parse",
    "parse_only",
    "prove",
    "reexpand",
    "verify",
]
