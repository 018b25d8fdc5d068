"""Proof-script emission for verified certificates.

A script is a single ENCAPSULATE event exporting one non-local theorem
FINAL that restates the conjecture under rationality hypotheses.  The body
defines the normalized problem polynomials (PROB-i), the negated GOAL, the
certificate cofactors with their type/positivity lemmas, the certificate
sum CERT, the key lemma CERT = 0, per-summand sign lemmas, and the main
contradiction.  Emission refuses certificates that do not verify.

The linter enforces structural well-formedness of the rendered script
(balance, ordering, name discipline, rationality guards); it does not try
to judge provability.  reexpand() re-parses the rendered PROB and CERT
bodies and re-expands them to polynomials, which is the machine-checkable
counterpart of the CERT-KEY lemma.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

from . import sexp
from .certificate import Certificate, verify
from .certshape import monoid_exponent
from .frontend import (
    And,
    Constraint,
    Expr,
    Implies,
    NormalizedSystem,
    Rel,
    RelKind,
    _build_arith,
    print_expr,
)
from .poly import Polynomial

Form = object  # str | list of Form

LINE_WIDTH = 78


class UnverifiedCertificateError(ValueError):
    """emit() only renders certificates that pass the exact verifier."""


@dataclass(frozen=True)
class Event:
    kind: str
    name: str | None
    text: str


@dataclass(frozen=True)
class ProofScript:
    events: tuple[Event, ...]
    rendered: str


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str


PREAMBLE = [
    ("preamble", None, "(SET-IGNORE-OK T)"),
    ("preamble", None, "(SET-IRRELEVANT-FORMALS-OK T)"),
    (
        "preamble",
        "NEQ",
        "(LOCAL (DEFMACRO NEQ (X Y)\n         `(OR (< ,X ,Y) (> ,X ,Y))))",
    ),
    ("preamble", "SQUARE", "(LOCAL (DEFUN SQUARE (X)\n         (* X X)))"),
    (
        "preamble",
        "SQUARE-PSD",
        "(LOCAL (DEFTHM SQUARE-PSD\n"
        "         (IMPLIES (RATIONALP X)\n"
        "                  (>= (SQUARE X) 0))\n"
        "         :RULE-CLASSES (:LINEAR)))",
    ),
    (
        "preamble",
        "SQUARE-TYPE",
        "(LOCAL (DEFTHM SQUARE-TYPE\n"
        "         (IMPLIES (RATIONALP X)\n"
        "                  (RATIONALP (SQUARE X)))\n"
        "         :RULE-CLASSES (:TYPE-PRESCRIPTION)))",
    ),
    ("preamble", None, "(LOCAL (IN-THEORY (DISABLE SQUARE)))"),
    ("preamble", None, '(LOCAL (include-book "arithmetic-5/top" :dir :system))'),
]


# ---------------------------------------------------------------------------
# polynomial rendering


def _literal(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def _mono_form(m, names) -> Form:
    factors: list[str] = []
    for v, e in m:
        factors.extend([names[v]] * e)
    form: Form = factors[-1]
    for f in reversed(factors[:-1]):
        form = ["*", f, form]
    return form


def _term_form(m, c: Fraction, names) -> Form:
    if not m:
        return _literal(c)
    if c == 1:
        return _mono_form(m, names)
    return ["*", _literal(c), _mono_form(m, names)]


def _nested_sum(terms: list[Form]) -> Form:
    form = terms[-1]
    for t in reversed(terms[:-1]):
        form = ["+", t, form]
    return form


def poly_form(p: Polynomial, names) -> Form:
    """Canonical arithmetic S-expression for a polynomial.

    Positive terms minus negative terms when both are present; an
    all-negative polynomial keeps signed coefficients in its terms.
    """
    if p.is_zero():
        return "0"
    pos = [(m, c) for m, c in p.sorted_terms() if c > 0]
    neg = [(m, c) for m, c in p.sorted_terms() if c < 0]
    if pos and neg:
        return [
            "-",
            _nested_sum([_term_form(m, c, names) for m, c in pos]),
            _nested_sum([_term_form(m, -c, names) for m, c in neg]),
        ]
    if pos:
        return _nested_sum([_term_form(m, c, names) for m, c in pos])
    return _nested_sum([_term_form(m, c, names) for m, c in neg])


def constraint_form(c: Constraint, names) -> Form:
    """Problem-polynomial body; a negated >=/> conclusion keeps its 0-minus shape."""
    if c.negated and c.kind in (RelKind.GEQ, RelKind.GT):
        return ["-", "0", poly_form(-c.poly, names)]
    return poly_form(c.poly, names)


def square_weight_fold(w: Fraction) -> tuple[Fraction, int | None]:
    """Split a positive weight as scale**2 * rest with integer rest.

    w * f**2 then renders as rest * (scale*f)**2; rest of 1 disappears.
    None for rest means the weight would not factor cheaply and should be
    rendered as a plain rational multiplier instead.
    """
    n, d = w.numerator, w.denominator
    target = n * d
    if target > 10**12:
        return Fraction(1), None
    square_part = 1
    rest = 1
    remaining = target
    f = 2
    while f * f <= remaining and f < 10**6:
        while remaining % (f * f) == 0:
            square_part *= f
            remaining //= f * f
        if remaining % f == 0:
            rest *= f
            remaining //= f
        f += 1
    root = math.isqrt(remaining)
    if root * root == remaining:
        square_part *= root
    else:
        rest *= remaining
    return Fraction(square_part, d), rest


def sos_form(sos, names) -> Form:
    """Weighted squares via the SQUARE helper, flat n-ary sum."""
    parts: list[Form] = []
    for w, f in sos.squares:
        scale, rest = square_weight_fold(w)
        if rest is None:
            parts.append(["*", _literal(w), ["SQUARE", poly_form(f, names)]])
            continue
        g = f.scale(scale)
        sq: Form = ["SQUARE", poly_form(g, names)]
        parts.append(sq if rest == 1 else ["*", str(rest), sq])
    if not parts:
        return "0"
    if len(parts) == 1:
        return parts[0]
    return ["+"] + parts


# ---------------------------------------------------------------------------
# pretty printer


def _flat(form: Form) -> str:
    if isinstance(form, str):
        return form
    return "(" + " ".join(_flat(x) for x in form) + ")"


def _pp(form: Form, indent: int) -> str:
    flat = _flat(form)
    if isinstance(form, str) or indent + len(flat) <= LINE_WIDTH or len(form) <= 1:
        return flat
    head = form[0]
    if head == "LOCAL" and len(form) == 2:
        inner = _pp(form[1], indent + 7)
        return f"(LOCAL {inner})"
    if isinstance(head, str):
        lines = [f"({head} " + _pp(form[1], indent + len(head) + 2)] if len(form) > 1 else [f"({head}"]
        pad = " " * (indent + 2)
        for child in form[2:]:
            lines.append(pad + _pp(child, indent + 2))
        return "\n".join(lines) + ")"
    pad = " " * (indent + 1)
    lines = ["(" + _pp(head, indent + 1)]
    for child in form[1:]:
        lines.append(pad + _pp(child, indent + 1))
    return "\n".join(lines) + ")"


def render_form(form: Form, indent: int = 1) -> str:
    return _pp(form, indent)


# ---------------------------------------------------------------------------
# emission


def _rat_hyps(names) -> list[Form]:
    return [["RATIONALP", v] for v in names]


def _call(name: str, names) -> Form:
    return [name] + list(names)


def _goal_atom(kind: RelKind, prob: Form) -> Form:
    op = {RelKind.EQ: "=", RelKind.GEQ: ">=", RelKind.GT: ">", RelKind.NEQ: "NEQ"}[kind]
    return [op, prob, "0"]


def _enable_hints(enables: list[str]) -> Form:
    return [":hints", [['"Goal"', ":in-theory", ["enable"] + enables]]]


def _defthm(name: str, body: Form, hints: Form | None, rule_classes: Form | None,
            local: bool = True, ttype: str = "DEFTHM") -> Form:
    inner: list[Form] = [ttype, name, body]
    if hints is not None:
        inner.extend(hints)
    if rule_classes is not None:
        inner.extend([":rule-classes", rule_classes])
    return ["LOCAL", inner] if local else inner


def emit(conj: Expr, sys: NormalizedSystem, cert: Certificate) -> ProofScript:
    """Render a verified certificate as the full ENCAPSULATE proof script."""
    report = verify(sys, cert)
    if not report.identity_ok:
        raise UnverifiedCertificateError(
            "; ".join(report.issues) or "certificate identity does not hold"
        )

    names = list(sys.var_names)
    constraints = sys.all_constraints()
    pool = sys.monoid_pool()
    events: list[Event] = [Event(k, n, t) for k, n, t in PREAMBLE]

    def add(kind: str, name: str | None, form: Form):
        events.append(Event(kind, name, render_form(form)))

    # Problem polynomials and the goal.
    for i, c in enumerate(constraints):
        add("prob", f"PROB-{i}",
            ["LOCAL", ["DEFUND", f"PROB-{i}", names, constraint_form(c, names)]])
    goal_atoms = [
        _goal_atom(c.kind, _call(f"PROB-{i}", names)) for i, c in enumerate(constraints)
    ]
    goal_body = ["IMPLIES", ["AND"] + _rat_hyps(names), ["NOT", ["AND"] + goal_atoms]]
    add("goal", "GOAL", ["LOCAL", ["DEFUN", "GOAL", names, goal_body]])

    not_goal_hyps = ["AND", ["NOT", _call("GOAL", names)]] + _rat_hyps(names)
    rat_only_hyps = ["AND"] + _rat_hyps(names)

    prob_names = [f"PROB-{i}" for i in range(len(constraints))]
    ideal_names: list[str] = []
    cone_names: list[str] = []
    monoid_names: list[str] = []

    # Ideal cofactors with type lemmas.
    for j, cof in cert.ideal_cofactors:
        name = f"IDEAL-CF-{j}"
        ideal_names.append(name)
        add("ideal", name, ["LOCAL", ["DEFUND", name, names, poly_form(cof, names)]])
        add("ideal-type", f"{name}-TYPE",
            _defthm(f"{name}-TYPE",
                    ["IMPLIES", rat_only_hyps, ["RATIONALP", _call(name, names)]],
                    _enable_hints([name]), None))

    # Cone cofactors with type and positivity lemmas.
    cone_summands: list[Form] = []
    for idx, (subset, sos) in enumerate(cert.cone_terms):
        name = f"CONE-CF-{idx}"
        cone_names.append(name)
        add("cone", name, ["LOCAL", ["DEFUND", name, names, sos_form(sos, names)]])
        add("cone-type", f"{name}-TYPE",
            _defthm(f"{name}-TYPE",
                    ["IMPLIES", rat_only_hyps, ["RATIONALP", _call(name, names)]],
                    _enable_hints([name]), None))
        add("cone-psd", f"{name}-PSD",
            _defthm(f"{name}-PSD",
                    ["IMPLIES", not_goal_hyps, [">=", _call(name, names), "0"]],
                    _enable_hints([name] + prob_names), [":linear"]))
        if subset:
            summand: Form = ["*", _call(name, names)] + [
                _call(f"PROB-{len(sys.equations) + i}", names) for i in subset
            ]
        else:
            summand = _call(name, names)
        cone_summands.append(summand)

    # Monoid cofactors (definitions only, matching the exemplar layout).
    monoid_factors: list[Form] = []
    for idx, (pool_index, power) in enumerate(cert.monoid_term):
        name = f"MONOID-CF-{idx}"
        monoid_names.append(name)
        add("monoid", name,
            ["LOCAL", ["DEFUND", name, names, constraint_form(pool[pool_index], names)]])
        monoid_factors.extend([_call(name, names)] * power)

    if not monoid_factors:
        monoid_summand: Form = "1"
    else:
        product = monoid_factors[0] if len(monoid_factors) == 1 else ["*"] + monoid_factors
        if monoid_exponent(sys, cert.monoid_term) == 2:
            monoid_summand = ["SQUARE", product]
        else:
            monoid_summand = product

    ideal_summands: list[Form] = [
        ["*", _call(f"IDEAL-CF-{j}", names), _call(f"PROB-{j}", names)]
        for j, _ in cert.ideal_cofactors
    ]

    summands = [monoid_summand] + cone_summands + ideal_summands
    cert_body: Form = summands[0] if len(summands) == 1 else ["+"] + summands
    add("cert", "CERT", ["LOCAL", ["DEFUN", "CERT", names, cert_body]])

    all_enable = ["SQUARE", "CERT"] + prob_names + ideal_names + cone_names + monoid_names

    add("cert-key", "CERT-KEY",
        _defthm("CERT-KEY",
                ["IMPLIES", rat_only_hyps, ["=", _call("CERT", names), "0"]],
                _enable_hints(all_enable), None, ttype="DEFTHMD"))

    for idx, (pool_index, _) in enumerate(cert.monoid_term):
        op = ">" if pool[pool_index].kind is RelKind.GT else "NEQ"
        add("contra-m", f"CERT-CONTRA-M-{idx}",
            _defthm(f"CERT-CONTRA-M-{idx}",
                    ["IMPLIES", not_goal_hyps,
                     [op, _call(f"MONOID-CF-{idx}", names), "0"]],
                    _enable_hints(all_enable), [":linear"]))

    for idx, summand in enumerate(cone_summands):
        hints = None if cert.cone_terms[idx][0] == () else _enable_hints(all_enable)
        add("contra-c", f"CERT-CONTRA-C-{idx}",
            _defthm(f"CERT-CONTRA-C-{idx}",
                    ["IMPLIES", not_goal_hyps, [">=", summand, "0"]],
                    hints, [":linear"]))

    for j, _ in cert.ideal_cofactors:
        add("contra-i", f"CERT-CONTRA-I-{j}",
            _defthm(f"CERT-CONTRA-I-{j}",
                    ["IMPLIES", not_goal_hyps,
                     ["=", ["*", _call(f"IDEAL-CF-{j}", names), _call(f"PROB-{j}", names)], "0"]],
                    _enable_hints(all_enable), [":linear"]))

    add("contra", "CERT-CONTRA",
        _defthm("CERT-CONTRA",
                ["IMPLIES", not_goal_hyps, ["NEQ", _call("CERT", names), "0"]],
                None, "nil"))

    add("main", "MAIN",
        _defthm("MAIN",
                ["IMPLIES", rat_only_hyps, _call("GOAL", names)],
                [":hints", [['"Goal"', ":in-theory", ["disable", "GOAL"],
                             ":use", ["CERT-KEY", "CERT-CONTRA"]]]],
                "nil"))

    # FINAL restates the conjecture verbatim under rationality hypotheses.
    if isinstance(conj, Implies):
        hyp_atoms = list(conj.hyp.args) if isinstance(conj.hyp, And) else [conj.hyp]
        concl = conj.concl
    else:
        hyp_atoms = []
        concl = conj
    final_hyps = ["AND"] + _rat_hyps(names) + [_raw(print_expr(a)) for a in hyp_atoms]
    final_body = ["IMPLIES", final_hyps, _raw(print_expr(concl))]
    add("final", "FINAL",
        _defthm("FINAL", final_body,
                [":hints", [['"Goal"', ":in-theory", ["enable", "GOAL"] + prob_names,
                             ":use", ["MAIN"]]]],
                "nil", local=False))

    rendered = _render_script(events)
    return ProofScript(tuple(events), rendered)


def _raw(text: str) -> Form:
    """Re-read printed Expr text into a token tree for the pretty printer."""
    return _sexp_to_form(sexp.read_one(text))


def _sexp_to_form(s) -> Form:
    if isinstance(s, list):
        return [_sexp_to_form(x) for x in s]
    return sexp.print_sexp(s)


_SECTION_COMMENTS = {
    "prob": ";; Normalized problem polynomials",
    "goal": ";; Normalized goal expressed using problem polynomials",
    "ideal": ";; Ideal cofactors",
    "cone": ";; Cone cofactors",
    "monoid": ";; Monoid cofactors",
    "cert": ";; Positivstellensatz certificate",
    "cert-key": ";; Contradictory results on the sign of the certificate",
    "main": ";; Main lemma",
    "final": ";; Final theorem",
}


def _render_script(events: list[Event]) -> str:
    lines = ["(ENCAPSULATE ()", "", ";; Preamble", ""]
    emitted_sections = set()
    for ev in events:
        comment = _SECTION_COMMENTS.get(ev.kind)
        if comment and ev.kind not in emitted_sections:
            emitted_sections.add(ev.kind)
            lines.extend(["", comment, ""])
        body = " " + ev.text.replace("\n", "\n ")
        lines.append(body)
        lines.append("")
    while lines and lines[-1] == "":
        lines.pop()
    lines[-1] = lines[-1] + ")"
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# canonicalization, linting, re-expansion


def canonical_text(text: str) -> str:
    """Comparison form: comments stripped, whitespace runs collapsed."""
    no_comments = re.sub(r";[^\n]*", " ", text)
    return " ".join(no_comments.split())


_BUILTINS = {
    "ENCAPSULATE", "LOCAL", "DEFUN", "DEFUND", "DEFTHM", "DEFTHMD", "DEFMACRO",
    "SET-IGNORE-OK", "SET-IRRELEVANT-FORMALS-OK", "IN-THEORY", "INCLUDE-BOOK",
    "ENABLE", "DISABLE", "IMPLIES", "AND", "OR", "NOT", "RATIONALP",
    "+", "-", "*", "/", "=", "<", "<=", ">", ">=", "T", "NIL", "`", ",", "'",
}

_GENERATED = re.compile(r"^(PROB-\d+|IDEAL-CF-\d+|CONE-CF-\d+|MONOID-CF-\d+|"
                        r"CERT(-KEY|-CONTRA(-[MCI]-\d+)?)?|GOAL|MAIN|FINAL|SQUARE(-PSD|-TYPE)?|NEQ)$")


def lint(script: ProofScript) -> list[Diagnostic]:
    """Structural checks on the rendered script; empty list means clean."""
    diags: list[Diagnostic] = []
    try:
        forms = sexp.read_all(script.rendered)
    except sexp.SexpSyntaxError as exc:
        return [Diagnostic("unbalanced", str(exc))]
    if len(forms) != 1 or not isinstance(forms[0], list) or forms[0][:1] != ["ENCAPSULATE"]:
        return [Diagnostic("structure", "expected a single ENCAPSULATE form")]
    body = forms[0][2:]

    defined: dict[str, list] = {}
    functions: list[str] = []
    order: list[tuple[str, bool]] = []  # (name or kind, is_local)
    for event in body:
        is_local = isinstance(event, list) and event[:1] == ["LOCAL"]
        inner = event[1] if is_local else event
        name = None
        if isinstance(inner, list) and len(inner) >= 2 and isinstance(inner[0], str):
            if inner[0] in ("DEFUN", "DEFUND", "DEFTHM", "DEFTHMD", "DEFMACRO"):
                name = inner[1] if isinstance(inner[1], str) else None
                if name:
                    if name in defined:
                        diags.append(Diagnostic("duplicate-name", f"{name} defined twice"))
                    defined[name] = inner
                    if inner[0] in ("DEFUN", "DEFUND", "DEFMACRO"):
                        functions.append(name)
        order.append((name or "", is_local))

    final_positions = [i for i, (n, _) in enumerate(order) if n == "FINAL"]
    if len(final_positions) != 1:
        diags.append(Diagnostic("final", f"expected exactly one FINAL, found {len(final_positions)}"))
    else:
        fpos = final_positions[0]
        if order[fpos][1]:
            diags.append(Diagnostic("final", "FINAL must not be LOCAL"))
        toggles = {"SET-IGNORE-OK", "SET-IRRELEVANT-FORMALS-OK"}
        for i, (n, is_local) in enumerate(order):
            head = body[i][0] if isinstance(body[i], list) and body[i] else None
            if i != fpos and not is_local and head not in toggles:
                diags.append(Diagnostic("ordering", f"non-LOCAL event {n or i} besides FINAL"))
            if i > fpos:
                diags.append(Diagnostic("ordering", f"event {n or i} appears after FINAL"))

    # Name discipline: generated names must be defined wherever referenced,
    # and every defined function must be referenced outside its definition.
    used: dict[str, int] = {}

    def walk(form, skip_head_name=None):
        if not isinstance(form, list):
            return
        for child in form:
            if isinstance(child, str):
                if _GENERATED.match(child) or child in defined:
                    if child != skip_head_name:
                        used[child] = used.get(child, 0) + 1
                    if child not in defined and child not in _BUILTINS and _GENERATED.match(child):
                        diags.append(Diagnostic("undefined-name", f"{child} referenced but not defined"))
            elif isinstance(child, list):
                walk(child, skip_head_name)

    for event in body:
        is_local = isinstance(event, list) and event[:1] == ["LOCAL"]
        inner = event[1] if is_local else event
        name = inner[1] if isinstance(inner, list) and len(inner) >= 2 and isinstance(inner[1], str) else None
        if isinstance(inner, list):
            walk(inner[2:] if name else inner, skip_head_name=name)

    for fn in functions:
        if used.get(fn, 0) == 0:
            diags.append(Diagnostic("unused-function", f"{fn} defined but never referenced"))

    # Variable discipline: all generated definitions share one argument list,
    # and every rationality-guarded lemma covers every variable.
    arg_lists = []
    for name, inner in defined.items():
        if inner[0] in ("DEFUN", "DEFUND") and _GENERATED.match(name) and name != "SQUARE":
            if len(inner) >= 3 and isinstance(inner[2], list):
                arg_lists.append((name, tuple(inner[2])))
    if arg_lists:
        reference = arg_lists[0][1]
        for name, args in arg_lists[1:]:
            if args != reference:
                diags.append(Diagnostic("variables", f"{name} argument list {args} differs from {reference}"))
        for name, inner in defined.items():
            if inner[0] in ("DEFTHM", "DEFTHMD") and _GENERATED.match(name) and not name.startswith("SQUARE"):
                guards = set()

                def collect(form):
                    if isinstance(form, list):
                        if form[:1] == ["RATIONALP"] and len(form) == 2 and isinstance(form[1], str):
                            guards.add(form[1])
                        for ch in form:
                            collect(ch)

                collect(inner[2] if len(inner) > 2 else [])
                missing = [v for v in reference if v not in guards]
                if missing:
                    diags.append(Diagnostic(
                        "rationality", f"{name} lacks RATIONALP guards for {missing}"))
    return diags


@dataclass(frozen=True)
class ReexpandResult:
    var_names: tuple[str, ...]
    prob_polys: tuple[Polynomial, ...]
    cert_poly: Polynomial


def reexpand(script_text: str) -> ReexpandResult:
    """Re-parse PROB-i and CERT bodies and expand them back to polynomials.

    Definitions are inlined (SQUARE included), so the returned cert_poly is
    the exact polynomial the CERT-KEY lemma asserts to be zero.
    """
    forms = sexp.read_all(script_text)
    if len(forms) != 1 or not isinstance(forms[0], list):
        raise ValueError("expected a single ENCAPSULATE form")
    env: dict[str, tuple[list, object]] = {}
    for event in forms[0][2:]:
        inner = event[1] if isinstance(event, list) and event[:1] == ["LOCAL"] else event
        if (
            isinstance(inner, list)
            and len(inner) >= 4
            and inner[0] in ("DEFUN", "DEFUND")
            and isinstance(inner[1], str)
        ):
            env[inner[1]] = (list(inner[2]), inner[3])
    if "PROB-0" not in env or "CERT" not in env:
        raise ValueError("script lacks PROB-0 or CERT definitions")
    var_names = tuple(env["PROB-0"][0])
    var_index = {n: i for i, n in enumerate(var_names)}

    def inline(form):
        if not isinstance(form, list) or not form:
            return form
        head = form[0]
        if isinstance(head, str) and head in env and head not in ("GOAL",):
            formals, fbody = env[head]
            binding = dict(zip(formals, form[1:]))
            return inline(_substitute(fbody, binding))
        return [inline(x) for x in form]

    def to_poly(form) -> Polynomial:
        from .frontend import to_polynomial

        return to_polynomial(_build_arith(form), var_index)

    prob_polys = []
    i = 0
    while f"PROB-{i}" in env:
        prob_polys.append(to_poly(inline(env[f"PROB-{i}"][1])))
        i += 1
    cert_poly = to_poly(inline(env["CERT"][1]))
    return ReexpandResult(var_names, tuple(prob_polys), cert_poly)


def _substitute(form, binding: dict):
    if isinstance(form, str):
        return binding.get(form, form)
    if isinstance(form, list):
        return [_substitute(x, binding) for x in form]
    return form
