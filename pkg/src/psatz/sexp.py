"""Minimal S-expression reader and printer.

Atoms are Python values: str for symbols (upcased, Lisp reader style),
str wrapped in SexpString for string literals, Fraction for integer and
ratio literals.  Decimal literals are rejected; only exact numbers are
meaningful downstream.  `;` starts a comment running to end of line.
Quasiquote characters (` , ') become single-character symbol atoms so
proof-script preambles can be re-read without special handling.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Sexp = Union[str, Fraction, "SexpString", list]

_DELIMS = "()`',"
_INT_CHARS = set("0123456789")


class SexpSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class SexpString:
    """A double-quoted string literal (kept distinct from symbols)."""

    value: str


@dataclass(frozen=True)
class Token:
    kind: str  # "open" | "close" | "atom"
    value: Sexp | None
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        col += 1
        if ch == "\n":
            line += 1
            col = 0
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "(":
            tokens.append(Token("open", None, line, col))
            i += 1
            continue
        if ch == ")":
            tokens.append(Token("close", None, line, col))
            i += 1
            continue
        if ch in "`',":
            tokens.append(Token("atom", ch, line, col))
            i += 1
            continue
        if ch == '"':
            start_line, start_col = line, col
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise SexpSyntaxError("newline in string literal", start_line, start_col)
                buf.append(text[j])
                j += 1
            if j >= n:
                raise SexpSyntaxError("unterminated string literal", start_line, start_col)
            tokens.append(Token("atom", SexpString("".join(buf)), line, col))
            col += j - i
            i = j + 1
            continue
        # symbol or number
        j = i
        while j < n and text[j] not in " \t\r\n;()\"" and text[j] not in "`',":
            j += 1
        word = text[i:j]
        tokens.append(Token("atom", _atom(word, line, col), line, col))
        col += j - i - 1
        i = j
    return tokens


def _atom(word: str, line: int, col: int) -> Sexp:
    body = word[1:] if word[0] in "+-" else word
    if body and all(c in _INT_CHARS for c in body):
        return Fraction(word)
    if body and "/" in body:
        num, _, den = body.partition("/")
        if num and den and all(c in _INT_CHARS for c in num) and all(c in _INT_CHARS for c in den):
            if den.lstrip("0") == "":
                raise SexpSyntaxError(f"zero denominator in literal {word!r}", line, col)
            return Fraction(word)
    if body and "." in body and any(c in _INT_CHARS for c in body):
        raise SexpSyntaxError(
            f"decimal literal {word!r} not supported; use an integer or ratio", line, col
        )
    return word.upper()


def read_all(text: str) -> list[Sexp]:
    """Parse every top-level form in the text."""
    tokens = tokenize(text)
    forms: list[Sexp] = []
    pos = 0
    while pos < len(tokens):
        form, pos = _read_form(tokens, pos)
        forms.append(form)
    return forms


def read_one(text: str) -> Sexp:
    """Parse exactly one top-level form; trailing forms are an error."""
    forms = read_all(text)
    if not forms:
        raise SexpSyntaxError("empty input", 1, 1)
    if len(forms) > 1:
        raise SexpSyntaxError("expected a single form", 1, 1)
    return forms[0]


def _read_form(tokens: list[Token], pos: int) -> tuple[Sexp, int]:
    tok = tokens[pos]
    if tok.kind == "atom":
        return tok.value, pos + 1
    if tok.kind == "close":
        raise SexpSyntaxError("unexpected )", tok.line, tok.col)
    items: list[Sexp] = []
    pos += 1
    while True:
        if pos >= len(tokens):
            raise SexpSyntaxError("unclosed (", tok.line, tok.col)
        if tokens[pos].kind == "close":
            return items, pos + 1
        item, pos = _read_form(tokens, pos)
        items.append(item)


def print_sexp(form: Sexp) -> str:
    if isinstance(form, list):
        return "(" + " ".join(print_sexp(x) for x in form) + ")"
    if isinstance(form, SexpString):
        return f'"{form.value}"'
    if isinstance(form, Fraction):
        if form.denominator == 1:
            return str(form.numerator)
        return f"{form.numerator}/{form.denominator}"
    return form
