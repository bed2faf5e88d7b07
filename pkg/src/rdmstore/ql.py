"""The query language: AST, tokenizer, parser, canonical printer.

Queries are English-like sentences::

    COUNT Experiment WITH date IN 2017
    FIND Person WHICH IS REFERENCED AS AN Author BY AN Article
        WHICH HAS A Title LIKE *terminating ventricular fibrillation*
    SELECT first name, family name FROM person WITH date of birth > 2000

Keywords are case-insensitive. ``WHICH``, ``WHICH HAS A`` and ``WITH``
are interchangeable filter separators; the articles A/AN/THE are noise
words inside filters. Names and property names may contain spaces; a
name that needs a reserved word must be double-quoted. Operator
precedence is NOT > AND > OR, parentheses override.

The canonical printer upper-cases keywords, uses single spaces and the
``WHICH HAS A`` separator, quotes every text literal and pattern, and
parenthesizes every boolean group, so that ``parse(print(ast))``
structurally equals ``ast``.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass
from typing import Optional, Union

from . import units
from .errors import QuerySyntaxError
from .units import UnitRegistry

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class QuantityLit:
    magnitude: float
    unit_symbol: str


@dataclass(frozen=True)
class TextLit:
    text: str


@dataclass(frozen=True)
class PatternLit:
    """LIKE pattern; ``*`` is the multi-character wildcard."""

    pattern: str


@dataclass(frozen=True)
class DateLit:
    value: dt.date


@dataclass(frozen=True)
class DatetimeLit:
    value: dt.datetime


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class DoubleLit:
    value: float


Literal = Union[QuantityLit, TextLit, PatternLit, DateLit, DatetimeLit, BoolLit, IntLit, DoubleLit]


@dataclass(frozen=True)
class Comparison:
    prop: str
    op: str  # = != < <= > >= LIKE
    literal: Literal


@dataclass(frozen=True)
class InYear:
    prop: str
    year: int


@dataclass(frozen=True)
class Conjunction:
    children: tuple["Filter", ...]


@dataclass(frozen=True)
class Disjunction:
    children: tuple["Filter", ...]


@dataclass(frozen=True)
class Negation:
    child: "Filter"


@dataclass(frozen=True)
class SubQuery:
    name: str
    filter: Optional["Filter"] = None


@dataclass(frozen=True)
class Reference:
    """Matches entities holding a reference to something in the target set."""

    role: Optional[str]
    target: SubQuery


@dataclass(frozen=True)
class BackReference:
    """Matches entities referenced by something in the source set."""

    role: Optional[str]
    source: SubQuery


Filter = Union[Comparison, InYear, Conjunction, Disjunction, Negation, Reference, BackReference]

KINDS = ("ENTITY", "RECORDTYPE", "RECORD", "PROPERTY", "FILE")


@dataclass(frozen=True)
class QueryAst:
    prefix: str  # FIND | COUNT | SELECT
    name: Optional[str]  # None only with a kind restriction: match all of that kind
    kind: Optional[str] = None  # one of KINDS
    fields: tuple[str, ...] = ()  # SELECT only, non-empty there
    filter: Optional[Filter] = None


# ---------------------------------------------------------------------------
# tokenizer

RESERVED = frozenset(
    {
        "FIND", "COUNT", "SELECT", "FROM",
        "WHICH", "WITH", "HAS",
        "A", "AN", "THE",
        "AND", "OR", "NOT",
        "LIKE", "IN", "IS",
        "REFERENCED", "REFERENCES", "BY", "AS",
        "TRUE", "FALSE",
        *KINDS,
    }
)

ARTICLES = frozenset({"A", "AN", "THE"})
SEPARATOR_HEADS = frozenset({"WHICH", "WITH"})

_WORD_RE = re.compile(r"[0-9A-Za-z_.*°µ%:+\-]+")
_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_QUANTITY_WORD_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)([A-Za-z°µ%]+)$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_DATETIME_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T[\d:.]+$")


@dataclass(frozen=True)
class Token:
    kind: str  # WORD QUOTED OP LPAREN RPAREN COMMA END
    text: str
    pos: int

    @property
    def upper(self) -> str:
        return self.text.upper()


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "(":
            tokens.append(Token("LPAREN", c, i)); i += 1
        elif c == ")":
            tokens.append(Token("RPAREN", c, i)); i += 1
        elif c == ",":
            tokens.append(Token("COMMA", c, i)); i += 1
        elif c in "<>!=":
            if c == "!" and text[i : i + 2] != "!=":
                raise QuerySyntaxError("stray '!'", i, ("!=",))
            op = text[i : i + 2] if text[i : i + 2] in ("!=", "<=", ">=") else c
            if op == "=" and c == "!":
                op = "!="
            tokens.append(Token("OP", op, i)); i += len(op)
        elif c == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    out.append(text[j + 1]); j += 2
                else:
                    out.append(text[j]); j += 1
            if j >= n:
                raise QuerySyntaxError("unterminated string", i, ('"',))
            tokens.append(Token("QUOTED", "".join(out), i)); i = j + 1
        else:
            m = _WORD_RE.match(text, i)
            if m is None:
                raise QuerySyntaxError(f"unexpected character {c!r}", i)
            tokens.append(Token("WORD", m.group(0), i)); i = m.end()
    tokens.append(Token("END", "", n))
    return tokens


# ---------------------------------------------------------------------------
# parser


class _Cursor:
    def __init__(self, tokens: list[Token], registry: UnitRegistry):
        self.tokens = tokens
        self.i = 0
        self.registry = registry

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "END":
            self.i += 1
        return t

    def at_keyword(self, *words: str) -> bool:
        t = self.peek()
        return t.kind == "WORD" and t.upper in words

    def expect_keyword(self, word: str) -> Token:
        if not self.at_keyword(word):
            t = self.peek()
            raise QuerySyntaxError(f"expected {word}, got {t.text!r}", t.pos, (word,))
        return self.next()

    def error(self, message: str, expected=()) -> QuerySyntaxError:
        return QuerySyntaxError(message, self.peek().pos, expected)


# Tokens that end a name/property/text/pattern phrase.
_PHRASE_STOP = frozenset(
    {"WHICH", "WITH", "AND", "OR", "NOT", "LIKE", "IN", "IS",
     "REFERENCED", "REFERENCES", "BY", "FROM"}
)


def _phrase(cur: _Cursor, stop: frozenset[str] = _PHRASE_STOP) -> Optional[str]:
    """A run of words / quoted strings joined by single spaces."""
    parts: list[str] = []
    while True:
        t = cur.peek()
        if t.kind == "QUOTED":
            parts.append(t.text); cur.next()
        elif t.kind == "WORD" and t.upper not in stop:
            parts.append(t.text); cur.next()
        else:
            break
    return " ".join(parts) if parts else None


def _skip_articles(cur: _Cursor) -> None:
    while cur.at_keyword(*ARTICLES):
        cur.next()


def _skip_separator(cur: _Cursor) -> bool:
    """Consume WHICH [HAS A] | WITH if present."""
    if cur.at_keyword("WITH"):
        cur.next()
        return True
    if cur.at_keyword("WHICH"):
        cur.next()
        if cur.at_keyword("HAS"):
            cur.next()
            _skip_articles(cur)
        return True
    return False


def _parse_literal(cur: _Cursor) -> Literal:
    t = cur.peek()
    if t.kind == "QUOTED":
        cur.next()
        return TextLit(t.text)
    if t.kind != "WORD":
        raise cur.error("expected a value", ("value",))
    if t.upper == "TRUE":
        cur.next(); return BoolLit(True)
    if t.upper == "FALSE":
        cur.next(); return BoolLit(False)
    if _DATETIME_RE.match(t.text):
        cur.next()
        try:
            return DatetimeLit(dt.datetime.fromisoformat(t.text))
        except ValueError:
            raise QuerySyntaxError(f"bad datetime {t.text!r}", t.pos) from None
    if _DATE_RE.match(t.text):
        cur.next()
        try:
            return DateLit(dt.date.fromisoformat(t.text))
        except ValueError:
            raise QuerySyntaxError(f"bad date {t.text!r}", t.pos) from None
    if _NUMBER_RE.match(t.text):
        cur.next()
        nxt = cur.peek()
        if (
            nxt.kind == "WORD"
            and nxt.upper not in RESERVED
            and cur.registry.known(nxt.text)
        ):
            cur.next()
            return QuantityLit(float(t.text), cur.registry.get(nxt.text).symbol)
        if re.fullmatch(r"[+-]?\d+", t.text):
            return IntLit(int(t.text))
        return DoubleLit(float(t.text))
    m = _QUANTITY_WORD_RE.match(t.text)
    if m and cur.registry.known(m.group(2)):
        cur.next()
        return QuantityLit(float(m.group(1)), cur.registry.get(m.group(2)).symbol)
    # fall back to a bare text phrase
    text = _phrase(cur)
    if text is None:
        raise cur.error("expected a value", ("value",))
    return TextLit(text)


def _parse_pattern(cur: _Cursor) -> PatternLit:
    t = cur.peek()
    if t.kind == "QUOTED":
        cur.next()
        return PatternLit(t.text)
    text = _phrase(cur)
    if text is None:
        raise cur.error("expected a pattern after LIKE", ("pattern",))
    return PatternLit(text)


def _parse_subquery(cur: _Cursor) -> SubQuery:
    _skip_articles(cur)
    name = _phrase(cur)
    if name is None:
        raise cur.error("expected an entity name", ("name",))
    sub_filter = None
    if cur.at_keyword(*SEPARATOR_HEADS):
        # One nested atom only; boolean groups need explicit parentheses,
        # otherwise a trailing AND would be ambiguous between the nested
        # chain and the enclosing conjunction.
        sub_filter = _parse_atom(cur)
    return SubQuery(name, sub_filter)


def _parse_backreference(cur: _Cursor) -> BackReference:
    # [IS] REFERENCED [AS <role>] BY <subquery>
    if cur.at_keyword("IS"):
        cur.next()
    cur.expect_keyword("REFERENCED")
    role = None
    if cur.at_keyword("AS"):
        cur.next()
        _skip_articles(cur)
        role = _phrase(cur, stop=frozenset({"BY"}) | _PHRASE_STOP)
        if role is None:
            raise cur.error("expected a role name after AS", ("role",))
    cur.expect_keyword("BY")
    return BackReference(role, _parse_subquery(cur))


def _parse_atom(cur: _Cursor) -> Filter:
    _skip_separator(cur)
    _skip_articles(cur)
    if cur.at_keyword("NOT"):
        cur.next()
        return Negation(_parse_atom(cur))
    if cur.peek().kind == "LPAREN":
        cur.next()
        inner = _parse_disjunction(cur)
        if cur.peek().kind != "RPAREN":
            raise cur.error("expected ')'", (")",))
        cur.next()
        return inner
    if cur.at_keyword("IS", "REFERENCED"):
        return _parse_backreference(cur)
    if cur.at_keyword("REFERENCES"):
        cur.next()
        return Reference(None, _parse_subquery(cur))
    prop = _phrase(cur)
    if prop is None:
        raise cur.error("expected a filter", ("filter",))
    t = cur.peek()
    if t.kind == "OP":
        cur.next()
        return Comparison(prop, t.text, _parse_literal(cur))
    if cur.at_keyword("LIKE"):
        cur.next()
        return Comparison(prop, "LIKE", _parse_pattern(cur))
    if cur.at_keyword("IN"):
        cur.next()
        year_tok = cur.peek()
        if year_tok.kind != "WORD" or not re.fullmatch(r"\d{1,4}", year_tok.text):
            raise cur.error("expected a year after IN", ("year",))
        cur.next()
        return InYear(prop, int(year_tok.text))
    if cur.at_keyword("REFERENCES"):
        cur.next()
        return Reference(prop, _parse_subquery(cur))
    raise cur.error("expected an operator, LIKE, IN or REFERENCES", ("operator",))


def _parse_conjunction(cur: _Cursor) -> Filter:
    children = [_parse_atom(cur)]
    while cur.at_keyword("AND"):
        cur.next()
        children.append(_parse_atom(cur))
    return children[0] if len(children) == 1 else Conjunction(tuple(children))


def _parse_disjunction(cur: _Cursor) -> Filter:
    children = [_parse_conjunction(cur)]
    while cur.at_keyword("OR"):
        cur.next()
        children.append(_parse_conjunction(cur))
    return children[0] if len(children) == 1 else Disjunction(tuple(children))


def parse(text: str, registry: UnitRegistry = units.DEFAULT_REGISTRY) -> QueryAst:
    cur = _Cursor(tokenize(text), registry)
    t = cur.peek()
    if not cur.at_keyword("FIND", "COUNT", "SELECT"):
        raise QuerySyntaxError(
            f"query must start with FIND, COUNT or SELECT, got {t.text!r}",
            t.pos,
            ("FIND", "COUNT", "SELECT"),
        )
    prefix = t.upper
    cur.next()
    fields: tuple[str, ...] = ()
    if prefix == "SELECT":
        out = []
        while True:
            f = _phrase(cur)
            if f is None:
                raise cur.error("expected a field name", ("field",))
            out.append(f)
            if cur.peek().kind == "COMMA":
                cur.next()
                continue
            break
        cur.expect_keyword("FROM")
        fields = tuple(out)
    kind = None
    if cur.at_keyword(*KINDS):
        kind = cur.next().upper
    name = _phrase(cur)
    if name is None and kind is None:
        raise cur.error("expected an entity name", ("name",))
    flt = None
    if _skip_separator(cur):
        flt = _parse_disjunction(cur)
    end = cur.peek()
    if end.kind != "END":
        raise QuerySyntaxError(f"unexpected trailing input {end.text!r}", end.pos)
    return QueryAst(prefix=prefix, name=name, kind=kind, fields=fields, filter=flt)


# ---------------------------------------------------------------------------
# canonical printer

_SAFE_WORD_RE = re.compile(r"^[0-9A-Za-z_.°µ%:+\-]+$")


def _print_name(name: str) -> str:
    words = name.split(" ")
    safe = all(
        w and _SAFE_WORD_RE.match(w) and w.upper() not in RESERVED and "*" not in w
        for w in words
    )
    # a leading number would be taken for a literal in some positions
    if safe and not _NUMBER_RE.match(words[0]) and not _QUANTITY_WORD_RE.match(words[0]):
        return name
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _print_literal(lit: Literal) -> str:
    if isinstance(lit, IntLit):
        return str(lit.value)
    if isinstance(lit, DoubleLit):
        return repr(lit.value)
    if isinstance(lit, QuantityLit):
        return f"{repr(lit.magnitude)} {lit.unit_symbol}"
    if isinstance(lit, BoolLit):
        return "TRUE" if lit.value else "FALSE"
    if isinstance(lit, (DateLit, DatetimeLit)):
        return lit.value.isoformat()
    if isinstance(lit, (TextLit, PatternLit)):
        raw = lit.text if isinstance(lit, TextLit) else lit.pattern
        return '"' + raw.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"unknown literal {lit!r}")


def _print_subquery(sub: SubQuery) -> str:
    out = _print_name(sub.name)
    if sub.filter is not None:
        out += " WHICH HAS A " + _print_filter(sub.filter)
    return out


def _print_filter(f: Filter) -> str:
    if isinstance(f, Comparison):
        return f"{_print_name(f.prop)} {f.op} {_print_literal(f.literal)}"
    if isinstance(f, InYear):
        return f"{_print_name(f.prop)} IN {f.year}"
    if isinstance(f, Conjunction):
        return "(" + " AND ".join(_print_filter(c) for c in f.children) + ")"
    if isinstance(f, Disjunction):
        return "(" + " OR ".join(_print_filter(c) for c in f.children) + ")"
    if isinstance(f, Negation):
        child = _print_filter(f.child)
        if isinstance(f.child, (Conjunction, Disjunction)):
            return "NOT " + child
        return "NOT (" + child + ")"
    if isinstance(f, Reference):
        role = _print_name(f.role) + " " if f.role is not None else ""
        return f"{role}REFERENCES {_print_subquery(f.target)}"
    if isinstance(f, BackReference):
        role = f"AS {_print_name(f.role)} " if f.role is not None else ""
        return f"IS REFERENCED {role}BY {_print_subquery(f.source)}"
    raise TypeError(f"unknown filter {f!r}")


def print_query(ast: QueryAst) -> str:
    parts = [ast.prefix]
    if ast.prefix == "SELECT":
        parts.append(", ".join(_print_name(f) for f in ast.fields))
        parts.append("FROM")
    if ast.kind is not None:
        parts.append(ast.kind)
    if ast.name is not None:
        parts.append(_print_name(ast.name))
    if ast.filter is not None:
        parts.append("WHICH HAS A")
        parts.append(_print_filter(ast.filter))
    return " ".join(parts)
