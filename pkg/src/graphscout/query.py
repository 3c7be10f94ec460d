"""Text DSL for analyst query graphs.

A query graph names the indicator pattern an analyst is looking for,
optional country/organization context filters, a match threshold, and
the matching mode:

    query "travel ring" {
      # weighted indicator requirements
      indicator "C2" weight 2.0
      indicator "C5"
      in "Atlantis"            # country filter
      with "Crimson Hand"      # organization filter
      threshold 0.7
      mode neighborhood radius 2
    }

Defaults: weight 1.0, threshold 0.7, mode individual, radius 1.
`parse` and `print_query` are exact inverses on valid queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .taxonomy import IndicatorTaxonomy

KEYWORDS = frozenset(
    ["query", "indicator", "weight", "in", "with", "threshold", "mode",
     "individual", "neighborhood", "radius"]
)

DEFAULT_WEIGHT = 1.0
DEFAULT_THRESHOLD = 0.7


class Mode(str, Enum):
    INDIVIDUAL = "individual"
    NEIGHBORHOOD = "neighborhood"


@dataclass(frozen=True)
class IndicatorRequirement:
    category: str
    weight: float = DEFAULT_WEIGHT


@dataclass(frozen=True)
class QueryGraph:
    name: str
    requirements: tuple[IndicatorRequirement, ...]
    country_filter: str | None = None
    org_filter: str | None = None
    threshold: float = DEFAULT_THRESHOLD
    mode: Mode = Mode.INDIVIDUAL
    radius: int = 1


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class QueryError(Exception):
    """Base for every tokenizer/parser failure; positions are 1-based."""

    code = "QueryError"

    def __init__(self, line: int, column: int, message: str,
                 expected: list[str] | None = None, offset: int = 0):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message
        self.expected = expected or []
        self.offset = offset  # 0-based char offset into the input, <= len(input)


class UnterminatedStringError(QueryError):
    code = "UnterminatedString"


class IllegalCharacterError(QueryError):
    code = "IllegalCharacter"


class ParseError(QueryError):
    code = "ParseError"


class DuplicateClauseError(ParseError):
    code = "DuplicateClause"


class ThresholdOutOfRangeError(ParseError):
    code = "ThresholdOutOfRange"


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

class TokenType(str, Enum):
    KEYWORD = "keyword"
    IDENT = "identifier"
    STRING = "string"
    NUMBER = "number"
    LBRACE = "{"
    RBRACE = "}"
    EOF = "end of input"


@dataclass(frozen=True)
class Token:
    type: TokenType
    value: str | float
    raw: str
    line: int
    column: int
    offset: int


def _is_digit(ch: str) -> bool:
    # ASCII only: str.isdigit() admits characters float() cannot read ('²').
    return "0" <= ch <= "9"


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def tokenize(text: str) -> list[Token]:
    """Lex the DSL. Comments run from '#' to end of line.

    Strings are double-quoted with escapes \\" and \\\\ only; any other
    character, including newlines, stands for itself. Raises
    UnterminatedStringError or IllegalCharacterError with position.
    """
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(ch: str) -> None:
        nonlocal i, line, col
        i += 1
        if ch == "\n":
            line += 1
            col = 1
        else:
            col += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(ch)
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                advance(text[i])
            continue
        start_line, start_col, start_off = line, col, i
        if ch == "{":
            tokens.append(Token(TokenType.LBRACE, "{", "{", line, col, i))
            advance(ch)
            continue
        if ch == "}":
            tokens.append(Token(TokenType.RBRACE, "}", "}", line, col, i))
            advance(ch)
            continue
        if ch == '"':
            advance(ch)
            parts: list[str] = []
            while True:
                if i >= n:
                    raise UnterminatedStringError(
                        start_line, start_col, "unterminated string literal",
                        offset=start_off)
                cur = text[i]
                if cur == '"':
                    advance(cur)
                    break
                if cur == "\\":
                    if i + 1 >= n:
                        raise UnterminatedStringError(
                            start_line, start_col, "unterminated string literal",
                            offset=start_off)
                    esc = text[i + 1]
                    if esc not in ('"', "\\"):
                        raise IllegalCharacterError(
                            line, col + 1, f"unsupported escape \\{esc}", offset=i + 1)
                    advance(cur)
                    parts.append(esc)
                    advance(esc)
                    continue
                parts.append(cur)
                advance(cur)
            raw = text[start_off:i]
            tokens.append(Token(TokenType.STRING, "".join(parts), raw,
                                start_line, start_col, start_off))
            continue
        if _is_digit(ch):
            j = i
            while j < n and _is_digit(text[j]):
                j += 1
            if j < n and text[j] == "." and j + 1 < n and _is_digit(text[j + 1]):
                j += 1
                while j < n and _is_digit(text[j]):
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and _is_digit(text[k]):
                    j = k
                    while j < n and _is_digit(text[j]):
                        j += 1
            raw = text[i:j]
            while i < j:
                advance(text[i])
            value = float(raw)
            if not math.isfinite(value):
                raise IllegalCharacterError(start_line, start_col,
                                            f"number literal out of range: {raw}",
                                            offset=start_off)
            tokens.append(Token(TokenType.NUMBER, value, raw,
                                start_line, start_col, start_off))
            continue
        if _is_ident_start(ch):
            j = i
            while j < n and _is_ident_char(text[j]):
                j += 1
            raw = text[i:j]
            while i < j:
                advance(text[i])
            ttype = TokenType.KEYWORD if raw in KEYWORDS else TokenType.IDENT
            tokens.append(Token(ttype, raw, raw, start_line, start_col, start_off))
            continue
        raise IllegalCharacterError(line, col, f"illegal character {ch!r}", offset=i)

    tokens.append(Token(TokenType.EOF, "", "", line, col, n))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def take(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.type is not TokenType.EOF:
            self.pos += 1
        return tok

    def fail(self, tok: Token, message: str, expected: list[str]) -> "ParseError":
        return ParseError(tok.line, tok.column, message, expected, tok.offset)

    def expect_keyword(self, word: str) -> Token:
        tok = self.take()
        if tok.type is not TokenType.KEYWORD or tok.value != word:
            raise self.fail(tok, f"expected {word!r}, found {tok.raw or 'end of input'!r}",
                            [f"keyword {word!r}"])
        return tok

    def expect(self, ttype: TokenType) -> Token:
        tok = self.take()
        if tok.type is not ttype:
            raise self.fail(tok, f"expected {ttype.value}, found {tok.raw or 'end of input'!r}",
                            [ttype.value])
        return tok

    def parse_query(self, default_threshold: float = DEFAULT_THRESHOLD) -> QueryGraph:
        self.expect_keyword("query")
        name = self.expect(TokenType.STRING)
        self.expect(TokenType.LBRACE)

        requirements: list[IndicatorRequirement] = []
        country: str | None = None
        org: str | None = None
        threshold: float | None = None
        mode: Mode | None = None
        radius = 1

        while True:
            tok = self.peek()
            if tok.type is TokenType.RBRACE:
                self.take()
                break
            if tok.type is TokenType.EOF:
                raise self.fail(tok, "unterminated query body, expected '}'",
                                ["clause", "'}'"])
            if tok.type is not TokenType.KEYWORD:
                raise self.fail(
                    tok, f"expected a clause keyword, found {tok.raw!r}",
                    ["indicator", "in", "with", "threshold", "mode"])

            if tok.value == "indicator":
                self.take()
                cat = self.expect(TokenType.STRING)
                weight = DEFAULT_WEIGHT
                if self.peek().type is TokenType.KEYWORD and self.peek().value == "weight":
                    self.take()
                    num = self.expect(TokenType.NUMBER)
                    weight = float(num.value)
                    if weight <= 0:
                        raise self.fail(num, f"weight must be positive, got {num.raw}",
                                        ["positive number"])
                requirements.append(IndicatorRequirement(str(cat.value), weight))
            elif tok.value == "in":
                if country is not None:
                    raise DuplicateClauseError(tok.line, tok.column,
                                               "duplicate 'in' clause", offset=tok.offset)
                self.take()
                country = str(self.expect(TokenType.STRING).value)
            elif tok.value == "with":
                if org is not None:
                    raise DuplicateClauseError(tok.line, tok.column,
                                               "duplicate 'with' clause", offset=tok.offset)
                self.take()
                org = str(self.expect(TokenType.STRING).value)
            elif tok.value == "threshold":
                if threshold is not None:
                    raise DuplicateClauseError(tok.line, tok.column,
                                               "duplicate 'threshold' clause", offset=tok.offset)
                self.take()
                num = self.expect(TokenType.NUMBER)
                value = float(num.value)
                if not 0.0 <= value <= 1.0:
                    raise ThresholdOutOfRangeError(
                        num.line, num.column,
                        f"threshold must be in [0,1], got {num.raw}", offset=num.offset)
                threshold = value
            elif tok.value == "mode":
                if mode is not None:
                    raise DuplicateClauseError(tok.line, tok.column,
                                               "duplicate 'mode' clause", offset=tok.offset)
                self.take()
                mtok = self.take()
                if mtok.type is TokenType.KEYWORD and mtok.value == "individual":
                    mode = Mode.INDIVIDUAL
                elif mtok.type is TokenType.KEYWORD and mtok.value == "neighborhood":
                    mode = Mode.NEIGHBORHOOD
                    if self.peek().type is TokenType.KEYWORD and self.peek().value == "radius":
                        self.take()
                        num = self.expect(TokenType.NUMBER)
                        if "." in num.raw or "e" in num.raw or "E" in num.raw:
                            raise self.fail(num, f"radius must be an integer, got {num.raw}",
                                            ["integer"])
                        radius = int(num.raw)
                        if radius < 1:
                            raise self.fail(num, f"radius must be >= 1, got {num.raw}",
                                            ["positive integer"])
                else:
                    raise self.fail(mtok,
                                    f"expected 'individual' or 'neighborhood', found "
                                    f"{mtok.raw or 'end of input'!r}",
                                    ["individual", "neighborhood"])
            else:
                raise self.fail(
                    tok, f"unexpected keyword {tok.raw!r} in query body",
                    ["indicator", "in", "with", "threshold", "mode"])

        tail = self.peek()
        if tail.type is not TokenType.EOF:
            raise self.fail(tail, f"trailing input after query: {tail.raw!r}", ["end of input"])
        if not requirements:
            raise self.fail(tail, "query requires at least one indicator clause",
                            ["indicator clause"])

        return QueryGraph(
            name=str(name.value),
            requirements=tuple(requirements),
            country_filter=country,
            org_filter=org,
            threshold=default_threshold if threshold is None else threshold,
            mode=mode or Mode.INDIVIDUAL,
            radius=radius,
        )


def parse(text: str, default_threshold: float = DEFAULT_THRESHOLD) -> QueryGraph:
    """Parse DSL text into a QueryGraph. Raises QueryError subclasses.

    default_threshold applies when the query has no threshold clause.
    """
    return _Parser(tokenize(text)).parse_query(default_threshold)


# ---------------------------------------------------------------------------
# Printer & validation
# ---------------------------------------------------------------------------

def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _num(value: float) -> str:
    # repr round-trips floats exactly and the tokenizer accepts its output
    return repr(float(value))


def print_query(q: QueryGraph) -> str:
    """Canonical DSL text; parse(print_query(q)) == q."""
    lines = [f"query {_quote(q.name)} {{"]
    for req in q.requirements:
        lines.append(f"  indicator {_quote(req.category)} weight {_num(req.weight)}")
    if q.country_filter is not None:
        lines.append(f"  in {_quote(q.country_filter)}")
    if q.org_filter is not None:
        lines.append(f"  with {_quote(q.org_filter)}")
    lines.append(f"  threshold {_num(q.threshold)}")
    if q.mode is Mode.NEIGHBORHOOD:
        lines.append(f"  mode neighborhood radius {q.radius}")
    else:
        lines.append("  mode individual")
    lines.append("}")
    return "\n".join(lines) + "\n"


def validate(q: QueryGraph, taxonomy: IndicatorTaxonomy) -> list[str]:
    """Non-fatal query lint: unknown and duplicated categories."""
    warnings: list[str] = []
    seen: set[str] = set()
    for req in q.requirements:
        if req.category not in taxonomy:
            warnings.append(f"unknown category {req.category!r}")
        if req.category in seen:
            warnings.append(f"duplicate category {req.category!r}")
        seen.add(req.category)
    return warnings
