"""Step/swap condition language.

Conditions are small C-style infix expressions over instance variables::

    (true)
    (tank.level >= 1.6 && !leak_detector.leak)
    (rmq2.timestamp - rmq.timestamp < 0.15)

Precedence, loosest first: ``||``, ``&&``, ``== !=``, ``< <= > >=``,
``+ -``, ``* /``, unary ``! -``.  Variable references are always
``instance.variable``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union


class ConditionError(ValueError):
    """Lex, parse, type or evaluation failure; carries a character offset."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.message = message
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    value: Union[bool, int, float]
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    instance: str
    variable: str
    offset: int = field(default=0, compare=False)

    @property
    def name(self) -> str:
        return f"{self.instance}.{self.variable}"


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    offset: int = field(default=0, compare=False)


Expr = Union[Literal, Var, Unary, Binary]

LOGICAL = ("&&", "||")
EQUALITY = ("==", "!=")
RELATIONAL = ("<", "<=", ">", ">=")
ARITHMETIC = ("+", "-", "*", "/")


# --- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||==|!=|<=|>=|[<>!+\-*/().])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ConditionError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


# --- parser ----------------------------------------------------------------

class _Parser:
    _levels = (("||",), ("&&",), EQUALITY, RELATIONAL, ("+", "-"), ("*", "/"))

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            found = tok.text or "end of input"
            raise ConditionError(f"expected {text!r}, found {found!r}", tok.offset)
        return self.advance()

    def parse(self) -> Expr:
        expr = self.binary(0)
        tok = self.peek()
        if tok.kind != "end":
            raise ConditionError(f"unexpected {tok.text!r}", tok.offset)
        return expr

    def binary(self, level: int) -> Expr:
        if level == len(self._levels):
            return self.unary()
        left = self.binary(level + 1)
        ops = self._levels[level]
        while self.peek().kind == "op" and self.peek().text in ops:
            tok = self.advance()
            right = self.binary(level + 1)
            left = Binary(tok.text, left, right, tok.offset)
        return left

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("!", "-"):
            self.advance()
            return Unary(tok.text, self.unary(), tok.offset)
        return self.primary()

    def primary(self) -> Expr:
        tok = self.advance()
        if tok.kind == "num":
            text = tok.text
            if any(c in text for c in ".eE"):
                return Literal(float(text), tok.offset)
            return Literal(int(text), tok.offset)
        if tok.kind == "name":
            if tok.text in ("true", "false"):
                return Literal(tok.text == "true", tok.offset)
            self.expect(".")
            var = self.advance()
            if var.kind != "name" or var.text in ("true", "false"):
                raise ConditionError("expected variable name after '.'", var.offset)
            return Var(tok.text, var.text, tok.offset)
        if tok.kind == "op" and tok.text == "(":
            inner = self.binary(0)
            self.expect(")")
            return inner
        found = tok.text or "end of input"
        raise ConditionError(f"unexpected {found!r}", tok.offset)


def parse_condition(text: str) -> Expr:
    """Parse and type-check condition text (variables are untyped here)."""
    expr = _Parser(text).parse()
    if typecheck(expr) == "num":
        raise ConditionError("condition is numeric, expected a boolean", 0)
    return expr


# --- typing ----------------------------------------------------------------

def typecheck(expr: Expr, kinds: Optional[Mapping[str, str]] = None) -> str:
    """Return the kind ('bool' or 'num') of ``expr``.

    ``kinds`` maps ``instance.variable`` to a kind; when omitted every
    variable is accepted as either kind.  A variable missing from a given
    mapping is an error.
    """
    if isinstance(expr, Literal):
        return "bool" if isinstance(expr.value, bool) else "num"
    if isinstance(expr, Var):
        if kinds is None:
            return "any"
        if expr.name not in kinds:
            raise ConditionError(f"unbound variable {expr.name}", expr.offset)
        kind = kinds[expr.name]
        if kind not in ("bool", "num"):
            raise ConditionError(f"variable {expr.name} is not boolean or numeric", expr.offset)
        return kind
    if isinstance(expr, Unary):
        inner = typecheck(expr.operand, kinds)
        want = "bool" if expr.op == "!" else "num"
        _require(inner, want, expr)
        return want
    lk = typecheck(expr.left, kinds)
    rk = typecheck(expr.right, kinds)
    if expr.op in LOGICAL:
        _require(lk, "bool", expr)
        _require(rk, "bool", expr)
        return "bool"
    if expr.op in EQUALITY:
        if "any" not in (lk, rk) and lk != rk:
            raise ConditionError(f"operands of {expr.op} have different types", expr.offset)
        return "bool"
    _require(lk, "num", expr)
    _require(rk, "num", expr)
    return "bool" if expr.op in RELATIONAL else "num"


def _require(kind: str, want: str, expr) -> None:
    if kind not in (want, "any"):
        raise ConditionError(f"operator {expr.op} expects {want} operands", expr.offset)


def variables(expr: Expr) -> list[Var]:
    """All variable references in source order."""
    if isinstance(expr, Var):
        return [expr]
    if isinstance(expr, Unary):
        return variables(expr.operand)
    if isinstance(expr, Binary):
        return variables(expr.left) + variables(expr.right)
    return []


# --- evaluation ------------------------------------------------------------

def _num(value, expr):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConditionError(f"operator {expr.op} expects numbers, got {value!r}", expr.offset)
    return value


def _bool(value, expr):
    if not isinstance(value, bool):
        raise ConditionError(f"operator {expr.op} expects booleans, got {value!r}", expr.offset)
    return value


def _eval(expr: Expr, scope: Mapping[str, object]):
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Var):
        try:
            return scope[expr.name]
        except KeyError:
            raise ConditionError(f"unbound variable {expr.name}", expr.offset) from None
    if isinstance(expr, Unary):
        value = _eval(expr.operand, scope)
        if expr.op == "!":
            return not _bool(value, expr)
        return -_num(value, expr)
    left = _eval(expr.left, scope)
    right = _eval(expr.right, scope)
    op = expr.op
    if op == "&&":
        return _bool(left, expr) and _bool(right, expr)
    if op == "||":
        return _bool(left, expr) or _bool(right, expr)
    if op in EQUALITY:
        if isinstance(left, bool) != isinstance(right, bool):
            raise ConditionError(f"operands of {op} have different types", expr.offset)
        return (left == right) if op == "==" else (left != right)
    a, b = _num(left, expr), _num(right, expr)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        raise ConditionError("division by zero", expr.offset)
    return a / b


def evaluate(expr: Expr, scope: Mapping[str, object]) -> bool:
    result = _eval(expr, scope)
    if not isinstance(result, bool):
        raise ConditionError(f"condition evaluated to non-boolean {result!r}", 0)
    return result


def pretty(expr: Expr) -> str:
    """Fully parenthesised source text; reparses to an equal AST."""
    if isinstance(expr, Literal):
        if isinstance(expr.value, bool):
            return "true" if expr.value else "false"
        return repr(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        return f"{expr.op}{pretty(expr.operand)}"
    return f"({pretty(expr.left)} {expr.op} {pretty(expr.right)})"


class LatchedCondition:
    """A trigger condition: false until the expression first holds, then true forever."""

    def __init__(self, expr: Union[Expr, str]):
        self.expr = parse_condition(expr) if isinstance(expr, str) else expr
        self.latched = False

    def update(self, scope: Mapping[str, object]) -> bool:
        # short-circuit on purpose: a latched condition may reference
        # variables that no longer exist
        if not self.latched:
            self.latched = evaluate(self.expr, scope)
        return self.latched

    def __repr__(self):
        return f"LatchedCondition({pretty(self.expr)!r}, latched={self.latched})"


def update_latch(cond: LatchedCondition, scope: Mapping[str, object]) -> bool:
    return cond.update(scope)
