"""Closed-form expressions in one variable ``x``.

Maps and potentials are written as small formulas such as ``"1 - x"`` or
``"2 + cos(2*pi*x)"``.  The grammar, from loosest to tightest binding::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | 'x' | 'pi' | 'e' | FUNC '(' expr ')' | '(' expr ')'

with ``FUNC`` one of sin, cos, exp, ln, abs, sqrt.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "ln", "abs", "sqrt")
CONSTANTS = {"pi": math.pi, "e": math.e}
RANGE_TOL = 1e-12


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, text: str, pos: int):
        self.offset = len(text[:pos].encode("utf-8"))
        self.text = text
        super().__init__(f"{message} at byte offset {self.offset} in {text!r}")


class ExprNameError(ExprSyntaxError):
    pass


class ExprDomainError(ExprError):
    def __init__(self, message: str, subexpr: "Node", x=None):
        self.subexpr = subexpr
        self.x = x
        where = "" if x is None else f" at x={x!r}"
        super().__init__(f"{message} in '{to_string(subexpr)}'{where}")


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Const, Neg, BinOp, Call]
ExprAst = Node


# --- parsing ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            stripped = len(text) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[stripped]!r}", text, stripped)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.advance()
        if val != value or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", self.text, pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", self.text, pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Node:
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val == "x":
                return Var()
            if val in CONSTANTS:
                return Const(val)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise ExprNameError(f"unknown identifier {val!r}", self.text, pos)
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", self.text, pos)


def parse(text: str) -> Node:
    """Parse ``text`` into an expression tree."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", text if isinstance(text, str) else "", 0)
    return _Parser(text).parse()


def as_ast(expr: Union[str, Node]) -> Node:
    return parse(expr) if isinstance(expr, str) else expr


# --- printing --------------------------------------------------------------


def to_string(node: Node) -> str:
    """Render ``node`` so that ``parse(to_string(node)) == node``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand)
    if isinstance(node, BinOp):
        return f"{_wrap(node.left)} {node.op} {_wrap(node.right)}"
    raise TypeError(f"not an expression node: {node!r}")


def _wrap(node: Node) -> str:
    s = to_string(node)
    return f"({s})" if isinstance(node, (BinOp, Neg)) else s


def depends_on_x(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, (Num, Const)):
        return False
    if isinstance(node, Neg):
        return depends_on_x(node.operand)
    if isinstance(node, Call):
        return depends_on_x(node.arg)
    return depends_on_x(node.left) or depends_on_x(node.right)


# --- evaluation ------------------------------------------------------------

_NP_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": np.log,
    "abs": np.abs,
    "sqrt": np.sqrt,
}


def _first_bad(x: np.ndarray, mask: np.ndarray):
    idx = np.flatnonzero(np.broadcast_to(mask, x.shape))
    return float(x.flat[idx[0]]) if idx.size else None


def _eval(node: Node, x: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(x.shape, node.value)
    if isinstance(node, Var):
        return x
    if isinstance(node, Const):
        return np.full(x.shape, CONSTANTS[node.name])
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    if isinstance(node, Call):
        a = _eval(node.arg, x)
        if node.func == "ln" and np.any(a <= 0):
            raise ExprDomainError("logarithm of a non-positive value", node, _first_bad(x, a <= 0))
        if node.func == "sqrt" and np.any(a < 0):
            raise ExprDomainError("square root of a negative value", node, _first_bad(x, a < 0))
        with np.errstate(over="ignore"):
            out = _NP_FUNCS[node.func](a)
    else:
        a = _eval(node.left, x)
        b = _eval(node.right, x)
        with np.errstate(all="ignore"):
            if node.op == "+":
                out = a + b
            elif node.op == "-":
                out = a - b
            elif node.op == "*":
                out = a * b
            elif node.op == "/":
                if np.any(b == 0):
                    raise ExprDomainError("division by zero", node, _first_bad(x, b == 0))
                out = a / b
            else:
                bad = (a == 0) & (b < 0)
                if np.any(bad):
                    raise ExprDomainError("zero raised to a negative power", node, _first_bad(x, bad))
                out = np.power(a, b)
    if not np.all(np.isfinite(out)):
        raise ExprDomainError("non-finite result", node, _first_bad(x, ~np.isfinite(out)))
    return out


def evaluate_array(node: Node, xs) -> np.ndarray:
    """Vectorized evaluation at every point of ``xs``."""
    xs = np.asarray(xs, dtype=float)
    return np.array(_eval(node, xs), dtype=float)


def evaluate(node: Node, x: float) -> float:
    if not (-RANGE_TOL <= x <= 1 + RANGE_TOL):
        raise ValueError(f"x={x!r} outside [0, 1]")
    return float(_eval(node, np.asarray(float(x)))[()])


# --- compilation for scalar hot loops ---------------------------------------


def _pow(a: float, b: float) -> float:
    if a == 0.0 and b < 0:
        raise ZeroDivisionError("0 ^ negative")
    r = a**b
    if isinstance(r, complex):
        raise ValueError("negative base with fractional exponent")
    return r


def _ln(a: float) -> float:
    if a <= 0:
        raise ValueError("ln of non-positive")
    return math.log(a)


_PY_FUNCS = {
    "sin": "_m.sin",
    "cos": "_m.cos",
    "exp": "_m.exp",
    "ln": "_ln",
    "abs": "abs",
    "sqrt": "_m.sqrt",
}


def _py(node: Node) -> str:
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Const):
        return repr(CONSTANTS[node.name])
    if isinstance(node, Neg):
        return f"(-{_py(node.operand)})"
    if isinstance(node, Call):
        return f"{_PY_FUNCS[node.func]}({_py(node.arg)})"
    if node.op == "^":
        return f"_pow({_py(node.left)}, {_py(node.right)})"
    return f"({_py(node.left)} {node.op} {_py(node.right)})"


def compile_scalar(node: Node) -> Callable[[float], float]:
    """Return a plain-Python ``f(x)`` for tight loops.

    Domain failures surface as ``ValueError`` or ``ZeroDivisionError``.
    """
    src = f"lambda x: {_py(node)}"
    return eval(src, {"_m": math, "_pow": _pow, "_ln": _ln, "__builtins__": {"abs": abs}})


# --- map validation --------------------------------------------------------


@dataclass(frozen=True)
class RangeReport:
    ok: bool
    violations: tuple[tuple[int, float, float], ...]  # (node, x, value)

    def __bool__(self):
        return self.ok


def validate_map_range(node: Node, samples: int = 1024, tol: float = RANGE_TOL) -> RangeReport:
    """Check that a map sends the nodes j/samples of [0,1] into [0,1]."""
    xs = np.arange(samples + 1) / samples
    vals = evaluate_array(node, xs)
    bad = np.flatnonzero((vals < -tol) | (vals > 1 + tol))
    return RangeReport(
        ok=bad.size == 0,
        violations=tuple((int(j), float(xs[j]), float(vals[j])) for j in bad),
    )
