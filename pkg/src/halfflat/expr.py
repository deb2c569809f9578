"""Tiny closed-form expression language for coefficient functions.

Grammar (recursive descent):

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := number | var | fn '(' expr ')' | '-' factor | '(' expr ')'

with fn in {sin, cos, sinh, cosh, exp} and var in {x1..x6, t}.  The language
is closed under differentiation, evaluates on scalars or numpy arrays, and
round-trips through :func:`to_text`.
"""
from __future__ import annotations

import numpy as np

from .errors import ParseError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "exp": np.exp,
}
VARIABLES = ("x1", "x2", "x3", "x4", "x5", "x6", "t")


class Expr:
    """Base AST node."""

    __slots__ = ()

    def ev(self, env):
        raise NotImplementedError

    def d(self, var):
        raise NotImplementedError

    def variables(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({to_text(self)!r})"

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self):
        return hash((type(self).__name__, self._key()))


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    def ev(self, env):
        return self.value

    def d(self, var):
        return Num(0.0)

    def variables(self):
        return frozenset()

    def _key(self):
        return self.value


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name):
        if name not in VARIABLES:
            raise ValueError(f"unknown variable {name!r}")
        self.name = name

    def ev(self, env):
        return env[self.name]

    def d(self, var):
        return Num(1.0 if var == self.name else 0.0)

    def variables(self):
        return frozenset((self.name,))

    def _key(self):
        return self.name


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg

    def ev(self, env):
        return -self.arg.ev(env)

    def d(self, var):
        return neg(self.arg.d(var))

    def variables(self):
        return self.arg.variables()

    def _key(self):
        return self.arg


class Add(Expr):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def ev(self, env):
        return self.a.ev(env) + self.b.ev(env)

    def d(self, var):
        return add(self.a.d(var), self.b.d(var))

    def variables(self):
        return self.a.variables() | self.b.variables()

    def _key(self):
        return (self.a, self.b)


class Sub(Expr):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def ev(self, env):
        return self.a.ev(env) - self.b.ev(env)

    def d(self, var):
        return sub(self.a.d(var), self.b.d(var))

    def variables(self):
        return self.a.variables() | self.b.variables()

    def _key(self):
        return (self.a, self.b)


class Mul(Expr):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def ev(self, env):
        return self.a.ev(env) * self.b.ev(env)

    def d(self, var):
        return add(mul(self.a.d(var), self.b), mul(self.a, self.b.d(var)))

    def variables(self):
        return self.a.variables() | self.b.variables()

    def _key(self):
        return (self.a, self.b)


class Fn(Expr):
    __slots__ = ("name", "arg")

    _DERIV = {
        "sin": lambda u: Fn("cos", u),
        "cos": lambda u: Neg(Fn("sin", u)),
        "sinh": lambda u: Fn("cosh", u),
        "cosh": lambda u: Fn("sinh", u),
        "exp": lambda u: Fn("exp", u),
    }

    def __init__(self, name, arg):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg

    def ev(self, env):
        return FUNCTIONS[self.name](self.arg.ev(env))

    def d(self, var):
        return mul(self._DERIV[self.name](self.arg), self.arg.d(var))

    def variables(self):
        return self.arg.variables()

    def _key(self):
        return (self.name, self.arg)


def _is_num(e, value=None):
    return isinstance(e, Num) and (value is None or e.value == value)


def neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return Add(a, b)


def sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    return Sub(a, b)


def mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return Mul(a, b)


class _Parser:
    def __init__(self, src):
        self.src = src
        self.pos = 0

    def error(self, expected):
        raise ParseError(f"expected {expected}", self.pos)

    def skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos] in " \t":
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def eat(self, ch):
        if self.peek() != ch:
            self.error(f"'{ch}'")
        self.pos += 1

    def parse(self):
        e = self.expr()
        if self.peek() != "":
            self.error("end of input")
        return e

    def expr(self):
        e = self.term()
        while self.peek() in ("+", "-"):
            op = self.peek()
            self.pos += 1
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.factor()
        while self.peek() == "*":
            self.pos += 1
            e = Mul(e, self.factor())
        return e

    def factor(self):
        ch = self.peek()
        if ch == "-":
            self.pos += 1
            inner = self.factor()
            # fold negated literals so the canonical printer round-trips
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Neg(inner)
        if ch == "(":
            self.pos += 1
            e = self.expr()
            self.eat(")")
            return e
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch.isalpha():
            return self.name()
        self.error("number, variable, function or '('")

    def number(self):
        self.skip_ws()
        start = self.pos
        src = self.src
        n = len(src)
        while self.pos < n and (src[self.pos].isdigit() or src[self.pos] == "."):
            self.pos += 1
        if self.pos < n and src[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < n and src[self.pos] in "+-":
                self.pos += 1
            if self.pos < n and src[self.pos].isdigit():
                while self.pos < n and src[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark  # bare 'e' belongs to a following name, not here
        text = src[start:self.pos]
        try:
            return Num(float(text))
        except ValueError:
            self.pos = start
            self.error("number")

    def name(self):
        self.skip_ws()
        start = self.pos
        src = self.src
        while self.pos < len(src) and (src[self.pos].isalnum() or src[self.pos] == "_"):
            self.pos += 1
        word = src[start:self.pos]
        if word in VARIABLES:
            return Var(word)
        if word in FUNCTIONS:
            self.eat("(")
            arg = self.expr()
            self.eat(")")
            return Fn(word, arg)
        self.pos = start
        self.error("variable or function name")


def parse_expr(src: str) -> Expr:
    """Parse expression text; raises :class:`ParseError` with a position."""
    return _Parser(src).parse()


def diff_expr(e: Expr, var: str) -> Expr:
    """Symbolic derivative of ``e`` with respect to ``var``."""
    if var not in VARIABLES:
        raise ValueError(f"unknown variable {var!r}")
    return e.d(var)


def evaluate(e: Expr, env) -> float:
    """Evaluate at a point; env maps variable names to scalars or arrays."""
    return e.ev(env)


_PREC = {"add": 1, "mul": 2, "unary": 3, "atom": 4}


def _level(e):
    if isinstance(e, (Add, Sub)):
        return _PREC["add"]
    if isinstance(e, Mul):
        return _PREC["mul"]
    if isinstance(e, Neg):
        return _PREC["unary"]
    return _PREC["atom"]


def to_text(e: Expr) -> str:
    """Canonical printer; parse_expr(to_text(e)) reproduces the AST."""
    def wrap(sub, minimum):
        s = to_text(sub)
        return f"({s})" if _level(sub) < minimum else s

    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + wrap(e.arg, _PREC["unary"])
    if isinstance(e, Add):
        return f"{wrap(e.a, _PREC['add'])} + {wrap(e.b, _PREC['add'] + 1)}"
    if isinstance(e, Sub):
        return f"{wrap(e.a, _PREC['add'])} - {wrap(e.b, _PREC['add'] + 1)}"
    if isinstance(e, Mul):
        return f"{wrap(e.a, _PREC['mul'])}*{wrap(e.b, _PREC['mul'] + 1)}"
    if isinstance(e, Fn):
        return f"{e.name}({to_text(e.arg)})"
    raise TypeError(f"not an Expr: {e!r}")
