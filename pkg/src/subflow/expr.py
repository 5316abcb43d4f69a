"""Symbolic expression core: parse, print, evaluate and differentiate
smooth real-valued functions of n variables.

Expressions are immutable trees over coordinates ``x0, x1, ...`` and a
fixed set of smooth primitives. Differentiation is exact and total on
the node set; evaluation reports domain violations (log/sqrt of a
nonpositive value, division by zero, ...) as :class:`DomainError`
rather than propagating NaNs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Sequence


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Malformed source text; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class DomainError(ExprError):
    """Evaluation left the domain of a primitive (log of nonpositive,
    division by zero, overflow, ...)."""


class DimensionError(ExprError):
    """Point length does not cover the coordinates used."""


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Expr:
    def __str__(self) -> str:
        return to_string(self)

    @property
    def max_coord(self) -> int:
        """Largest coordinate index used, or -1 for constant expressions."""
        return _max_coord(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Coord(Expr):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("coordinate index must be nonnegative")


@dataclass(frozen=True)
class Neg(Expr):
    child: Expr


@dataclass(frozen=True)
class Sum(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Product(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Quotient(Expr):
    numerator: Expr
    denominator: Expr


@dataclass(frozen=True)
class Power(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True)
class Apply(Expr):
    name: str
    child: Expr

    def __post_init__(self):
        if self.name not in PRIMITIVES:
            raise ValueError(f"unknown primitive {self.name!r}")


def _cutexp(t: float) -> float:
    # smooth cutoff: exp(-1/t) for t > 0, identically 0 for t <= 0
    if t <= 0.0:
        return 0.0
    try:
        return math.exp(-1.0 / t)
    except OverflowError:  # pragma: no cover - exp(-1/t) <= 1
        raise DomainError("overflow in cutexp")


def _checked(name: str, fn: Callable[[float], float]) -> Callable[[float], float]:
    def wrapped(t: float) -> float:
        try:
            return fn(t)
        except OverflowError:
            raise DomainError(f"overflow in {name}({t!r})")

    return wrapped


def _log(t: float) -> float:
    if t <= 0.0:
        raise DomainError(f"log of nonpositive value {t!r}")
    return math.log(t)


def _sqrt(t: float) -> float:
    if t < 0.0:
        raise DomainError(f"sqrt of negative value {t!r}")
    return math.sqrt(t)


PRIMITIVES: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": _checked("exp", math.exp),
    "log": _log,
    "sqrt": _sqrt,
    "tanh": math.tanh,
    "atan": math.atan,
    # smooth transition used by bump functions; C-infinity on all of R
    "cutexp": _cutexp,
}


# ---------------------------------------------------------------------------
# Smart constructors (constant folding only; no algebraic simplification)


def const(value: float) -> Const:
    return Const(float(value))


ZERO = Const(0.0)
ONE = Const(1.0)


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def neg(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.child
    return Neg(e)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Sum(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Product(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    return Quotient(a, b)


def pow_(base: Expr, exponent: Expr) -> Expr:
    if _is_const(exponent, 0.0):
        return ONE
    if _is_const(exponent, 1.0):
        return base
    return Power(base, exponent)


def call(name: str, arg: Expr) -> Expr:
    return Apply(name, arg)


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(e: Expr, point: Sequence[float]) -> float:
    """Evaluate ``e`` at ``point`` as an IEEE double."""
    m = _max_coord(e)
    if m >= len(point):
        raise DimensionError(
            f"expression uses coordinate x{m} but point has length {len(point)}"
        )
    return _eval(e, point)


def _eval(e: Expr, p: Sequence[float]) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Coord):
        return float(p[e.index])
    if isinstance(e, Neg):
        return -_eval(e.child, p)
    if isinstance(e, Sum):
        return _eval(e.left, p) + _eval(e.right, p)
    if isinstance(e, Product):
        return _eval(e.left, p) * _eval(e.right, p)
    if isinstance(e, Quotient):
        num = _eval(e.numerator, p)
        den = _eval(e.denominator, p)
        if den == 0.0:
            raise DomainError("division by zero")
        return num / den
    if isinstance(e, Power):
        base = _eval(e.base, p)
        expo = _eval(e.exponent, p)
        if base == 0.0 and expo < 0.0:
            raise DomainError("zero raised to a negative power")
        if base < 0.0 and expo != int(expo):
            raise DomainError("negative base with non-integer exponent")
        try:
            return float(base**expo)
        except OverflowError:
            raise DomainError("overflow in power")
    if isinstance(e, Apply):
        return PRIMITIVES[e.name](_eval(e.child, p))
    raise TypeError(f"not an Expr node: {e!r}")


def _codegen(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Coord):
        return f"p[{e.index}]"
    if isinstance(e, Neg):
        return f"-({_codegen(e.child)})"
    if isinstance(e, Sum):
        return f"({_codegen(e.left)})+({_codegen(e.right)})"
    if isinstance(e, Product):
        return f"({_codegen(e.left)})*({_codegen(e.right)})"
    if isinstance(e, Quotient):
        return f"_div({_codegen(e.numerator)},{_codegen(e.denominator)})"
    if isinstance(e, Power):
        return f"_pow({_codegen(e.base)},{_codegen(e.exponent)})"
    if isinstance(e, Apply):
        return f"_prim_{e.name}({_codegen(e.child)})"
    raise TypeError(f"not an Expr node: {e!r}")


def _div_checked(num: float, den: float) -> float:
    if den == 0.0:
        raise DomainError("division by zero")
    return num / den


def _pow_checked(base: float, expo: float) -> float:
    if base == 0.0 and expo < 0.0:
        raise DomainError("zero raised to a negative power")
    if base < 0.0 and expo != int(expo):
        raise DomainError("negative base with non-integer exponent")
    try:
        return float(base**expo)
    except OverflowError:
        raise DomainError("overflow in power")


_COMPILE_ENV: dict = {
    "_div": _div_checked,
    "_pow": _pow_checked,
    **{f"_prim_{name}": fn for name, fn in PRIMITIVES.items()},
    "__builtins__": {},
}


@lru_cache(maxsize=None)
def compiled(e: Expr) -> Callable[[Sequence[float]], float]:
    """Compile ``e`` to a plain Python callable. Same domain-error
    semantics as :func:`evaluate`, without the per-call dimension check;
    used on hot paths (membership tests, integrator right-hand sides,
    quadrature)."""
    return eval(f"lambda p: ({_codegen(e)})", dict(_COMPILE_ENV))


def _max_coord(e: Expr) -> int:
    if isinstance(e, Const):
        return -1
    if isinstance(e, Coord):
        return e.index
    if isinstance(e, Neg):
        return _max_coord(e.child)
    if isinstance(e, (Sum, Product)):
        return max(_max_coord(e.left), _max_coord(e.right))
    if isinstance(e, Quotient):
        return max(_max_coord(e.numerator), _max_coord(e.denominator))
    if isinstance(e, Power):
        return max(_max_coord(e.base), _max_coord(e.exponent))
    if isinstance(e, Apply):
        return _max_coord(e.child)
    raise TypeError(f"not an Expr node: {e!r}")


# ---------------------------------------------------------------------------
# Differentiation

# derivative of each primitive as an Expr builder in terms of its argument
_PRIM_DERIV: dict[str, Callable[[Expr], Expr]] = {
    "sin": lambda u: call("cos", u),
    "cos": lambda u: neg(call("sin", u)),
    "exp": lambda u: call("exp", u),
    "log": lambda u: div(ONE, u),
    "sqrt": lambda u: div(ONE, mul(const(2.0), call("sqrt", u))),
    "tanh": lambda u: sub(ONE, pow_(call("tanh", u), const(2.0))),
    "atan": lambda u: div(ONE, add(ONE, pow_(u, const(2.0)))),
    # valid for t != 0; both factors vanish identically for t < 0 and the
    # true derivative extends by 0 through t = 0 (evaluation exactly at the
    # seam reports division by zero)
    "cutexp": lambda u: div(call("cutexp", u), pow_(u, const(2.0))),
}


def diff(e: Expr, i: int) -> Expr:
    """Exact symbolic partial derivative of ``e`` with respect to ``x_i``."""
    if i < 0:
        raise ValueError("coordinate index must be nonnegative")
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Coord):
        return ONE if e.index == i else ZERO
    if isinstance(e, Neg):
        return neg(diff(e.child, i))
    if isinstance(e, Sum):
        return add(diff(e.left, i), diff(e.right, i))
    if isinstance(e, Product):
        return add(
            mul(diff(e.left, i), e.right),
            mul(e.left, diff(e.right, i)),
        )
    if isinstance(e, Quotient):
        num, den = e.numerator, e.denominator
        return sub(
            div(diff(num, i), den),
            div(mul(num, diff(den, i)), pow_(den, const(2.0))),
        )
    if isinstance(e, Power):
        base, expo = e.base, e.exponent
        dbase = diff(base, i)
        dexpo = diff(expo, i)
        if _is_const(expo):
            # power rule; keeps the derivative defined wherever the base is
            c = expo.value
            return mul(mul(expo, pow_(base, const(c - 1.0))), dbase)
        # general case via f^g = exp(g log f); requires base > 0 at eval time
        return mul(
            pow_(base, expo),
            add(mul(dexpo, call("log", base)), div(mul(expo, dbase), base)),
        )
    if isinstance(e, Apply):
        return mul(_PRIM_DERIV[e.name](e.child), diff(e.child, i))
    raise TypeError(f"not an Expr node: {e!r}")


def gradient(e: Expr, dim: int) -> list[Expr]:
    return [diff(e, i) for i in range(dim)]


# ---------------------------------------------------------------------------
# Substitution (compose with a tuple of inner expressions)


def substitute(e: Expr, replacements: Sequence[Expr]) -> Expr:
    """Replace ``Coord(i)`` by ``replacements[i]`` throughout ``e``."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Coord):
        if e.index >= len(replacements):
            raise DimensionError(
                f"substitution list of length {len(replacements)} "
                f"does not cover coordinate x{e.index}"
            )
        return replacements[e.index]
    if isinstance(e, Neg):
        return neg(substitute(e.child, replacements))
    if isinstance(e, Sum):
        return add(substitute(e.left, replacements), substitute(e.right, replacements))
    if isinstance(e, Product):
        return mul(substitute(e.left, replacements), substitute(e.right, replacements))
    if isinstance(e, Quotient):
        return div(
            substitute(e.numerator, replacements),
            substitute(e.denominator, replacements),
        )
    if isinstance(e, Power):
        return pow_(
            substitute(e.base, replacements),
            substitute(e.exponent, replacements),
        )
    if isinstance(e, Apply):
        return call(e.name, substitute(e.child, replacements))
    raise TypeError(f"not an Expr node: {e!r}")


# ---------------------------------------------------------------------------
# Printing
#
# Precedence levels (loosest to tightest): + - (1), * / (2), unary - (3),
# ^ (4), atoms (5). Matches the parser so parse(to_string(e)) == e.

_LVL_SUM, _LVL_PROD, _LVL_UNARY, _LVL_POW, _LVL_ATOM = 1, 2, 3, 4, 5


def to_string(e: Expr) -> str:
    return _fmt(e)[0]


def _paren(text: str, level: int, minimum: int) -> str:
    return f"({text})" if level < minimum else text


def _fmt(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        return repr(e.value), (_LVL_ATOM if e.value >= 0 else _LVL_UNARY)
    if isinstance(e, Coord):
        return f"x{e.index}", _LVL_ATOM
    if isinstance(e, Neg):
        t, lvl = _fmt(e.child)
        return f"-{_paren(t, lvl, _LVL_POW)}", _LVL_UNARY
    if isinstance(e, Sum):
        lt, ll = _fmt(e.left)
        if isinstance(e.right, Neg):
            rt, rl = _fmt(e.right.child)
            return f"{_paren(lt, ll, _LVL_SUM)} - {_paren(rt, rl, _LVL_PROD)}", _LVL_SUM
        if isinstance(e.right, Const) and e.right.value < 0:
            return f"{_paren(lt, ll, _LVL_SUM)} - {-e.right.value!r}", _LVL_SUM
        rt, rl = _fmt(e.right)
        return f"{_paren(lt, ll, _LVL_SUM)} + {_paren(rt, rl, _LVL_PROD)}", _LVL_SUM
    if isinstance(e, Product):
        lt, ll = _fmt(e.left)
        rt, rl = _fmt(e.right)
        return f"{_paren(lt, ll, _LVL_PROD)}*{_paren(rt, rl, _LVL_UNARY)}", _LVL_PROD
    if isinstance(e, Quotient):
        lt, ll = _fmt(e.numerator)
        rt, rl = _fmt(e.denominator)
        return f"{_paren(lt, ll, _LVL_PROD)}/{_paren(rt, rl, _LVL_UNARY)}", _LVL_PROD
    if isinstance(e, Power):
        bt, bl = _fmt(e.base)
        et, el = _fmt(e.exponent)
        return f"{_paren(bt, bl, _LVL_ATOM)}^{_paren(et, el, _LVL_UNARY)}", _LVL_POW
    if isinstance(e, Apply):
        t, _ = _fmt(e.child)
        return f"{e.name}({t})", _LVL_ATOM
    raise TypeError(f"not an Expr node: {e!r}")


# ---------------------------------------------------------------------------
# Parsing (recursive descent; precedence as documented above)

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<op>[-+*/^(),])
    )""",
    re.VERBOSE,
)

_COORD_RE = re.compile(r"^x(\d+)$")


class _Parser:
    def __init__(self, source: str, names: Mapping[str, int] | None):
        self.source = source
        self.names = dict(names or {})
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(source):
            m = _TOKEN_RE.match(source, pos)
            if m is None:
                rest = source[pos:].lstrip()
                if not rest:
                    break
                bad = len(source) - len(rest)
                raise ParseError(f"unexpected character {source[bad]!r}", bad)
            kind = m.lastgroup
            assert kind is not None
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return ("end", "", len(self.source))

    def advance(self) -> tuple[str, str, int]:
        tok = self.peek()
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, text, off = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", off)
        self.advance()

    def parse(self) -> Expr:
        e = self.sum_expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", off)
        return e

    def sum_expr(self) -> Expr:
        e = self.prod_expr()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                rhs = self.prod_expr()
                e = add(e, rhs) if text == "+" else sub(e, rhs)
            else:
                return e

    def prod_expr(self) -> Expr:
        e = self.unary_expr()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                rhs = self.unary_expr()
                e = mul(e, rhs) if text == "*" else div(e, rhs)
            else:
                return e

    def unary_expr(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return neg(self.unary_expr())
        return self.power_expr()

    def power_expr(self) -> Expr:
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return pow_(base, self.unary_expr())
        return base

    def atom(self) -> Expr:
        kind, text, off = self.advance()
        if kind == "number":
            return const(float(text))
        if kind == "ident":
            nk, nt, _ = self.peek()
            if nk == "op" and nt == "(":
                if text not in PRIMITIVES:
                    raise ParseError(f"unknown function {text!r}", off)
                self.advance()
                arg = self.sum_expr()
                self.expect_op(")")
                return call(text, arg)
            if text in self.names:
                return Coord(self.names[text])
            m = _COORD_RE.match(text)
            if m:
                return Coord(int(m.group(1)))
            raise ParseError(f"unknown identifier {text!r}", off)
        if kind == "op" and text == "(":
            e = self.sum_expr()
            self.expect_op(")")
            return e
        if kind == "end":
            raise ParseError("unexpected end of input", off)
        raise ParseError(f"unexpected token {text!r}", off)


def parse(source: str, names: Mapping[str, int] | None = None) -> Expr:
    """Parse expression text into an :class:`Expr`.

    ``names`` optionally maps extra identifiers to coordinate indices;
    identifiers ``x0``, ``x1``, ... always denote coordinates.
    """
    return _Parser(source, names).parse()
