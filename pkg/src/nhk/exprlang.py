"""Small expression language for scalar coefficient fields.

Every coordinate-dependent coefficient in a system definition (metric
entries, connection components, potentials, multiplier candidates) is an
immutable expression tree over named variables.  The module provides a
parser, an evaluator with explicit singularity errors, exact symbolic
differentiation, a printer whose output re-parses to an equivalent tree,
and a sum-of-products normal form used for symbolic equality checks.

Grammar (also documented in the README):

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | NAME '(' expr ')' | NAME | '(' expr ')'

Recognized function names: sin cos tan sec exp log sqrt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

FUNCTIONS = ("sin", "cos", "tan", "sec", "exp", "log", "sqrt")


class ExprError(Exception):
    """Base class for expression-language errors."""


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class EvalError(ExprError):
    """Raised on division by zero, domain errors, overflow or unbound names."""


class Expr:
    """Immutable expression node.  Supports arithmetic operators."""

    __slots__ = ()

    def __add__(self, other):
        return Bin("+", self, _coerce(other))

    def __radd__(self, other):
        return Bin("+", _coerce(other), self)

    def __sub__(self, other):
        return Bin("-", self, _coerce(other))

    def __rsub__(self, other):
        return Bin("-", _coerce(other), self)

    def __mul__(self, other):
        return Bin("*", self, _coerce(other))

    def __rmul__(self, other):
        return Bin("*", _coerce(other), self)

    def __truediv__(self, other):
        return Bin("/", self, _coerce(other))

    def __rtruediv__(self, other):
        return Bin("/", _coerce(other), self)

    def __pow__(self, other):
        return Bin("^", self, _coerce(other))

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, slots=True)
class Num(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Call(Expr):
    fn: str
    arg: Expr


@dataclass(frozen=True, slots=True)
class Bin(Expr):
    op: str
    lhs: Expr
    rhs: Expr


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Num(float(value))
    raise TypeError(f"cannot use {value!r} in an expression")


def var(name: str) -> Var:
    return Var(name)


def num(value) -> Num:
    return Num(float(value))


def sin(e) -> Call:
    return Call("sin", _coerce(e))


def cos(e) -> Call:
    return Call("cos", _coerce(e))


def tan(e) -> Call:
    return Call("tan", _coerce(e))


def sec(e) -> Call:
    return Call("sec", _coerce(e))


def exp(e) -> Call:
    return Call("exp", _coerce(e))


def log(e) -> Call:
    return Call("log", _coerce(e))


def sqrt(e) -> Call:
    return Call("sqrt", _coerce(e))


ZERO = Num(0.0)
ONE = Num(1.0)


# ---------------------------------------------------------------------------
# tokenizer / parser
# ---------------------------------------------------------------------------

_OPS = set("+-*/^()")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Returns (kind, value, position) triples, kind in num|name|op."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                float(lit)
            except ValueError:
                raise ParseError(f"bad number literal {lit!r}", i) from None
            tokens.append(("num", lit, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    return tokens


class _Parser:
    def __init__(self, text: str, variables):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.variables = None if variables is None else set(variables)

    def peek(self):
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return ("end", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, val, at = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", at)
        self.pos += 1

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, at = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", at)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.pos += 1
                e = Bin(val, e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.pos += 1
                e = Bin(val, e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.pos += 1
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.pos += 1
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, at = self.next()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", at)
                self.pos += 1
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            if self.variables is not None and val not in self.variables:
                raise ParseError(f"unknown identifier {val!r}", at)
            return Var(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError(f"unexpected {val!r}" if val else "unexpected end of input", at)


def parse(text: str, variables: Iterable[str] | None = None) -> Expr:
    """Parses ``text``; when ``variables`` is given, rejects other names."""
    return _Parser(text, variables).parse()


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _apply_fn(fn: str, x: float) -> float:
    try:
        if fn == "sin":
            return math.sin(x)
        if fn == "cos":
            return math.cos(x)
        if fn == "tan":
            return math.tan(x)
        if fn == "sec":
            return 1.0 / math.cos(x)
        if fn == "exp":
            return math.exp(x)
        if fn == "log":
            return math.log(x)
        if fn == "sqrt":
            return math.sqrt(x)
    except (ValueError, OverflowError, ZeroDivisionError) as e:
        raise EvalError(f"{fn}({x!r}): {e}") from None
    raise EvalError(f"unknown function {fn!r}")


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    """Evaluates ``e``; singularities raise EvalError instead of yielding NaN."""
    v = _eval(e, env)
    if not math.isfinite(v):
        raise EvalError(f"non-finite result from {to_string(e)}")
    return v


def _eval(e: Expr, env) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Call):
        v = _apply_fn(e.fn, _eval(e.arg, env))
        if not math.isfinite(v):
            raise EvalError(f"non-finite result from {e.fn}")
        return v
    if isinstance(e, Bin):
        a = _eval(e.lhs, env)
        b = _eval(e.rhs, env)
        try:
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "/":
                return a / b
            if e.op == "^":
                return math.pow(a, b)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvalError(f"{a!r} {e.op} {b!r}: {exc}") from None
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

def differentiate(e: Expr, name: str) -> Expr:
    """Exact symbolic partial derivative of ``e`` with respect to ``name``."""
    return fold_constants(_diff(e, name))


def _diff(e: Expr, x: str) -> Expr:
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == x else ZERO
    if isinstance(e, Neg):
        return Neg(_diff(e.arg, x))
    if isinstance(e, Call):
        du = _diff(e.arg, x)
        u = e.arg
        if e.fn == "sin":
            outer = Call("cos", u)
        elif e.fn == "cos":
            outer = Neg(Call("sin", u))
        elif e.fn == "tan":
            outer = Bin("^", Call("sec", u), Num(2.0))
        elif e.fn == "sec":
            outer = Bin("*", Call("sec", u), Call("tan", u))
        elif e.fn == "exp":
            outer = Call("exp", u)
        elif e.fn == "log":
            outer = Bin("/", ONE, u)
        elif e.fn == "sqrt":
            outer = Bin("/", ONE, Bin("*", Num(2.0), Call("sqrt", u)))
        else:
            raise ExprError(f"unknown function {e.fn!r}")
        return Bin("*", outer, du)
    if isinstance(e, Bin):
        a, b = e.lhs, e.rhs
        da, db = _diff(a, x), _diff(b, x)
        if e.op == "+":
            return Bin("+", da, db)
        if e.op == "-":
            return Bin("-", da, db)
        if e.op == "*":
            return Bin("+", Bin("*", da, b), Bin("*", a, db))
        if e.op == "/":
            return Bin("/", Bin("-", Bin("*", da, b), Bin("*", a, db)),
                       Bin("^", b, Num(2.0)))
        if e.op == "^":
            if isinstance(b, Num):
                # constant exponent: n * a^(n-1) * a'
                return Bin("*", Bin("*", b, Bin("^", a, Num(b.value - 1.0))), da)
            # general case: a^b * (b' log a + b a'/a)
            return Bin("*", e, Bin("+", Bin("*", db, Call("log", a)),
                                   Bin("*", b, Bin("/", da, a))))
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _format_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _guard_minus(s: str) -> str:
    # an operand rendered with a leading minus must not follow an operator
    # bare, or reparsing would regroup it; parenthesizing is stable
    return f"({s})" if s.startswith("-") else s


def _print(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Num):
        s = _format_num(e.value)
        if e.value < 0 and parent_prec > 1:
            return f"({s})"
        return s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({_print(e.arg, 0)})"
    if isinstance(e, Neg):
        inner = _print(e.arg, _PREC["neg"])
        s = f"-{inner}"
        if parent_prec > 1:
            return f"({s})"
        return s
    if isinstance(e, Bin):
        prec = _PREC[e.op]
        if e.op == "^":
            lhs = _print(e.lhs, prec + 1)
            rhs = _guard_minus(_print(e.rhs, prec))
            s = f"{lhs}^{rhs}"
        else:
            lhs = _print(e.lhs, prec)
            rhs = _guard_minus(_print(e.rhs, prec + (1 if e.op in ("-", "/") else 0)))
            s = f"{lhs} {e.op} {rhs}" if e.op in "+-" else f"{lhs}{e.op}{rhs}"
        if prec < parent_prec:
            return f"({s})"
        return s
    raise TypeError(f"not an expression node: {e!r}")


def to_string(e: Expr) -> str:
    """Renders ``e``; parse(to_string(e)) evaluates identically to ``e``."""
    return _print(e, 0)


# ---------------------------------------------------------------------------
# constant folding
# ---------------------------------------------------------------------------

def fold_constants(e: Expr) -> Expr:
    """Value-preserving simplification: constant subtrees and unit elements."""
    if isinstance(e, (Num, Var)):
        return e
    if isinstance(e, Neg):
        a = fold_constants(e.arg)
        if isinstance(a, Num):
            return Num(-a.value)
        if isinstance(a, Neg):
            return a.arg
        return Neg(a)
    if isinstance(e, Call):
        a = fold_constants(e.arg)
        if isinstance(a, Num):
            try:
                return Num(_apply_fn(e.fn, a.value))
            except EvalError:
                pass
        return Call(e.fn, a)
    if isinstance(e, Bin):
        a = fold_constants(e.lhs)
        b = fold_constants(e.rhs)
        if isinstance(a, Num) and isinstance(b, Num):
            try:
                v = _eval(Bin(e.op, a, b), {})
                if math.isfinite(v):
                    return Num(v)
            except EvalError:
                pass
        if e.op == "+":
            if _is_zero(a):
                return b
            if _is_zero(b):
                return a
        elif e.op == "-":
            if _is_zero(b):
                return a
            if _is_zero(a):
                return fold_constants(Neg(b))
        elif e.op == "*":
            if _is_zero(a) or _is_zero(b):
                return ZERO
            if _is_one(a):
                return b
            if _is_one(b):
                return a
        elif e.op == "/":
            if _is_zero(a) and not _is_zero(b):
                return ZERO
            if _is_one(b):
                return a
        elif e.op == "^":
            if _is_one(b):
                return a
            if isinstance(b, Num) and b.value == 0.0:
                return ONE
            if _is_one(a):
                return ONE
        return Bin(e.op, a, b)
    raise TypeError(f"not an expression node: {e!r}")


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 1.0


# ---------------------------------------------------------------------------
# free variables / compilation
# ---------------------------------------------------------------------------

def free_variables(e: Expr) -> frozenset[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Neg):
            stack.append(node.arg)
        elif isinstance(node, Call):
            stack.append(node.arg)
        elif isinstance(node, Bin):
            stack.append(node.lhs)
            stack.append(node.rhs)
    return frozenset(out)


def _pysrc(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"_v[{e.name!r}]"
    if isinstance(e, Neg):
        return f"(-{_pysrc(e.arg)})"
    if isinstance(e, Call):
        if e.fn == "sec":
            return f"(1.0/_m.cos({_pysrc(e.arg)}))"
        return f"_m.{e.fn}({_pysrc(e.arg)})"
    if isinstance(e, Bin):
        a, b = _pysrc(e.lhs), _pysrc(e.rhs)
        if e.op == "^":
            return f"_m.pow({a}, {b})"
        return f"({a} {e.op} {b})"
    raise TypeError(f"not an expression node: {e!r}")


def compile_fn(e: Expr, names: Iterable[str]) -> Callable[..., float]:
    """Compiles ``e`` to a fast positional-argument callable.

    The compiled function raises EvalError on the same singularities the
    tree-walking evaluator reports.
    """
    names = tuple(names)
    missing = free_variables(e) - set(names)
    if missing:
        raise ExprError(f"unbound variables {sorted(missing)}")
    args = ", ".join(names) if names else ""
    body = _pysrc(e)
    src = f"def _f({args}):\n    _v = locals()\n    return {body}\n"
    ns: dict = {"_m": math}
    exec(src, ns)  # noqa: S102 - generated from a closed expression grammar
    raw = ns["_f"]

    def wrapped(*vals: float) -> float:
        try:
            out = raw(*vals)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvalError(str(exc)) from None
        if not math.isfinite(out):
            raise EvalError(f"non-finite result from compiled expression")
        return out

    return wrapped


# ---------------------------------------------------------------------------
# normal form and symbolic equivalence
# ---------------------------------------------------------------------------

def normal_form(e: Expr) -> dict[tuple, float]:
    """Sum-of-products normal form: {sorted factor tuple: coefficient}.

    Factors are canonical strings with integer exponents.  Products are
    expanded over sums, numeric coefficients combined, and same-base
    factors merged, so structurally different spellings of the same
    polynomial-in-factors expression normalize identically.
    """
    return _nf(fold_constants(e))


def _nf_scale(nf: dict, c: float) -> dict:
    return {k: v * c for k, v in nf.items()}


def _nf_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + v
    return {k: v for k, v in out.items() if v != 0.0}


def _nf_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            powers: dict[str, int] = {}
            for base, n in ka + kb:
                powers[base] = powers.get(base, 0) + n
            key = tuple(sorted((b_, n_) for b_, n_ in powers.items() if n_ != 0))
            out[key] = out.get(key, 0.0) + va * vb
    return {k: v for k, v in out.items() if v != 0.0}


def _atom_key(e: Expr) -> str:
    if isinstance(e, Call):
        inner = _nf_string(_nf(fold_constants(e.arg)))
        return f"{e.fn}({inner})"
    return to_string(e)


def _nf_string(nf: dict) -> str:
    parts = []
    for key in sorted(nf):
        factors = "*".join(f"{b}^{n}" if n != 1 else b for b, n in key) or "1"
        parts.append(f"{nf[key]!r}*{factors}")
    return "+".join(parts) or "0"


def _nf(e: Expr) -> dict:
    if isinstance(e, Num):
        return {(): e.value} if e.value != 0.0 else {}
    if isinstance(e, Var):
        return {((e.name, 1),): 1.0}
    if isinstance(e, Neg):
        return _nf_scale(_nf(e.arg), -1.0)
    if isinstance(e, Call):
        return {((_atom_key(e), 1),): 1.0}
    if isinstance(e, Bin):
        if e.op == "+":
            return _nf_add(_nf(e.lhs), _nf(e.rhs))
        if e.op == "-":
            return _nf_add(_nf(e.lhs), _nf_scale(_nf(e.rhs), -1.0))
        if e.op == "*":
            return _nf_mul(_nf(e.lhs), _nf(e.rhs))
        if e.op == "/":
            den = _nf(e.rhs)
            if len(den) == 1:
                ((key, coeff),) = den.items()
                inv = {tuple((b, -n) for b, n in key): 1.0 / coeff}
                return _nf_mul(_nf(e.lhs), inv)
            return {((_atom_key(e), 1),): 1.0}
        if e.op == "^":
            if isinstance(e.rhs, Num) and e.rhs.value == int(e.rhs.value):
                n = int(e.rhs.value)
                base = _nf(e.lhs)
                if n == 0:
                    return {(): 1.0}
                if len(base) == 1:
                    ((key, coeff),) = base.items()
                    return {tuple((b, k * n) for b, k in key): coeff ** n}
                if 0 < n <= 4:
                    out = base
                    for _ in range(n - 1):
                        out = _nf_mul(out, base)
                    return out
            return {((_atom_key(e), 1),): 1.0}
    raise TypeError(f"not an expression node: {e!r}")


def equivalent(a: Expr, b: Expr, tol: float = 1e-12) -> bool:
    """Symbolic equality through the sum-of-products normal form."""
    na, nb = normal_form(a), normal_form(b)
    keys = set(na) | set(nb)
    scale = max([1.0] + [abs(v) for v in na.values()] + [abs(v) for v in nb.values()])
    return all(abs(na.get(k, 0.0) - nb.get(k, 0.0)) <= tol * scale for k in keys)
