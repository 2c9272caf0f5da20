"""Closed-form expression trees with exact symbolic differentiation.

Grammar (infix, `^` or `**` for powers, integer exponents only):

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom (('^'|'**') int_exponent)?
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Built-in functions: smoothstep (the C^2 quintic step: 0 below 0, 1 above
1, 6t^5-15t^4+10t^3 between), its first two derivatives smoothstep_d1 /
smoothstep_d2, and sqrt.  Evaluation is vectorised over numpy arrays.

One evaluation convention matters: a product with a zero factor is zero
even when the other factor is non-finite.  Generating families reach
flat regions through smoothstep tapers whose companion factors may
contain 1/sqrt singularities exactly where the taper vanishes; the
convention evaluates those products to their (correct) limit instead of
poisoning the grid with NaNs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Set, Union

import numpy as np


class ExpressionError(ValueError):
    """Raised for parse errors, bad exponents, or unknown symbols."""


Number = Union[int, float]


class Expr:
    """Base class for expression nodes (immutable)."""

    def evaluate(self, env: Dict[str, np.ndarray]) -> np.ndarray:
        memo: Dict[int, np.ndarray] = {}
        return _eval(self, env, memo)

    def evaluate_scalar(self, env: Dict[str, float]) -> float:
        arr_env = {k: np.float64(v) for k, v in env.items()}
        return float(self.evaluate(arr_env))

    def diff(self, var: str) -> "Expr":
        return _diff(self, var)

    def substitute(self, mapping: Dict[str, "Expr"]) -> "Expr":
        return _subst(self, mapping)

    def variables(self) -> Set[str]:
        acc: Set[str] = set()
        _vars(self, acc)
        return acc

    def __str__(self) -> str:
        return _emit(self, 0)

    def __repr__(self) -> str:
        return f"parse({str(self)!r})"


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str


@dataclass(frozen=True, repr=False)
class Add(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, repr=False)
class Sub(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, repr=False)
class Mul(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, repr=False)
class Div(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int):
            raise ExpressionError("power exponents must be integers")


@dataclass(frozen=True, repr=False)
class Fun(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in _FUNCTIONS:
            raise ExpressionError(f"unknown function {self.name!r}")


def _smoothstep(t):
    u = np.clip(t, 0.0, 1.0)
    return u * u * u * (u * (u * 6.0 - 15.0) + 10.0)


def _smoothstep_d1(t):
    u = np.clip(t, 0.0, 1.0)
    w = u * (1.0 - u)
    return 30.0 * w * w


def _smoothstep_d2(t):
    u = np.clip(t, 0.0, 1.0)
    return 60.0 * u * (2.0 * u - 1.0) * (u - 1.0)


def _sqrt(t):
    with np.errstate(invalid="ignore"):
        return np.sqrt(t)


_FUNCTIONS = {
    "smoothstep": _smoothstep,
    "smoothstep_d1": _smoothstep_d1,
    "smoothstep_d2": _smoothstep_d2,
    "sqrt": _sqrt,
}


def _eval(node: Expr, env, memo) -> np.ndarray:
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(node, Const):
        out = np.float64(node.value)
    elif isinstance(node, Var):
        try:
            out = np.asarray(env[node.name], dtype=np.float64)
        except KeyError:
            raise ExpressionError(f"unbound variable {node.name!r}")
    elif isinstance(node, Add):
        out = _eval(node.a, env, memo) + _eval(node.b, env, memo)
    elif isinstance(node, Sub):
        out = _eval(node.a, env, memo) - _eval(node.b, env, memo)
    elif isinstance(node, Mul):
        a = _eval(node.a, env, memo)
        b = _eval(node.b, env, memo)
        with np.errstate(all="ignore"):
            prod = a * b
        # a hard zero annihilates non-finite partners (taper convention)
        out = np.where((a == 0) | (b == 0), 0.0, prod)
    elif isinstance(node, Div):
        with np.errstate(all="ignore"):
            out = _eval(node.a, env, memo) / _eval(node.b, env, memo)
    elif isinstance(node, Pow):
        with np.errstate(all="ignore"):
            out = np.power(_eval(node.base, env, memo), node.exponent)
    elif isinstance(node, Fun):
        out = _FUNCTIONS[node.name](_eval(node.arg, env, memo))
    else:  # pragma: no cover
        raise ExpressionError(f"unknown node {type(node).__name__}")
    memo[key] = out
    return out


# ---------------------------------------------------------------------------
# differentiation (with light algebraic folding to keep Hessians small)


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1.0


def add(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return Const(0.0)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def _diff(node: Expr, var: str) -> Expr:
    if isinstance(node, Const):
        return Const(0.0)
    if isinstance(node, Var):
        return Const(1.0) if node.name == var else Const(0.0)
    if isinstance(node, Add):
        return add(_diff(node.a, var), _diff(node.b, var))
    if isinstance(node, Sub):
        return sub(_diff(node.a, var), _diff(node.b, var))
    if isinstance(node, Mul):
        return add(mul(_diff(node.a, var), node.b), mul(node.a, _diff(node.b, var)))
    if isinstance(node, Div):
        da, db = _diff(node.a, var), _diff(node.b, var)
        if _is_zero(db):
            return Div(da, node.b) if not _is_zero(da) else Const(0.0)
        num = sub(mul(da, node.b), mul(node.a, db))
        return Div(num, Pow(node.b, 2))
    if isinstance(node, Pow):
        k = node.exponent
        if k == 0:
            return Const(0.0)
        db = _diff(node.base, var)
        if _is_zero(db):
            return Const(0.0)
        if k == 1:
            return db
        return mul(Const(float(k)), mul(Pow(node.base, k - 1), db))
    if isinstance(node, Fun):
        da = _diff(node.arg, var)
        if _is_zero(da):
            return Const(0.0)
        if node.name == "smoothstep":
            outer: Expr = Fun("smoothstep_d1", node.arg)
        elif node.name == "smoothstep_d1":
            outer = Fun("smoothstep_d2", node.arg)
        elif node.name == "smoothstep_d2":
            raise ExpressionError("smoothstep is twice differentiable; "
                                  "third derivatives are not available")
        elif node.name == "sqrt":
            return Div(da, mul(Const(2.0), Fun("sqrt", node.arg)))
        else:  # pragma: no cover
            raise ExpressionError(f"no derivative for {node.name!r}")
        return mul(outer, da)
    raise ExpressionError(f"unknown node {type(node).__name__}")  # pragma: no cover


def _subst(node: Expr, mapping: Dict[str, Expr]) -> Expr:
    if isinstance(node, Const):
        return node
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Add):
        return Add(_subst(node.a, mapping), _subst(node.b, mapping))
    if isinstance(node, Sub):
        return Sub(_subst(node.a, mapping), _subst(node.b, mapping))
    if isinstance(node, Mul):
        return Mul(_subst(node.a, mapping), _subst(node.b, mapping))
    if isinstance(node, Div):
        return Div(_subst(node.a, mapping), _subst(node.b, mapping))
    if isinstance(node, Pow):
        return Pow(_subst(node.base, mapping), node.exponent)
    if isinstance(node, Fun):
        return Fun(node.name, _subst(node.arg, mapping))
    raise ExpressionError(f"unknown node {type(node).__name__}")  # pragma: no cover


def _vars(node: Expr, acc: Set[str]) -> None:
    if isinstance(node, Var):
        acc.add(node.name)
    elif isinstance(node, (Add, Sub, Mul, Div)):
        _vars(node.a, acc)
        _vars(node.b, acc)
    elif isinstance(node, Pow):
        _vars(node.base, acc)
    elif isinstance(node, Fun):
        _vars(node.arg, acc)


# ---------------------------------------------------------------------------
# emission (str round-trips through parse)

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_UNARY, _LEVEL_ATOM = 1, 2, 3, 4


def _emit(node: Expr, parent_level: int) -> str:
    if isinstance(node, Const):
        v = node.value
        if v < 0:
            body = _fmt_number(v)
            return f"({body})" if parent_level > _LEVEL_ADD else body
        return _fmt_number(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, (Add, Sub)):
        op = "+" if isinstance(node, Add) else "-"
        body = f"{_emit(node.a, _LEVEL_ADD)} {op} {_emit(node.b, _LEVEL_ADD + 1)}"
        return f"({body})" if parent_level > _LEVEL_ADD else body
    if isinstance(node, (Mul, Div)):
        op = "*" if isinstance(node, Mul) else "/"
        body = f"{_emit(node.a, _LEVEL_MUL)}{op}{_emit(node.b, _LEVEL_MUL + 1)}"
        return f"({body})" if parent_level > _LEVEL_MUL else body
    if isinstance(node, Pow):
        k = node.exponent
        exp = str(k) if k >= 0 else f"({k})"
        return f"{_emit(node.base, _LEVEL_ATOM)}^{exp}"
    if isinstance(node, Fun):
        return f"{node.name}({_emit(node.arg, 0)})"
    raise ExpressionError(f"unknown node {type(node).__name__}")  # pragma: no cover


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


# ---------------------------------------------------------------------------
# parsing


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._scan()
        self.i = 0

    def _scan(self):
        text, n = self.text, len(self.text)
        i = 0
        while i < n:
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
                j = i
                seen_e = False
                while j < n and (text[j].isdigit() or text[j] == "." or
                                 (text[j] in "eE" and not seen_e and j + 1 < n and
                                  (text[j + 1].isdigit() or text[j + 1] in "+-")) or
                                 (text[j] in "+-" and j > i and text[j - 1] in "eE")):
                    if text[j] in "eE":
                        seen_e = True
                    j += 1
                self.tokens.append(("num", text[i:j], i))
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("name", text[i:j], i))
                i = j
                continue
            if text.startswith("**", i):
                self.tokens.append(("op", "^", i))
                i += 2
                continue
            if ch in "+-*/^()":
                self.tokens.append(("op", ch, i))
                i += 1
                continue
            raise ExpressionError(f"unexpected character {ch!r} at position {i}")
        self.tokens.append(("end", "", n))

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok


def parse(text: str) -> Expr:
    """Parse an expression string; raises ExpressionError on bad input."""
    tz = _Tokenizer(text)
    node = _parse_expr(tz)
    kind, val, pos = tz.peek()
    if kind != "end":
        raise ExpressionError(f"trailing input {val!r} at position {pos}")
    return node


def _parse_expr(tz) -> Expr:
    node = _parse_term(tz)
    while True:
        kind, val, _ = tz.peek()
        if kind == "op" and val in "+-":
            tz.next()
            rhs = _parse_term(tz)
            node = Add(node, rhs) if val == "+" else Sub(node, rhs)
        else:
            return node


def _parse_term(tz) -> Expr:
    node = _parse_unary(tz)
    while True:
        kind, val, _ = tz.peek()
        if kind == "op" and val in "*/":
            tz.next()
            rhs = _parse_unary(tz)
            node = Mul(node, rhs) if val == "*" else Div(node, rhs)
        else:
            return node


def _parse_unary(tz) -> Expr:
    kind, val, _ = tz.peek()
    if kind == "op" and val == "-":
        tz.next()
        return Sub(Const(0.0), _parse_unary(tz))
    if kind == "op" and val == "+":
        tz.next()
        return _parse_unary(tz)
    return _parse_power(tz)


def _parse_power(tz) -> Expr:
    base = _parse_atom(tz)
    kind, val, pos = tz.peek()
    if kind == "op" and val == "^":
        tz.next()
        k = _parse_int_exponent(tz)
        return Pow(base, k)
    return base


def _parse_int_exponent(tz) -> int:
    kind, val, pos = tz.peek()
    neg = False
    parens = False
    if kind == "op" and val == "(":
        tz.next()
        parens = True
        kind, val, pos = tz.peek()
    if kind == "op" and val == "-":
        tz.next()
        neg = True
        kind, val, pos = tz.peek()
    if kind != "num":
        raise ExpressionError(f"integer exponent expected at position {pos}")
    tz.next()
    try:
        k = int(val)
    except ValueError:
        raise ExpressionError(f"integer exponent expected, got {val!r}")
    if parens:
        kind, val, pos = tz.next()
        if (kind, val) != ("op", ")"):
            raise ExpressionError(f"')' expected at position {pos}")
    return -k if neg else k


def _parse_atom(tz) -> Expr:
    kind, val, pos = tz.next()
    if kind == "num":
        return Const(float(val))
    if kind == "name":
        k2, v2, _ = tz.peek()
        if (k2, v2) == ("op", "("):
            tz.next()
            arg = _parse_expr(tz)
            k3, v3, p3 = tz.next()
            if (k3, v3) != ("op", ")"):
                raise ExpressionError(f"')' expected at position {p3}")
            if val not in _FUNCTIONS:
                raise ExpressionError(f"unknown function {val!r} at position {pos}")
            return Fun(val, arg)
        return Var(val)
    if (kind, val) == ("op", "("):
        node = _parse_expr(tz)
        k2, v2, p2 = tz.next()
        if (k2, v2) != ("op", ")"):
            raise ExpressionError(f"')' expected at position {p2}")
        return node
    raise ExpressionError(f"unexpected token {val!r} at position {pos}")


def gradient(e: Expr, variables: Iterable[str]) -> list:
    return [e.diff(v) for v in variables]


def hessian(e: Expr, variables: Iterable[str]) -> list:
    names = list(variables)
    grad = gradient(e, names)
    return [[g.diff(v) for v in names] for g in grad]
