"""Truncated-Taylor (jet) arithmetic and a small formula language.

A jet holds the Taylor coefficients of a smooth function at a point, up to a
fixed total degree, and propagates them exactly through arithmetic and the
supported elementary functions.  Coefficient arrays carry optional trailing
batch axes, so a whole grid of evaluation points moves through an expression
in one vectorized pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_ORDER = 4


class ExpressionError(ValueError):
    """Base class for formula parsing problems."""


class ExpressionSyntaxError(ExpressionError):
    """Malformed formula text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownVariableError(ExpressionError):
    """A name in the formula is not in the declared variable list."""


class EvaluationDomainError(ArithmeticError):
    """Division by zero or a non-positive sqrt argument during evaluation."""


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> "JetSpace":
    return JetSpace(nvars, order)


def _multi_indices(nvars: int, order: int) -> list[tuple[int, ...]]:
    if nvars == 0:
        return [()]
    out = []
    for total in range(order + 1):
        out.extend(_compositions(total, nvars))
    return out


def _compositions(total: int, nvars: int) -> list[tuple[int, ...]]:
    if nvars == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, nvars - 1):
            out.append((first,) + rest)
    return out


class JetSpace:
    """Layout and precomputed product tables for jets of one (nvars, order)."""

    def __init__(self, nvars: int, order: int):
        if not (0 <= order <= MAX_ORDER):
            raise ValueError(f"order must be in [0, {MAX_ORDER}], got {order}")
        self.nvars = nvars
        self.order = order
        self.exponents = tuple(_multi_indices(nvars, order))
        self.index = {alpha: k for k, alpha in enumerate(self.exponents)}
        self.nterms = len(self.exponents)
        # factor converting the Taylor coefficient of alpha into the partial
        # derivative of order alpha
        self.deriv_factor = np.array(
            [math.prod(math.factorial(a) for a in alpha) for alpha in self.exponents]
        )
        pair_lists: list[list[tuple[int, int]]] = [[] for _ in range(self.nterms)]
        for i, ai in enumerate(self.exponents):
            for j, aj in enumerate(self.exponents):
                if sum(ai) + sum(aj) <= order:
                    k = self.index[tuple(x + y for x, y in zip(ai, aj))]
                    pair_lists[k].append((i, j))
        # flat product table grouped by output term, for one reduceat pass
        flat = [(i, j) for pairs in pair_lists for (i, j) in pairs]
        self.pair_left = np.array([i for i, _ in flat], dtype=np.intp)
        self.pair_right = np.array([j for _, j in flat], dtype=np.intp)
        offsets = np.zeros(self.nterms, dtype=np.intp)
        acc = 0
        for k, pairs in enumerate(pair_lists):
            offsets[k] = acc
            acc += len(pairs)
        self.pair_offsets = offsets


class Jet:
    """Taylor coefficients of a function at a point, up to a total degree.

    ``coeffs`` has shape ``(nterms, *batch)``; entry ``k`` is the Taylor
    coefficient of the multi-index ``space.exponents[k]``.
    """

    __slots__ = ("space", "coeffs")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(value, nvars: int, order: int, batch_shape: tuple[int, ...] = ()) -> "Jet":
        space = jet_space(nvars, order)
        coeffs = np.zeros((space.nterms,) + batch_shape)
        coeffs[0] = value
        return Jet(space, coeffs)

    @staticmethod
    def variables(values: Sequence, order: int) -> list["Jet"]:
        """Jets of the coordinate functions at the given point(s)."""
        arrays = [np.asarray(v, dtype=float) for v in values]
        batch = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        nvars = len(arrays)
        space = jet_space(nvars, order)
        out = []
        for i, a in enumerate(arrays):
            coeffs = np.zeros((space.nterms,) + batch)
            coeffs[0] = a
            if order >= 1:
                unit = tuple(1 if k == i else 0 for k in range(nvars))
                coeffs[space.index[unit]] = 1.0
            out.append(Jet(space, coeffs))
        return out

    # -- queries ------------------------------------------------------------

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def nvars(self) -> int:
        return self.space.nvars

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    def _maybe_scalar(self, arr: np.ndarray):
        return float(arr) if arr.ndim == 0 else arr

    @property
    def value(self):
        return self._maybe_scalar(self.coeffs[0])

    def taylor(self, alpha: tuple[int, ...]):
        """Raw Taylor coefficient of the given multi-index."""
        return self._maybe_scalar(self.coeffs[self.space.index[tuple(alpha)]])

    def partial(self, alpha: tuple[int, ...]):
        """Partial derivative of the given multi-index (symmetric storage)."""
        k = self.space.index[tuple(alpha)]
        return self._maybe_scalar(self.coeffs[k] * self.space.deriv_factor[k])

    def partials(self) -> dict[tuple[int, ...], np.ndarray]:
        return {alpha: self.partial(alpha) for alpha in self.space.exponents}

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError("jets from different spaces cannot be combined")
            return other
        return Jet.constant(other, self.nvars, self.order, self.batch_shape)

    def __add__(self, other):
        if not isinstance(other, Jet):
            out = self.coeffs.copy()
            out[0] += other
            return Jet(self.space, out)
        other = self._coerce(other)
        return Jet(self.space, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other):
        if not isinstance(other, Jet):
            out = self.coeffs.copy()
            out[0] -= other
            return Jet(self.space, out)
        other = self._coerce(other)
        return Jet(self.space, self.coeffs - other.coeffs)

    def __rsub__(self, other):
        out = -self.coeffs
        out[0] += other
        return Jet(self.space, out)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.space, self.coeffs * other)
        other = self._coerce(other)
        space = self.space
        prod = self.coeffs[space.pair_left] * other.coeffs[space.pair_right]
        return Jet(space, np.add.reduceat(prod, space.pair_offsets, axis=0))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.space, self.coeffs / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("jet powers must be integers")
        n = int(n)
        if n < 0:
            return self.reciprocal() ** (-n)
        if n == 0:
            return Jet.constant(1.0, self.nvars, self.order, self.batch_shape)
        result = self
        for _ in range(n - 1):
            result = result * self
        return result

    # -- elementary functions ------------------------------------------------

    def _series(self, deriv_coeffs: np.ndarray) -> "Jet":
        """Compose with a univariate function given its Taylor coefficients
        ``deriv_coeffs[k] = f^(k)(value)/k!`` (shape (order+1, *batch))."""
        e = Jet(self.space, self.coeffs.copy())
        e.coeffs[0] = 0.0
        acc = Jet.constant(deriv_coeffs[self.order], self.nvars, self.order, self.batch_shape)
        for k in range(self.order - 1, -1, -1):
            acc = acc * e
            acc.coeffs[0] += deriv_coeffs[k]
        return acc

    def reciprocal(self) -> "Jet":
        v = np.asarray(self.coeffs[0])
        if np.any(v == 0.0):
            raise EvaluationDomainError("division by zero")
        coeffs = np.empty((self.order + 1,) + self.batch_shape)
        coeffs[0] = 1.0 / v
        for k in range(1, self.order + 1):
            coeffs[k] = -coeffs[k - 1] / v
        return self._series(coeffs)

    def sqrt(self) -> "Jet":
        v = np.asarray(self.coeffs[0])
        if np.any(v <= 0.0):
            raise EvaluationDomainError("sqrt argument must be positive")
        coeffs = np.empty((self.order + 1,) + self.batch_shape)
        coeffs[0] = np.sqrt(v)
        half = 0.5
        for k in range(1, self.order + 1):
            coeffs[k] = coeffs[k - 1] * (half - (k - 1)) / (k * v)
        return self._series(coeffs)

    def exp(self) -> "Jet":
        v = np.asarray(self.coeffs[0])
        base = np.exp(v)
        coeffs = np.array([base / math.factorial(k) for k in range(self.order + 1)])
        return self._series(coeffs)

    def sin(self) -> "Jet":
        v = np.asarray(self.coeffs[0])
        s, c = np.sin(v), np.cos(v)
        cycle = [s, c, -s, -c]
        coeffs = np.array([cycle[k % 4] / math.factorial(k) for k in range(self.order + 1)])
        return self._series(coeffs)

    def cos(self) -> "Jet":
        v = np.asarray(self.coeffs[0])
        s, c = np.sin(v), np.cos(v)
        cycle = [c, -s, -c, s]
        coeffs = np.array([cycle[k % 4] / math.factorial(k) for k in range(self.order + 1)])
        return self._series(coeffs)


def compose(outer: Jet, inners: Sequence[Jet]) -> Jet:
    """Substitute jets into a jet: evaluate ``outer``'s Taylor polynomial at
    the ``inners``.  Every inner jet must have zero constant term, so the
    truncation to the common order is exact."""
    if len(inners) != outer.nvars:
        raise ValueError("need one inner jet per outer variable")
    for g in inners:
        if np.any(np.asarray(g.coeffs[0]) != 0.0):
            raise ValueError("inner jets must have zero constant term")
    space = inners[0].space if inners else outer.space
    order = space.order if inners else outer.order
    powers = []
    for g in inners:
        ps = [Jet.constant(1.0, g.nvars, order, g.batch_shape)]
        for _ in range(order):
            ps.append(ps[-1] * g)
        powers.append(ps)
    result = Jet.constant(0.0, space.nvars, order, inners[0].batch_shape if inners else ())
    for k, alpha in enumerate(outer.space.exponents):
        if sum(alpha) > order:
            continue
        c = outer.coeffs[k]
        term = None
        for i, a in enumerate(alpha):
            if a:
                term = powers[i][a] if term is None else term * powers[i][a]
        if term is None:
            result.coeffs[0] += c
        else:
            result = result + term * c
    return result


def real_cbrt(x: float) -> float:
    """Real cube root, sign-preserving for negative arguments."""
    return float(np.cbrt(x))


# ---------------------------------------------------------------------------
# Formula syntax trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    def _wrap(self, other) -> "Node":
        if isinstance(other, Node):
            return other
        return Const(float(other))

    def __add__(self, other):
        return Add(self, self._wrap(other))

    def __radd__(self, other):
        return Add(self._wrap(other), self)

    def __sub__(self, other):
        return Sub(self, self._wrap(other))

    def __rsub__(self, other):
        return Sub(self._wrap(other), self)

    def __mul__(self, other):
        return Mul(self, self._wrap(other))

    def __rmul__(self, other):
        return Mul(self._wrap(other), self)

    def __truediv__(self, other):
        return Div(self, self._wrap(other))

    def __rtruediv__(self, other):
        return Div(self._wrap(other), self)

    def __pow__(self, n):
        return Pow(self, int(n))

    def __neg__(self):
        # canonical form: negated literals fold into the constant
        if isinstance(self, Const):
            return Const(-self.value)
        return Neg(self)

    def __str__(self) -> str:
        return format_node(self)


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Add(Node):
    lhs: Node
    rhs: Node


@dataclass(frozen=True)
class Sub(Node):
    lhs: Node
    rhs: Node


@dataclass(frozen=True)
class Mul(Node):
    lhs: Node
    rhs: Node


@dataclass(frozen=True)
class Div(Node):
    lhs: Node
    rhs: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node


FUNCTIONS = ("sin", "cos", "sqrt", "exp")


@dataclass(frozen=True)
class Expression:
    """A formula over a fixed, ordered list of named variables."""

    root: Node
    variables: tuple[str, ...]

    def __str__(self) -> str:
        return format_node(self.root)


def collect_names(node: Node, out: set[str]) -> None:
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, (Add, Sub, Mul, Div)):
        collect_names(node.lhs, out)
        collect_names(node.rhs, out)
    elif isinstance(node, Pow):
        collect_names(node.base, out)
    elif isinstance(node, (Neg, Call)):
        collect_names(node.arg, out)


def expression(root: Node | str, variables: Sequence[str]) -> Expression:
    """Build an Expression from a syntax tree or formula text, checking that
    every referenced name is declared."""
    if isinstance(root, str):
        return parse_expression(root, variables)
    names: set[str] = set()
    collect_names(root, names)
    missing = names - set(variables)
    if missing:
        raise UnknownVariableError(f"unknown variable(s): {', '.join(sorted(missing))}")
    return Expression(root, tuple(variables))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_OPS = set("+-*/^(),")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _TOKEN_OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
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
            tokens.append(("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ExpressionSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.variables = tuple(variables)

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, val, at = self.next()
        if kind != "op" or val != value:
            raise ExpressionSyntaxError(f"expected {value!r}", at)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, at = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {val!r}", at)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                node = Add(node, rhs) if val == "+" else Sub(node, rhs)
            else:
                return node

    def term(self) -> Node:
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.unary()
                node = Mul(node, rhs) if val == "*" else Div(node, rhs)
            else:
                return node

    def unary(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            inner = self.unary()
            return -inner
        if kind == "op" and val == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return Pow(base, self.int_exponent())
        return base

    def int_exponent(self) -> int:
        sign = 1
        kind, val, at = self.peek()
        if kind == "op" and val == "-":
            self.next()
            sign = -1
        kind, val, at = self.next()
        if kind != "num" or any(c in val for c in ".eE"):
            raise ExpressionSyntaxError("exponent must be an integer literal", at)
        return sign * int(val)

    def atom(self) -> Node:
        kind, val, at = self.next()
        if kind == "num":
            try:
                return Const(float(val))
            except ValueError:
                raise ExpressionSyntaxError(f"bad number literal {val!r}", at) from None
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if val not in FUNCTIONS:
                    raise ExpressionSyntaxError(f"unknown function {val!r}", at)
                self.next()
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val not in self.variables:
                raise UnknownVariableError(
                    f"unknown variable {val!r} at position {at}"
                    f" (declared: {', '.join(self.variables)})"
                )
            return Var(val)
        raise ExpressionSyntaxError(f"unexpected token {val!r}", at)


def parse_expression(text: str, variables: Sequence[str]) -> Expression:
    """Parse formula text over the declared variables.

    Grammar: infix ``+ - * /``, ``^`` for integer powers (right of ``^`` must
    be an integer literal), function-call syntax for sin/cos/sqrt/exp, ASCII
    names, decimal and scientific number literals.
    """
    root = _Parser(text, variables).parse()
    return Expression(root, tuple(variables))


# unary minus binds tighter than * and / but looser than ^, matching the parser
_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 2.5, Pow: 3, Const: 9, Var: 9, Call: 9}


def format_node(node: Node) -> str:
    def fmt(n: Node, parent_prec: float, right_side: bool) -> str:
        prec = _PREC[type(n)]
        if isinstance(n, Const):
            s = repr(n.value)
            if math.copysign(1.0, n.value) < 0:
                prec = _PREC[Neg]  # leading minus binds like unary negation
        elif isinstance(n, Var):
            s = n.name
        elif isinstance(n, Call):
            s = f"{n.func}({fmt(n.arg, 0, False)})"
        elif isinstance(n, Neg):
            s = f"-{fmt(n.arg, prec, True)}"
        elif isinstance(n, Pow):
            s = f"{fmt(n.base, prec + 1, False)}^{n.exponent}"
        elif isinstance(n, (Add, Sub)):
            op = "+" if isinstance(n, Add) else "-"
            s = f"{fmt(n.lhs, prec, False)} {op} {fmt(n.rhs, prec + 1, True)}"
        elif isinstance(n, (Mul, Div)):
            op = "*" if isinstance(n, Mul) else "/"
            s = f"{fmt(n.lhs, prec, False)}{op}{fmt(n.rhs, prec + 1, True)}"
        else:  # pragma: no cover
            raise TypeError(f"unknown node {type(n)}")
        if prec < parent_prec or (right_side and prec == parent_prec and parent_prec < 9):
            return f"({s})"
        return s

    return fmt(node, 0, False)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


class EvalGuard:
    """Collects per-lane validity instead of raising on domain errors.

    Used by the batched solver path: lanes that divide by zero or take the
    square root of a non-positive value are flagged invalid and given safe
    placeholder operands, so the rest of the batch keeps computing.
    """

    def __init__(self, batch_shape: tuple[int, ...]):
        self.ok = np.ones(batch_shape, dtype=bool)

    def flag(self, bad) -> None:
        self.ok &= ~np.asarray(bad)


def _guard_nonzero(value, guard: EvalGuard | None, what: str):
    """Replace zero lanes of a prospective divisor with 1 under a guard, or
    raise.  Accepts floats (constant subtrees) and jets."""
    if isinstance(value, Jet):
        bad = np.asarray(value.coeffs[0]) == 0.0
        if not np.any(bad):
            return value
        if guard is None:
            raise EvaluationDomainError(what)
        guard.flag(bad)
        fixed = Jet(value.space, value.coeffs.copy())
        fixed.coeffs[0] = np.where(bad, 1.0, fixed.coeffs[0])
        return fixed
    if value == 0.0:
        if guard is None:
            raise EvaluationDomainError(what)
        guard.flag(np.ones_like(guard.ok))
        return 1.0
    return value


def _eval_node(node: Node, env: dict[str, Jet], guard: EvalGuard | None):
    """Evaluate to a Jet, or to a plain float for constant subtrees."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Add):
        return _eval_node(node.lhs, env, guard) + _eval_node(node.rhs, env, guard)
    if isinstance(node, Sub):
        return _eval_node(node.lhs, env, guard) - _eval_node(node.rhs, env, guard)
    if isinstance(node, Mul):
        return _eval_node(node.lhs, env, guard) * _eval_node(node.rhs, env, guard)
    if isinstance(node, Div):
        num = _eval_node(node.lhs, env, guard)
        den = _guard_nonzero(_eval_node(node.rhs, env, guard), guard, "division by zero")
        return num / den
    if isinstance(node, Pow):
        base = _eval_node(node.base, env, guard)
        if node.exponent < 0:
            base = _guard_nonzero(base, guard, "zero base of a negative power")
        if isinstance(base, Jet):
            return base ** node.exponent
        return float(base) ** node.exponent
    if isinstance(node, Neg):
        return -_eval_node(node.arg, env, guard)
    if isinstance(node, Call):
        arg = _eval_node(node.arg, env, guard)
        if node.func == "sqrt":
            if isinstance(arg, Jet):
                bad = np.asarray(arg.coeffs[0]) <= 0.0
                if np.any(bad):
                    if guard is None:
                        raise EvaluationDomainError("sqrt argument must be positive")
                    guard.flag(bad)
                    arg = Jet(arg.space, arg.coeffs.copy())
                    arg.coeffs[0] = np.where(bad, 1.0, arg.coeffs[0])
                return arg.sqrt()
            if arg <= 0.0:
                if guard is None:
                    raise EvaluationDomainError("sqrt argument must be positive")
                guard.flag(np.ones_like(guard.ok))
                arg = 1.0
            return math.sqrt(arg)
        if isinstance(arg, Jet):
            return getattr(arg, node.func)()
        return getattr(math, node.func)(arg)
    raise TypeError(f"unknown node {type(node)}")  # pragma: no cover


def eval_jet(expr: Expression, at: Sequence, order: int = 3, guard: EvalGuard | None = None) -> Jet:
    """Evaluate a formula together with all partial derivatives up to ``order``.

    ``at`` supplies one coordinate per declared variable; array coordinates
    broadcast to a common batch shape.  Domain violations raise
    :class:`EvaluationDomainError` unless a ``guard`` collects them per lane.
    """
    if len(at) != len(expr.variables):
        raise ValueError(
            f"expected {len(expr.variables)} coordinates for variables "
            f"{expr.variables}, got {len(at)}"
        )
    var_jets = Jet.variables(list(at), order)
    env = dict(zip(expr.variables, var_jets))
    result = _eval_node(expr.root, env, guard)
    if isinstance(result, Jet):
        return result
    batch = var_jets[0].batch_shape if var_jets else ()
    return Jet.constant(result, len(expr.variables), order, batch)
