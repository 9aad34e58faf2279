"""Scalar expression graphs with exact derivatives.

Expressions are immutable DAGs over the primitive set {+, -, *, /, integer
power, tanh}. Differentiation builds new expression graphs, so a derivative
is itself differentiable: second-order and mixed derivatives come for free.
All arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence


class EvaluationError(ArithmeticError):
    """A node produced a non-finite value or was missing a binding."""


class Expr:
    """Base class for expression nodes. Nodes are immutable after creation."""

    __slots__ = ()
    args: tuple = ()

    def __add__(self, other):
        return _add(self, _coerce(other))

    def __radd__(self, other):
        return _add(_coerce(other), self)

    def __sub__(self, other):
        return _add(self, _neg(_coerce(other)))

    def __rsub__(self, other):
        return _add(_coerce(other), _neg(self))

    def __mul__(self, other):
        return _mul(self, _coerce(other))

    def __rmul__(self, other):
        return _mul(_coerce(other), self)

    def __truediv__(self, other):
        return _div(self, _coerce(other))

    def __rtruediv__(self, other):
        return _div(_coerce(other), self)

    def __neg__(self):
        return _neg(self)

    def __pow__(self, exponent):
        if not isinstance(exponent, int):
            raise TypeError("exponent must be an int, got %r" % (exponent,))
        return _pow(self, exponent)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)

    def __repr__(self):
        return f"Const({self.value!r})"


class Var(Expr):
    """A named variable. Identity (not name) is what grad differentiates by,
    so two Vars with the same name are still distinct targets."""

    __slots__ = ("name",)

    def __init__(self, name: str = "x"):
        self.name = name

    def __repr__(self):
        return f"Var({self.name})"


class Add(Expr):
    __slots__ = ("args",)

    def __init__(self, a: Expr, b: Expr):
        self.args = (a, b)


class Mul(Expr):
    __slots__ = ("args",)

    def __init__(self, a: Expr, b: Expr):
        self.args = (a, b)


class Div(Expr):
    __slots__ = ("args",)

    def __init__(self, a: Expr, b: Expr):
        self.args = (a, b)


class Neg(Expr):
    __slots__ = ("args",)

    def __init__(self, a: Expr):
        self.args = (a,)


class Pow(Expr):
    """Integer power. The exponent is structural, not an operand."""

    __slots__ = ("args", "exponent")

    def __init__(self, base: Expr, exponent: int):
        self.args = (base,)
        self.exponent = int(exponent)


class Tanh(Expr):
    __slots__ = ("args",)

    def __init__(self, a: Expr):
        self.args = (a,)


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Const(x)
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def _is_const(x: Expr, value=None) -> bool:
    if not isinstance(x, Const):
        return False
    return value is None or x.value == value


def _add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value) if b.value != 0.0 else Div(a, b)
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.args[0]
    return Neg(a)


def _pow(base: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return Const(1.0)
    if exponent == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** exponent)
    return Pow(base, exponent)


def tanh(x) -> Expr:
    x = _coerce(x)
    if isinstance(x, Const):
        return Const(math.tanh(x.value))
    return Tanh(x)


def topo_order(root: Expr) -> list[Expr]:
    """Children-before-parents ordering of the DAG under root."""
    order: list[Expr] = []
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for child in node.args:
            if id(child) not in seen:
                stack.append((child, False))
    return order


def variables(root: Expr) -> list[Var]:
    """All distinct Vars reachable from root, in first-visit order."""
    return [n for n in topo_order(root) if isinstance(n, Var)]


def evaluate(root: Expr, env: Mapping[Var, float]) -> float:
    """Evaluate the graph at the bindings in env.

    Raises EvaluationError if a variable is unbound or any node produces a
    non-finite value (the error names the offending node kind).
    """
    values: dict[int, float] = {}
    for node in topo_order(root):
        if isinstance(node, Const):
            v = node.value
        elif isinstance(node, Var):
            try:
                v = float(env[node])
            except KeyError:
                raise EvaluationError(f"unbound variable {node.name!r}") from None
        elif isinstance(node, Add):
            v = values[id(node.args[0])] + values[id(node.args[1])]
        elif isinstance(node, Mul):
            v = values[id(node.args[0])] * values[id(node.args[1])]
        elif isinstance(node, Div):
            denom = values[id(node.args[1])]
            if denom == 0.0:
                raise EvaluationError("division by zero in Div node")
            v = values[id(node.args[0])] / denom
        elif isinstance(node, Neg):
            v = -values[id(node.args[0])]
        elif isinstance(node, Pow):
            v = values[id(node.args[0])] ** node.exponent
        elif isinstance(node, Tanh):
            v = math.tanh(values[id(node.args[0])])
        else:  # pragma: no cover
            raise TypeError(f"unknown node type {type(node).__name__}")
        if not math.isfinite(v):
            raise EvaluationError(
                f"non-finite value in {type(node).__name__} node"
            )
        values[id(node)] = v
    return values[id(root)]


def grad_exprs(f: Expr, wrt: Sequence[Var]) -> list[Expr]:
    """Build derivative graphs df/dv for each v in wrt.

    Reverse-mode accumulation over the DAG; the returned graphs share
    subexpressions with f and with each other, and can themselves be
    differentiated again.
    """
    order = topo_order(f)
    adjoint: dict[int, Expr] = {id(f): Const(1.0)}

    def bump(node: Expr, contribution: Expr) -> None:
        prior = adjoint.get(id(node))
        adjoint[id(node)] = contribution if prior is None else _add(prior, contribution)

    for node in reversed(order):
        a = adjoint.get(id(node))
        if a is None or _is_const(a, 0.0):
            continue
        if isinstance(node, Add):
            bump(node.args[0], a)
            bump(node.args[1], a)
        elif isinstance(node, Mul):
            x, y = node.args
            bump(x, _mul(a, y))
            bump(y, _mul(a, x))
        elif isinstance(node, Div):
            x, y = node.args
            bump(x, _div(a, y))
            bump(y, _neg(_div(_mul(a, x), _mul(y, y))))
        elif isinstance(node, Neg):
            bump(node.args[0], _neg(a))
        elif isinstance(node, Pow):
            x = node.args[0]
            bump(x, _mul(a, _mul(Const(node.exponent), _pow(x, node.exponent - 1))))
        elif isinstance(node, Tanh):
            # d tanh(x)/dx = 1 - tanh(x)^2; reuse this node so the primal
            # value is shared between f and its derivative graph.
            bump(node.args[0], _mul(a, _add(Const(1.0), _neg(_mul(node, node)))))

    return [adjoint.get(id(v), Const(0.0)) for v in wrt]


@dataclass(frozen=True)
class GradResult:
    """Value of the expression plus its partials keyed by Var."""

    value: float
    partials: dict

    def partial_vector(self, wrt: Sequence[Var]) -> list[float]:
        return [self.partials[v] for v in wrt]


def _as_env(variables_: Sequence[Var], point) -> dict:
    if isinstance(point, Mapping):
        return dict(point)
    point = list(point)
    if len(point) != len(variables_):
        raise ValueError(
            f"point has {len(point)} entries for {len(variables_)} variables"
        )
    return {v: float(x) for v, x in zip(variables_, point)}


def grad(f: Expr, wrt: Sequence[Var], point) -> GradResult:
    """Evaluate f and all partials df/dv at a point.

    point is either a sequence aligned with wrt or a mapping from Var to
    value (the mapping form may bind extra variables appearing in f).
    Partials are exact up to float rounding, never finite differences.
    """
    wrt = list(wrt)
    env = _as_env(wrt, point)
    value = evaluate(f, env)
    dexprs = grad_exprs(f, wrt)
    partials = {v: evaluate(df, env) for v, df in zip(wrt, dexprs)}
    return GradResult(value=value, partials=partials)


def nested_grad(f: Expr, inner_vars: Sequence[Var], outer_vars: Sequence[Var], point) -> GradResult:
    """Differentiate a composite expression that embeds gradient results.

    f may contain subgraphs produced by grad_exprs over inner_vars (for
    example a loss built from dH/dq and dH/dp); those embedded derivatives
    are first-class nodes, so differentiating f with respect to outer_vars
    yields the exact mixed second derivatives. point must bind both
    variable groups (sequence form: inner followed by outer).
    """
    inner_vars = list(inner_vars)
    outer_vars = list(outer_vars)
    env = _as_env(inner_vars + outer_vars, point)
    return grad(f, outer_vars, env)


def check_gradient(f: Expr, wrt: Sequence[Var], point, h: float = 1e-6) -> float:
    """Max relative deviation between exact partials and central differences.

    Deviation per variable is |analytic - numeric| / max(1, |analytic|);
    useful as a validation oracle for any expression built here.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    wrt = list(wrt)
    env = _as_env(wrt, point)
    result = grad(f, wrt, env)
    worst = 0.0
    for v in wrt:
        saved = env[v]
        env[v] = saved + h
        up = evaluate(f, env)
        env[v] = saved - h
        down = evaluate(f, env)
        env[v] = saved
        numeric = (up - down) / (2.0 * h)
        analytic = result.partials[v]
        dev = abs(analytic - numeric) / max(1.0, abs(analytic))
        worst = max(worst, dev)
    return worst
