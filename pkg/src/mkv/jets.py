"""Tensor fields sampled on a batch of points, carrying exact partial derivatives.

A :class:`Jet` stores ``parts[k]`` for ``k = 0..order``; ``parts[k]`` has shape
``(P, *tshape, n, ..., n)`` with ``k`` trailing derivative axes, i.e. the
``k``-th partial derivatives of every tensor component at each of the ``P``
points.  Products propagate derivatives with the Leibniz rule and scalar
functions with Faa di Bruno's formula, so every derivative is exact up to
floating-point rounding; nothing here uses finite differences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .expr import BinOp, Call, Expression, Neg, Node, Num, Var, render

MAX_ORDER = 3
_DERIV_LETTERS = "UVW"
_POINT = "Z"


class PointEvaluationError(ArithmeticError):
    """A computation failed at some of the points; ``bad`` flags which."""

    def __init__(self, subexpression: str, reason: str, bad: np.ndarray):
        self.subexpression = subexpression
        self.reason = reason
        self.bad = np.asarray(bad, dtype=bool)
        super().__init__(f"{reason} in {subexpression!r} at {int(self.bad.sum())} point(s)")


class ExpressionDomainError(PointEvaluationError):
    """An expression was evaluated outside its domain (log/sqrt/division/power)."""


def _splits(k: int):
    """All (subset, complement) splits of the derivative axes 0..k-1."""
    axes = range(k)
    for size in range(k + 1):
        for sub in itertools.combinations(axes, size):
            comp = tuple(a for a in axes if a not in sub)
            yield sub, comp


class Jet:
    """Tensor field values and partials up to ``order`` at ``P`` points."""

    __slots__ = ("parts",)

    def __init__(self, parts: Sequence[np.ndarray]):
        self.parts = [np.asarray(p, dtype=float) for p in parts]

    # shape bookkeeping -----------------------------------------------------
    @property
    def order(self) -> int:
        return len(self.parts) - 1

    @property
    def value(self) -> np.ndarray:
        return self.parts[0]

    @property
    def npoints(self) -> int:
        return self.parts[0].shape[0]

    @property
    def tshape(self) -> tuple[int, ...]:
        return self.parts[0].shape[1:]

    @property
    def nvars(self) -> int:
        if self.order == 0:
            raise ValueError("order-0 jet has no derivative axes")
        return self.parts[1].shape[-1]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"cannot raise jet order {self.order} to {order}")
        return Jet(self.parts[: order + 1])

    def __repr__(self) -> str:
        return f"Jet(tshape={self.tshape}, order={self.order}, points={self.npoints})"

    # construction ----------------------------------------------------------
    @staticmethod
    def constant(value, npoints: int, nvars: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        base = np.broadcast_to(value, (npoints,) + value.shape).copy()
        parts = [base]
        for k in range(1, order + 1):
            parts.append(np.zeros(base.shape + (nvars,) * k))
        return Jet(parts)

    @staticmethod
    def coordinate(points: np.ndarray, index: int, order: int) -> "Jet":
        points = np.asarray(points, dtype=float)
        npts, n = points.shape
        parts = [points[:, index].copy()]
        if order >= 1:
            d1 = np.zeros((npts, n))
            d1[:, index] = 1.0
            parts.append(d1)
        for k in range(2, order + 1):
            parts.append(np.zeros((npts,) + (n,) * k))
        return Jet(parts)

    @staticmethod
    def stack(jets: Sequence["Jet"], axis_shape: tuple[int, ...] | None = None) -> "Jet":
        """Stack same-shaped jets into a new leading tensor axis (optionally reshaped)."""
        order = min(j.order for j in jets)
        parts = []
        for k in range(order + 1):
            arr = np.stack([j.parts[k] for j in jets], axis=1)
            if axis_shape is not None:
                arr = arr.reshape((arr.shape[0],) + axis_shape + arr.shape[2:])
            parts.append(arr)
        return Jet(parts)

    @staticmethod
    def from_derivative(value: np.ndarray, derivative: "Jet") -> "Jet":
        """Assemble a jet from its value and the jet of its gradient.

        ``derivative`` has tensor shape ``tshape + (n,)``; the result has order
        ``derivative.order + 1``.
        """
        return Jet([np.asarray(value, dtype=float)] + list(derivative.parts))

    # algebra ---------------------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        arr = np.asarray(other, dtype=float)
        if self.order == 0:
            return Jet([np.broadcast_to(arr, self.parts[0].shape)])
        return Jet.constant(arr, self.npoints, self.nvars, self.order)

    def __add__(self, other) -> "Jet":
        other = self._coerce(other)
        k = min(self.order, other.order)
        return Jet([self.parts[i] + other.parts[i] for i in range(k + 1)])

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet([-p for p in self.parts])

    def __sub__(self, other) -> "Jet":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Jet":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.tshape == () and self.tshape == ():
                return contract(",->", self, other)
            if other.tshape == ():
                return scale(self, other)
            if self.tshape == ():
                return scale(other, self)
            raise TypeError("use contract() for tensor products")
        return Jet([p * float(other) for p in self.parts])

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return Jet([p / float(other) for p in self.parts])

    def __rtruediv__(self, other) -> "Jet":
        return reciprocal(self) * float(other)

    def derivative(self) -> "Jet":
        """Jet of the gradient; the new tensor axis is appended last."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        return Jet(self.parts[1:])

    def transpose(self, *axes: int) -> "Jet":
        """Permute tensor axes (derivative axes are untouched)."""
        nt = len(self.tshape)
        if sorted(axes) != list(range(nt)):
            raise ValueError(f"bad tensor permutation {axes} for tshape {self.tshape}")
        out = []
        for k, p in enumerate(self.parts):
            perm = (0,) + tuple(a + 1 for a in axes) + tuple(range(nt + 1, nt + 1 + k))
            out.append(p.transpose(perm))
        return Jet(out)

    @property
    def T(self) -> "Jet":
        return self.transpose(*reversed(range(len(self.tshape))))

    def component(self, index: tuple[int, ...]) -> "Jet":
        return Jet([p[(slice(None),) + tuple(index)] for p in self.parts])

    def select(self, mask: np.ndarray) -> "Jet":
        return Jet([p[mask] for p in self.parts])


def pair_einsum(spec: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Two-operand einsum routed through batched matmul (much faster than c_einsum here)."""
    lhs, out = spec.split("->")
    sa, sb = lhs.split(",")
    if len(set(sa)) < len(sa) or len(set(sb)) < len(sb):
        return np.einsum(spec, a, b)
    # letters private to one operand and absent from the output are summed first
    drop_a = [i for i, c in enumerate(sa) if c not in sb and c not in out]
    if drop_a:
        a = a.sum(axis=tuple(drop_a))
        sa = "".join(c for c in sa if c in sb or c in out)
    drop_b = [i for i, c in enumerate(sb) if c not in sa and c not in out]
    if drop_b:
        b = b.sum(axis=tuple(drop_b))
        sb = "".join(c for c in sb if c in sa or c in out)
    size = {c: a.shape[i] for i, c in enumerate(sa)}
    size.update({c: b.shape[i] for i, c in enumerate(sb)})
    batch = [c for c in sa if c in sb and c in out]
    inner = [c for c in sa if c in sb and c not in out]
    left = [c for c in sa if c not in sb]
    right = [c for c in sb if c not in sa]
    nb = int(np.prod([size[c] for c in batch]))
    nl = int(np.prod([size[c] for c in left]))
    nk = int(np.prod([size[c] for c in inner]))
    nr = int(np.prod([size[c] for c in right]))
    am = a.transpose([sa.index(c) for c in batch + left + inner]).reshape(nb, nl, nk)
    bm = b.transpose([sb.index(c) for c in batch + inner + right]).reshape(nb, nk, nr)
    res = np.matmul(am, bm).reshape([size[c] for c in batch + left + right])
    order = "".join(batch + left + right)
    return res.transpose([order.index(c) for c in out])


def contract(subscripts: str, a: Jet, b: Jet) -> Jet:
    """Einsum-style product of two jets over their tensor axes.

    ``subscripts`` names tensor axes only (lowercase letters), e.g.
    ``"ij,jk->ik"``; the point axis and derivative axes are handled here.
    """
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    order = min(a.order, b.order)
    parts = []
    for k in range(order + 1):
        letters = _DERIV_LETTERS[:k]
        acc = None
        for sub, comp in _splits(k):
            la = "".join(letters[i] for i in sub)
            lb = "".join(letters[i] for i in comp)
            spec = f"{_POINT}{sa}{la},{_POINT}{sb}{lb}->{_POINT}{out}{letters}"
            term = pair_einsum(spec, a.parts[len(sub)], b.parts[len(comp)])
            acc = term if acc is None else acc + term
        parts.append(acc)
    return Jet(parts)


def scale(t: Jet, s: Jet) -> Jet:
    """Multiply a tensor jet by a scalar jet."""
    letters = "abcdefgh"[: len(t.tshape)]
    return contract(f"{letters},->{letters}", t, s)


def compose(u: Jet, derivs: Sequence[np.ndarray]) -> Jet:
    """Apply a scalar function to a scalar jet given f, f', f'', f''' at u."""
    if u.tshape != ():
        raise ValueError("compose() expects a scalar jet")
    order = u.order
    parts = [derivs[0]]
    if order >= 1:
        u1 = u.parts[1]
        parts.append(derivs[1][:, None] * u1)
    if order >= 2:
        u2 = u.parts[2]
        parts.append(
            derivs[2][:, None, None] * np.einsum("pa,pb->pab", u1, u1)
            + derivs[1][:, None, None] * u2
        )
    if order >= 3:
        u3 = u.parts[3]
        cross = np.einsum("pab,pc->pabc", u2, u1)
        sym = cross + cross.transpose(0, 1, 3, 2) + cross.transpose(0, 3, 2, 1)
        parts.append(
            derivs[3][:, None, None, None] * np.einsum("pa,pb,pc->pabc", u1, u1, u1)
            + derivs[2][:, None, None, None] * sym
            + derivs[1][:, None, None, None] * u3
        )
    return Jet(parts)


def reciprocal(u: Jet, where: str = "") -> Jet:
    x = u.value
    bad = x == 0.0
    if np.any(bad):
        raise ExpressionDomainError(where or "1/u", "division by zero", bad)
    return compose(u, [1 / x, -1 / x**2, 2 / x**3, -6 / x**4])


def inverse(m: Jet) -> Jet:
    """Matrix inverse of an ``(n, n)`` jet, d(M^-1) = -M^-1 dM M^-1 applied recursively."""
    inv0 = np.linalg.inv(m.value)
    if m.order == 0:
        return Jet([inv0])
    low = inverse(m.truncate(m.order - 1))
    dm = m.derivative()
    d_inv = -contract("ab,bck->ack", low, contract("bdk,dc->bck", dm, low))
    return Jet.from_derivative(inv0, d_inv)


# Expression evaluation -------------------------------------------------------

_FUNC_DERIVS: dict[str, Callable[[np.ndarray], list[np.ndarray]]] = {
    "exp": lambda x: [np.exp(x)] * 4,
    "sin": lambda x: [np.sin(x), np.cos(x), -np.sin(x), -np.cos(x)],
    "cos": lambda x: [np.cos(x), -np.sin(x), -np.cos(x), np.sin(x)],
    "sinh": lambda x: [np.sinh(x), np.cosh(x), np.sinh(x), np.cosh(x)],
    "cosh": lambda x: [np.cosh(x), np.sinh(x), np.cosh(x), np.sinh(x)],
    "log": lambda x: [np.log(x), 1 / x, -1 / x**2, 2 / x**3],
    "sqrt": lambda x: [np.sqrt(x), 0.5 / np.sqrt(x), -0.25 * x**-1.5, 0.375 * x**-2.5],
}


def _tan_derivs(x):
    t = np.tan(x)
    s = 1 + t**2
    return [t, s, 2 * t * s, 2 * s * (1 + 3 * t**2)]


def _tanh_derivs(x):
    t = np.tanh(x)
    s = 1 - t**2
    return [t, s, -2 * t * s, -2 * s * (1 - 3 * t**2)]


_FUNC_DERIVS["tan"] = _tan_derivs
_FUNC_DERIVS["tanh"] = _tanh_derivs


def _is_constant(j: Jet) -> bool:
    return all(not np.any(p) for p in j.parts[1:])


def _power(base: Jet, expo: Jet, node: BinOp) -> Jet:
    if _is_constant(expo) and np.all(expo.value == expo.value[0]):
        c = float(expo.value[0])
        x = base.value
        is_int = c == int(c)
        if not is_int and np.any(x <= 0):
            raise ExpressionDomainError(render(node), "non-integer power of non-positive base", x <= 0)
        if c < 0 and np.any(x == 0):
            raise ExpressionDomainError(render(node), "negative power of zero", x == 0)
        if is_int and c >= 0:
            ci = int(c)

            def falling(k):
                return math.prod(ci - i for i in range(k))

            derivs = [falling(k) * x ** max(ci - k, 0) if ci >= k else np.zeros_like(x) for k in range(4)]
        else:
            derivs = [math.prod(c - i for i in range(k)) * x ** (c - k) for k in range(4)]
        return compose(base, derivs)
    x = base.value
    if np.any(x <= 0):
        raise ExpressionDomainError(render(node), "variable power of non-positive base", x <= 0)
    log_base = compose(base, _FUNC_DERIVS["log"](x))
    return _exp(expo * log_base)


def _exp(u: Jet) -> Jet:
    return compose(u, _FUNC_DERIVS["exp"](u.value))


def evaluate(
    expression: Expression | Node,
    points: np.ndarray,
    params: Mapping[str, float] | None = None,
    order: int = MAX_ORDER,
    coords: Sequence[str] | None = None,
) -> Jet:
    """Evaluate an expression and its partials (w.r.t. the chart coordinates) at points.

    ``points`` has shape ``(P, n)`` with columns ordered as the expression's
    coordinates.  Raises :class:`ExpressionDomainError` naming the offending
    subexpression when any point lies outside the domain of a function.
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}")
    if isinstance(expression, Expression):
        root = expression.root
        coords = expression.coords if coords is None else coords
    else:
        root = expression
    coords = tuple(coords or ())
    params = dict(params or {})
    points = np.atleast_2d(np.asarray(points, dtype=float))
    npts, n = points.shape
    if n != len(coords):
        raise ValueError(f"points have {n} columns but {len(coords)} coordinates are declared")
    index = {c: i for i, c in enumerate(coords)}

    def const(v: float) -> Jet:
        return Jet.constant(v, npts, n, order) if order else Jet([np.full(npts, float(v))])

    def ev(node: Node) -> Jet:
        if isinstance(node, Num):
            return const(node.value)
        if isinstance(node, Var):
            if node.name in index:
                return Jet.coordinate(points, index[node.name], order) if order else Jet([points[:, index[node.name]].copy()])
            if node.name not in params:
                raise KeyError(f"parameter {node.name!r} has no value")
            return const(params[node.name])
        if isinstance(node, Neg):
            return -ev(node.operand)
        if isinstance(node, Call):
            u = ev(node.arg)
            x = u.value
            if node.func == "log" and np.any(x <= 0):
                raise ExpressionDomainError(render(node), "log of non-positive value", x <= 0)
            if node.func == "sqrt" and np.any(x < 0 if order == 0 else x <= 0):
                raise ExpressionDomainError(render(node), "sqrt of non-positive value", x <= 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                derivs = _FUNC_DERIVS[node.func](x)
            return compose(u, derivs)
        a, b = ev(node.left), ev(node.right)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a * reciprocal(b, render(node))
        return _power(a, b, node)

    return ev(root)


@dataclass
class Jet3:
    """Value and partials up to third order of a scalar at one point."""

    value: float
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray


def eval_jet(
    expression: Expression,
    point: Sequence[float],
    params: Mapping[str, float] | None = None,
    order: int = MAX_ORDER,
) -> Jet3:
    """Single-point convenience wrapper; slots above ``order`` are zero-filled."""
    jet = evaluate(expression, np.asarray(point, dtype=float)[None, :], params, order)
    n = len(expression.coords)
    slots = [np.zeros(()), np.zeros(n), np.zeros((n, n)), np.zeros((n, n, n))]
    for k in range(order + 1):
        slots[k] = jet.parts[k][0]
    return Jet3(float(slots[0]), slots[1], slots[2], slots[3])
