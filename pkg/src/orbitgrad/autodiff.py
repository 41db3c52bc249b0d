"""Reverse-mode automatic differentiation over numpy values.

A `Var` wraps a float64 scalar or ndarray together with links to its
parents and a vector-Jacobian closure.  Building an expression records the
tape implicitly; `gradient` runs one backward sweep and returns the
partials of a scalar output with respect to the seeded leaves.

Values on the tape are produced by the same numpy calls a plain-float
evaluation would make, so the value channel is bit-identical to ordinary
arithmetic.  Any op whose result contains a non-finite entry raises
`NonFiniteError` immediately.

Module-level functions (`sin`, `exp`, ...) accept either a `Var` or a
plain number/ndarray and degrade to numpy on the latter, so numeric code
can be written once and run with or without the tape.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "NonFiniteError",
    "Var",
    "seed_params",
    "gradient",
    "finite_diff_check",
    "custom",
    "value",
    "sin",
    "cos",
    "asin",
    "atan2",
    "exp",
    "log",
    "sqrt",
    "sigmoid",
    "tanh",
    "sum_all",
]

# |x| beyond this is treated as +-1 when evaluating d/dx asin(x)
_ASIN_CLAMP = 1.0 - 1e-12


class NonFiniteError(ArithmeticError):
    """An operation produced a NaN or infinity."""


def _checked(raw, op: str) -> np.ndarray:
    out = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"non-finite value produced by '{op}'")
    return out


def _unbroadcast(adj: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum an adjoint back down to the shape numpy broadcast it from."""
    if adj.shape == shape:
        return adj
    extra = adj.ndim - len(shape)
    if extra > 0:
        adj = adj.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and adj.shape[i] != 1)
    if axes:
        adj = adj.sum(axis=axes, keepdims=True)
    return adj


class Var:
    """Node on the tape: a value plus how to push an adjoint to its parents."""

    __slots__ = ("value", "_parents", "_vjp")

    # make numpy defer to the reflected operators instead of coercing
    __array_ufunc__ = None

    def __init__(self, value, parents=(), vjp=None, _op="var"):
        self.value = _checked(value, _op)
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return f"Var({self.value!r})"

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        a, b = self, _as_var(other)
        sa, sb = a.value.shape, b.value.shape
        return Var(
            np.add(a.value, b.value),
            (a, b),
            lambda adj: (_unbroadcast(adj, sa), _unbroadcast(adj, sb)),
            _op="add",
        )

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self, _as_var(other)
        sa, sb = a.value.shape, b.value.shape
        return Var(
            np.subtract(a.value, b.value),
            (a, b),
            lambda adj: (_unbroadcast(adj, sa), _unbroadcast(-adj, sb)),
            _op="sub",
        )

    def __rsub__(self, other):
        return _as_var(other).__sub__(self)

    def __mul__(self, other):
        a, b = self, _as_var(other)
        av, bv = a.value, b.value
        return Var(
            np.multiply(av, bv),
            (a, b),
            lambda adj: (
                _unbroadcast(adj * bv, av.shape),
                _unbroadcast(adj * av, bv.shape),
            ),
            _op="mul",
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, _as_var(other)
        av, bv = a.value, b.value
        with np.errstate(all="ignore"):
            out = np.divide(av, bv)

        def vjp(adj):
            ga = adj / bv
            return (
                _unbroadcast(ga, av.shape),
                _unbroadcast(-ga * out_v, bv.shape),
            )

        node = Var(out, (a, b), vjp, _op="div")
        out_v = node.value
        return node

    def __rtruediv__(self, other):
        return _as_var(other).__truediv__(self)

    def __pow__(self, p):
        if isinstance(p, Var):
            raise TypeError("exponent must be a plain number")
        av = self.value
        with np.errstate(all="ignore"):
            out = np.power(av, p)
        return Var(
            out,
            (self,),
            lambda adj: (adj * p * np.power(av, p - 1.0),),
            _op="pow",
        )

    def __neg__(self):
        return Var(np.negative(self.value), (self,), lambda adj: (-adj,), _op="neg")

    # -- comparisons act on values and return plain booleans ------------

    def __lt__(self, other):
        return self.value < value(other)

    def __le__(self, other):
        return self.value <= value(other)

    def __gt__(self, other):
        return self.value > value(other)

    def __ge__(self, other):
        return self.value >= value(other)

    def __eq__(self, other):  # value equality, not node identity
        return self.value == value(other)

    def __ne__(self, other):
        return self.value != value(other)

    __hash__ = object.__hash__


def _as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x, _op="const")


def value(x):
    """Underlying numpy value of a Var, or the input unchanged."""
    return x.value if isinstance(x, Var) else x


def custom(val, parents: tuple, vjp: Callable, op: str = "custom") -> Var:
    """Attach a hand-written vector-Jacobian product to a computed value.

    `vjp(adj)` must return one adjoint contribution per parent, already
    shaped like the parent value.
    """
    return Var(val, parents, vjp, _op=op)


def _unary(x, fval, fgrad, op):
    if not isinstance(x, Var):
        return fval(x)
    xv = x.value
    with np.errstate(all="ignore"):
        out = fval(xv)
    node = Var(out, (x,), lambda adj: (adj * fgrad(xv, node.value),), _op=op)
    return node


def sin(x):
    return _unary(x, np.sin, lambda xv, yv: np.cos(xv), "sin")


def cos(x):
    return _unary(x, np.cos, lambda xv, yv: -np.sin(xv), "cos")


def exp(x):
    return _unary(x, np.exp, lambda xv, yv: yv, "exp")


def log(x):
    return _unary(x, np.log, lambda xv, yv: 1.0 / xv, "log")


def sqrt(x):
    return _unary(x, np.sqrt, lambda xv, yv: 0.5 / yv, "sqrt")


def tanh(x):
    return _unary(x, np.tanh, lambda xv, yv: 1.0 - yv * yv, "tanh")


def _sigmoid_val(x):
    # stable two-sided form
    out = np.empty_like(x := np.asarray(x, dtype=np.float64))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else out[()]


def sigmoid(x):
    return _unary(x, _sigmoid_val, lambda xv, yv: yv * (1.0 - yv), "sigmoid")


def asin(x):
    """arcsin with the derivative clamped near the domain edges.

    The value uses the exact arcsin of the clipped argument; the
    derivative evaluates 1/sqrt(1-x^2) at |x| <= 1-1e-12 so grazing-edge
    arguments keep a finite gradient.
    """

    def fval(xv):
        return np.arcsin(np.clip(xv, -1.0, 1.0))

    def fgrad(xv, yv):
        c = np.clip(xv, -_ASIN_CLAMP, _ASIN_CLAMP)
        return 1.0 / np.sqrt(1.0 - c * c)

    return _unary(x, fval, fgrad, "asin")


def atan2(y, x):
    if not isinstance(y, Var) and not isinstance(x, Var):
        return np.arctan2(y, x)
    yv_, xv_ = value(y), value(x)
    out = np.arctan2(yv_, xv_)
    denom = xv_ * xv_ + yv_ * yv_
    parents = []
    mk = []
    if isinstance(y, Var):
        parents.append(y)
        mk.append(lambda adj: _unbroadcast(adj * xv_ / denom, np.shape(yv_)))
    if isinstance(x, Var):
        parents.append(x)
        mk.append(lambda adj: _unbroadcast(-adj * yv_ / denom, np.shape(xv_)))
    return Var(out, tuple(parents), lambda adj: tuple(f(adj) for f in mk), _op="atan2")


def sum_all(x):
    """Sum every element down to a scalar."""
    if not isinstance(x, Var):
        return np.sum(x)
    shp = x.value.shape
    return Var(
        np.sum(x.value),
        (x,),
        lambda adj: (np.broadcast_to(adj, shp),),
        _op="sum",
    )


def seed_params(values: Sequence[float]) -> list[Var]:
    """Wrap plain parameter values as independent leaves of a fresh tape."""
    return [Var(float(v), _op="leaf") for v in values]


def _topo_order(out: Var) -> list[Var]:
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(out, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def gradient(out: Var, leaves: Sequence[Var]) -> np.ndarray:
    """Partials of a scalar output with respect to the given leaves.

    Accumulation follows the fixed reverse-topological order of the tape,
    so repeated calls give bit-identical results.
    """
    if not isinstance(out, Var):
        raise TypeError("output is not on the tape")
    if np.size(out.value) != 1:
        raise ValueError("gradient target must be scalar")

    order = _topo_order(out)
    adjoint: dict[int, np.ndarray] = {id(out): np.ones_like(out.value)}
    leaf_ids = {id(v): i for i, v in enumerate(leaves)}
    grads = np.zeros(len(leaves))

    for node in reversed(order):
        adj = adjoint.pop(id(node), None)
        if adj is None:
            continue
        i = leaf_ids.get(id(node))
        if i is not None:
            grads[i] += float(np.sum(adj))
        if node._vjp is None:
            continue
        contribs = node._vjp(adj)
        for parent, contrib in zip(node._parents, contribs):
            pid = id(parent)
            got = adjoint.get(pid)
            if got is None:
                adjoint[pid] = np.asarray(contrib, dtype=np.float64)
            else:
                adjoint[pid] = got + contrib
    return grads


def finite_diff_check(
    f: Callable, x: Sequence[float], h_scale: float = 1e-6
) -> float:
    """Max relative error between the tape gradient of f and central differences.

    `f` maps a list of parameters to a scalar and must be written with the
    module-level functions so it also evaluates on plain floats.
    """
    x = [float(v) for v in x]
    leaves = seed_params(x)
    analytic = gradient(f(leaves), leaves)

    worst = 0.0
    for i in range(len(x)):
        h = h_scale * max(abs(x[i]), 1.0)
        xp = list(x)
        xm = list(x)
        xp[i] += h
        xm[i] -= h
        fp = np.asarray(value(f(xp))).item()
        fm = np.asarray(value(f(xm))).item()
        numeric = (fp - fm) / (2.0 * h)
        err = abs(analytic[i] - numeric) / max(abs(analytic[i]), 1e-8)
        worst = max(worst, err)
    return worst
