"""Expression graphs for smooth nets (eps, x) -> u_eps(x).

Nets are immutable expression trees over the coordinates, the scale symbol
eps, smooth primitives, compositions with test functions, and embedded
distributions (the latter defined in :mod:`gencalc.embedding`).  Coordinate
derivatives are exact and symbolic: ``derive`` returns a new expression whose
evaluation equals the analytic partial derivative, so sup-norm sweeps of
derivatives never fall back on numerical differencing.

Evaluation is vectorized: ``expr.eval(eps, points)`` takes an (N, dim) array
of points and returns N values.  Expressions are structurally hashable, and
derivative results are memoized per (expression, axis).
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ArgumentError, DomainError, EvaluationError

DERIVATIVE_ORDER_CAP = 6

_SMOOTH_FUNCS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "log": np.log,
}


class NetExpr:
    """Base class for expression nodes.

    Subclasses are frozen dataclasses; structural equality and hashing are
    provided here (with the hash cached per node, graphs get deep).
    """

    def _key(self):
        raise NotImplementedError

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((type(self).__name__, self._key()))
            object.__setattr__(self, "_hash", h)
        return h

    # -- algebra ----------------------------------------------------------
    def __add__(self, other):
        return make_sum(self, as_expr(other))

    def __radd__(self, other):
        return make_sum(as_expr(other), self)

    def __sub__(self, other):
        return make_sum(self, make_neg(as_expr(other)))

    def __rsub__(self, other):
        return make_sum(as_expr(other), make_neg(self))

    def __mul__(self, other):
        return make_product(self, as_expr(other))

    def __rmul__(self, other):
        return make_product(as_expr(other), self)

    def __truediv__(self, other):
        return make_quotient(self, as_expr(other))

    def __rtruediv__(self, other):
        return make_quotient(as_expr(other), self)

    def __pow__(self, k):
        return make_power(self, k)

    def __neg__(self):
        return make_neg(self)

    # -- evaluation contract ----------------------------------------------
    @property
    def children(self):
        return ()

    def _eval(self, eps, pts):
        raise NotImplementedError

    def eval(self, eps, pts):
        """Evaluate at eps in (0, 1] and points of shape (N, dim)."""
        if not 0.0 < eps <= 1.0:
            raise ArgumentError(f"eps must lie in (0, 1], got {eps}")
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        _check_domain(self, pts)
        vals = np.asarray(self._eval(float(eps), pts), dtype=float)
        if vals.ndim == 0:
            vals = np.full(pts.shape[0], float(vals))
        return vals

    def eval_at(self, eps, x) -> float:
        """Scalar evaluation at a single point; raises on non-finite values."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        val = float(self.eval(eps, x[None, :])[0])
        if not math.isfinite(val):
            raise EvaluationError(
                f"non-finite value {val} at eps={eps}, x={tuple(x)}",
                path=(describe(self),))
        return val

    def _derive(self, axis):
        raise NotImplementedError

    # -- structure ---------------------------------------------------------
    def depends_on_coords(self):
        flag = self.__dict__.get("_dep_coords")
        if flag is None:
            flag = self._dep_coords_impl()
            object.__setattr__(self, "_dep_coords", flag)
        return flag

    def _dep_coords_impl(self):
        return any(c.depends_on_coords() for c in self.children)

    def structure_windows(self, eps):
        """Axis-aligned windows where eps-scale features concentrate."""
        out = []
        for c in self.children:
            out.extend(c.structure_windows(eps))
        return out

    def to_json(self):
        raise NotImplementedError

    def __repr__(self):
        return describe(self)


def as_expr(value) -> NetExpr:
    if isinstance(value, NetExpr):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    raise ArgumentError(f"cannot coerce {value!r} to an expression")


@dataclass(frozen=True, eq=False)
class Const(NetExpr):
    value: float

    def _key(self):
        return (self.value,)

    def _eval(self, eps, pts):
        return np.full(pts.shape[0], self.value)

    def _derive(self, axis):
        return ZERO

    def _dep_coords_impl(self):
        return False

    def to_json(self):
        return {"kind": "const", "value": self.value}


@dataclass(frozen=True, eq=False)
class Coord(NetExpr):
    axis: int

    def _key(self):
        return (self.axis,)

    def _eval(self, eps, pts):
        if self.axis >= pts.shape[1]:
            raise DomainError(
                f"coordinate axis {self.axis} out of range for "
                f"{pts.shape[1]}-dimensional points")
        return pts[:, self.axis].copy()

    def _derive(self, axis):
        return ONE if axis == self.axis else ZERO

    def _dep_coords_impl(self):
        return True

    def to_json(self):
        return {"kind": "coord", "axis": self.axis}


@dataclass(frozen=True, eq=False)
class Eps(NetExpr):
    def _key(self):
        return ()

    def _eval(self, eps, pts):
        return np.full(pts.shape[0], eps)

    def _derive(self, axis):
        return ZERO

    def _dep_coords_impl(self):
        return False

    def to_json(self):
        return {"kind": "eps"}


@dataclass(frozen=True, eq=False)
class Sum(NetExpr):
    terms: tuple

    def _key(self):
        return self.terms

    @property
    def children(self):
        return self.terms

    def _eval(self, eps, pts):
        return reduce(np.add, (_eval_child(t, eps, pts) for t in self.terms))

    def _derive(self, axis):
        return make_sum(*(derive(t, axis) for t in self.terms))

    def to_json(self):
        return {"kind": "sum", "children": [t.to_json() for t in self.terms]}


@dataclass(frozen=True, eq=False)
class Product(NetExpr):
    factors: tuple

    def _key(self):
        return self.factors

    @property
    def children(self):
        return self.factors

    def _eval(self, eps, pts):
        return reduce(np.multiply, (_eval_child(f, eps, pts) for f in self.factors))

    def _derive(self, axis):
        terms = []
        for i, f in enumerate(self.factors):
            df = derive(f, axis)
            if df is ZERO or df == ZERO:
                continue
            terms.append(make_product(*self.factors[:i], df, *self.factors[i + 1:]))
        return make_sum(*terms)

    def to_json(self):
        return {"kind": "product", "children": [f.to_json() for f in self.factors]}


@dataclass(frozen=True, eq=False)
class Quotient(NetExpr):
    num: NetExpr
    den: NetExpr

    def _key(self):
        return (self.num, self.den)

    @property
    def children(self):
        return (self.num, self.den)

    def _eval(self, eps, pts):
        den = _eval_child(self.den, eps, pts)
        if np.any(den == 0.0):
            raise EvaluationError(
                "quotient denominator vanished inside the declared domain",
                path=(describe(self),))
        return _eval_child(self.num, eps, pts) / den

    def _derive(self, axis):
        dn, dd = derive(self.num, axis), derive(self.den, axis)
        if dd == ZERO:
            return make_quotient(dn, self.den)
        return make_quotient(
            make_sum(make_product(dn, self.den),
                     make_neg(make_product(self.num, dd))),
            make_power(self.den, 2))

    def to_json(self):
        doc = {"kind": "quotient", "num": self.num.to_json(),
               "den": self.den.to_json()}
        domain = getattr(self, "_domain", None)
        if domain is not None:
            doc["domain"] = [list(iv) for iv in domain]
        return doc


@dataclass(frozen=True, eq=False)
class IntPow(NetExpr):
    base: NetExpr
    exponent: int

    def _key(self):
        return (self.base, self.exponent)

    @property
    def children(self):
        return (self.base,)

    def _eval(self, eps, pts):
        base = _eval_child(self.base, eps, pts)
        if self.exponent < 0 and np.any(base == 0.0):
            raise EvaluationError(
                "negative power of a vanishing base", path=(describe(self),))
        return base ** self.exponent

    def _derive(self, axis):
        db = derive(self.base, axis)
        if db == ZERO:
            return ZERO
        return make_product(Const(float(self.exponent)),
                            make_power(self.base, self.exponent - 1), db)

    def to_json(self):
        return {"kind": "ipow", "base": self.base.to_json(), "exponent": self.exponent}


@dataclass(frozen=True, eq=False)
class SmoothFunc(NetExpr):
    func: str
    child: NetExpr

    def _key(self):
        return (self.func, self.child)

    @property
    def children(self):
        return (self.child,)

    def _eval(self, eps, pts):
        arg = _eval_child(self.child, eps, pts)
        if self.func == "log" and np.any(arg <= 0.0):
            raise EvaluationError("log of a non-positive value",
                                  path=(describe(self),))
        with np.errstate(over="raise"):
            try:
                return _SMOOTH_FUNCS[self.func](arg)
            except FloatingPointError as exc:
                raise EvaluationError(f"overflow in {self.func}",
                                      path=(describe(self),)) from exc

    def _derive(self, axis):
        dc = derive(self.child, axis)
        if dc == ZERO:
            return ZERO
        if self.func == "exp":
            outer = SmoothFunc("exp", self.child)
        elif self.func == "sin":
            outer = SmoothFunc("cos", self.child)
        elif self.func == "cos":
            outer = make_neg(SmoothFunc("sin", self.child))
        elif self.func == "log":
            return make_quotient(dc, self.child)
        else:  # pragma: no cover - guarded by constructor
            raise ArgumentError(f"unknown smooth primitive {self.func!r}")
        return make_product(outer, dc)

    def to_json(self):
        return {"kind": "smooth", "func": self.func, "child": self.child.to_json()}


@dataclass(frozen=True, eq=False)
class KernelApply(NetExpr):
    """Composition with a test function: tf(args[0], ..., args[n-1])."""

    test_function: object  # mollifier.TestFunction
    args: tuple

    def _key(self):
        return (self.test_function, self.args)

    @property
    def children(self):
        return self.args

    def _eval(self, eps, pts):
        cols = [_eval_child(a, eps, pts) for a in self.args]
        return self.test_function.values(np.column_stack(cols))

    def _derive(self, axis):
        terms = []
        for i, arg in enumerate(self.args):
            da = derive(arg, axis)
            if da == ZERO:
                continue
            terms.append(make_product(
                KernelApply(self.test_function.axis_derivative(i), self.args), da))
        return make_sum(*terms)

    def structure_windows(self, eps):
        out = []
        tf = self.test_function
        for i, arg in enumerate(self.args):
            aff = affine_coord_form(arg, eps)
            if aff is None:
                continue
            axis, slope, intercept = aff
            if slope == 0.0:
                continue
            lo_t, hi_t = tf.axis_support(i)
            a = (lo_t - intercept) / slope
            b = (hi_t - intercept) / slope
            out.append((axis, min(a, b), max(a, b)))
        for c in self.args:
            out.extend(c.structure_windows(eps))
        return out

    def to_json(self):
        return {"kind": "kernel", "test_function": self.test_function.to_json(),
                "args": [a.to_json() for a in self.args]}


ZERO = Const(0.0)
ONE = Const(1.0)
EPS = Eps()


def coordinate(axis: int) -> Coord:
    if axis < 0:
        raise ArgumentError(f"axis must be >= 0, got {axis}")
    return Coord(axis)


def constant(value: float) -> Const:
    return Const(float(value))


def make_sum(*terms) -> NetExpr:
    flat = []
    const = 0.0
    for t in terms:
        t = as_expr(t)
        if isinstance(t, Const):
            const += t.value
        elif isinstance(t, Sum):
            flat.extend(t.terms)
        else:
            flat.append(t)
    if const != 0.0 or not flat:
        flat.append(Const(const))
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def make_neg(e: NetExpr) -> NetExpr:
    e = as_expr(e)
    if isinstance(e, Const):
        return Const(-e.value)
    return make_product(Const(-1.0), e)


def make_product(*factors) -> NetExpr:
    flat = []
    stack = [as_expr(f) for f in factors]
    while stack:
        f = stack.pop(0)
        if isinstance(f, Product):
            stack[0:0] = list(f.factors)
        else:
            flat.append(f)
    const = 1.0
    rest = []
    for f in flat:
        if isinstance(f, Const):
            const *= f.value
        else:
            rest.append(f)
    if const == 0.0:
        return ZERO
    if const != 1.0 or not rest:
        rest.insert(0, Const(const))
    if len(rest) == 1:
        return rest[0]
    return Product(tuple(rest))


def make_quotient(num, den, domain=None) -> NetExpr:
    num, den = as_expr(num), as_expr(den)
    if isinstance(num, Const) and num.value == 0.0:
        return ZERO
    if isinstance(den, Const):
        if den.value == 0.0:
            raise ArgumentError("division by the zero constant")
        return make_product(Const(1.0 / den.value), num)
    if den.depends_on_coords() and domain is None:
        raise ArgumentError(
            "quotient with a coordinate-dependent denominator requires a "
            "declared domain excluding its zeros")
    q = Quotient(num, den)
    if domain is not None:
        object.__setattr__(q, "_domain", tuple(tuple(map(float, iv)) for iv in domain))
    return q


def make_power(base, k) -> NetExpr:
    base = as_expr(base)
    k = int(k)
    if k == 0:
        return ONE
    if k == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** k)
    return IntPow(base, k)


def smooth(func: str, child) -> NetExpr:
    if func not in _SMOOTH_FUNCS:
        raise ArgumentError(f"unknown smooth primitive {func!r}; "
                            f"have {sorted(_SMOOTH_FUNCS)}")
    child = as_expr(child)
    if isinstance(child, Const):
        return Const(float(_SMOOTH_FUNCS[func](child.value)))
    return SmoothFunc(func, child)


def kernel_apply(test_function, args) -> NetExpr:
    args = tuple(as_expr(a) for a in args)
    if len(args) != test_function.dimension:
        raise ArgumentError(
            f"test function takes {test_function.dimension} arguments, "
            f"got {len(args)}")
    return KernelApply(test_function, args)


def _eval_child(child, eps, pts):
    try:
        return child._eval(eps, pts)
    except EvaluationError as err:
        raise err.with_frame(describe(child)) from None


def _check_domain(e, pts):
    dom = getattr(e, "_domain", None)
    if dom is not None:
        for axis, (lo, hi) in enumerate(dom):
            col = pts[:, axis]
            if np.any((col < lo) | (col > hi)):
                raise DomainError(
                    f"points leave the declared domain on axis {axis}: "
                    f"[{lo}, {hi}]")
    for c in e.children:
        _check_domain(c, pts)


# -- differentiation ---------------------------------------------------------

_derive_cache: dict = {}
_derive_keepalive: list = []
_derive_lock = threading.Lock()


def derive(e: NetExpr, axis: int) -> NetExpr:
    """Exact partial derivative along a coordinate axis."""
    if axis < 0:
        raise ArgumentError(f"axis must be >= 0, got {axis}")
    key = (id(e), axis)
    hit = _derive_cache.get(key)
    if hit is not None:
        return hit
    result = e._derive(axis)
    with _derive_lock:
        if key not in _derive_cache:
            _derive_cache[key] = result
            _derive_keepalive.append(e)
    return result


def derive_multi(e: NetExpr, alpha) -> NetExpr:
    """Iterated derivative for a multiindex."""
    alpha = tuple(int(a) for a in alpha)
    if sum(alpha) > DERIVATIVE_ORDER_CAP:
        raise ArgumentError(
            f"derivative order {sum(alpha)} exceeds the cap "
            f"{DERIVATIVE_ORDER_CAP}")
    out = e
    for axis, count in enumerate(alpha):
        for _ in range(count):
            out = derive(out, axis)
    return out


def multi_indices(dim: int, max_order: int):
    """All multiindices with |alpha| <= max_order, graded order."""
    out = []

    def rec(prefix, remaining, slots):
        if slots == 0:
            out.append(tuple(prefix))
            return
        for a in range(remaining + 1):
            rec(prefix + [a], remaining - a, slots - 1)

    for total in range(max_order + 1):
        start = len(out)
        rec([], total, dim)
        out[start:] = [a for a in out[start:] if sum(a) == total]
    return out


@dataclass(frozen=True)
class Jet:
    """Value and partial derivatives at one (eps, x)."""

    value: float
    partials: dict

    def partial(self, alpha):
        alpha = tuple(alpha)
        return self.value if sum(alpha) == 0 else self.partials[alpha]


def jet_eval(e: NetExpr, eps: float, x, order: int) -> Jet:
    """All partials |alpha| <= order at (eps, x) via cached derive + eval."""
    if order > DERIVATIVE_ORDER_CAP:
        raise ArgumentError(
            f"jet order {order} exceeds the cap {DERIVATIVE_ORDER_CAP}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    partials = {}
    value = e.eval_at(eps, x)
    for alpha in multi_indices(len(x), order):
        if sum(alpha) == 0:
            continue
        partials[alpha] = derive_multi(e, alpha).eval_at(eps, x)
    return Jet(value, partials)


# -- structural helpers --------------------------------------------------------

def affine_coord_form(e: NetExpr, eps: float):
    """Decompose e as slope * coordinate + intercept, if it has that shape.

    Coefficients may depend on eps (they are evaluated numerically at the
    given eps).  Returns (axis, slope, intercept) or None.
    """
    if not e.depends_on_coords():
        return None
    dummy = np.zeros((1, _max_axis(e) + 1))

    def const_val(sub):
        return float(sub._eval(eps, dummy)[0])

    if isinstance(e, Coord):
        return (e.axis, 1.0, 0.0)
    if isinstance(e, Sum):
        axis, slope, intercept = None, 0.0, 0.0
        for t in e.terms:
            if t.depends_on_coords():
                sub = affine_coord_form(t, eps)
                if sub is None:
                    return None
                if axis is not None and sub[0] != axis:
                    return None
                axis = sub[0]
                slope += sub[1]
                intercept += sub[2]
            else:
                intercept += const_val(t)
        return None if axis is None else (axis, slope, intercept)
    if isinstance(e, Product):
        coord_factors = [f for f in e.factors if f.depends_on_coords()]
        if len(coord_factors) != 1:
            return None
        sub = affine_coord_form(coord_factors[0], eps)
        if sub is None:
            return None
        scale = 1.0
        for f in e.factors:
            if not f.depends_on_coords():
                scale *= const_val(f)
        return (sub[0], scale * sub[1], scale * sub[2])
    if isinstance(e, Quotient):
        if e.den.depends_on_coords():
            return None
        sub = affine_coord_form(e.num, eps)
        if sub is None:
            return None
        d = const_val(e.den)
        return (sub[0], sub[1] / d, sub[2] / d)
    return None


def _max_axis(e: NetExpr) -> int:
    if isinstance(e, Coord):
        return e.axis
    return max((_max_axis(c) for c in e.children), default=0)


def substitute(e: NetExpr, assignments: dict) -> NetExpr:
    """Replace coordinates by constants (partial evaluation)."""
    hook = getattr(e, "_substitute", None)
    if hook is not None:
        return hook(assignments)
    if isinstance(e, Coord):
        if e.axis in assignments:
            return Const(float(assignments[e.axis]))
        return e
    return _rebuild(e, tuple(substitute(c, assignments) for c in e.children))


def remap_axes(e: NetExpr, mapping: dict) -> NetExpr:
    """Renumber coordinate axes, e.g. to view a slice as a lower-dim net."""
    hook = getattr(e, "_remap_axes", None)
    if hook is not None:
        return hook(mapping)
    if isinstance(e, Coord):
        return Coord(mapping[e.axis])
    return _rebuild(e, tuple(remap_axes(c, mapping) for c in e.children))


def _rebuild(e: NetExpr, children: tuple) -> NetExpr:
    if children == e.children:
        return e
    if isinstance(e, Sum):
        return make_sum(*children)
    if isinstance(e, Product):
        return make_product(*children)
    if isinstance(e, Quotient):
        return make_quotient(children[0], children[1],
                             domain=getattr(e, "_domain", None))
    if isinstance(e, IntPow):
        return make_power(children[0], e.exponent)
    if isinstance(e, SmoothFunc):
        return smooth(e.func, children[0])
    if isinstance(e, KernelApply):
        return kernel_apply(e.test_function, children)
    if hasattr(e, "_rebuild_with_children"):
        return e._rebuild_with_children(children)
    raise ArgumentError(f"cannot rebuild node of type {type(e).__name__}")


def describe(e: NetExpr) -> str:
    name = type(e).__name__
    if isinstance(e, Const):
        return f"Const({e.value:g})"
    if isinstance(e, Coord):
        return f"Coord({e.axis})"
    if isinstance(e, SmoothFunc):
        return f"{e.func}(...)"
    return name


# -- serialization --------------------------------------------------------------

def expr_to_json(e: NetExpr):
    return e.to_json()


def expr_from_json(obj) -> NetExpr:
    from .mollifier import TestFunction

    kind = obj["kind"]
    if kind == "const":
        return Const(float(obj["value"]))
    if kind == "coord":
        return Coord(int(obj["axis"]))
    if kind == "eps":
        return EPS
    if kind == "sum":
        return make_sum(*(expr_from_json(c) for c in obj["children"]))
    if kind == "product":
        return make_product(*(expr_from_json(c) for c in obj["children"]))
    if kind == "quotient":
        return make_quotient(expr_from_json(obj["num"]), expr_from_json(obj["den"]),
                             domain=obj.get("domain"))
    if kind == "ipow":
        return make_power(expr_from_json(obj["base"]), obj["exponent"])
    if kind == "smooth":
        return smooth(obj["func"], expr_from_json(obj["child"]))
    if kind == "kernel":
        return kernel_apply(TestFunction.from_json(obj["test_function"]),
                            tuple(expr_from_json(a) for a in obj["args"]))
    if kind == "embed":
        from .embedding import embedded_from_json
        return embedded_from_json(obj)
    raise ArgumentError(f"unknown expression node kind {kind!r}")


def save_expr(e: NetExpr, path):
    with open(path, "w") as fh:
        json.dump(e.to_json(), fh, indent=2)


def load_expr(path) -> NetExpr:
    with open(path) as fh:
        return expr_from_json(json.load(fh))
