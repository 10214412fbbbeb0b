"""Test functions with certified vanishing moments and their scaled nets.

The basic building block is a 1D profile of the form

    p(t) * (1 - (t/R)^2)^(-2m) * exp(-1 / (1 - (t/R)^2))      for |t| < R,
    0                                                          otherwise,

with p a polynomial.  This family is closed under differentiation (the
rational prefactor absorbs the chain-rule terms), evaluates to an exactly
compactly supported smooth function, and supports the moment-killing linear
solve used to realize vanishing-moment mollifiers.  Multidimensional test
functions are tensor products of 1D profiles, so moments factor across axes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ArgumentError, ConstructionError
from .quadrature import adaptive_quad, integrate_panels, split_panels

MASS_TOL = 1e-9          # acceptable |mass - 1| for unit-mass preconditions
MOMENT_CERT_TOL = 1e-10  # certified bound on |moment| for 1 <= |alpha| <= q
UNIT_MASS_CERT_TOL = 1e-12


@dataclass(frozen=True)
class SmoothProfile1D:
    """A compactly supported smooth profile, closed under differentiation."""

    coeffs: tuple          # polynomial coefficients in t, ascending
    radius: float
    denom_power: int = 0   # m in (1 - (t/R)^2)^(-2m)

    def __post_init__(self):
        if self.radius <= 0:
            raise ArgumentError(f"profile radius must be positive, got {self.radius}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def values(self, t):
        """Vectorized evaluation; exact zero outside |t| >= radius."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.zeros_like(t)
        s2 = (t / self.radius) ** 2
        inside = s2 < 1.0
        if np.any(inside):
            g = 1.0 - s2[inside]
            expfac = np.exp(-1.0 / g)
            # where the exponential underflows the rational prefactor is moot
            live = expfac > 0.0
            if np.any(live):
                ti = t[inside][live]
                vals = P.polyval(ti, self.coeffs) * expfac[live]
                if self.denom_power:
                    vals /= g[live] ** (2 * self.denom_power)
                res = np.zeros(int(np.count_nonzero(inside)))
                res[live] = vals
                out[inside] = res
        return float(out[0]) if scalar else out

    __call__ = values

    def derivative(self) -> "SmoothProfile1D":
        """Exact d/dt, staying in the same profile family."""
        r2 = self.radius ** 2
        m = self.denom_power
        # A(t) = 1 - t^2/R^2
        A = (1.0, 0.0, -1.0 / r2)
        p = np.asarray(self.coeffs)
        dp = P.polyder(p)
        # p'(t) A(t)^2 + p(t) * t * (4m A(t) - 2) / R^2
        part1 = P.polymul(dp, P.polymul(A, A))
        bracket = P.polyadd(P.polymul((0.0, 4.0 * m), A), (0.0, -2.0))
        part2 = P.polymul(p, bracket) / r2
        new = P.polyadd(part1, part2)
        return SmoothProfile1D(tuple(new), self.radius, m + 1)

    def to_json(self):
        return {"coefficients": list(self.coeffs), "radius": self.radius,
                "denom_power": self.denom_power}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(obj["coefficients"]), obj["radius"], obj.get("denom_power", 0))


@dataclass(frozen=True)
class AxisProfile:
    """One tensor factor: coefficient * scale^(-power) * profile((y-center)/scale)."""

    profile: SmoothProfile1D
    center: float = 0.0
    scale: float = 1.0
    scale_power: int = 1
    coefficient: float = 1.0

    def values(self, y):
        arg = (np.asarray(y, dtype=float) - self.center) / self.scale
        return (self.coefficient * self.scale ** (-self.scale_power)
                * self.profile.values(arg))

    def derivative(self) -> "AxisProfile":
        return AxisProfile(self.profile.derivative(), self.center, self.scale,
                           self.scale_power + 1, self.coefficient)

    @property
    def support(self):
        half = self.scale * self.profile.radius
        return (self.center - half, self.center + half)

    def moment(self, order: int) -> float:
        lo, hi = self.support
        mid = 0.5 * (lo + hi)
        amp = float(np.max(np.abs(self.values(np.linspace(lo, hi, 129)))))
        return integrate_panels(
            lambda y: y ** order * self.values(y),
            split_panels(lo, hi, (mid,)),
            n=72, check_n=56, tol=max(1e-13, 2e-15 * amp * (hi - lo)))

    def to_json(self):
        return {"profile": self.profile.to_json(), "center": self.center,
                "scale": self.scale, "scale_power": self.scale_power,
                "coefficient": self.coefficient}

    @classmethod
    def from_json(cls, obj):
        return cls(SmoothProfile1D.from_json(obj["profile"]), obj["center"],
                   obj["scale"], obj["scale_power"], obj["coefficient"])


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A compactly supported smooth function on R^n with moment metadata.

    Separable by construction (tensor product of axis profiles); a certified
    mollifier additionally carries ``moment_order`` q and a certificate with
    independently re-computable moment residuals.
    """

    axes: tuple
    moment_order: int | None = None
    parity: str = "unknown"    # "even" | "generic" | "unknown"
    certificate: dict | None = None
    warnings: tuple = ()

    def __eq__(self, other):
        if not isinstance(other, TestFunction):
            return NotImplemented
        return self.axes == other.axes

    def __hash__(self):
        return hash(self.axes)

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def support_radius(self) -> float:
        return max(ax.scale * ax.profile.radius for ax in self.axes)

    @property
    def center(self):
        return tuple(ax.center for ax in self.axes)

    def axis_support(self, axis: int):
        return self.axes[axis].support

    def values(self, points):
        """Evaluate at points of shape (dim,) or (N, dim) (or scalars in 1D)."""
        pts = np.asarray(points, dtype=float)
        if self.dimension == 1 and pts.ndim <= 1:
            return self.axes[0].values(pts)
        pts = np.atleast_2d(pts)
        out = self.axes[0].values(pts[:, 0])
        for i in range(1, self.dimension):
            out = out * self.axes[i].values(pts[:, i])
        return out

    __call__ = values

    def axis_derivative(self, axis: int) -> "TestFunction":
        new_axes = tuple(ax.derivative() if i == axis else ax
                         for i, ax in enumerate(self.axes))
        return TestFunction(new_axes, None, self.parity, None, self.warnings)

    @cached_property
    def mass(self) -> float:
        total = 1.0
        for ax in self.axes:
            total *= ax.moment(0)
        return total

    @property
    def is_even(self) -> bool:
        for ax in self.axes:
            if ax.center != 0.0:
                return False
            if any(c != 0.0 for c in ax.profile.coeffs[1::2]):
                return False
        return True

    def scaled(self, factor: float) -> "TestFunction":
        """Multiply by an overall constant (breaks unit-mass certification)."""
        axes = (replace(self.axes[0], coefficient=self.axes[0].coefficient * factor),
                *self.axes[1:])
        return TestFunction(axes, None, self.parity, None, self.warnings)

    def to_json(self):
        doc = {
            "dimension": self.dimension,
            "support_radius": self.support_radius,
            "moment_order": self.moment_order,
            "parity": self.parity,
            "axes": [ax.to_json() for ax in self.axes],
            "certificate": self.certificate,
            "warnings": list(self.warnings),
        }
        if self.dimension == 1:
            doc["polynomial_coefficients"] = list(self.axes[0].profile.coeffs)
        return doc

    @classmethod
    def from_json(cls, obj):
        axes = tuple(AxisProfile.from_json(a) for a in obj["axes"])
        return cls(axes, obj.get("moment_order"), obj.get("parity", "unknown"),
                   obj.get("certificate"), tuple(obj.get("warnings", ())))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def build_bump(radius: float) -> TestFunction:
    """The reference bump exp(-1/(1-(x/radius)^2)), unnormalized."""
    if radius <= 0:
        raise ArgumentError(f"radius must be positive, got {radius}")
    profile = SmoothProfile1D((1.0,), float(radius))
    return TestFunction((AxisProfile(profile),), moment_order=None, parity="even")


def moment(tf: TestFunction, alpha) -> float:
    """The moment integral x^alpha tf(x) dx by adaptive quadrature.

    Factorizes across axes; tf is separable by construction.
    """
    if isinstance(alpha, int):
        alpha = (alpha,)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != tf.dimension:
        raise ArgumentError(f"multiindex length {len(alpha)} != dimension {tf.dimension}")
    if any(a < 0 for a in alpha):
        raise ArgumentError(f"multiindex must be componentwise >= 0, got {alpha}")
    total = 1.0
    for ax, a in zip(tf.axes, alpha):
        total *= ax.moment(a)
    return total


def _bump_even_moments(radius: float, top: int):
    """Even moments of the unnormalized bump, mu_k for k = 0, 2, ..., top."""
    prof = SmoothProfile1D((1.0,), radius)
    mus = {}
    for k in range(0, top + 1, 2):
        mus[k] = adaptive_quad(lambda t, k=k: t ** k * float(prof.values(t)),
                               -radius, radius)
    return mus


def _solve_refined(M, rhs):
    """LAPACK solve plus two iterative-refinement passes."""
    sol = np.linalg.solve(M, rhs)
    for _ in range(2):
        resid = rhs - M @ sol
        sol = sol + np.linalg.solve(M, resid)
    return sol


def build_vanishing_moment_mollifier(q: int, radius: float = 1.0,
                                     dimension: int = 1,
                                     parity: str = "even") -> TestFunction:
    """Construct a mollifier with unit mass and moments 1..q vanishing.

    The polynomial coefficients are solved from the moment equations against
    the bump profile.  ``parity="even"`` (default) uses even powers only; the
    result is symmetric, and by parity its odd moments vanish at every order
    (so the first surviving moment is q+2 for even q).  ``parity="generic"``
    adds one extra power and pins the (q+1)-st moment to (q+1)!/2, producing a
    mollifier whose embedding error decays at exactly order q+1.
    """
    if q < 0:
        raise ArgumentError(f"moment order q must be >= 0, got {q}")
    if radius <= 0:
        raise ArgumentError(f"radius must be positive, got {radius}")
    if dimension < 1:
        raise ArgumentError(f"dimension must be >= 1, got {dimension}")
    if parity not in ("even", "generic"):
        raise ArgumentError(f"parity must be 'even' or 'generic', got {parity!r}")

    mus = _bump_even_moments(radius, 2 * (q + 1))

    def mu(k):
        return 0.0 if k % 2 else mus[k]

    if parity == "even":
        powers = list(range(0, q + 1, 2))
        orders = powers
        rhs = np.array([1.0] + [0.0] * (len(orders) - 1))
    else:
        powers = list(range(0, q + 2))
        orders = powers
        rhs = np.zeros(len(orders))
        rhs[0] = 1.0
        # cap keeps the solved coefficients small enough to certify at 1e-10
        rhs[q + 1] = min(math.factorial(q + 1) / 2.0, 24.0)

    M = np.array([[mu(k + j) for j in powers] for k in orders])
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > 1e13:
        raise ConstructionError(
            f"moment system for q={q}, radius={radius} is singular or too "
            f"ill-conditioned (condition number {cond:.3e})")
    try:
        sol = _solve_refined(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise ConstructionError(
            f"moment system solve failed for q={q}, radius={radius} "
            f"(condition number {cond:.3e}): {exc}") from exc

    coeffs = [0.0] * (max(powers) + 1)
    for j, c in zip(powers, sol):
        coeffs[j] = float(c)
    profile = SmoothProfile1D(tuple(coeffs), radius)
    base = TestFunction((AxisProfile(profile),), moment_order=q, parity=parity)

    residuals = [moment(base, (k,)) - (1.0 if k == 0 else 0.0) for k in range(q + 1)]
    worst = max(abs(r) for r in residuals)
    if abs(residuals[0]) > UNIT_MASS_CERT_TOL or worst > MOMENT_CERT_TOL:
        raise ConstructionError(
            f"moment certification failed for q={q}: worst residual {worst:.3e} "
            f"(condition number {cond:.3e})")
    certificate = {"moment_residuals": residuals, "condition_number": cond}
    if parity == "generic":
        certificate["pinned_moment"] = {
            "order": q + 1,
            "target": float(rhs[q + 1]),
            "value": moment(base, (q + 1,)),
        }
    base = replace(base, certificate=certificate)

    if dimension == 1:
        return base
    return tensor_product(*[base] * dimension)


def tensor_product(*factors: TestFunction) -> TestFunction:
    """Tensor product of 1D test functions; moments factor across axes."""
    if not factors:
        raise ArgumentError("tensor_product needs at least one factor")
    for f in factors:
        if f.dimension != 1:
            raise ArgumentError("tensor_product factors must be 1-dimensional")
    axes = tuple(f.axes[0] for f in factors)
    orders = [f.moment_order for f in factors]
    order = None if any(o is None for o in orders) else min(orders)
    parity = "even" if all(f.parity == "even" for f in factors) else "generic"
    certs = [f.certificate for f in factors]
    cert = None
    if all(c is not None for c in certs):
        cert = {"factors": certs}
    warnings = tuple(w for f in factors for w in f.warnings)
    return TestFunction(axes, order, parity, cert, warnings)


def scale_translate(tf: TestFunction, eps: float, x=None) -> TestFunction:
    """The scaled translate eps^(-n) tf((y - x)/eps).

    Composes as a group action: scaling by eps1 then eps2 equals scaling by
    eps1*eps2 (centers compose as x2 + eps2*x1).
    """
    if not 0.0 < eps <= 1.0:
        raise ArgumentError(f"eps must lie in (0, 1], got {eps}")
    if x is None:
        x = (0.0,) * tf.dimension
    x = tuple(np.atleast_1d(np.asarray(x, dtype=float)))
    if len(x) != tf.dimension:
        raise ArgumentError(f"point has length {len(x)}, expected {tf.dimension}")
    axes = tuple(
        AxisProfile(ax.profile, x_i + eps * ax.center, eps * ax.scale,
                    ax.scale_power, ax.coefficient * eps ** (ax.scale_power - 1))
        for ax, x_i in zip(tf.axes, x))
    return TestFunction(axes, tf.moment_order, tf.parity, None, tf.warnings)


@dataclass(frozen=True)
class StrictDeltaNet:
    """The net rho_eps(y) = eps^(-n) phi(y/eps) for a unit-mass phi.

    Satisfies the strict-delta-net conditions by construction: support inside
    the ball of radius eps * support_radius, unit mass for every eps, and an
    eps-uniform L1 bound equal to the L1 norm of phi.
    """

    base: TestFunction

    def __post_init__(self):
        if abs(self.base.mass - 1.0) > MASS_TOL:
            raise ArgumentError(
                f"strict delta net needs a unit-mass base; mass is {self.base.mass!r}")

    @property
    def dimension(self):
        return self.base.dimension

    def at(self, eps: float) -> TestFunction:
        return scale_translate(self.base, eps, (0.0,) * self.dimension)

    def support_radius(self, eps: float) -> float:
        return eps * self.base.support_radius


def strict_delta_net(tf: TestFunction) -> StrictDeltaNet:
    return StrictDeltaNet(tf)


@dataclass(frozen=True)
class SmoothingKernelNet:
    """The kernel net x -> psi_eps(x): a translate-and-scale rule around x.

    ``amplitude`` and ``eps_power`` deform the canonical kernel (mass scaling
    and an overall eps^p factor) so that failure modes of the smoothing-
    operator conditions can be exercised; the canonical net from
    ``translation_kernel_net`` has amplitude 1 and eps_power 0.
    """

    base: TestFunction
    amplitude: float = 1.0
    eps_power: int = 0
    warnings: tuple = ()

    @property
    def dimension(self):
        return self.base.dimension

    @property
    def mass(self):
        return self.amplitude * self.base.mass

    def at(self, eps: float, x=None) -> TestFunction:
        """The test function psi_eps(x) centered at x."""
        kernel = scale_translate(self.base, eps, x)
        factor = self.amplitude * eps ** self.eps_power
        return kernel if factor == 1.0 else kernel.scaled(factor)

    def support_radius(self, eps: float) -> float:
        return eps * self.base.support_radius

    def to_json(self):
        return {"mollifier": self.base.to_json(), "amplitude": self.amplitude,
                "eps_power": self.eps_power, "warnings": list(self.warnings)}

    @classmethod
    def from_json(cls, obj):
        return cls(TestFunction.from_json(obj["mollifier"]), obj.get("amplitude", 1.0),
                   obj.get("eps_power", 0), tuple(obj.get("warnings", ())))


def translation_kernel_net(tf: TestFunction) -> SmoothingKernelNet:
    """The canonical embedding kernel psi_eps(x) = phi_{eps,x}."""
    if abs(tf.mass - 1.0) > MASS_TOL:
        raise ArgumentError(
            f"translation kernel needs a unit-mass mollifier; mass is {tf.mass!r}")
    warnings = ()
    if not tf.is_even:
        warnings = ("non-even mollifier: delta embeds as its reflection",)
    return SmoothingKernelNet(tf, warnings=warnings)
