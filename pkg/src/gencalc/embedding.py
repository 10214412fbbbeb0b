"""Embeddings of smooth functions and distributions into net expressions.

``embed_smooth`` realizes the constant-net inclusion sigma; ``embed_distribution``
realizes iota as the smoothing-kernel pairing x -> <u, psi_eps(x)>.  Deltas
evaluate in closed form, Heaviside pairings through a cached antiderivative of
the kernel profile, principal values through a cached Hilbert-transform-style
profile, and regular distributions through vectorized panel quadrature against
the kernel support.  Derivatives of embedded distributions fall on the kernel,
so ``derive`` on these nodes is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import netcore as nc
from . import profiles
from .errors import ArgumentError
from .mollifier import AxisProfile, SmoothingKernelNet, TestFunction
from .quadrature import (adaptive_quad, chebyshev_fit, gauss_legendre_rule,
                         integrate_panels, split_panels)

DERIV_DEPTH_CAP = 6


@dataclass(frozen=True)
class DistributionSpec:
    """A member of the concrete distribution catalog.

    ``deriv`` counts distributional derivatives applied to the base object;
    pairings move them onto the (test or kernel) function with the usual sign.
    """

    kind: str                      # "delta" | "heaviside" | "vp" | "regular" | "lincomb"
    dimension: int = 1
    point: tuple = ()
    axis: int = 0
    threshold: float = 0.0
    deriv: tuple = ()
    payload_src: str = ""
    breakpoints: tuple = ()
    terms: tuple = ()              # ((coef, spec), ...) for lincomb

    def __post_init__(self):
        if sum(self.deriv) > DERIV_DEPTH_CAP:
            raise ArgumentError(
                f"derivative nesting depth {sum(self.deriv)} exceeds "
                f"{DERIV_DEPTH_CAP}")

    # -- constructors -------------------------------------------------------
    @classmethod
    def delta(cls, point=(0.0,)):
        point = tuple(float(p) for p in np.atleast_1d(point))
        return cls("delta", len(point), point=point, deriv=(0,) * len(point))

    @classmethod
    def heaviside(cls, axis=0, threshold=0.0, dimension=1):
        if dimension != 1:
            raise ArgumentError("heaviside is supported in one dimension")
        return cls("heaviside", 1, axis=axis, threshold=float(threshold),
                   deriv=(0,))

    @classmethod
    def vp(cls):
        return cls("vp", 1, deriv=(0,))

    @classmethod
    def regular(cls, payload, breakpoints=(), dimension=1):
        if isinstance(payload, str):
            src = payload
            node = profiles.parse(payload)
        else:
            raise ArgumentError("regular payload must be an expression string")
        auto = profiles.kink_points(node, "x") if dimension == 1 else []
        pts = tuple(sorted(set(float(b) for b in breakpoints) | set(auto)))
        return cls("regular", dimension, payload_src=src, breakpoints=pts,
                   deriv=(0,) * dimension)

    @classmethod
    def lincomb(cls, *terms):
        terms = tuple((float(c), s) for c, s in terms)
        if not terms:
            return cls("lincomb", 1)
        dim = terms[0][1].dimension
        if any(s.dimension != dim for _, s in terms):
            raise ArgumentError("linear combination mixes dimensions")
        return cls("lincomb", dim, terms=terms)

    # -- payload ---------------------------------------------------------------
    @property
    def payload(self):
        if self.kind != "regular":
            raise ArgumentError("payload only exists for regular distributions")
        return profiles.parse(self.payload_src)

    def density(self, pts):
        """Vectorized density evaluation for the regular kind."""
        node = self.payload
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        names = ("x", "y", "z", "w")[: self.dimension]
        env = {n: pts[:, i] for i, n in enumerate(names)}
        vals = profiles.evaluate(node, env)
        return np.broadcast_to(np.asarray(vals, dtype=float), (pts.shape[0],)).copy()

    def derivative(self, axis: int) -> "DistributionSpec":
        """Distributional derivative, normalized within the catalog."""
        if axis >= self.dimension:
            raise ArgumentError(f"axis {axis} out of range for dimension "
                                f"{self.dimension}")
        bump = tuple(d + (1 if i == axis else 0) for i, d in enumerate(self.deriv))
        if self.kind == "delta":
            return DistributionSpec("delta", self.dimension, point=self.point,
                                    deriv=bump)
        if self.kind == "heaviside":
            if sum(self.deriv) == 0:
                return DistributionSpec.delta((self.threshold,))
            raise ArgumentError("derivative of a derived heaviside should have "
                                "been normalized to a delta")
        if self.kind == "vp":
            return DistributionSpec("vp", 1, deriv=bump)
        if self.kind == "regular":
            return DistributionSpec("regular", self.dimension,
                                    payload_src=self.payload_src,
                                    breakpoints=self.breakpoints, deriv=bump)
        if self.kind == "lincomb":
            return DistributionSpec.lincomb(
                *((c, s.derivative(axis)) for c, s in self.terms))
        raise ArgumentError(f"unknown distribution kind {self.kind!r}")

    def to_json(self):
        doc = {"kind": self.kind, "dimension": self.dimension,
               "deriv": list(self.deriv)}
        if self.kind == "delta":
            doc["point"] = list(self.point)
        elif self.kind == "heaviside":
            doc.update(axis=self.axis, threshold=self.threshold)
        elif self.kind == "regular":
            doc.update(payload=self.payload_src, breakpoints=list(self.breakpoints))
        elif self.kind == "lincomb":
            doc["terms"] = [{"coefficient": c, "spec": s.to_json()}
                            for c, s in self.terms]
        return doc

    @classmethod
    def from_json(cls, obj):
        kind = obj["kind"]
        deriv = tuple(obj.get("deriv", ()))
        if kind == "delta":
            spec = cls.delta(obj["point"])
        elif kind == "heaviside":
            spec = cls.heaviside(obj.get("axis", 0), obj.get("threshold", 0.0))
        elif kind == "vp":
            spec = cls.vp()
        elif kind == "regular":
            spec = cls.regular(obj["payload"], obj.get("breakpoints", ()),
                               obj.get("dimension", 1))
        elif kind == "lincomb":
            spec = cls.lincomb(*((t["coefficient"], cls.from_json(t["spec"]))
                                 for t in obj["terms"]))
        else:
            raise ArgumentError(f"unknown distribution kind {kind!r}")
        if deriv and any(deriv):
            base = spec.deriv
            spec = dataclass_replace(spec, deriv=tuple(
                b + d for b, d in zip(base, deriv)))
        return spec

    def feature_points(self):
        """Per-axis locations around which eps-scale structure concentrates."""
        if self.kind == "delta":
            return [(i, p) for i, p in enumerate(self.point)]
        if self.kind == "heaviside":
            return [(0, self.threshold)]
        if self.kind == "vp":
            return [(0, 0.0)]
        if self.kind == "regular":
            return [(0, b) for b in self.breakpoints]
        if self.kind == "lincomb":
            return [fp for _, s in self.terms for fp in s.feature_points()]
        return []


def dataclass_replace(spec, **kw):
    from dataclasses import replace
    return replace(spec, **kw)


# -- pairings of catalog entries with concrete test functions -------------------

def pair_test_function(spec: DistributionSpec, tf: TestFunction) -> float:
    """<u, psi> for a catalog distribution and a concrete test function."""
    if spec.kind == "lincomb":
        return sum(c * pair_test_function(s, tf) for c, s in spec.terms)
    if tf.dimension != spec.dimension:
        raise ArgumentError("test function dimension does not match the "
                            "distribution")
    sign = (-1.0) ** sum(spec.deriv)
    dtf = tf
    for axis, count in enumerate(spec.deriv):
        for _ in range(count):
            dtf = dtf.axis_derivative(axis)
    if spec.kind == "delta":
        return sign * float(dtf.values(np.asarray(spec.point)[None, :])[0])
    if spec.kind == "heaviside":
        lo, hi = dtf.axis_support(0)
        lo = max(lo, spec.threshold)
        if hi <= lo:
            return 0.0
        return sign * adaptive_quad(lambda y: float(dtf.values(y)), lo, hi)
    if spec.kind == "vp":
        return sign * vp_pairing(dtf)
    if spec.kind == "regular":
        lo, hi = dtf.axis_support(0)
        return sign * adaptive_quad(
            lambda y: float(spec.density([[y]])[0]) * float(dtf.values(y)),
            lo, hi, breakpoints=spec.breakpoints)
    raise ArgumentError(f"unknown distribution kind {spec.kind!r}")


def vp_pairing(psi) -> float:
    """<vp(1/x), psi> as the symmetrized integral of (psi(y)-psi(-y))/y.

    ``psi`` is a 1D test function (or any object with ``values`` and
    ``axis_support``).
    """
    if getattr(psi, "dimension", 1) != 1:
        raise ArgumentError("vp pairing is one-dimensional")
    lo, hi = psi.axis_support(0)
    top = max(abs(lo), abs(hi))
    if top == 0.0:
        return 0.0
    edges = sorted({abs(lo), abs(hi)} - {0.0, top})

    def integrand(y):
        return (float(psi.values(y)) - float(psi.values(-y))) / y

    return adaptive_quad(integrand, 0.0, top, breakpoints=edges)


# -- cached kernel transforms ------------------------------------------------------

def _moment_corrected_kernel(akern, z, base_tf, d):
    """Project discrete kernel weights onto the exact moment structure.

    The raw rule carries rounding-level moment defects that an eps^-d front
    factor amplifies at small eps; the least-norm correction makes the
    discrete pairing annihilate polynomials below the derivative order and
    reproduce them exactly through the mollifier's certified order (whose
    ideal moments are 1, 0, ..., 0).
    """
    q = base_tf.moment_order
    if q is not None:
        refs = (1.0,) + (0.0,) * q
    else:
        refs = (base_tf.axes[0].moment(0),)
    jmax = min(d + len(refs) - 1, 8)
    targets = []
    for j in range(jmax + 1):
        if j < d:
            targets.append(0.0)
        else:
            fall = math.prod(range(j - d + 1, j + 1))
            targets.append((-1.0) ** d * fall * refs[j - d])
    V = np.vstack([z ** j for j in range(jmax + 1)])
    defect = V @ akern - np.asarray(targets)
    gram = V @ V.T
    return akern - V.T @ np.linalg.solve(gram, defect)


@lru_cache(maxsize=256)
def _axis_antiderivative(axis: AxisProfile):
    """Chebyshev antiderivative of an axis profile and its total mass."""
    lo, hi = axis.support
    fit = chebyshev_fit(lambda t: axis.values(t), lo, hi)
    cdf = fit.integ(lbnd=lo)
    return cdf, float(cdf(hi)), lo, hi


def _pv_pairing_fast(axis: AxisProfile, w: float) -> float:
    """PV integral of A(z)/(z+w) dz via the symmetrized vectorized form."""
    lo, hi = axis.support
    zstar = -w
    top = max(abs(lo - zstar), abs(hi - zstar))
    if top == 0.0:
        return 0.0
    inner = sorted(({abs(lo - zstar), abs(hi - zstar)} - {0.0, top})
                   | {top / 64.0, top / 8.0})

    def integrand(t):
        return (axis.values(zstar + t) - axis.values(zstar - t)) / t

    return integrate_panels(integrand, split_panels(0.0, top, inner),
                            n=64, check_n=48, tol=3e-8)


@lru_cache(maxsize=128)
def _axis_vp_profile(axis: AxisProfile):
    """Chebyshev fit of w -> PV integral of A(z)/(z+w) dz near the support."""
    from numpy.polynomial import Chebyshev

    lo, hi = axis.support
    reach = max(abs(lo), abs(hi))
    width = reach + 1.0
    scale = max(1.0, float(np.max(np.abs(
        axis.values(np.linspace(lo, hi, 257))))))
    for deg in (384, 768, 1536):
        fit = Chebyshev.interpolate(
            lambda ws: np.array([_pv_pairing_fast(axis, float(w))
                                 for w in np.atleast_1d(ws)]),
            deg, domain=[-width, width])
        probes = np.linspace(-width * 0.97, width * 0.97, 65)
        err = max(abs(float(fit(w)) - _pv_pairing_fast(axis, float(w)))
                  for w in probes)
        if err <= 1e-7 * scale:
            return fit, width, lo, hi
    raise ArgumentError(
        f"principal-value profile fit did not converge (error {err:.2e})")


def _axis_vp_values(axis: AxisProfile, w):
    """PV integral of A(z)/(z+w) dz, vectorized over w."""
    fit, width, lo, hi = _axis_vp_profile(axis)
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    near = np.abs(w) <= width
    if np.any(near):
        out[near] = fit(w[near])
    far = ~near
    if np.any(far):
        nodes, weights = gauss_legendre_rule(64)
        half = 0.5 * (hi - lo)
        z = 0.5 * (hi + lo) + half * nodes
        a_vals = axis.values(z) * (half * weights)
        out[far] = (a_vals[None, :] / (z[None, :] + w[far, None])).sum(axis=1)
    return out


# -- the embedded-distribution node ---------------------------------------------

@dataclass(frozen=True, eq=False)
class EmbedDistribution(nc.NetExpr):
    """Net node with value <u, psi_eps(x)> at (eps, x).

    ``coords`` names the chart axes the embedding reads, so 1D embeddings can
    live inside higher-dimensional nets (e.g. a smoothed kink in the u axis
    of a metric component).
    """

    spec: DistributionSpec
    kernel: SmoothingKernelNet
    coords: tuple

    def _key(self):
        return (self.spec, self.kernel.base, self.kernel.amplitude,
                self.kernel.eps_power, self.coords)

    def _dep_coords_impl(self):
        return True

    # factor amp * eps^pw * prod_i eps^(-1-d_i) collected here
    def _prefactor(self, eps):
        k = self.kernel
        d = self.spec.deriv
        return (k.amplitude * eps ** k.eps_power
                * eps ** (-(self.spec.dimension + sum(d))))

    def _derived_axes(self):
        axes = []
        for i, ax in enumerate(self.kernel.base.axes):
            for _ in range(self.spec.deriv[i]):
                ax = ax.derivative()
            axes.append(ax)
        return axes

    def _eval(self, eps, pts):
        X = pts[:, list(self.coords)]
        spec = self.spec
        sign = (-1.0) ** sum(spec.deriv)
        if spec.kind == "delta":
            axes = self._derived_axes()
            out = np.ones(X.shape[0])
            for i, ax in enumerate(axes):
                out *= ax.values((spec.point[i] - X[:, i]) / eps)
            return sign * self._prefactor(eps) * out
        if spec.kind == "heaviside":
            if sum(spec.deriv):
                raise ArgumentError("derived heaviside must be normalized to "
                                    "a delta before evaluation")
            ax = self.kernel.base.axes[0]
            cdf, mass, lo, hi = _axis_antiderivative(ax)
            t = (spec.threshold - X[:, 0]) / eps
            vals = np.empty_like(t)
            vals[t <= lo] = mass
            vals[t >= hi] = 0.0
            mid = (t > lo) & (t < hi)
            vals[mid] = mass - cdf(t[mid])
            return self.kernel.amplitude * eps ** self.kernel.eps_power * vals
        if spec.kind == "vp":
            ax = self._derived_axes()[0]
            v = _axis_vp_values(ax, X[:, 0] / eps)
            d = sum(spec.deriv)
            return (sign * self.kernel.amplitude * eps ** self.kernel.eps_power
                    * eps ** (-1 - d) * v)
        if spec.kind == "regular":
            return sign * self._regular_values(eps, X)
        raise ArgumentError(f"unknown embedded distribution kind {spec.kind!r}")

    def _regular_values(self, eps, X):
        """Vectorized pairing with a regular distribution.

        Substituting y = x + eps z turns the pairing into an integral of
        g(x + eps z) against the (derived) kernel profile in z; each
        derivative contributes one eps^-1.  Tensor-product meshes repeat the
        relevant coordinates heavily, so evaluation deduplicates rows first.
        """
        if X.shape[0] > 256:
            uniq, inverse = np.unique(X, axis=0, return_inverse=True)
            if uniq.shape[0] < X.shape[0] // 2:
                return self._regular_values(eps, uniq)[inverse]
        spec = self.spec
        k = self.kernel
        axes = self._derived_axes()
        n = spec.dimension
        front = (k.amplitude * eps ** k.eps_power * eps ** (-sum(spec.deriv)))
        if n == 1:
            ax = axes[0]
            lo, hi = ax.support
            xcol = X[:, 0]
            if spec.breakpoints:
                zb = (np.asarray(spec.breakpoints)[None, :]
                      - xcol[:, None]) / eps
                kinked = ((zb > lo) & (zb < hi)).any(axis=1)
            else:
                kinked = np.zeros(xcol.size, dtype=bool)
            out = np.empty(xcol.size)
            if np.any(~kinked):
                out[~kinked] = self._regular_smooth_rows(eps, xcol[~kinked],
                                                         ax, lo, hi)
            if np.any(kinked):
                out[kinked] = self._regular_kinked_rows(eps, xcol[kinked],
                                                        ax, lo, hi)
            return front * out
        return front * self._regular_values_nd(eps, X)

    @staticmethod
    def _base_cuts(lo, hi):
        # edge-refined cuts tame the steep flanks of derived profiles
        span = hi - lo
        return tuple(lo + f * span for f in (0.01, 0.05, 0.15, 0.5,
                                             0.85, 0.95, 0.99))

    def _regular_smooth_rows(self, eps, xcol, ax, lo, hi):
        """Shared-panel path: no payload kink inside the kernel window."""
        spec = self.spec
        nodes, weights = gauss_legendre_rule(32)
        z, w = [], []
        for a, b in split_panels(lo, hi, self._base_cuts(lo, hi)):
            half = 0.5 * (b - a)
            z.append(0.5 * (a + b) + half * nodes)
            w.append(half * weights)
        z = np.concatenate(z)
        w = np.concatenate(w)
        akern = _moment_corrected_kernel(ax.values(z) * w, z,
                                         self.kernel.base, sum(spec.deriv))
        G = spec.density((xcol[:, None] + eps * z[None, :]).reshape(-1, 1))
        return G.reshape(xcol.size, z.size) @ akern

    def _regular_kinked_rows(self, eps, xcol, ax, lo, hi):
        """Per-row panels split at the payload kinks inside the window."""
        spec = self.spec
        nodes, weights = gauss_legendre_rule(32)
        base_cuts = self._base_cuts(lo, hi)
        rows = []
        for xj in xcol:
            cuts = sorted({(b - xj) / eps for b in spec.breakpoints
                           if lo < (b - xj) / eps < hi} | set(base_cuts))
            rows.append(split_panels(lo, hi, cuts))
        width = max(len(r) for r in rows)
        for r in rows:
            while len(r) < width:  # pad by splitting the widest panel
                i = max(range(len(r)), key=lambda j: r[j][1] - r[j][0])
                a, b = r[i]
                r[i:i + 1] = [(a, 0.5 * (a + b)), (0.5 * (a + b), b)]
        Z = np.empty((xcol.size, width * nodes.size))
        W = np.empty_like(Z)
        for j, r in enumerate(rows):
            for p, (a, b) in enumerate(r):
                half = 0.5 * (b - a)
                sl = slice(p * nodes.size, (p + 1) * nodes.size)
                Z[j, sl] = 0.5 * (a + b) + half * nodes
                W[j, sl] = half * weights
        G = spec.density((xcol[:, None] + eps * Z).reshape(-1, 1))
        G = G.reshape(Z.shape)
        A = ax.values(Z.reshape(-1)).reshape(Z.shape)
        return np.einsum("ij,ij,ij->i", G, A, W)

    def _regular_values_nd(self, eps, X):
        # multidimensional: tensorized panels, no interior breakpoints
        spec = self.spec
        axes = self._derived_axes()
        grids = []
        for ax in axes:
            lo, hi = ax.support
            nodes, weights = gauss_legendre_rule(32)
            panels = split_panels(lo, hi, (0.5 * (lo + hi),))
            zs, ws = [], []
            for a, b in panels:
                half = 0.5 * (b - a)
                zs.append(0.5 * (a + b) + half * nodes)
                ws.append(half * weights)
            grids.append((np.concatenate(zs), np.concatenate(ws)))
        mesh = np.meshgrid(*(g[0] for g in grids), indexing="ij")
        wmesh = np.meshgrid(*(g[1] for g in grids), indexing="ij")
        Zflat = np.column_stack([m.reshape(-1) for m in mesh])
        wflat = np.prod(np.column_stack([m.reshape(-1) for m in wmesh]), axis=1)
        akern = np.ones(Zflat.shape[0])
        for i, ax in enumerate(axes):
            akern *= ax.values(Zflat[:, i])
        out = np.empty(X.shape[0])
        for j in range(X.shape[0]):
            out[j] = float(np.dot(
                spec.density(X[j][None, :] + eps * Zflat) * akern, wflat))
        return out

    def _derive(self, chart_axis):
        if chart_axis not in self.coords:
            return nc.ZERO
        internal = self.coords.index(chart_axis)
        return EmbedDistribution(self.spec.derivative(internal), self.kernel,
                                 self.coords)

    def _substitute(self, assignments):
        if any(axis in assignments for axis in self.coords):
            raise ArgumentError("cannot substitute a coordinate an embedded "
                                "distribution reads")
        return self

    def _remap_axes(self, mapping):
        return EmbedDistribution(self.spec, self.kernel,
                                 tuple(mapping[c] for c in self.coords))

    def structure_windows(self, eps):
        reach = self.kernel.support_radius(eps)
        out = []
        for internal_axis, loc in self.spec.feature_points():
            ax = self.kernel.base.axes[internal_axis]
            r = eps * (abs(ax.center) + ax.scale * ax.profile.radius)
            chart = self.coords[internal_axis]
            out.append((chart, loc - max(r, reach), loc + max(r, reach)))
        return out

    def to_json(self):
        return {"kind": "embed", "spec": self.spec.to_json(),
                "kernel": self.kernel.to_json(), "coords": list(self.coords)}


def embedded_from_json(obj) -> EmbedDistribution:
    return EmbedDistribution(DistributionSpec.from_json(obj["spec"]),
                             SmoothingKernelNet.from_json(obj["kernel"]),
                             tuple(obj["coords"]))


# -- public constructors ---------------------------------------------------------

def embed_smooth(f, var_axes=None) -> nc.NetExpr:
    """sigma: the constant-net inclusion of a smooth function."""
    if isinstance(f, str):
        f = profiles.smooth_parse(f, var_axes or {"x": 0, "y": 1})
    f = nc.as_expr(f)
    if _contains_embed(f):
        raise ArgumentError("smooth inclusion cannot contain embedded "
                            "distributions")
    return f


def embed_distribution(u: DistributionSpec, kernel: SmoothingKernelNet,
                       coords=None) -> nc.NetExpr:
    """iota: embed a distribution via the smoothing-kernel pairing."""
    if kernel.dimension != u.dimension:
        raise ArgumentError(
            f"kernel dimension {kernel.dimension} does not match "
            f"distribution dimension {u.dimension}")
    if coords is None:
        coords = tuple(range(u.dimension))
    coords = tuple(int(c) for c in coords)
    if u.kind == "lincomb":
        return nc.make_sum(*(nc.make_product(nc.constant(c),
                                             embed_distribution(s, kernel, coords))
                             for c, s in u.terms))
    return EmbedDistribution(u, kernel, coords)


def _contains_embed(e: nc.NetExpr) -> bool:
    if isinstance(e, EmbedDistribution):
        return True
    return any(_contains_embed(c) for c in e.children)
