"""Regularized impulsive pp-wave spacetimes in the Brinkmann chart.

Chart axes are ordered (u, v, x, y).  The impulsive metric is realized as the
family g_uu = f(x, y) rho_eps(u), g_uv = -1/2, g_xx = g_yy = 1, with
rho_eps a strict delta net; off the pulse the components equal the flat
background exactly because the pulse profile has compact support.

Christoffels and curvature are exact expression-level objects built from the
netcore derivative, with the index convention

    R^i_jkl = d_l Gamma^i_kj - d_k Gamma^i_lj
              + sum_m (Gamma^i_lm Gamma^m_kj - Gamma^i_km Gamma^m_lj),
    Ric_jl  = sum_i R^i_jil.

With this convention the impulsive Ricci satisfies Ric_uu = (1/2) Delta f
rho_eps(u) (pinned by an independent symbolic oracle in the test suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import netcore as nc
from . import profiles
from .asymptotics import (DEFAULT_GRID, CompactBox, EpsGrid, OrderFit,
                          fit_order, sup_sweep)
from .association import AssociationResult, associate, richardson
from .embedding import DistributionSpec, embed_distribution
from .errors import ArgumentError, EvaluationError
from .mollifier import SmoothingKernelNet, StrictDeltaNet
from .quadrature import gauss_legendre_rule, split_panels

CHART = ("u", "v", "x", "y")
AXIS_U, AXIS_V, AXIS_X, AXIS_Y = 0, 1, 2, 3
UV_COEFF = -0.5                       # the -du dv convention
RICCI_DELTA_COEFFICIENT = 0.5         # Ric_uu = c * Delta f * rho, oracle-pinned

DEGENERACY_THRESHOLD = 1e-8


def parse_profile(src: str) -> nc.NetExpr:
    """Profile expression f(x, y) over the transverse chart axes."""
    return profiles.smooth_parse(src, {"x": AXIS_X, "y": AXIS_Y})


@dataclass(frozen=True)
class MetricComponents:
    """A symmetric matrix of component nets together with its exact inverse."""

    components: tuple
    inverse: tuple
    dimension: int
    det_expr: nc.NetExpr

    def component(self, i, j):
        return self.components[i][j]

    def inverse_component(self, i, j):
        return self.inverse[i][j]


def _is_zero(e):
    return isinstance(e, nc.Const) and e.value == 0.0


def _is_const(e, value=None):
    return isinstance(e, nc.Const) and (value is None or e.value == value)


def invert_metric(components, domain=None) -> MetricComponents:
    """Exact closed-form inverse for diagonal or Brinkmann-block structures."""
    g = tuple(tuple(nc.as_expr(e) for e in row) for row in components)
    n = len(g)
    for i in range(n):
        for j in range(n):
            if g[i][j] != g[j][i]:
                raise ArgumentError(f"metric components not symmetric at "
                                    f"({i}, {j})")
    diagonal = all(_is_zero(g[i][j]) for i in range(n) for j in range(n)
                   if i != j)
    if diagonal:
        inv = [[nc.ZERO] * n for _ in range(n)]
        det = nc.ONE
        for i in range(n):
            inv[i][i] = nc.make_quotient(nc.ONE, g[i][i], domain=domain)
            det = nc.make_product(det, g[i][i])
        return MetricComponents(g, tuple(tuple(r) for r in inv), n, det)
    # Brinkmann block: [[A, c], [c, 0]] in the (u, v) slot, identity transverse
    c = g[0][1]
    block_ok = (n >= 2 and isinstance(c, nc.Const) and c.value != 0.0
                and _is_zero(g[1][1])
                and all(_is_zero(g[0][j]) and _is_zero(g[1][j])
                        for j in range(2, n))
                and all(_is_const(g[i][i], 1.0) for i in range(2, n))
                and all(_is_zero(g[i][j]) for i in range(2, n)
                        for j in range(2, n) if i != j))
    if not block_ok:
        raise ArgumentError("unsupported metric structure: need diagonal or "
                            "Brinkmann-block components")
    cval = c.value
    inv = [[nc.ZERO] * n for _ in range(n)]
    inv[0][0] = nc.ZERO
    inv[0][1] = inv[1][0] = nc.constant(1.0 / cval)
    inv[1][1] = nc.make_product(nc.constant(-1.0 / cval ** 2), g[0][0])
    for i in range(2, n):
        inv[i][i] = nc.ONE
    det = nc.constant(-cval ** 2)
    return MetricComponents(g, tuple(tuple(r) for r in inv), n, det)


@dataclass(frozen=True)
class RegularizedMetric:
    """The regularized Brinkmann metric family for an impulsive pp-wave."""

    metric: MetricComponents
    profile: nc.NetExpr          # f(x, y); ZERO for the flat background
    pulse: StrictDeltaNet | None
    kind: str = "impulsive"      # impulsive | flat | kink

    @property
    def components(self):
        return self.metric.components

    @property
    def dimension(self):
        return self.metric.dimension

    def pulse_halfwidth(self, eps: float) -> float:
        if self.pulse is None:
            return 0.0
        return self.pulse.support_radius(eps)

    def structure_halfwidth(self, eps: float) -> float:
        """Largest u-window halfwidth reported by any component."""
        width = self.pulse_halfwidth(eps)
        for row in self.components:
            for comp in row:
                for axis, lo, hi in comp.structure_windows(eps):
                    if axis == AXIS_U:
                        width = max(width, 0.5 * (hi - lo), abs(lo), abs(hi))
        return width

    def check_nondegeneracy(self, box: CompactBox, grid: EpsGrid = None,
                            threshold: float = DEGENERACY_THRESHOLD):
        """Uniform determinant bound on the box; returns the worst |det|."""
        grid = grid or DEFAULT_GRID
        worst = math.inf
        for eps in grid.values:
            pts = box.grid_points()
            vals = np.abs(self.metric.det_expr.eval(eps, pts))
            i = int(np.argmin(vals))
            if vals[i] < worst:
                worst = float(vals[i])
            if vals[i] < threshold:
                raise EvaluationError(
                    f"metric degenerate: |det| = {vals[i]:.3e} at eps={eps}, "
                    f"point {tuple(pts[i])}")
        return worst


def pulse_net(pulse: StrictDeltaNet) -> nc.NetExpr:
    """The net rho_eps(u) = eps^-1 phi(u/eps) as an expression in u."""
    base = pulse.base
    if base.dimension != 1:
        raise ArgumentError("pulse profile must be one-dimensional")
    arg = nc.make_quotient(nc.coordinate(AXIS_U), nc.EPS)
    return nc.make_quotient(nc.kernel_apply(base, (arg,)), nc.EPS)


def _frame(g_uu: nc.NetExpr) -> MetricComponents:
    zero, one = nc.ZERO, nc.ONE
    c = nc.constant(UV_COEFF)
    components = (
        (g_uu, c, zero, zero),
        (c, zero, zero, zero),
        (zero, zero, one, zero),
        (zero, zero, zero, one),
    )
    return invert_metric(components)


def build_brinkmann(f, pulse: StrictDeltaNet) -> RegularizedMetric:
    """The regularized impulsive metric g_uu = f(x, y) rho_eps(u)."""
    if isinstance(f, str):
        f = parse_profile(f)
    f = nc.as_expr(f)
    g_uu = nc.make_product(f, pulse_net(pulse))
    kind = "flat" if _is_zero(g_uu) else "impulsive"
    return RegularizedMetric(_frame(g_uu), f, pulse, kind)


def build_flat_metric() -> RegularizedMetric:
    return RegularizedMetric(_frame(nc.ZERO), nc.ZERO, None, "flat")


def build_kink_metric(kernel: SmoothingKernelNet) -> RegularizedMetric:
    """g_uu = 1 + (|.| * kernel_eps)(u): bounded with L2 first derivatives."""
    smoothed = embed_distribution(DistributionSpec.regular("abs(x)"), kernel,
                                  coords=(AXIS_U,))
    g_uu = nc.make_sum(nc.ONE, smoothed)
    return RegularizedMetric(_frame(g_uu), nc.ZERO, None, "kink")


# -- Christoffels and curvature ------------------------------------------------

@dataclass(frozen=True)
class ChristoffelField:
    """Gamma[k][i][j], symmetric in the lower pair, exact expressions."""

    symbols: tuple
    dimension: int

    def component(self, k, i, j):
        return self.symbols[k][i][j]

    def nonzero(self):
        out = []
        for k in range(self.dimension):
            for i in range(self.dimension):
                for j in range(i, self.dimension):
                    e = self.symbols[k][i][j]
                    if not _is_zero(e):
                        out.append((k, i, j, e))
        return out


@dataclass(frozen=True)
class CurvatureField:
    """riemann[i][j][k][l] = R^i_jkl and ricci[j][l], exact expressions."""

    riemann: tuple
    ricci: tuple
    dimension: int


def christoffel(metric) -> ChristoffelField:
    m = metric.metric if isinstance(metric, RegularizedMetric) else metric
    n = m.dimension
    dg = [[[nc.derive(m.component(i, j), k) for k in range(n)]
           for j in range(n)] for i in range(n)]
    half = nc.constant(0.5)
    out = []
    for k in range(n):
        rows = []
        for i in range(n):
            row = [None] * n
            rows.append(row)
        out.append(rows)
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                terms = []
                for mm in range(n):
                    gkm = m.inverse_component(k, mm)
                    if _is_zero(gkm):
                        continue
                    inner = nc.make_sum(dg[j][mm][i], dg[i][mm][j],
                                        nc.make_neg(dg[i][j][mm]))
                    terms.append(nc.make_product(gkm, inner))
                expr = nc.make_product(half, nc.make_sum(*terms)) if terms \
                    else nc.ZERO
                out[k][i][j] = expr
                out[k][j][i] = expr
    symbols = tuple(tuple(tuple(row) for row in rows) for rows in out)
    return ChristoffelField(symbols, n)


def curvature(metric, chris: ChristoffelField = None) -> CurvatureField:
    m = metric.metric if isinstance(metric, RegularizedMetric) else metric
    n = m.dimension
    chris = chris or christoffel(metric)
    G = chris.symbols
    riem = [[[[None] * n for _ in range(n)] for _ in range(n)]
            for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    terms = [nc.derive(G[i][k][j], l),
                             nc.make_neg(nc.derive(G[i][l][j], k))]
                    for mm in range(n):
                        if not (_is_zero(G[i][l][mm]) or _is_zero(G[mm][k][j])):
                            terms.append(nc.make_product(G[i][l][mm],
                                                         G[mm][k][j]))
                        if not (_is_zero(G[i][k][mm]) or _is_zero(G[mm][l][j])):
                            terms.append(nc.make_neg(
                                nc.make_product(G[i][k][mm], G[mm][l][j])))
                    riem[i][j][k][l] = nc.make_sum(*terms)
    ricci = tuple(tuple(nc.make_sum(*(riem[i][j][i][l] for i in range(n)))
                        for l in range(n)) for j in range(n))
    riemann = tuple(tuple(tuple(tuple(r4) for r4 in r3) for r3 in r2)
                    for r2 in riem)
    return CurvatureField(riemann, ricci, n)


# -- Geroch-Traschen regularity -------------------------------------------------

@dataclass
class GtRegularityReport:
    verdict: str                   # gt-regular-consistent | fails-boundedness | fails-L2 | indeterminate
    sup_fits: dict                 # label -> OrderFit | None (constant nets skipped)
    sup_sweeps: dict               # label -> [(eps, sup)]
    l2_values: list                # [(eps, integral)]
    l2_fit: OrderFit | None
    l2_component_fits: dict
    detail: str = ""

    def to_json(self):
        def fit_doc(f):
            return None if f is None else {"exponent": f.exponent, "r2": f.r2}
        return {
            "verdict": self.verdict,
            "detail": self.detail,
            "sup_fits": {k: fit_doc(f) for k, f in self.sup_fits.items()},
            "sup_sweeps": {k: [[e, s] for e, s in v]
                           for k, v in self.sup_sweeps.items()},
            "l2_values": [[e, val] for e, val in self.l2_values],
            "l2_fit": fit_doc(self.l2_fit),
            "l2_component_fits": {k: fit_doc(f)
                                  for k, f in self.l2_component_fits.items()},
        }


def _u_panels(box: CompactBox, width: float, n_inner=4):
    lo, hi = box.intervals[AXIS_U]
    cuts = []
    if width > 0.0:
        for c in (-width, -0.5 * width, 0.0, 0.5 * width, width):
            if lo < c < hi:
                cuts.append(c)
    return split_panels(lo, hi, cuts)


def _axis_rule(box, axis, n):
    lo, hi = box.intervals[axis]
    nodes, weights = gauss_legendre_rule(n)
    half = 0.5 * (hi - lo)
    return 0.5 * (hi + lo) + half * nodes, half * weights


def _box_integral_sq(exprs, box: CompactBox, eps: float, u_width: float):
    """Integral over the box of the sum of squared component nets."""
    u_nodes, u_weights = [], []
    nodes, weights = gauss_legendre_rule(32)
    for a, b in _u_panels(box, u_width):
        half = 0.5 * (b - a)
        u_nodes.append(0.5 * (a + b) + half * nodes)
        u_weights.append(half * weights)
    u_nodes = np.concatenate(u_nodes)
    u_weights = np.concatenate(u_weights)
    vx, wx = _axis_rule(box, AXIS_X, 16)
    vy, wy = _axis_rule(box, AXIS_Y, 16)
    vv, wv = _axis_rule(box, AXIS_V, 2)
    mesh = np.meshgrid(u_nodes, vv, vx, vy, indexing="ij")
    pts = np.column_stack([m.reshape(-1) for m in mesh])
    wmesh = np.meshgrid(u_weights, wv, wx, wy, indexing="ij")
    wflat = np.prod(np.column_stack([m.reshape(-1) for m in wmesh]), axis=1)
    total = 0.0
    per_expr = []
    for e in exprs:
        vals = e.eval(eps, pts)
        contrib = float(np.dot(vals * vals, wflat))
        per_expr.append(contrib)
        total += contrib
    return total, per_expr


def gt_check(metric: RegularizedMetric, box: CompactBox,
             grid: EpsGrid = None) -> GtRegularityReport:
    """Check the gt-regularity conditions on the regularized family.

    Sweeps local bounds of g_ij and g^ij plus the squared L2 norm of the
    first derivatives over the grid, fits growth orders, and reports the
    verdict (bounded and L2 mean fitted exponents >= -0.1).
    """
    grid = grid or DEFAULT_GRID
    n = metric.dimension
    sup_fits, sup_sweeps = {}, {}
    bounded_ok = True
    indeterminate = False
    worst_detail = ""
    for tag, getter in (("g", metric.metric.component),
                        ("ginv", metric.metric.inverse_component)):
        for i in range(n):
            for j in range(i, n):
                comp = getter(i, j)
                if isinstance(comp, nc.Const):
                    continue
                label = f"{tag}_{CHART[i]}{CHART[j]}"
                samples = sup_sweep(comp, box, (0,) * n, grid)
                sup_sweeps[label] = [(s.eps, s.sup) for s in samples]
                positive = [(e, v) for e, v in sup_sweeps[label] if v > 0.0]
                if len(positive) < 6:
                    sup_fits[label] = None
                    continue
                fit = fit_order(positive)
                sup_fits[label] = fit
                if fit.exponent < -0.1:
                    if fit.r2 >= 0.98:
                        bounded_ok = False
                        worst_detail = (f"{label} grows at order "
                                        f"{fit.exponent:.3f}")
                    else:
                        indeterminate = True

    deriv_nets = {}
    for i in range(n):
        for j in range(i, n):
            comp = metric.metric.component(i, j)
            for k in range(n):
                d = nc.derive(comp, k)
                if not _is_zero(d):
                    deriv_nets[f"d{CHART[k]} g_{CHART[i]}{CHART[j]}"] = d

    l2_values = []
    per_component = {label: [] for label in deriv_nets}
    for eps in grid.values:
        width = metric.structure_halfwidth(eps)
        total, per = _box_integral_sq(list(deriv_nets.values()), box, eps,
                                      width)
        l2_values.append((eps, total))
        for label, val in zip(deriv_nets, per):
            per_component[label].append((eps, val))

    l2_fit = None
    l2_ok = True
    positive = [(e, v) for e, v in l2_values if v > 1e-280]
    if deriv_nets and len(positive) >= 6:
        l2_fit = fit_order(positive)
        l2_ok = l2_fit.exponent >= -0.1
    l2_component_fits = {}
    for label, vals in per_component.items():
        pos = [(e, v) for e, v in vals if v > 1e-280]
        l2_component_fits[label] = fit_order(pos) if len(pos) >= 6 else None

    if not bounded_ok:
        verdict = "fails-boundedness"
        detail = worst_detail
    elif not l2_ok:
        verdict = "fails-L2"
        detail = (f"derivative L2 integral grows at order "
                  f"{l2_fit.exponent:.3f}")
    elif indeterminate:
        verdict = "indeterminate"
        detail = "low fit quality in a boundedness sweep"
    else:
        verdict = "gt-regular-consistent"
        detail = "bounded components with L2 first derivatives"
    return GtRegularityReport(verdict, sup_fits, sup_sweeps, l2_values,
                              l2_fit, l2_component_fits, detail)


# -- geodesics -----------------------------------------------------------------

@dataclass
class GeodesicSolution:
    """Per-eps geodesic trajectory with u as the affine parameter."""

    eps: float
    init: tuple                     # (u0, v0, x0, y0, vdot0, xdot0, ydot0)
    u: np.ndarray
    states: np.ndarray              # columns: v, x, y, vdot, xdot, ydot
    complete: bool
    diagnostics: dict
    killing_drift: float = math.nan
    null_drift: float = math.nan

    def column(self, name):
        names = {"v": 0, "x": 1, "y": 2, "du_v": 3, "du_x": 4, "du_y": 5}
        return self.states[:, names[name]]


BLOWUP_NORM = 1e12


def _rhs_from_christoffels(chris: ChristoffelField):
    gammas = chris.nonzero()
    relevant = [(k, i, j, e, (1.0 if i == j else 2.0))
                for (k, i, j, e) in gammas if k != AXIS_U]
    if any(k == AXIS_U for k, *_ in gammas):
        raise ArgumentError("u is not affine for this metric; the geodesic "
                            "solver assumes Gamma^u = 0")

    def rhs(u, state, eps):
        v, x, y, vdot, xdot, ydot = state
        vel = (1.0, vdot, xdot, ydot)
        pt = np.array([[u, v, x, y]])
        acc = [0.0, 0.0, 0.0]
        for k, i, j, e, mult in relevant:
            acc[k - 1] -= mult * float(e._eval(eps, pt)[0]) * vel[i] * vel[j]
        return [vdot, xdot, ydot, acc[0], acc[1], acc[2]]

    return rhs


def geodesic_solve(metric: RegularizedMetric, eps: float, init,
                   u_range=None, rtol=1e-10, atol=1e-12,
                   chris: ChristoffelField = None) -> GeodesicSolution:
    """Integrate the geodesic system of the eps-metric with u as parameter.

    Uses an adaptive embedded Runge-Kutta 5(4) pair; inside the pulse window
    the maximum step is eps/20 because the forcing scales like 1/eps.  A
    blowup event (state norm above 1e12) or integrator breakdown marks the
    solution incomplete; partial samples are returned as data.
    """
    if not 0.0 < eps <= 1.0:
        raise ArgumentError(f"eps must lie in (0, 1], got {eps}")
    init = tuple(float(c) for c in init)
    if len(init) != 7:
        raise ArgumentError("init must be (u0, v0, x0, y0, vdot0, xdot0, ydot0)")
    u0 = init[0]
    u_end = 10.0 if u_range is None else float(u_range[1])
    if u_range is not None and float(u_range[0]) != u0:
        raise ArgumentError("u_range start must equal the initial u0")
    width = metric.structure_halfwidth(eps)
    if width and u0 >= -width:
        raise ArgumentError(
            f"initial u0={u0} must lie before the pulse (u < {-width:.3g})")
    chris = chris or christoffel(metric)
    rhs = _rhs_from_christoffels(chris)

    def blowup(u, state, eps_):
        return BLOWUP_NORM - float(np.max(np.abs(state)))

    blowup.terminal = True
    blowup.direction = -1

    bounds = [u0]
    for b in (-width, width):
        if u0 < b < u_end and width > 0.0:
            bounds.append(b)
    bounds.append(u_end)

    us = [np.array([u0])]
    states = [np.array([init[1:]])]
    complete = True
    diagnostics = {"nfev": 0, "segments": [], "status": "ok",
                   "pulse_halfwidth": width}
    state = list(init[1:])
    for a, b in zip(bounds[:-1], bounds[1:]):
        in_pulse = (a >= -width - 1e-300) and (b <= width + 1e-300)
        max_step = eps / 20.0 if in_pulse else np.inf
        n_eval = 81 if in_pulse else 61
        t_eval = np.linspace(a, b, n_eval)[1:]
        sol = solve_ivp(rhs, (a, b), state, method="RK45", rtol=rtol,
                        atol=atol, max_step=max_step, t_eval=t_eval,
                        events=blowup, args=(eps,))
        diagnostics["nfev"] += int(sol.nfev)
        diagnostics["segments"].append({
            "range": [a, b], "status": int(sol.status),
            "max_step": None if max_step == np.inf else max_step})
        if sol.t.size:
            us.append(sol.t)
            states.append(sol.y.T)
        if sol.status != 0:
            complete = False
            diagnostics["status"] = ("blowup" if sol.status == 1
                                     else "integrator-breakdown")
            break
        state = [float(c) for c in sol.y[:, -1]]
    u_arr = np.concatenate(us)
    st_arr = np.vstack(states)
    out = GeodesicSolution(eps, init, u_arr, st_arr, complete, diagnostics)
    _conservation_drifts(metric, out)
    return out


def _conservation_drifts(metric: RegularizedMetric, sol: GeodesicSolution):
    """Drift of g(c', d_v) and g(c', c') relative to the largest term scale."""
    g_uu = metric.metric.component(0, 0)
    pts = np.column_stack([sol.u, sol.column("v"), sol.column("x"),
                           sol.column("y")])
    guu_vals = (np.zeros(len(sol.u)) if _is_zero(g_uu)
                else g_uu.eval(sol.eps, pts))
    vdot = sol.column("du_v")
    xdot = sol.column("du_x")
    ydot = sol.column("du_y")
    killing = UV_COEFF * np.ones_like(vdot)  # g(c', d_v) = g_uv * udot, udot = 1
    null = guu_vals + 2.0 * UV_COEFF * vdot + xdot ** 2 + ydot ** 2
    scale_k = max(1.0, float(np.max(np.abs(killing))))
    terms = (np.abs(guu_vals) + 2.0 * abs(UV_COEFF) * np.abs(vdot)
             + xdot ** 2 + ydot ** 2)
    scale_n = max(1.0, float(np.max(terms)))
    sol.killing_drift = float(np.max(np.abs(killing - killing[0]))) / scale_k
    sol.null_drift = float(np.max(np.abs(null - null[0]))) / scale_n


# -- broken-geodesic limit ------------------------------------------------------

@dataclass
class JumpFit:
    per_eps: list                   # [(eps, velocity_jump, position_jump)]
    velocity_jump: float
    velocity_jump_err: float
    position_jump: float
    position_jump_err: float


@dataclass
class BrokenLineFit:
    coords: dict                    # "x" | "y" | "v" -> JumpFit

    def to_json(self):
        return {name: {
            "per_eps": [[e, vj, pj] for e, vj, pj in jf.per_eps],
            "velocity_jump": jf.velocity_jump,
            "velocity_jump_err": jf.velocity_jump_err,
            "position_jump": jf.position_jump,
            "position_jump_err": jf.position_jump_err,
        } for name, jf in self.coords.items()}


def limit_profile(solutions) -> BrokenLineFit:
    """Fit the eps -> 0 broken-line profile from a family of solutions.

    Each solution is straight off the pulse, so pre and post lines come from
    the sampled states; the jumps are extrapolated over the (geometric)
    eps sequence.
    """
    if len(solutions) < 4:
        raise ArgumentError("need at least 4 solutions for the limit fit")
    if any(not s.complete for s in solutions):
        raise ArgumentError("limit profile requires complete solutions")
    inits = {s.init for s in solutions}
    if len(inits) != 1:
        raise ArgumentError("solutions must share one initial condition")
    init = next(iter(inits))
    if init[5] != 0.0 or init[6] != 0.0:
        raise ArgumentError("limit profile expects xdot0 = ydot0 = 0 at u0")
    sols = sorted(solutions, key=lambda s: -s.eps)
    ratio = sols[1].eps / sols[0].eps
    coords = {}
    for name, pos_col, vel_col in (("x", "x", "du_x"), ("y", "y", "du_y"),
                                   ("v", "v", "du_v")):
        rows = []
        for s in sols:
            width = s.diagnostics.get("pulse_halfwidth", s.eps)
            pre = s.u <= -2.0 * width
            post = s.u >= 2.0 * width
            if not (np.any(pre) and np.any(post)):
                raise ArgumentError("solution samples do not bracket the pulse")
            pos = s.column(pos_col)
            vel = s.column(vel_col)
            m_pre = float(vel[pre][0])
            b_pre = float(pos[pre][0] - m_pre * s.u[pre][0])
            m_post = float(vel[post][-1])
            b_post = float(pos[post][-1] - m_post * s.u[post][-1])
            rows.append((s.eps, m_post - m_pre, b_post - b_pre))
        vj, vj_err, _ = richardson([r[1] for r in rows], ratio)
        pj, pj_err, _ = richardson([r[2] for r in rows], ratio)
        coords[name] = JumpFit(rows, vj, vj_err, pj, pj_err)
    return BrokenLineFit(coords)


# -- completeness ---------------------------------------------------------------

@dataclass
class CompletenessRow:
    init: tuple
    flags: list                     # [(eps, complete)]
    eps0: float | None              # largest eps with the whole tail complete


@dataclass
class CompletenessScan:
    rows: list
    u_max: float

    def to_json(self):
        return {"u_max": self.u_max, "rows": [{
            "init": list(r.init),
            "flags": [[e, bool(c)] for e, c in r.flags],
            "eps0": r.eps0} for r in self.rows]}


def default_init_battery():
    return [(-1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0),
            (-1.0, 0.0, 0.5, -0.5, 0.0, 0.1, 0.0),
            (-1.0, 0.0, 2.0, 0.0, 0.0, 0.0, -0.1)]


def completeness_scan(metric: RegularizedMetric, inits=None,
                      grid: EpsGrid = None, u_max: float = 10.0,
                      rtol: float = 1e-10) -> CompletenessScan:
    """Run the geodesic family over the grid and locate eps0 per init.

    eps0 is the largest grid eps from which every smaller grid eps gives a
    complete solution on [u0, u_max]; completeness is decided on that finite
    window (off the pulse the dynamics are free).
    """
    grid = grid or DEFAULT_GRID
    inits = inits or default_init_battery()
    chris = christoffel(metric)
    rows = []
    for init in inits:
        flags = []
        for eps in grid.values:
            sol = geodesic_solve(metric, eps, init, (init[0], u_max),
                                 rtol=rtol, chris=chris)
            flags.append((eps, sol.complete))
        eps0 = None
        for i in range(len(flags)):
            if all(c for _, c in flags[i:]):
                eps0 = flags[i][0]
                break
        rows.append(CompletenessRow(tuple(init), flags, eps0))
    return CompletenessScan(rows, u_max)


# -- distributional curvature ----------------------------------------------------

@dataclass
class RicciAssociation:
    point: tuple
    laplacian: float
    candidate_coefficient: float
    result: AssociationResult

    def to_json(self):
        return {"point": list(self.point), "laplacian": self.laplacian,
                "candidate_coefficient": self.candidate_coefficient,
                "association": self.result.to_json()}


def ricci_associate(metric: RegularizedMetric, curv: CurvatureField = None,
                    eval_points=((1.0, 0.0),), battery=None,
                    grid: EpsGrid = None,
                    coefficient: float = RICCI_DELTA_COEFFICIENT):
    """Associate Ricci_uu(., x0, y0) with c * Delta f(x0, y0) * delta(u).

    The coefficient c is pinned by the symbolic oracle for this convention
    (+1/2) and reported alongside the match, not asserted blindly.
    """
    curv = curv or curvature(metric)
    f = metric.profile
    lap_expr = nc.make_sum(nc.derive(nc.derive(f, AXIS_X), AXIS_X),
                           nc.derive(nc.derive(f, AXIS_Y), AXIS_Y))
    ric_uu = curv.ricci[0][0]
    out = []
    for (x0, y0) in eval_points:
        sliced = nc.substitute(ric_uu, {AXIS_V: 0.0, AXIS_X: float(x0),
                                        AXIS_Y: float(y0)})
        net_1d = nc.remap_axes(sliced, {AXIS_U: 0})
        lap = lap_expr.eval_at(0.5, (0.0, 0.0, float(x0), float(y0)))
        strength = coefficient * lap
        if strength == 0.0:
            candidate = DistributionSpec.lincomb()
        else:
            candidate = DistributionSpec.lincomb(
                (strength, DistributionSpec.delta((0.0,))))
        res = associate(net_1d, battery=battery, grid=grid,
                        candidate=candidate)
        out.append(RicciAssociation((float(x0), float(y0)), lap, coefficient,
                                    res))
    return out
