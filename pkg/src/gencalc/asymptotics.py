"""Numerical quotient semantics: sup-norm sweeps and growth-order verdicts.

Moderateness and negligibility are decided from log-log fits of sup-norm
sweeps over a geometric epsilon grid.  Verdicts are explicitly scoped to the
tested derivative orders (alpha_max) and decay order (m_max); negligibility
for every m is not decidable numerically, and the reports say so.

Sup-norms over a compact box combine a uniform sample grid, extra samples
over the eps-scale structure windows reported by the expression (pulse or
kernel supports, embedded-distribution features), and one local refinement
pass around the running maximizer.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import netcore as nc
from .errors import ArgumentError, EvaluationError, InsufficientDataError

NOISE_FLOOR = 1e-13         # quadrature-backed nets cannot resolve below this
EXPONENT_SLACK = 0.25       # grid-error slack on fitted exponents
R2_THRESHOLD = 0.98
SUPERPOLY_EXPONENT = -40.0


@dataclass(frozen=True)
class CompactBox:
    """A product of closed intervals with a per-axis sample resolution."""

    intervals: tuple
    resolution: tuple | None = None

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        if not ivs:
            raise ArgumentError("box needs at least one interval")
        for a, b in ivs:
            if not a < b:
                raise ArgumentError(f"degenerate interval [{a}, {b}]")
        object.__setattr__(self, "intervals", ivs)
        res = self.resolution
        if res is None:
            # 64 points per axis up to 2D; tighter defaults keep higher-
            # dimensional boxes tractable (callers override per axis)
            default = {1: 64, 2: 64, 3: 12, 4: 9}.get(len(ivs), 6)
            res = (default,) * len(ivs)
        elif isinstance(res, int):
            res = (res,) * len(ivs)
        else:
            res = tuple(int(r) for r in res)
        if len(res) != len(ivs):
            raise ArgumentError("resolution length must match the dimension")
        object.__setattr__(self, "resolution", res)

    @property
    def dimension(self):
        return len(self.intervals)

    def axis_samples(self, axis, factor=1):
        lo, hi = self.intervals[axis]
        return np.linspace(lo, hi, self.resolution[axis] * factor)

    def grid_points(self, factor=1):
        axes = [self.axis_samples(i, factor) for i in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])

    def clip_axis(self, axis, lo, hi):
        a, b = self.intervals[axis]
        return max(a, lo), min(b, hi)

    def contains(self, point):
        return all(a <= p <= b for p, (a, b) in zip(point, self.intervals))

    def to_json(self):
        return {"intervals": [list(iv) for iv in self.intervals],
                "resolution": list(self.resolution)}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(tuple(iv) for iv in obj["intervals"]),
                   tuple(obj["resolution"]) if obj.get("resolution") else None)


@dataclass(frozen=True)
class EpsGrid:
    """Geometric grid eps_k = eps0 * ratio^k (k = 1..count), decreasing.

    The defaults run from 0.25 down to about 3e-5.
    """

    eps0: float = 0.5
    ratio: float = 0.5
    count: int = 14

    def __post_init__(self):
        if not 0.0 < self.eps0 <= 1.0:
            raise ArgumentError(f"eps0 must lie in (0, 1], got {self.eps0}")
        if not 0.0 < self.ratio < 1.0:
            raise ArgumentError(f"ratio must lie in (0, 1), got {self.ratio}")
        if self.count < 1:
            raise ArgumentError("grid needs at least one point")

    @property
    def values(self):
        return tuple(self.eps0 * self.ratio ** k
                     for k in range(1, self.count + 1))

    def to_json(self):
        return {"eps0": self.eps0, "ratio": self.ratio, "count": self.count}

    @classmethod
    def from_json(cls, obj):
        return cls(obj.get("eps0", 0.5), obj.get("ratio", 0.5),
                   obj.get("count", 14))


DEFAULT_GRID = EpsGrid()

# fit window for decay orders above q ~ 4, where the default grid tail sits
# below the quadrature noise floor
WIDE_GRID = EpsGrid(0.95, 0.74, 8)


@dataclass(frozen=True)
class SweepSample:
    eps: float
    sup: float
    argmax: tuple


@dataclass(frozen=True)
class OrderFit:
    exponent: float
    r2: float
    intercept: float = 0.0
    n_used: int = 0


@dataclass(frozen=True)
class Verdict:
    kind: str              # moderate | negligible | not_moderate | not_negligible | indeterminate
    value: int | None = None
    detail: str = ""

    def __str__(self):
        if self.kind == "moderate":
            return f"Moderate(N={self.value})"
        if self.kind == "negligible":
            return f"Negligible(at tested m_max={self.value})"
        return {"not_moderate": "NotModerate",
                "not_negligible": "NotNegligible",
                "indeterminate": "Indeterminate"}[self.kind]


@dataclass
class AsymptoticReport:
    verdict: Verdict
    alpha_max: int
    grid: EpsGrid
    box: CompactBox
    sweeps: dict = field(default_factory=dict)   # alpha -> [SweepSample]
    fits: dict = field(default_factory=dict)     # alpha -> OrderFit | None
    m_max: int | None = None
    warnings: list = field(default_factory=list)

    def to_json(self):
        return {
            "verdict": {"kind": self.verdict.kind, "value": self.verdict.value,
                        "detail": self.verdict.detail},
            "alpha_max": self.alpha_max,
            "m_max": self.m_max,
            "grid": self.grid.to_json(),
            "box": self.box.to_json(),
            "warnings": list(self.warnings),
            "sweeps": {
                ",".join(map(str, alpha)):
                    [{"eps": s.eps, "sup": s.sup, "argmax": list(s.argmax)}
                     for s in samples]
                for alpha, samples in self.sweeps.items()},
            "fits": {
                ",".join(map(str, alpha)):
                    (None if fit is None else
                     {"exponent": fit.exponent, "r2": fit.r2,
                      "intercept": fit.intercept, "n_used": fit.n_used})
                for alpha, fit in self.fits.items()},
        }


def _window_points(box: CompactBox, windows, n_dense=33):
    """Sample sets concentrating on per-axis structure windows."""
    chunks = []
    base = [box.axis_samples(i) for i in range(box.dimension)]
    for axis, lo, hi in windows:
        if axis >= box.dimension:
            continue
        lo, hi = box.clip_axis(axis, lo, hi)
        if not lo < hi:
            continue
        dense = np.linspace(lo, hi, n_dense)
        axes = [dense if i == axis else base[i] for i in range(box.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        chunks.append(np.column_stack([m.reshape(-1) for m in mesh]))
    return chunks


def _sup_at_eps(e, box, eps, n_refine=33):
    pieces = [box.grid_points()]
    pieces.extend(_window_points(box, e.structure_windows(eps)))
    best_val = -1.0
    best_pt = None
    best_spacing = None
    for pts in pieces:
        vals = np.abs(e.eval(eps, pts))
        if not np.all(np.isfinite(vals)):
            raise EvaluationError(f"non-finite sweep value at eps={eps}")
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val = float(vals[i])
            best_pt = pts[i]
            spac = []
            for axis in range(box.dimension):
                col = np.unique(pts[:, axis])
                spac.append(col[1] - col[0] if col.size > 1 else 0.0)
            best_spacing = spac
    # one refinement pass around the running maximizer
    axes = []
    for axis in range(box.dimension):
        h = best_spacing[axis]
        if h == 0.0:
            axes.append(np.array([best_pt[axis]]))
            continue
        lo, hi = box.clip_axis(axis, best_pt[axis] - h, best_pt[axis] + h)
        axes.append(np.linspace(lo, hi, min(n_refine, 9) if box.dimension > 1 else n_refine))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.reshape(-1) for m in mesh])
    vals = np.abs(e.eval(eps, pts))
    i = int(np.argmax(vals))
    if vals[i] > best_val:
        best_val = float(vals[i])
        best_pt = pts[i]
    return SweepSample(eps, best_val, tuple(float(c) for c in best_pt))


def sup_sweep(e: nc.NetExpr, box: CompactBox, alpha=(), grid: EpsGrid = None,
              threads: int = 1):
    """Sup of |d^alpha u_eps| over the box, for each grid eps.

    Evaluation failures at some eps (overflow of super-polynomial nets)
    record an infinite sample rather than aborting the sweep.
    """
    grid = grid or DEFAULT_GRID
    if alpha == () or isinstance(alpha, int):
        alpha = (alpha,) if isinstance(alpha, int) else (0,) * box.dimension
    alpha = tuple(alpha)
    target = nc.derive_multi(e, alpha) if sum(alpha) else e

    def one(eps):
        try:
            return _sup_at_eps(target, box, eps)
        except (EvaluationError, FloatingPointError, OverflowError):
            return SweepSample(eps, math.inf, ())

    eps_list = list(grid.values)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, eps_list))
    return [one(eps) for eps in eps_list]


def fit_order(samples, window: int = 8) -> OrderFit:
    """Least-squares slope of log(sup) against log(eps) over the tail window.

    A zero sample short-circuits to the +inf sentinel (the net vanishes
    identically at that scale); fewer than 6 positive samples is an error.
    """
    pairs = [(s.eps, s.sup) if isinstance(s, SweepSample) else tuple(s)
             for s in samples]
    if any(v == 0.0 for _, v in pairs):
        return OrderFit(math.inf, 1.0, 0.0, len(pairs))
    if len(pairs) < 6:
        raise InsufficientDataError(
            f"need at least 6 positive samples, got {len(pairs)}")
    tail = pairs[-window:]
    x = np.log([e for e, _ in tail])
    y = np.log([v for _, v in tail])
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot < 1e-20 else 1.0 - ss_res / ss_tot
    return OrderFit(float(coef[0]), r2, float(coef[1]), len(tail))


def _windowed_slopes(pairs, width=6):
    slopes = []
    for start in range(0, len(pairs) - width + 1, 2):
        chunk = pairs[start:start + width]
        x = np.log([e for e, _ in chunk])
        y = np.log([v for _, v in chunk])
        A = np.column_stack([x, np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        slopes.append(float(coef[0]))
    return slopes


def _filtered_fit(samples, floor=NOISE_FLOOR):
    """Fit over samples above the noise floor.

    Returns (fit | None, status) with status one of "fit", "all_floor"
    (everything at/below the floor: decay beyond resolution), "tail_floor"
    (the small-eps tail fell below the floor and too few points remain),
    "sparse" (scattered sub-floor points, not enough signal).
    """
    above = [(s.eps, s.sup) for s in samples if s.sup > floor]
    if not above:
        return None, "all_floor"
    if len(above) >= 6:
        return fit_order(above), "fit"
    eps_above = min(e for e, _ in above)
    eps_below = [s.eps for s in samples if s.sup <= floor]
    if eps_below and max(eps_below) < eps_above:
        return None, "tail_floor"
    return None, "sparse"


def _is_bounded(samples, floor=NOISE_FLOOR):
    vals = [s.sup for s in samples]
    head = max(vals[:4])
    return max(vals) <= max(1.2 * head, 10 * floor)


def classify_moderate(e: nc.NetExpr, box: CompactBox, alpha_max: int = 3,
                      grid: EpsGrid = None, threads: int = 1) -> AsymptoticReport:
    """Moderateness verdict over all derivative multiindices |alpha| <= alpha_max."""
    grid = grid or DEFAULT_GRID
    report = AsymptoticReport(Verdict("indeterminate"), alpha_max, grid, box)
    worst = 0.0
    indeterminate = False
    for alpha in nc.multi_indices(box.dimension, alpha_max):
        samples = sup_sweep(e, box, alpha, grid, threads)
        report.sweeps[alpha] = samples
        tail_inf = any(math.isinf(s.sup) for s in samples[len(samples) // 2:])
        if tail_inf or any(math.isinf(s.sup) for s in samples):
            report.fits[alpha] = None
            report.verdict = Verdict(
                "not_moderate",
                detail=f"overflow in sweep at alpha={alpha} "
                       f"(super-polynomial growth)")
            return report
        fit, status = _filtered_fit(samples)
        report.fits[alpha] = fit
        if fit is None:
            continue  # below floor: no growth
        finite_pairs = [(s.eps, s.sup) for s in samples if s.sup > NOISE_FLOOR]
        slopes = _windowed_slopes(finite_pairs) if len(finite_pairs) >= 8 else []
        if fit.exponent < SUPERPOLY_EXPONENT or (
                slopes and slopes[-1] < -10 and slopes[-1] < 2.0 * slopes[0] < 0):
            report.verdict = Verdict(
                "not_moderate",
                detail=f"super-polynomial growth at alpha={alpha} "
                       f"(fitted exponent {fit.exponent:.2f})")
            return report
        if fit.r2 >= R2_THRESHOLD or _is_bounded(samples):
            worst = max(worst, -fit.exponent)
        else:
            indeterminate = True
    if indeterminate:
        report.verdict = Verdict("indeterminate",
                                 detail="low fit quality on some sweep")
        return report
    N = max(0, math.ceil(worst - EXPONENT_SLACK))
    report.verdict = Verdict("moderate", N)
    return report


def _kernel_order_warnings(e: nc.NetExpr, m_max: int):
    from .embedding import EmbedDistribution

    warnings = []

    def walk(node):
        if isinstance(node, EmbedDistribution):
            q = node.kernel.base.moment_order
            if q is not None and q < m_max:
                warnings.append(
                    f"embedding mollifier order q={q} is below m_max={m_max}; "
                    f"negligibility verdicts are limited to order ~q+1")
        for c in node.children:
            walk(c)

    walk(e)
    return sorted(set(warnings))


def classify_negligible(e: nc.NetExpr, box: CompactBox, alpha_max: int = 3,
                        m_max: int = 8, grid: EpsGrid = None,
                        threads: int = 1) -> AsymptoticReport:
    """Negligibility verdict, explicitly scoped to the tested m_max."""
    grid = grid or DEFAULT_GRID
    report = AsymptoticReport(Verdict("indeterminate"), alpha_max, grid, box,
                              m_max=m_max)
    report.warnings = _kernel_order_warnings(e, m_max)
    all_good = True
    for alpha in nc.multi_indices(box.dimension, alpha_max):
        samples = sup_sweep(e, box, alpha, grid, threads)
        report.sweeps[alpha] = samples
        if any(math.isinf(s.sup) for s in samples):
            report.fits[alpha] = None
            report.verdict = Verdict("not_negligible",
                                     detail=f"overflow at alpha={alpha}")
            return report
        if all(s.sup <= NOISE_FLOOR for s in samples):
            report.fits[alpha] = OrderFit(math.inf, 1.0)
            continue
        fit, status = _filtered_fit(samples)
        report.fits[alpha] = fit
        if fit is None:
            if status == "tail_floor":
                continue  # decayed below resolution: consistent with any m
            all_good = False
            continue
        if math.isinf(fit.exponent):
            continue
        if fit.exponent < 1.0 - EXPONENT_SLACK and fit.r2 >= R2_THRESHOLD:
            report.verdict = Verdict(
                "not_negligible",
                detail=f"alpha={alpha} decays at order {fit.exponent:.3f} < 1")
            return report
        if fit.exponent < m_max - EXPONENT_SLACK:
            all_good = False
    if all_good:
        report.verdict = Verdict("negligible", m_max)
    else:
        report.verdict = Verdict(
            "indeterminate",
            detail=f"some order fits fall between 1 and m_max={m_max} or "
                   f"lack fit quality")
    return report


def equal_in_algebra(u: nc.NetExpr, v: nc.NetExpr, box: CompactBox,
                     alpha_max: int = 3, m_max: int = 8,
                     grid: EpsGrid = None, threads: int = 1) -> AsymptoticReport:
    """Quotient equality test: negligibility of the difference net."""
    return classify_negligible(u - v, box, alpha_max, m_max, grid, threads)


# -- smoothing-operator test objects ------------------------------------------------


@dataclass
class ConditionReport:
    passed: bool
    detail: str
    data: dict = field(default_factory=dict)


@dataclass
class TestObjectReport:
    weak_identity: ConditionReport        # (i)
    smooth_order: ConditionReport         # (ii)
    moderateness: ConditionReport         # (iii)

    @property
    def passed(self):
        return (self.weak_identity.passed and self.smooth_order.passed
                and self.moderateness.passed)

    def to_json(self):
        def conv(c):
            return {"passed": c.passed, "detail": c.detail, "data": c.data}
        return {"weak_identity": conv(self.weak_identity),
                "smooth_order": conv(self.smooth_order),
                "moderateness": conv(self.moderateness),
                "passed": self.passed}


def default_distribution_battery():
    from .embedding import DistributionSpec
    return [("delta0", DistributionSpec.delta((0.0,))),
            ("heaviside", DistributionSpec.heaviside()),
            ("regular_sin", DistributionSpec.regular("sin(x)"))]


def default_smooth_battery():
    return [("one", "1"), ("x", "x"), ("x_sq", "x^2"), ("sin", "sin(x)")]


def default_testfunction_battery():
    from .mollifier import build_vanishing_moment_mollifier, scale_translate
    phi = build_vanishing_moment_mollifier(2)
    return [("psi_c", scale_translate(phi, 0.9, (0.0,))),
            ("psi_l", scale_translate(phi, 0.6, (-0.35,))),
            ("psi_r", scale_translate(phi, 0.6, (0.35,)))]


def verify_test_object(kernel, dist_battery=None, smooth_battery=None,
                       tf_battery=None, grid: EpsGrid = None,
                       box: CompactBox = None, order_grid: EpsGrid = None,
                       alpha_max: int = 2) -> TestObjectReport:
    """Check the three smoothing-operator conditions on finite batteries.

    (i) weak convergence to the identity on the distribution battery,
    (ii) super-polynomial convergence on smooth functions, verified up to
    the kernel's mollifier order as a sup-norm decay-order fit, and
    (iii) moderateness of each smoothed battery distribution.
    """
    from . import association
    from .embedding import (DistributionSpec, embed_distribution, embed_smooth,
                            pair_test_function)
    from . import profiles as prof

    grid = grid or DEFAULT_GRID
    order_grid = order_grid or WIDE_GRID
    box = box or CompactBox(((-1.0, 1.0),))
    dist_battery = dist_battery or default_distribution_battery()
    smooth_battery = smooth_battery or default_smooth_battery()
    tf_battery = tf_battery or default_testfunction_battery()

    # (i): pairings of smoothed distributions against test functions
    deficits = {}
    ok_i = True
    for uname, u in dist_battery:
        net = embed_distribution(u, kernel)
        for pname, psi in tf_battery:
            target = pair_test_function(u, psi)
            vals = [association.pair(net, psi, eps) for eps in grid.values]
            limit, err, converged = association.richardson(vals, grid.ratio)
            deficit = abs(limit - target)
            scale = max(1.0, abs(target))
            rel = deficit / scale
            deficits[f"{uname}|{pname}"] = {
                "target": target, "limit": limit, "deficit": deficit,
                "relative_deficit": deficit / abs(target) if target else rel,
                "converged": converged, "error_estimate": err}
            if not converged or deficit > max(1e-3 * scale, 3.0 * err):
                ok_i = False
    cond_i = ConditionReport(ok_i, "weak pairings converge to the identity"
                             if ok_i else "pairing limits deviate from targets",
                             deficits)

    # (ii): decay order of Phi_eps f - f on the box, per smooth battery entry
    q = kernel.base.moment_order
    m_target = (q + 1) if q is not None else 1
    orders = {}
    ok_ii = True
    finite_orders = []
    for fname, fsrc in smooth_battery:
        f_expr = embed_smooth(prof.smooth_parse(fsrc, {"x": 0}))
        diff = embed_distribution(DistributionSpec.regular(fsrc), kernel) - f_expr
        samples = sup_sweep(diff, box, (0,), order_grid)
        fit, status = _filtered_fit(samples)
        if fit is None:
            orders[fname] = math.inf if status in ("all_floor", "tail_floor") else None
            if orders[fname] is None:
                ok_ii = False
            continue
        orders[fname] = fit.exponent
        finite_orders.append(fit.exponent)
    min_order = min(finite_orders) if finite_orders else math.inf
    if min_order < m_target - EXPONENT_SLACK:
        ok_ii = False
    cond_ii = ConditionReport(
        ok_ii,
        f"smooth-battery convergence order {min_order:.3f} vs target "
        f"m={m_target}",
        {"orders": orders, "target_order": m_target, "min_order": min_order})

    # (iii): moderateness of each smoothed distribution
    mods = {}
    ok_iii = True
    for uname, u in dist_battery:
        net = embed_distribution(u, kernel)
        rep = classify_moderate(net, box, alpha_max, grid)
        mods[uname] = str(rep.verdict)
        if rep.verdict.kind != "moderate":
            ok_iii = False
    cond_iii = ConditionReport(ok_iii, "all smoothed battery members moderate"
                               if ok_iii else "a smoothed member is not moderate",
                               mods)

    return TestObjectReport(cond_i, cond_ii, cond_iii)
