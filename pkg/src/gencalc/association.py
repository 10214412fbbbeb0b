"""Weak limits of nets against test-function batteries.

``pair`` computes one pairing integral; ``associate`` extrapolates the pairing
sequence over a geometric eps grid (two Aitken levels) and decides, per
battery element, whether a limit exists.  Verdicts are battery-scoped: a
finite battery cannot certify association against every test function, and
the result says at which elements it looked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import netcore as nc
from .asymptotics import DEFAULT_GRID, EpsGrid, fit_order
from .embedding import DistributionSpec, pair_test_function
from .errors import ArgumentError, InsufficientDataError
from .mollifier import (AxisProfile, SmoothProfile1D, TestFunction,
                        build_vanishing_moment_mollifier, scale_translate)
from .quadrature import integrate_panels, split_panels

MATCH_TOL = 1e-3


def pair(e: nc.NetExpr, psi: TestFunction, eps: float) -> float:
    """The pairing integral of u_eps against a test function.

    Panels are forced at the eps-scale structure windows of the net (kernel
    supports, embedded features) with geometric bridging cuts, so pulse-
    localized integrands are not missed; the integrand is evaluated
    vectorized panel by panel.
    """
    if psi.dimension != 1:
        raise ArgumentError("pairings are computed against 1D test functions")
    lo, hi = psi.axis_support(0)
    cuts = set()
    for axis, wlo, whi in e.structure_windows(eps):
        if axis != 0:
            continue
        center = 0.5 * (wlo + whi)
        width = max(whi - wlo, 1e-300)
        cuts.update((wlo, center, whi))
        # geometric bridge between the window scale and the O(1) scale
        for mag in (4.0, 16.0, 64.0):
            cuts.add(center - mag * width)
            cuts.add(center + mag * width)

    def integrand(x):
        return e.eval(eps, x[:, None]) * psi.values(x[:, None])

    # tolerance sits above the noise floor of quadrature-backed inner nets
    return integrate_panels(integrand, split_panels(lo, hi, sorted(cuts)),
                            n=48, check_n=32, tol=1e-7)


def _aitken(s):
    out = []
    for i in range(len(s) - 2):
        d1, d2 = s[i + 1] - s[i], s[i + 2] - s[i + 1]
        denom = d2 - d1
        if denom == 0.0 or abs(d2) >= abs(d1):
            out.append(s[i + 2])
        else:
            out.append(s[i + 2] - d2 * d2 / denom)
    return np.array(out)


def richardson(values, ratio: float):
    """Two-level Aitken extrapolation of a geometric-grid sequence.

    Returns (limit, error_estimate, converged).  The extrapolation window
    ends where the difference sequence bottoms out, so a noise-dominated
    small-eps tail (quadrature-backed nets resolve pairings to roughly
    1e-5 relative there) does not mask an otherwise contracting sequence.
    """
    seq = np.asarray(values, dtype=float)
    if seq.size < 3:
        return float(seq[-1]), math.inf, False
    scale = max(1.0, float(np.max(np.abs(seq))))
    d = np.abs(np.diff(seq))
    tiny = 1e-12 * scale
    if np.all(d <= tiny):
        return float(seq[-1]), max(float(np.max(d, initial=0.0)), 1e-15), True
    if np.all(d <= 1e-8 * scale):
        # flat at the pairing noise level
        k = int(np.argmin(d))
        return float(seq[k + 1]), max(float(np.max(d)), 1e-15), True

    kstar = int(np.argmin(d))
    head_contracts = kstar >= 2 and d[kstar] <= 0.25 * max(float(d[0]), tiny)
    tail_noise = float(np.max(d[kstar + 1:], initial=0.0))
    noise_ok = tail_noise <= max(1e-5 * scale, 10.0 * float(d[kstar]))
    converged = head_contracts and noise_ok

    window = seq[:kstar + 2]
    level1 = _aitken(window) if window.size >= 3 else window
    level2 = _aitken(level1) if level1.size >= 3 else level1
    limit = float(level2[-1])
    correction = abs(float(level2[-1]) - float(level1[-1])) if level1.size else 0.0
    err = max(correction, float(d[kstar]), 0.5 * tail_noise, 1e-15)
    return limit, err, converged


@dataclass
class PairingRecord:
    psi_id: str
    eps: list
    pairings: list
    limit: float
    error_estimate: float
    converged: bool


@dataclass
class MatchReport:
    candidate: DistributionSpec
    matched: bool
    per_psi: dict  # psi_id -> {target, limit, tolerance, matched}

    def to_json(self):
        return {"candidate": self.candidate.to_json(), "matched": self.matched,
                "per_psi": self.per_psi}


@dataclass
class AssociationResult:
    verdict: str                     # associated | divergent | indeterminate
    records: list
    battery: list = field(repr=False, default_factory=list)
    growth_exponent: float | None = None
    growth_r2: float | None = None
    match: MatchReport | None = None

    @property
    def limits(self):
        return {r.psi_id: r.limit for r in self.records}

    def to_json(self):
        doc = {
            "verdict": self.verdict,
            "growth_exponent": self.growth_exponent,
            "growth_r2": self.growth_r2,
            "records": [{
                "psi": r.psi_id, "eps": r.eps, "pairings": r.pairings,
                "limit": r.limit, "error_estimate": r.error_estimate,
                "converged": r.converged} for r in self.records],
        }
        if self.match is not None:
            doc["match"] = self.match.to_json()
        return doc


def default_battery(radius: float = 1.0):
    """Five translated/scaled A_2 mollifiers plus two polynomial-times-bump
    functions."""
    phi = build_vanishing_moment_mollifier(2, radius=radius)
    battery = [
        ("moll_c", scale_translate(phi, 1.0, (0.0,))),
        ("moll_l", scale_translate(phi, 0.7, (-0.3,))),
        ("moll_r", scale_translate(phi, 0.7, (0.3,))),
        ("moll_L", scale_translate(phi, 0.5, (-0.55,))),
        ("moll_R", scale_translate(phi, 0.5, (0.55,))),
    ]
    bump = SmoothProfile1D((1.0,), radius)
    battery.append(("poly_odd", TestFunction(
        (AxisProfile(SmoothProfile1D((0.0, 1.0), radius)),))))
    battery.append(("poly_mix", TestFunction(
        (AxisProfile(SmoothProfile1D((0.5, 1.0, 1.0), radius)),))))
    return battery


def associate(e: nc.NetExpr, battery=None, grid: EpsGrid = None,
              candidate: DistributionSpec | None = None) -> AssociationResult:
    """Extrapolated weak limits of the net across a test-function battery."""
    battery = battery or default_battery()
    grid = grid or DEFAULT_GRID
    eps_list = list(grid.values)
    records = []
    any_diverging = False
    all_converged = True
    worst_growth = (None, None)
    for psi_id, psi in battery:
        pairings = [pair(e, psi, eps) for eps in eps_list]
        limit, err, converged = richardson(pairings, grid.ratio)
        records.append(PairingRecord(psi_id, eps_list, pairings, limit, err,
                                     converged))
        if not converged:
            all_converged = False
            mags = [abs(p) for p in pairings]
            if all(m > 0.0 for m in mags):
                try:
                    fit = fit_order(list(zip(eps_list, mags)))
                except InsufficientDataError:
                    fit = None
                if (fit is not None and fit.exponent < -0.5
                        and fit.r2 >= 0.98):
                    any_diverging = True
                    if worst_growth[0] is None or fit.exponent < worst_growth[0]:
                        worst_growth = (fit.exponent, fit.r2)
    if all_converged:
        verdict = "associated"
    elif any_diverging:
        verdict = "divergent"
    else:
        verdict = "indeterminate"
    result = AssociationResult(verdict, records, battery,
                               growth_exponent=worst_growth[0],
                               growth_r2=worst_growth[1])
    if candidate is not None and verdict == "associated":
        result.match = match_candidate(result, candidate)
    return result


def match_candidate(result: AssociationResult,
                    candidate: DistributionSpec) -> MatchReport:
    """Compare extrapolated limits with a candidate distribution's pairings."""
    if result.verdict != "associated":
        raise ArgumentError(
            f"candidate matching requires an associated net, verdict is "
            f"{result.verdict!r}")
    per_psi = {}
    matched = True
    by_id = dict(result.battery)
    for rec in result.records:
        psi = by_id[rec.psi_id]
        target = pair_test_function(candidate, psi)
        tol = max(MATCH_TOL, 3.0 * rec.error_estimate)
        ok = abs(rec.limit - target) <= tol
        matched = matched and ok
        per_psi[rec.psi_id] = {"target": target, "limit": rec.limit,
                               "tolerance": tol, "matched": ok}
    return MatchReport(candidate, matched, per_psi)


def zero_candidate() -> DistributionSpec:
    """The zero distribution as a (trivial) linear combination."""
    return DistributionSpec.lincomb()
