"""Quadrature helpers shared by the mollifier, embedding and association layers.

Two regimes are served:

* certification-grade adaptive quadrature (``adaptive_quad``), used for moment
  certificates and anywhere an absolute tolerance near 1e-12 matters; backed
  by QUADPACK's adaptive Gauss-Kronrod scheme,
* fast vectorized panel rules (``panel_rule``, ``integrate_panels``) for the
  hot evaluation paths inside epsilon sweeps, where the integrand is smooth on
  each panel and a fixed pair of Gauss-Legendre rules gives an error estimate
  at a fraction of the cost.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import Chebyshev
from scipy import integrate


class QuadratureError(RuntimeError):
    """Raised when an integral does not converge to the requested tolerance."""


DEFAULT_ABS_TOL = 1e-12
DEFAULT_REL_TOL = 1e-11
SUBDIVISION_LIMIT = 200


def adaptive_quad(f, a, b, *, abs_tol=DEFAULT_ABS_TOL, rel_tol=DEFAULT_REL_TOL,
                  breakpoints=(), limit=SUBDIVISION_LIMIT):
    """Adaptive Gauss-Kronrod integral of a scalar function on [a, b].

    ``breakpoints`` marks interior points (kinks, support edges, pulse
    boundaries) where subdivision is forced.  Raises ``QuadratureError``
    if QUADPACK reports non-convergence beyond the requested tolerance.
    """
    if not a < b:
        if a == b:
            return 0.0
        raise ValueError(f"bad interval [{a}, {b}]")
    pts = sorted(p for p in breakpoints if a < p < b)
    value, err, info, *tail = integrate.quad(
        f, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=limit,
        points=pts or None, full_output=True)
    if tail:  # quad appends a message (and possibly more) on trouble
        message = tail[0]
        if err > max(abs_tol, rel_tol * abs(value)) * 50:
            raise QuadratureError(
                f"integral on [{a}, {b}] did not converge: {message} "
                f"(estimate {value:.6e}, error {err:.2e})")
    return value


@lru_cache(maxsize=64)
def gauss_legendre_rule(n: int):
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


def panel_rule(panels, n):
    """Nodes and weights for a composite Gauss-Legendre rule.

    ``panels`` is a sequence of (lo, hi) pairs; the returned flat arrays
    integrate a function sampled at the nodes via ``values @ weights``.
    """
    base_x, base_w = gauss_legendre_rule(n)
    xs, ws = [], []
    for lo, hi in panels:
        if hi <= lo:
            continue
        half = 0.5 * (hi - lo)
        xs.append(0.5 * (hi + lo) + half * base_x)
        ws.append(half * base_w)
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


def split_panels(lo, hi, breakpoints=()):
    """Split [lo, hi] at the given interior breakpoints."""
    if hi <= lo:
        return []
    cuts = [lo] + sorted(p for p in breakpoints if lo < p < hi) + [hi]
    return list(zip(cuts[:-1], cuts[1:]))


def integrate_panels(f_vec, panels, *, n=48, check_n=32, tol=1e-9, rounds=4):
    """Integrate a vectorized integrand over panels with an error check.

    Evaluates a pair of composite rules; while they disagree beyond
    ``max(tol, tol * |I|, roundoff floor)`` the panels are bisected (up to
    ``rounds`` times), and failing that a ``QuadratureError`` is raised.
    The roundoff floor accounts for cancellation: no rule can resolve the
    integral below the rounding error of the weighted sum of |f|.
    """
    for attempt in range(rounds):
        x_hi, w_hi = panel_rule(panels, n)
        x_lo, w_lo = panel_rule(panels, check_n)
        if x_hi.size == 0:
            return 0.0
        f_hi = f_vec(x_hi)
        hi = float(f_hi @ w_hi)
        lo = float(f_vec(x_lo) @ w_lo)
        err = abs(hi - lo)
        floor = 1e-13 * float(np.abs(f_hi) @ np.abs(w_hi))
        if err <= max(tol, tol * abs(hi), floor):
            return hi
        panels = [p for a, b in panels for p in ((a, 0.5 * (a + b)), (0.5 * (a + b), b))]
    raise QuadratureError(
        f"panel quadrature did not settle (estimate {hi:.6e}, error {err:.2e})")


def chebyshev_fit(f_vec, lo, hi, *, tol=1e-13, max_degree=2048):
    """Chebyshev approximation of a smooth function, degree chosen adaptively.

    The fit is accepted once it matches ``f_vec`` on an off-grid sample to
    ``tol`` relative to the function's scale.
    """
    probe = lo + (hi - lo) * (0.5 + 0.5 * np.cos(np.linspace(0.05, np.pi - 0.05, 257)))
    target = f_vec(probe)
    scale = max(1e-300, float(np.max(np.abs(target))))
    deg = 64
    while deg <= max_degree:
        fit = Chebyshev.interpolate(lambda t: f_vec(np.asarray(t)), deg, domain=[lo, hi])
        if float(np.max(np.abs(fit(probe) - target))) <= tol * scale:
            return fit
        deg *= 2
    raise QuadratureError(
        f"Chebyshev fit on [{lo}, {hi}] did not reach tolerance {tol}")
