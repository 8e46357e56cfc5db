"""Taylor-series quantile marching and convex piecewise-affine reduction.

The quantile is marched in the variable ``kappa = -log p``.  Writing
``Q(kappa0 + t) = Q0 + a1 t + a2 t^2 + ...`` and expanding
``phi(Q(kappa0 + t))`` as a power series, the identity

    dQ/dkappa * phi(Q) = -exp(-kappa)

fixes the coefficients order by order (see :func:`quantile_derivs`).  The
``d``-th derivative in kappa is ``d! * a_d`` and needs density derivatives up
to order ``d - 1``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (BetaPrime, SqrtBetaPrime, StudentT, beta_prime_median, cdf_numeric,
                            quantile_numeric)
from .exceptions import ConvexityError, SingularDensityError

DEFAULT_H = 5e-6
DEFAULT_XI = 0.01
DEFAULT_ORDER = 4
DEFAULT_P_END = 1.0 - 1e-4

_TINY_DENSITY = 1e-300


def _series_coeffs(phis, p, n):
    """Taylor coefficients a_1..a_n of Q around the current point (in kappa)."""
    phi0 = phis[0]
    if not phi0 > _TINY_DENSITY:
        raise SingularDensityError(f"density {phi0!r} too small to invert at p={p}")
    a = [0.0] * (n + 1)
    a[1] = -p / phi0
    if n == 1:
        return a
    phi1 = phis[1]
    b1 = phi1 * a[1]
    a[2] = (p - a[1] * b1) / (2.0 * phi0)
    if n == 2:
        return a
    phi2 = phis[2]
    b2 = phi1 * a[2] + 0.5 * phi2 * a[1] * a[1]
    a[3] = (-0.5 * p - a[1] * b2 - 2.0 * a[2] * b1) / (3.0 * phi0)
    if n == 3:
        return a
    phi3 = phis[3]
    b3 = phi1 * a[3] + phi2 * a[1] * a[2] + phi3 * a[1] ** 3 / 6.0
    a[4] = (p / 6.0 - a[1] * b3 - 2.0 * a[2] * b2 - 3.0 * a[3] * b1) / (4.0 * phi0)
    return a


def quantile_derivs(pdf_derivs, q, p, n_d):
    """Derivatives ``d^k Q / dkappa^k`` for ``k = 1..n_d`` at ``(p, q = Q(p))``.

    ``pdf_derivs(x, order)`` returns the density and its first ``order``
    derivatives.  Returns a list of length ``n_d``.
    """
    if not 1 <= n_d <= 4:
        raise ValueError(f"n_d must be in 1..4, got {n_d}")
    a = _series_coeffs(pdf_derivs(q, n_d - 1), p, n_d)
    return [math.factorial(k) * a[k] for k in range(1, n_d + 1)]


@dataclass(frozen=True, eq=False)
class QuantileTable:
    """Quantile estimates on the grid ``p0 + c*h``, ``c = 0..len-1``."""

    probabilities: np.ndarray
    values: np.ndarray
    p0: float
    step_h: float
    n_d: int
    truncated: bool = False

    def __len__(self):
        return self.values.size


def taylor_march(pdf_derivs, p0, q0, h=DEFAULT_H, p_end=DEFAULT_P_END, n_d=DEFAULT_ORDER):
    """March an ``n_d``-term Taylor expansion of the quantile from ``(p0, q0)`` to ``p_end``.

    Percentiles are generated as ``p0 + c*h`` from the integer ``c`` so that no
    drift accumulates over long marches.  If the density underflows before
    ``p_end`` the table stops there and ``truncated`` is set.
    """
    if not 0 < p0 < p_end < 1:
        raise ValueError(f"need 0 < p0 < p_end < 1, got p0={p0}, p_end={p_end}")
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    if not 1 <= n_d <= 4:
        raise ValueError(f"n_d must be in 1..4, got {n_d}")
    steps = int(math.floor((p_end - p0) / h + 1e-9))
    values = np.empty(steps + 1)
    values[0] = q0
    q = q0
    p = p0
    order = n_d - 1
    log1p = math.log1p
    truncated = False
    last = steps
    for c in range(steps):
        try:
            a = _series_coeffs(pdf_derivs(q, order), p, n_d)
        except (SingularDensityError, OverflowError):
            truncated = True
            last = c
            break
        p_next = p0 + (c + 1) * h
        dk = -log1p((p_next - p) / p)
        dq = a[n_d]
        for k in range(n_d - 1, 0, -1):
            dq = dq * dk + a[k]
        q = q + dq * dk
        if not math.isfinite(q):
            truncated = True
            last = c
            break
        values[c + 1] = q
        p = p_next
    values = values[: last + 1]
    probs = p0 + h * np.arange(last + 1)
    return QuantileTable(probs, values, p0, h, n_d, truncated)


# --------------------------------------------------------------------------
# Piecewise-affine reduction


@dataclass(frozen=True, eq=False)
class PwaQuantile:
    """Max-of-affine over-approximation ``max_q (m_q p + c_q)`` on ``[p_lo, p_hi]``."""

    slopes: np.ndarray
    intercepts: np.ndarray
    p_lo: float
    p_hi: float
    xi: float
    knots: np.ndarray = None

    def __len__(self):
        return self.slopes.size

    @property
    def segments(self):
        return list(zip(self.slopes.tolist(), self.intercepts.tolist()))

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return np.max(np.multiply.outer(p, self.slopes) + self.intercepts, axis=-1)

    def risk_form(self):
        """Slopes/intercepts of ``eta -> max(m (1 - eta) + c)``, the form used by the solver."""
        return -self.slopes, self.slopes + self.intercepts

    @property
    def risk_range(self):
        return 1.0 - self.p_hi, 1.0 - self.p_lo


def _check_convex(p, v, start, stop, rel_tol=1e-9):
    slopes = np.diff(v[start:stop + 1]) / np.diff(p[start:stop + 1])
    drop = slopes[:-1] - slopes[1:]
    tol = rel_tol * np.maximum(np.abs(slopes[:-1]), 1.0)
    bad = np.nonzero(drop > tol)[0]
    if bad.size:
        i = start + bad[0] + 1
        raise ConvexityError(
            f"quantile table is not convex near p={p[i]:.12g} "
            f"(slope falls from {slopes[bad[0]]:.6g} to {slopes[bad[0] + 1]:.6g})",
            percentile=float(p[i]))


def _chord_gap(p, v, i, j):
    """Largest amount by which the chord i->j lies above interior points."""
    if j <= i + 1:
        return 0.0
    m = (v[j] - v[i]) / (p[j] - p[i])
    inner = slice(i + 1, j)
    return float(np.max(m * (p[inner] - p[i]) + v[i] - v[inner]))


def reduce_to_pwa(table, xi=DEFAULT_XI, p_lo=None):
    """Greedy longest-chord reduction of a convex quantile table.

    From the current anchor ``i`` the farthest ``j`` whose chord stays within
    ``xi`` above every interior grid value is kept, and ``j`` becomes the next
    anchor.  For convex data the chord excess grows with ``j``, so the farthest
    admissible ``j`` is located by bisection; the result is the same chord set
    as a linear backwards scan.  Each chord intercept is raised by any
    round-off deficit so the max-of-affine never dips below the table.

    ``p_lo`` restricts the reduction to grid points at or above it.
    """
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi}")
    p = np.asarray(table.probabilities, dtype=float)
    v = np.asarray(table.values, dtype=float)
    if v.size < 2:
        raise ValueError("table needs at least two points")
    start = 0
    if p_lo is not None and p_lo > p[0]:
        start = int(np.searchsorted(p, p_lo - 1e-15, side="left"))
        start = min(start, v.size - 2)
    last = v.size - 1
    _check_convex(p, v, start, last)

    slopes, intercepts = [], []
    knots = [start]
    i = start
    while i < last:
        lo, hi = i + 1, last
        if _chord_gap(p, v, i, hi) < xi:
            j = hi
        else:
            # invariant: gap(lo) < xi <= gap(hi)
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if _chord_gap(p, v, i, mid) < xi:
                    lo = mid
                else:
                    hi = mid
            j = lo
        m = (v[j] - v[i]) / (p[j] - p[i])
        c = v[i] - m * p[i]
        inner = slice(i, j + 1)
        deficit = float(np.max(v[inner] - (m * p[inner] + c)))
        while deficit > 0:
            c = max(c + deficit, float(np.nextafter(c, np.inf)))
            deficit = float(np.max(v[inner] - (m * p[inner] + c)))
        slopes.append(m)
        intercepts.append(c)
        knots.append(j)
        i = j
    slopes = np.array(slopes)
    intercepts = np.array(intercepts)
    return PwaQuantile(slopes, intercepts, float(p[start]), float(p[last]), xi,
                       knots=p[np.array(knots)])


def convex_region_floor(dist):
    """Smallest percentile above which the quantile of ``dist`` is convex.

    For a beta prime law this is 0 when ``gamma <= 1`` and the cdf at the mode
    ``(gamma - 1)/(delta + 1)`` otherwise.  For the square root of a beta prime
    variable the mode of the transformed density is used; it is positive even
    for ``gamma = 1``.  Student's t quantiles are convex on ``[0.5, 1)``.
    """
    if isinstance(dist, StudentT):
        return 0.5
    if isinstance(dist, BetaPrime):
        if dist.gamma <= 1:
            return 0.0
        return cdf_numeric(dist, dist.mode())
    if isinstance(dist, SqrtBetaPrime):
        mode = dist.mode()
        return cdf_numeric(dist, mode) if mode > 0 else 0.0
    raise TypeError(f"no convexity floor for {type(dist).__name__}")


def instantiation_point(dist, p0=0.5, polish=True):
    """Known quantile at ``p0`` used to start the march, and whether it is analytic.

    Beta prime medians without a closed form come from the Lyon ratio
    approximation.  Its percentile error (1-4% for the laws met in practice)
    shifts the whole march onto the quantile curve of ``p + F(q0) - p0``,
    which under-estimates the tail or diverges before ``p_end``; with
    ``polish`` the approximation is refined by root finding on the numeric cdf.
    """
    if p0 != 0.5:
        raise ValueError("only the median is supported as an instantiation point")
    if isinstance(dist, StudentT):
        return 0.0, True
    if isinstance(dist, BetaPrime):
        q0, exact = beta_prime_median(dist)
    elif isinstance(dist, SqrtBetaPrime):
        q0, exact = dist.median(), dist.median_exact()
    else:
        raise TypeError(f"no instantiation point for {type(dist).__name__}")
    if not exact and polish:
        q0 = quantile_numeric(dist, 0.5)
    return q0, exact


def build_pwa(dist, h=DEFAULT_H, xi=DEFAULT_XI, n_d=DEFAULT_ORDER, p_end=DEFAULT_P_END,
              p0=0.5, p_lo=None, polish=True):
    """March from the median of ``dist`` and reduce on ``[max(p0, floor, p_lo), p_end]``.

    Returns ``(table, pwa)``.
    """
    q0, _ = instantiation_point(dist, p0, polish)
    table = taylor_march(dist.pdf_derivs, p0, q0, h=h, p_end=p_end, n_d=n_d)
    if table.truncated:
        raise SingularDensityError(
            f"quantile march for {dist.key()} stopped at p={table.probabilities[-1]:.12g} "
            f"before p_end={p_end}")
    lo = max(p0, convex_region_floor(dist))
    if p_lo is not None:
        lo = max(lo, p_lo)
    return table, reduce_to_pwa(table, xi, p_lo=lo)
