"""Student's t, multivariate t, beta prime and square-root beta prime laws.

Densities are evaluated in log space (``math.lgamma``) so that large degrees of
freedom do not overflow.  Derivatives of the univariate densities are exact
closed forms built from derivatives of the log-density:

    phi'   = phi * L1
    phi''  = phi * (L2 + L1**2)
    phi''' = phi * (L3 + 3 L1 L2 + L1**3)

The numeric cdf/quantile routines are deliberately independent of the
closed forms (adaptive quadrature of the density, then root finding) so they
can serve as oracles for the Taylor quantile engine.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .exceptions import DomainError, InvalidParameterError, OracleFailureError

LOG2 = math.log(2.0)


class DegenerateMomentWarning(UserWarning):
    """Moment matching was requested where the summand variance is infinite."""


def _log_to_density_derivs(log_pdf, l1, l2, l3, order):
    pdf = math.exp(log_pdf)
    out = [pdf]
    if order >= 1:
        out.append(pdf * l1)
    if order >= 2:
        out.append(pdf * (l2 + l1 * l1))
    if order >= 3:
        out.append(pdf * (l3 + 3.0 * l1 * l2 + l1 ** 3))
    return out


def _check_order(order):
    if not 0 <= order <= 3:
        raise ValueError(f"derivative order must be in 0..3, got {order}")


# --------------------------------------------------------------------------
# Student's t


@dataclass(frozen=True)
class StudentT:
    """Univariate Student's t with ``nu`` degrees of freedom, location 0, scale 1."""

    nu: float

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidParameterError(f"nu must be positive, got {self.nu}")

    @property
    def support_lower(self):
        return -math.inf

    def pdf_derivs(self, x, order=0):
        return t_pdf_derivs(x, self.nu, order)

    def pdf(self, x):
        return t_pdf_derivs(x, self.nu, 0)[0]

    def median(self):
        return 0.0

    def key(self):
        return f"t(nu={self.nu:g})"


def _t_log_norm(nu):
    return math.lgamma((nu + 1.0) / 2.0) - math.lgamma(nu / 2.0) - 0.5 * math.log(nu * math.pi)


def t_pdf_derivs(x, nu, order=0):
    """Student's t density at ``x`` and its first ``order`` derivatives."""
    if not nu > 0:
        raise InvalidParameterError(f"nu must be positive, got {nu}")
    _check_order(order)
    a = (nu + 1.0) / 2.0
    r = x * x / nu
    u = 1.0 + r
    log_pdf = _t_log_norm(nu) - a * math.log1p(r)
    k = 2.0 * a / nu
    l1 = -k * x / u
    l2 = -k * (1.0 - r) / (u * u)
    l3 = k * (2.0 * x / nu) * (3.0 - r) / (u * u * u)
    return _log_to_density_derivs(log_pdf, l1, l2, l3, order)


# --------------------------------------------------------------------------
# Multivariate t


@dataclass(frozen=True, eq=False)
class MultivariateT:
    """Multivariate t with location ``mu``, scale matrix ``sigma`` and ``nu`` dof."""

    mu: np.ndarray
    sigma: np.ndarray
    nu: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape != (mu.size, mu.size):
            raise InvalidParameterError(
                f"sigma has shape {sigma.shape}, expected {(mu.size, mu.size)}")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
            raise InvalidParameterError("sigma must be symmetric")
        if not self.nu > 0:
            raise InvalidParameterError(f"nu must be positive, got {self.nu}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self):
        return self.mu.size

    def logpdf(self, x):
        x = np.atleast_2d(x)
        n = self.dim
        chol = np.linalg.cholesky(self.sigma)
        z = np.linalg.solve(chol, (x - self.mu).T)
        maha = np.sum(z * z, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        nu = self.nu
        return (math.lgamma((nu + n) / 2.0) - math.lgamma(nu / 2.0)
                - 0.5 * n * math.log(nu * math.pi) - 0.5 * logdet
                - 0.5 * (nu + n) * np.log1p(maha / nu))

    def marginal(self, index):
        """Law of a sub-vector: same dof, sub-blocks of location and scale."""
        index = np.asarray(index)
        return MultivariateT(self.mu[index], self.sigma[np.ix_(index, index)], self.nu)

    def affine(self, B, b=None):
        """Law of ``B x + b`` for full-row-rank ``B``."""
        B = np.atleast_2d(np.asarray(B, dtype=float))
        b = np.zeros(B.shape[0]) if b is None else np.asarray(b, dtype=float)
        return MultivariateT(B @ self.mu + b, B @ self.sigma @ B.T, self.nu)

    def sample(self, count, rng):
        return sample_mvt(self.mu, self.sigma, self.nu, count, rng)


def sample_mvt(mu, sigma, nu, count, rng):
    """Draw ``count`` multivariate t vectors as rows.

    Each row is ``L y / sqrt(z / nu) + mu`` with ``L L^T = sigma``, ``y`` standard
    normal and a single chi-square ``z`` shared by all coordinates of the row.
    ``rng`` is a ``numpy.random.Generator`` owned by the caller.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    chol = np.linalg.cholesky(sigma)
    y = rng.standard_normal((count, mu.size))
    z = rng.chisquare(nu, size=count)
    return mu + (y @ chol.T) / np.sqrt(z / nu)[:, None]


# --------------------------------------------------------------------------
# Beta prime


@dataclass(frozen=True)
class BetaPrime:
    """Beta prime law with density ``x^(g-1) (1+x)^(-g-d) / B(g, d)`` on x > 0."""

    gamma: float
    delta: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.delta > 0):
            raise InvalidParameterError(
                f"shape parameters must be positive, got ({self.gamma}, {self.delta})")

    @property
    def support_lower(self):
        return 0.0

    def pdf_derivs(self, x, order=0):
        return beta_prime_pdf_derivs(x, self, order)

    def pdf(self, x):
        return beta_prime_pdf_derivs(x, self, 0)[0]

    def mode(self):
        return (self.gamma - 1.0) / (self.delta + 1.0) if self.gamma > 1 else 0.0

    def mean(self):
        if self.delta <= 1:
            return math.inf
        return self.gamma / (self.delta - 1.0)

    def variance(self):
        g, d = self.gamma, self.delta
        if d <= 2:
            return math.inf
        return g * (g + d - 1.0) / ((d - 2.0) * (d - 1.0) ** 2)

    def median(self):
        return beta_prime_median(self)[0]

    def key(self):
        return f"betaprime({self.gamma:.12g},{self.delta:.12g})"


def _log_beta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def beta_prime_pdf_derivs(x, dist, order=0):
    """Beta prime density at ``x`` and its first ``order`` derivatives."""
    _check_order(order)
    g, d = dist.gamma, dist.delta
    gm1 = g - 1.0
    if x < 0 or (x == 0 and gm1 != 0):
        raise DomainError(f"beta prime density requested at x={x} with gamma={g}")
    s = g + d
    xp1 = 1.0 + x
    if gm1 == 0:
        log_pdf = -s * math.log1p(x) - _log_beta(g, d)
        l1 = -s / xp1
        l2 = s / xp1 ** 2
        l3 = -2.0 * s / xp1 ** 3
    else:
        log_pdf = gm1 * math.log(x) - s * math.log1p(x) - _log_beta(g, d)
        l1 = gm1 / x - s / xp1
        l2 = -gm1 / x ** 2 + s / xp1 ** 2
        l3 = 2.0 * gm1 / x ** 3 - 2.0 * s / xp1 ** 3
    return _log_to_density_derivs(log_pdf, l1, l2, l3, order)


def beta_prime_median(dist):
    """Median of a beta prime law as ``(value, exact)``.

    Closed forms exist for equal shapes and for either shape equal to one.
    Otherwise the ratio of gamma-median approximations
    ``2^(-1/g) (log 2 - 1/2 + g) / (2^(-1/d) (log 2 - 1/2 + d))`` is returned with
    ``exact=False``.
    """
    g, d = dist.gamma, dist.delta
    if g == d:
        return 1.0, True
    if g == 1:
        return math.expm1(LOG2 / d), True
    if d == 1:
        return 1.0 / math.expm1(LOG2 / g), True
    num = 2.0 ** (-1.0 / g) * (LOG2 - 0.5 + g)
    den = 2.0 ** (-1.0 / d) * (LOG2 - 0.5 + d)
    return num / den, False


def norm_sq_params(q, nu):
    """Law of ``||x||^2 / nu`` for a standard ``q``-dimensional multivariate t."""
    if q < 1 or nu <= 0:
        raise InvalidParameterError(f"need q >= 1 and nu > 0, got q={q}, nu={nu}")
    return BetaPrime(q / 2.0, nu / 2.0)


def sum_params(gamma, delta, n):
    """Moment-matched beta prime for the sum of ``n`` iid BetaPrime(gamma, delta)."""
    g, d = gamma, delta
    phi = n * g * (g + d * d - 2.0 * d + n * g * d - 2.0 * n * g + 1.0) / ((d - 1.0) * (g + d - 1.0))
    psi = (2.0 * g + d * d - d + n * g * d - 2.0 * n * g) / (g + d - 1.0)
    return BetaPrime(phi, psi)


def pairwise_sum_params(q, nu):
    """Beta prime law of ``(||t_i||^2 + ||t_j||^2) / nu`` by two-term moment matching.

    The summands are BetaPrime(q/2, nu/2).  For ``nu <= 4`` the summand variance
    is infinite and a :class:`DegenerateMomentWarning` is issued; the matched
    parameters are still returned.
    """
    base = norm_sq_params(q, nu)
    if nu <= 4:
        warnings.warn(
            f"nu={nu} <= 4: summand variance is infinite, moment matching is degenerate",
            DegenerateMomentWarning, stacklevel=2)
    return sum_params(base.gamma, base.delta, 2)


def printed_pair_params(q, nu):
    """Alternative closed form for the pairwise law, kept for comparison.

    Its first shape parameter is half of the moment-matched value returned by
    :func:`pairwise_sum_params`; the second agrees.
    """
    h = nu / 2.0
    g = 2.0 * q * (q / 2.0 + h * h - nu + q * nu / 2.0 - 2.0 * q + 1.0) / ((nu - 2.0) * (q + nu - 2.0))
    d = 2.0 * (-q + h * h - h + q * nu / 2.0) / (q + nu - 2.0)
    return BetaPrime(g, d)


# --------------------------------------------------------------------------
# Square root of a beta prime variable


@dataclass(frozen=True)
class SqrtBetaPrime:
    """Law of ``sqrt(X)`` for ``X ~ base``; density ``2 x phi_base(x^2)``."""

    base: BetaPrime

    @property
    def support_lower(self):
        return 0.0

    def pdf_derivs(self, x, order=0):
        return sqrt_beta_prime_pdf_derivs(x, self, order)

    def pdf(self, x):
        return sqrt_beta_prime_pdf_derivs(x, self, 0)[0]

    def mode(self):
        g, d = self.base.gamma, self.base.delta
        # d/dx [2x phi(x^2)] = 0  <=>  x^2 = (2g - 1) / (2d + 1)
        return math.sqrt((2.0 * g - 1.0) / (2.0 * d + 1.0)) if g > 0.5 else 0.0

    def median(self):
        return math.sqrt(beta_prime_median(self.base)[0])

    def median_exact(self):
        return beta_prime_median(self.base)[1]

    def key(self):
        return f"sqrt-{self.base.key()}"


def sqrt_beta_prime_pdf_derivs(x, dist, order=0):
    """Density of ``sqrt(X)``, ``X ~ dist.base``, and its first ``order`` derivatives."""
    _check_order(order)
    if x <= 0:
        raise DomainError(f"square-root beta prime density requested at x={x}")
    g, d = dist.base.gamma, dist.base.delta
    u = x * x
    s = g + d
    gm1 = g - 1.0
    up1 = 1.0 + u
    # log phi_y(x) = log 2 + log x + L(x^2); L from the base density
    log_pdf = LOG2 + math.log(x) + gm1 * math.log(u) - s * math.log1p(u) - _log_beta(g, d)
    b1 = gm1 / u - s / up1
    b2 = -gm1 / u ** 2 + s / up1 ** 2
    b3 = 2.0 * gm1 / u ** 3 - 2.0 * s / up1 ** 3
    l1 = 1.0 / x + 2.0 * x * b1
    l2 = -1.0 / u + 2.0 * b1 + 4.0 * u * b2
    l3 = 2.0 / (u * x) + 12.0 * x * b2 + 8.0 * u * x * b3
    return _log_to_density_derivs(log_pdf, l1, l2, l3, order)


# --------------------------------------------------------------------------
# Numeric oracles


_QUAD_EPSABS = 1e-13
_QUAD_TOL = 1e-10


def _quad(f, a, b):
    val, err = integrate.quad(f, a, b, epsabs=_QUAD_EPSABS, epsrel=1e-12, limit=400)
    if not err <= _QUAD_TOL:
        raise OracleFailureError(f"quadrature on [{a}, {b}] stopped at error {err:.3g}")
    return val


def cdf_numeric(dist, x):
    """Cumulative distribution by adaptive quadrature of the density."""
    pdf = dist.pdf
    if isinstance(dist, StudentT):
        if x == 0:
            return 0.5
        ax = abs(x)
        if ax <= 1.0:
            half = _quad(pdf, 0.0, ax)
            return 0.5 + half if x > 0 else 0.5 - half
        tail = _quad(pdf, ax, math.inf)
        return 1.0 - tail if x > 0 else tail
    if isinstance(dist, (BetaPrime, SqrtBetaPrime)):
        if x <= 0:
            return 0.0
        split = dist.median()
        if x <= split:
            return _quad(pdf, 0.0, x)
        return 1.0 - _quad(pdf, x, math.inf)
    raise TypeError(f"no numeric cdf for {type(dist).__name__}")


def quantile_numeric(dist, p):
    """Quantile by bracketing and root finding on :func:`cdf_numeric`."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if isinstance(dist, StudentT):
        if p == 0.5:
            return 0.0
        if p < 0.5:
            return -quantile_numeric(dist, 1.0 - p)
        lo, hi = 0.0, 1.0
    else:
        lo, hi = 0.0, max(dist.median(), 1e-3)
    while cdf_numeric(dist, hi) < p:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise OracleFailureError(f"could not bracket quantile at p={p}")
    root, info = optimize.brentq(lambda x: cdf_numeric(dist, x) - p, lo, hi,
                                 xtol=1e-14, rtol=4 * np.finfo(float).eps,
                                 maxiter=500, full_output=True)
    if not info.converged:
        raise OracleFailureError(f"quantile search at p={p} did not converge")
    return root


def numeric_median(dist):
    return quantile_numeric(dist, 0.5)
