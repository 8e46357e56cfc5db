"""Rewrite target-set and collision chance constraints in a common affine form.

Every constraint becomes ``f(U) + g y <= c`` (``sense="convex"``) or
``f(U) - g y >= c`` (``sense="reverse"``) with a scalar ``g > 0`` and a
univariate random variable ``y`` whose law is known.  ``f`` is either affine
in the stacked controls (target rows) or the norm of an affine map
(collision avoidance).
"""

from dataclasses import dataclass

import numpy as np

from .distributions import BetaPrime, SqrtBetaPrime, StudentT, pairwise_sum_params
from .exceptions import DegenerateScaleError

CONVEX = "convex"
REVERSE = "reverse"


@dataclass(frozen=True, eq=False)
class TargetSetSpec:
    """Polytope ``P x(k) <= q`` for one vehicle at one time step."""

    vehicle: int
    k: int
    P: np.ndarray
    q: np.ndarray
    pool: str = "alpha_T"


@dataclass(frozen=True, eq=False)
class CollisionSpec:
    """Keep ``||S (x_i(k) - x_j(k))|| >= r`` (pair) or ``||S x_i(k) - o|| >= r`` (obstacle)."""

    kind: str
    vehicles: tuple
    r: float
    S: np.ndarray
    times: tuple
    pool: str
    obstacle: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("pair", "obstacle"):
            raise ValueError(f"unknown collision kind {self.kind!r}")
        if not self.r > 0:
            raise ValueError("collision radius must be positive")
        if self.kind == "pair" and (len(self.vehicles) != 2 or self.vehicles[0] == self.vehicles[1]):
            raise ValueError("pair constraints need two distinct vehicles")


@dataclass(frozen=True, eq=False)
class ChanceConstraintSpec:
    """One reformulated constraint.

    ``f(U) = offset + sum_v terms[v] @ U_v``, taken as a Euclidean norm when
    ``norm`` is true.  ``fallback`` is the direction used for the norm
    subgradient when the affine map vanishes at the linearisation point.
    """

    sense: str
    terms: dict
    offset: np.ndarray
    norm: bool
    g: float
    dist: object
    c: float
    pool: str
    k: int
    label: str = ""
    fallback: np.ndarray = None
    deterministic: bool = False

    def f_value(self, controls):
        v = self.affine_value(controls)
        return float(np.linalg.norm(v)) if self.norm else float(v[0])

    def affine_value(self, controls):
        v = np.array(self.offset, dtype=float, copy=True)
        for veh, M in self.terms.items():
            v = v + M @ controls[veh]
        return v


def block_scale(sigma, N):
    """Block-diagonal scale of the stacked disturbance, ``diag(sigma, ..., sigma)``."""
    return np.kron(np.eye(N), np.asarray(sigma, dtype=float))


def lambda_max(M, sym_tol=1e-12):
    """Largest eigenvalue of a symmetric matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])


def _cov(sys, k, psi):
    D = sys.D_stack[k]
    M = D @ psi @ D.T
    return 0.5 * (M + M.T)


def reform_target(spec, sys, psi, nu, x0):
    """One convex-sense constraint per half-space row of the target polytope.

    Row ``i`` reads ``P_i (A^k x0 + C(k) U) + g_i tau <= q_i`` with
    ``g_i = sqrt(P_i D(k) Psi D(k)^T P_i^T)`` and ``tau ~ t(nu)``.  A row with
    zero noise scale is returned with ``deterministic=True``.
    """
    P = np.atleast_2d(np.asarray(spec.P, dtype=float))
    q = np.asarray(spec.q, dtype=float).ravel()
    k = spec.k
    cov = _cov(sys, k, psi)
    drift = sys.A_powers[k] @ np.asarray(x0, dtype=float)
    C = sys.C_stack[k]
    dist = StudentT(nu)
    out = []
    for i, row in enumerate(P):
        var = float(row @ cov @ row)
        g = float(np.sqrt(max(var, 0.0)))
        out.append(ChanceConstraintSpec(
            sense=CONVEX,
            terms={spec.vehicle: (row @ C)[None, :]},
            offset=np.array([row @ drift]),
            norm=False,
            g=g,
            dist=dist,
            c=float(q[i]),
            pool=spec.pool,
            k=k,
            label=f"target[v{spec.vehicle},k{k},row{i}]",
            deterministic=g == 0.0,
        ))
    return out


def _positional_scale(spec, sys, psi, k):
    S = np.atleast_2d(np.asarray(spec.S, dtype=float))
    lam = lambda_max(S @ _cov(sys, k, psi) @ S.T)
    if not lam > 0:
        raise DegenerateScaleError(
            f"collision constraint at k={k} has non-positive noise scale {lam:.3g}")
    return S, lam


def reform_collision_pair(spec, sys, psi, nu, x0s):
    """Reverse-convex constraints ``||S(mean_i - mean_j)|| - g y >= r`` for each time.

    ``g = sqrt(2 nu lambda_max(S D Psi D^T S^T))`` and ``y^2`` is the
    moment-matched beta prime law of ``(||tau_i||^2 + ||tau_j||^2)/nu``.
    """
    i, j = spec.vehicles
    q = np.atleast_2d(spec.S).shape[0]
    dist = SqrtBetaPrime(pairwise_sum_params(q, nu))
    dx0 = np.asarray(x0s[i], dtype=float) - np.asarray(x0s[j], dtype=float)
    out = []
    for k in spec.times:
        S, lam = _positional_scale(spec, sys, psi, k)
        SC = S @ sys.C_stack[k]
        out.append(ChanceConstraintSpec(
            sense=REVERSE,
            terms={i: SC, j: -SC},
            offset=S @ sys.A_powers[k] @ dx0,
            norm=True,
            g=float(np.sqrt(2.0 * nu * lam)),
            dist=dist,
            c=float(spec.r),
            pool=spec.pool,
            k=k,
            label=f"pair[v{i},v{j},k{k}]",
            fallback=S @ dx0,
        ))
    return out


def reform_collision_static(spec, sys, psi, nu, x0s):
    """Reverse-convex constraints against a fixed obstacle, one per time.

    ``g = sqrt(nu lambda_max(S D Psi D^T S^T))`` and ``y^2 ~ BetaPrime(q/2, nu/2)``.
    The obstacle position is given in the coordinates extracted by ``S``.
    """
    (i,) = spec.vehicles
    S0 = np.atleast_2d(np.asarray(spec.S, dtype=float))
    q, n = S0.shape
    dist = SqrtBetaPrime(BetaPrime(q / 2.0, nu / 2.0))
    o = np.zeros(q) if spec.obstacle is None else np.asarray(spec.obstacle, dtype=float)
    # zero-padded lift of the obstacle into state space; S extracts it back
    o_lift = S0.T @ np.linalg.solve(S0 @ S0.T, o)
    x0 = np.asarray(x0s[i], dtype=float)
    out = []
    for k in spec.times:
        S, lam = _positional_scale(spec, sys, psi, k)
        out.append(ChanceConstraintSpec(
            sense=REVERSE,
            terms={i: S @ sys.C_stack[k]},
            offset=S @ (sys.A_powers[k] @ x0 - o_lift),
            norm=True,
            g=float(np.sqrt(nu * lam)),
            dist=dist,
            c=float(spec.r),
            pool=spec.pool,
            k=k,
            label=f"obstacle[v{i},k{k}]",
            fallback=S @ (x0 - o_lift),
        ))
    return out


def reform_collision(spec, sys, psi, nu, x0s):
    if spec.kind == "pair":
        return reform_collision_pair(spec, sys, psi, nu, x0s)
    return reform_collision_static(spec, sys, psi, nu, x0s)


def position_selector(q, n):
    """``S = [I_q 0]``."""
    S = np.zeros((q, n))
    S[:, :q] = np.eye(q)
    return S
