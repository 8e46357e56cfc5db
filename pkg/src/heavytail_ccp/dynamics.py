"""Discrete LTI models, Clohessy-Wiltshire-Hill instantiations and horizon stacking."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

MU_EARTH = 3.986004418e14  # m^3 / s^2
R_GEO = 42164.0e3  # m


@dataclass(frozen=True, eq=False)
class LtiModel:
    """``x(k+1) = A x(k) + B u(k) + w(k)``."""

    A: np.ndarray
    B: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def state_dim(self):
        return self.A.shape[0]

    @property
    def input_dim(self):
        return self.B.shape[1]

    def step(self, x, u, w=None):
        x = self.A @ x + self.B @ u
        return x if w is None else x + w


@dataclass(frozen=True, eq=False)
class ConcatenatedSystem:
    """Horizon-stacked maps ``x(k) = A^k x0 + C(k) U + D(k) W`` for ``k = 0..N``.

    ``C_stack[k]`` is ``n x N m`` and ``D_stack[k]`` is ``n x N n``; both are
    zero for ``k = 0``.
    """

    model: LtiModel
    horizon: int
    A_powers: tuple
    C_stack: tuple
    D_stack: tuple

    def mean_state(self, k, x0, U):
        return self.A_powers[k] @ x0 + self.C_stack[k] @ U

    def noise_scale(self, k, sigma):
        """``D(k) Psi D(k)^T`` for block-diagonal ``Psi = diag(sigma, ..., sigma)``.

        Evaluated by the recursion ``M(k+1) = A M(k) A^T + sigma``.
        """
        A = self.model.A
        M = np.zeros_like(A)
        for _ in range(k):
            M = A @ M @ A.T + sigma
        return 0.5 * (M + M.T)


def concat(model, N):
    """Stack an LTI model over a horizon of ``N`` steps."""
    if N < 1:
        raise ValueError(f"horizon must be at least 1, got {N}")
    A, B = model.A, model.B
    n, m = model.state_dim, model.input_dim
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(A @ powers[-1])
    C_stack = [np.zeros((n, N * m))]
    D_stack = [np.zeros((n, N * n))]
    for k in range(1, N + 1):
        C = np.zeros((n, N * m))
        D = np.zeros((n, N * n))
        for j in range(k):
            # input/disturbance at time j reaches x(k) through A^(k-1-j)
            C[:, j * m:(j + 1) * m] = powers[k - 1 - j] @ B
            D[:, j * n:(j + 1) * n] = powers[k - 1 - j]
        C_stack.append(C)
        D_stack.append(D)
    return ConcatenatedSystem(model, N, tuple(powers), tuple(C_stack), tuple(D_stack))


@dataclass(frozen=True)
class CwhParams:
    """Physical constants for the relative-motion models (SI units)."""

    m_c: float = 1.0
    R0: float = R_GEO
    mu_grav: float = MU_EARTH
    J_theta: float = 1.0
    dt: float = 300.0

    def __post_init__(self):
        for name in ("m_c", "R0", "mu_grav", "J_theta", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def omega(self):
        return math.sqrt(self.mu_grav / self.R0 ** 3)


def _impulsive(Ac, E, dt):
    Ad = expm(Ac * dt)
    return LtiModel(Ad, Ad @ E, dt)


def cwh_continuous_3d(omega):
    """Continuous CWH dynamics, state ``(x, y, z, vx, vy, vz)``."""
    w2 = omega * omega
    Ac = np.zeros((6, 6))
    Ac[0:3, 3:6] = np.eye(3)
    Ac[3, 0] = 3.0 * w2
    Ac[3, 4] = 2.0 * omega
    Ac[4, 3] = -2.0 * omega
    Ac[5, 2] = -w2
    return Ac


def cwh_continuous_planar_attitude(omega):
    """Planar CWH plus a double-integrator yaw, state ``(x, y, theta, vx, vy, theta_dot)``."""
    w2 = omega * omega
    Ac = np.zeros((6, 6))
    Ac[0:3, 3:6] = np.eye(3)
    Ac[3, 0] = 3.0 * w2
    Ac[3, 4] = 2.0 * omega
    Ac[4, 3] = -2.0 * omega
    return Ac


def cwh_3d(params):
    """Impulsive-control discretisation of the 3-D CWH equations.

    An input ``(F_x, F_y, F_z)`` adds ``F / m_c`` to the velocity at the start of
    the interval; the state then drifts freely for ``dt``.
    """
    Ac = cwh_continuous_3d(params.omega)
    E = np.zeros((6, 3))
    E[3:6, :] = np.eye(3) / params.m_c
    return _impulsive(Ac, E, params.dt)


def cwh_planar_attitude(params):
    """Impulsive-control discretisation of planar CWH with yaw, inputs ``(F_x, F_y, F_theta)``."""
    Ac = cwh_continuous_planar_attitude(params.omega)
    E = np.zeros((6, 3))
    E[3, 0] = E[4, 1] = 1.0 / params.m_c
    E[5, 2] = 1.0 / params.J_theta
    return _impulsive(Ac, E, params.dt)


def cwh_stm(omega, t):
    """Closed-form CWH state-transition matrix, state ``(x, y, z, vx, vy, vz)``.

    ``x`` radial, ``y`` along-track, ``z`` cross-track.
    """
    n = omega
    c, s = math.cos(n * t), math.sin(n * t)
    return np.array([
        [4 - 3 * c, 0, 0, s / n, 2 * (1 - c) / n, 0],
        [6 * (s - n * t), 1, 0, -2 * (1 - c) / n, (4 * s - 3 * n * t) / n, 0],
        [0, 0, c, 0, 0, s / n],
        [3 * n * s, 0, 0, c, 2 * s, 0],
        [-6 * n * (1 - c), 0, 0, -2 * s, 4 * c - 3, 0],
        [0, 0, -n * s, 0, 0, c],
    ])


def simulate(model, x0, inputs, disturbances=None):
    """Step-by-step rollout; returns states ``x(0..N)`` as rows."""
    x = np.asarray(x0, dtype=float)
    out = [x]
    for k, u in enumerate(inputs):
        w = None if disturbances is None else disturbances[k]
        x = model.step(x, np.asarray(u, dtype=float), w)
        out.append(x)
    return np.array(out)
