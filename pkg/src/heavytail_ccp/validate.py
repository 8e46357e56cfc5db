"""Monte Carlo estimates of the original chance constraints.

Constraints are evaluated in their original form: polytope membership of
the state and true Euclidean distances.  Each risk pool is one joint event
(every row, time and vehicle of the pool must hold in the same sample).

Disturbances come from Philox streams keyed by ``(seed, vehicle, chunk)``, so
a given sample index always sees the same draw regardless of how the work is
split.
"""

from dataclasses import dataclass, field

import numpy as np

from .distributions import SqrtBetaPrime, cdf_numeric

CHUNK = 2048


@dataclass
class FamilyEstimate:
    pool: str
    probability: float
    std_error: float
    threshold: float
    passed: bool
    components: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    families: dict
    samples: int
    seed: int
    per_step_chi2: bool = False

    @property
    def passed(self):
        return all(f.passed for f in self.families.values())

    def to_dict(self):
        return {
            "samples": self.samples,
            "seed": self.seed,
            "per_step_chi2": self.per_step_chi2,
            "passed": self.passed,
            "families": {
                k: {"probability": f.probability, "std_error": f.std_error,
                    "threshold": f.threshold, "passed": f.passed, "components": f.components}
                for k, f in self.families.items()
            },
        }


def _stream(seed, vehicle, chunk):
    ss = np.random.SeedSequence([int(seed), int(vehicle), int(chunk)])
    return np.random.Generator(np.random.Philox(ss))


def sample_disturbance_trajectories(sigma, nu, horizon, n_vehicles, count, seed, per_step=False):
    """Per-vehicle disturbance sequences, array of shape ``(V, count, N, n)``.

    ``w(k) = L y(k) / sqrt(Z / nu)`` with ``L L^T = sigma``.  By default one
    chi-square ``Z`` is shared by all steps of a trajectory (the stacked
    vector is multivariate t); ``per_step`` draws a fresh ``Z`` per step.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    L = _sqrt_psd(sigma)
    out = np.empty((n_vehicles, count, horizon, n))
    for v in range(n_vehicles):
        for c0 in range(0, count, CHUNK):
            c1 = min(count, c0 + CHUNK)
            rng = _stream(seed, v, c0 // CHUNK)
            y = rng.standard_normal((CHUNK, horizon, n))[: c1 - c0]
            if per_step:
                z = rng.chisquare(nu, (CHUNK, horizon))[: c1 - c0, :, None]
            else:
                z = rng.chisquare(nu, CHUNK)[: c1 - c0, None, None]
            out[v, c0:c1] = (y @ L.T) / np.sqrt(z / nu)
    return out


def _sqrt_psd(sigma):
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def propagate(model, x0, controls, disturbances):
    """States ``x(1..N)`` for every sample; ``disturbances`` has shape ``(count, N, n)``."""
    A, B = model.A, model.B
    count, N, n = disturbances.shape
    U = np.asarray(controls, dtype=float).reshape(N, -1)
    x = np.broadcast_to(np.asarray(x0, dtype=float), (count, n)).copy()
    out = np.empty((count, N, n))
    for k in range(N):
        x = x @ A.T + B @ U[k] + disturbances[:, k]
        out[:, k] = x
    return out


def _binomial(ok):
    p = float(np.mean(ok))
    return p, float(np.sqrt(max(p * (1.0 - p), 0.0) / ok.size))


def estimate_satisfaction(compiled, controls, samples, seed, per_step=False):
    """Empirical probability of each pool's joint event under ``controls``.

    ``compiled`` is a compiled scenario; ``controls`` are internal-unit
    stacked controls per vehicle.
    """
    scn = compiled.scenario
    N = scn.horizon
    V = len(scn.vehicles)
    W = sample_disturbance_trajectories(compiled.sigma, scn.nu, N, V, samples, seed, per_step)
    states = [propagate(compiled.model, compiled.x0s[v], controls[v], W[v]) for v in range(V)]

    ok_by_pool = {}
    comps = {}

    def record(pool, label, ok):
        ok_by_pool[pool] = ok if pool not in ok_by_pool else ok_by_pool[pool] & ok
        comps.setdefault(pool, {})[label] = float(np.mean(ok))

    for t in compiled.targets:
        x = states[t.vehicle][:, t.k - 1]
        ok = np.all(x @ t.P.T <= t.q, axis=1)
        record(t.pool, f"target[v{t.vehicle},k{t.k}]", ok)
    for c in compiled.collisions:
        S = np.asarray(c.S, dtype=float)
        for k in c.times:
            if c.kind == "pair":
                i, j = c.vehicles
                d = (states[i][:, k - 1] - states[j][:, k - 1]) @ S.T
                label = f"pair[v{i},v{j},k{k}]"
            else:
                (i,) = c.vehicles
                d = states[i][:, k - 1] @ S.T - np.asarray(c.obstacle, dtype=float)
                label = f"obstacle[v{i},k{k}]"
            record(c.pool, label, np.linalg.norm(d, axis=1) >= c.r)

    families = {}
    for pool in sorted(ok_by_pool):
        p, se = _binomial(ok_by_pool[pool])
        thr = 1.0 - scn.thresholds[pool]
        families[pool] = FamilyEstimate(pool, p, se, thr, p >= thr, comps[pool])
    return ValidationReport(families, samples, seed, per_step)


# --------------------------------------------------------------------------
# conservatism audit of the collision reformulation


@dataclass
class AuditResult:
    original: float
    surrogate_pathwise: float
    surrogate_law: float
    std_error: float
    samples: int


def conservatism_audit(spec, system, psi, nu, S, controls, samples, seed):
    """Compare the original collision event with its reformulated surrogate.

    ``spec`` is one reverse-convex :class:`ChanceConstraintSpec` built from a
    pair or obstacle constraint with selector ``S`` on ``system``.  Returns
    the Monte Carlo probability of ``||S (x_i - x_j)|| >= r`` together with

    * the pathwise surrogate ``||S (mu_i - mu_j)|| - g y >= r`` with ``y``
      built from the same samples (``y^2 = sum ||tau_v||^2 / nu``,
      ``tau_v = L^-1 S D W_v``), which implies the original event sample by
      sample, and
    * the law-based surrogate probability ``P(g Y <= f - r)`` with ``Y`` the
      moment-matched square-root beta prime law the solver plans against.
    """
    k = spec.k
    vehicles = sorted(spec.terms)
    S = np.atleast_2d(np.asarray(S, dtype=float))
    D = system.D_stack[k]
    M = S @ D @ psi @ D.T @ S.T
    L = np.linalg.cholesky(0.5 * (M + M.T))
    Dn = D.shape[1]
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 99])))
    chol_psi = _sqrt_psd(psi)
    mean = spec.affine_value(controls)
    diff = np.zeros((samples, S.shape[0]))
    tau_sq = np.zeros(samples)
    sign = {vehicles[0]: 1.0}
    if len(vehicles) > 1:
        sign[vehicles[1]] = -1.0
    for v in vehicles:
        y = rng.standard_normal((samples, Dn))
        z = rng.chisquare(nu, samples)
        Wv = (y @ chol_psi.T) / np.sqrt(z / nu)[:, None]
        SDW = Wv @ (S @ D).T
        diff += sign[v] * SDW
        tau = np.linalg.solve(L, SDW.T).T
        tau_sq += np.sum(tau * tau, axis=1)
    f_mean = float(np.linalg.norm(mean))
    original = np.linalg.norm(mean + diff, axis=1) >= spec.c
    ybar = np.sqrt(tau_sq / nu)
    surrogate = f_mean - spec.g * ybar >= spec.c
    p_orig, se = _binomial(original)
    p_path = float(np.mean(surrogate))
    thr = (f_mean - spec.c) / spec.g
    law = spec.dist
    p_law = cdf_numeric(law, thr) if thr > 0 and isinstance(law, SqrtBetaPrime) else 0.0
    return AuditResult(p_orig, p_path, float(p_law), se, samples)
