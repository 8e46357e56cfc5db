"""Penalty convex-concave procedure over risk-allocated chance constraints.

Decision vector layout of every subproblem::

    [ U_1 .. U_v | r (one risk per stochastic constraint) | s (quantile value
      per stochastic constraint) | sigma (one slack per reverse-convex row) ]

A convex-sense row ``f(U) + g y <= c`` is enforced as ``f(U) + g s <= c`` with
``s >= Q(1 - r)`` through the risk form of its PWA quantile, and a
reverse-convex row ``||v(U)|| - g y >= c`` as ``fhat(U) - g s + sigma >= c``
where ``fhat`` is the norm minorant at the current iterate.  Risks of one pool
sum to at most its threshold.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import AssemblyError, SolverError
from .qp import FAILED, QpSubproblem, qp_solve
from .reformulate import CONVEX, REVERSE

DEGENERATE_NORM = 1e-9


@dataclass
class ControlLayout:
    """Control dimensions, input bounds and risk pools of a planning problem.

    ``lower[v]`` and ``upper[v]`` hold the stacked bounds of vehicle ``v``'s
    controls (length ``horizon * input_dim``; infinite entries are dropped).
    """

    n_vehicles: int
    horizon: int
    input_dim: int
    lower: list = None
    upper: list = None
    pools: dict = field(default_factory=dict)

    @property
    def block(self):
        return self.horizon * self.input_dim

    @property
    def n_controls(self):
        return self.n_vehicles * self.block

    def split(self, U):
        U = np.asarray(U, dtype=float)
        return [U[v * self.block:(v + 1) * self.block] for v in range(self.n_vehicles)]

    def stack(self, controls):
        return np.concatenate([np.asarray(c, dtype=float).ravel() for c in controls])


@dataclass
class SolverConfig:
    max_iter: int = 100
    tol: float = 1e-8
    penalty_init: float = 10.0
    penalty_growth: float = 1.5
    penalty_max: float = 1e6
    risk_floor: float = 1e-4
    qp_tol: float = 1e-9
    qp_max_iter: int = 200
    backend: str = "ipm"


@dataclass
class RiskAllocation:
    """Risk assigned to each stochastic constraint, grouped by pool."""

    eta: dict
    upsilon: dict
    pool_sums: dict
    pool_limits: dict

    def conserved(self, tol=1e-9):
        return all(self.pool_sums[p] <= self.pool_limits[p] + tol for p in self.pool_sums)


@dataclass
class SolveResult:
    controllers: list
    objective: float
    iterations: int
    converged: bool
    slack_total: float
    risk: RiskAllocation
    trace: list
    compute_time: float = 0.0

    @property
    def feasible(self):
        return self.slack_total <= 1e-8


@dataclass(frozen=True)
class AffineMinorant:
    """``value(U) = d . (offset + sum_v terms[v] U_v)``: a lower bound of ``||v(U)||``."""

    direction: np.ndarray
    terms: dict
    offset: np.ndarray

    def gradient(self, layout):
        grad = np.zeros(layout.n_controls)
        for veh, M in self.terms.items():
            grad[veh * layout.block:(veh + 1) * layout.block] += M.T @ self.direction
        return grad

    @property
    def constant(self):
        return float(self.direction @ self.offset)

    def __call__(self, controls):
        v = np.array(self.offset, dtype=float, copy=True)
        for veh, M in self.terms.items():
            v = v + M @ controls[veh]
        return float(self.direction @ v)


def linearize_norm(spec, controls0):
    """First-order minorant of ``||v(U)||`` at ``controls0``.

    The gradient is ``v0 / ||v0||`` pulled back through the affine map.  When
    ``||v0|| < 1e-9`` the direction of ``spec.fallback`` (the initial mean
    separation) is used, or the first coordinate axis if that vanishes too.
    """
    v0 = spec.affine_value(controls0)
    nv = float(np.linalg.norm(v0))
    if nv >= DEGENERATE_NORM:
        d = v0 / nv
    else:
        fb = None if spec.fallback is None else np.asarray(spec.fallback, dtype=float)
        if fb is not None and np.linalg.norm(fb) >= DEGENERATE_NORM:
            d = fb / np.linalg.norm(fb)
        else:
            d = np.zeros_like(v0)
            d[0] = 1.0
    return AffineMinorant(d, dict(spec.terms), np.asarray(spec.offset, dtype=float))


def _pwa_for(spec, pwa_map):
    key = spec.dist.key()
    if key not in pwa_map:
        raise AssemblyError(f"no PWA quantile for {key} needed by {spec.label}")
    return pwa_map[key]


def _risk_bounds(spec, pwa, layout, config):
    lo = max(config.risk_floor, 1.0 - pwa.p_hi)
    if lo > config.risk_floor + 1e-9:
        raise AssemblyError(
            f"{spec.label}: PWA for {spec.dist.key()} ends at p={pwa.p_hi:.12g}, "
            f"short of the risk floor {config.risk_floor:g}")
    hi = 1.0 - pwa.p_lo
    alpha = layout.pools[spec.pool]
    if hi < lo:
        raise AssemblyError(
            f"{spec.label}: PWA domain starts at p={pwa.p_lo:.12g}, above 1 - floor")
    return lo, min(hi, alpha)


def build_subproblem(layout, specs, pwa_map, controls0, penalty=10.0, config=None):
    """Convex QP at linearisation point ``controls0`` (a list of per-vehicle controls)."""
    config = config or SolverConfig()
    if hasattr(layout, "control_layout"):
        layout = layout.control_layout()
    if len(controls0) != layout.n_vehicles or any(
            np.asarray(c).size != layout.block for c in controls0):
        raise AssemblyError("linearisation point does not match the control dimensions")
    for spec in specs:
        if spec.pool not in layout.pools:
            raise AssemblyError(f"{spec.label}: unknown risk pool {spec.pool!r}")

    stoch = [i for i, s in enumerate(specs) if not s.deterministic]
    rev = [i for i, s in enumerate(specs) if s.sense == REVERSE]
    nU = layout.n_controls
    n_st = len(stoch)
    r0, s0, sg0 = nU, nU + n_st, nU + 2 * n_st
    n = sg0 + len(rev)
    r_idx = {i: r0 + j for j, i in enumerate(stoch)}
    s_idx = {i: s0 + j for j, i in enumerate(stoch)}
    sg_idx = {i: sg0 + j for j, i in enumerate(rev)}

    rows, cols, vals, h, labels = [], [], [], [], []

    def add_row(entries, rhs, label):
        k = len(h)
        for c, v in entries:
            rows.append(k)
            cols.append(c)
            vals.append(v)
        h.append(rhs)
        labels.append(label)

    def add_dense(vec, base, extra, rhs, label):
        nz = np.nonzero(vec)[0]
        add_row([(base + int(j), float(vec[j])) for j in nz] + extra, rhs, label)

    # input bounds
    for v in range(layout.n_vehicles):
        base = v * layout.block
        lo = np.full(layout.block, -np.inf) if layout.lower is None else np.asarray(layout.lower[v])
        hi = np.full(layout.block, np.inf) if layout.upper is None else np.asarray(layout.upper[v])
        for j in range(layout.block):
            if np.isfinite(hi[j]):
                add_row([(base + j, 1.0)], float(hi[j]), f"u_max[v{v},{j}]")
            if np.isfinite(lo[j]):
                add_row([(base + j, -1.0)], float(-lo[j]), f"u_min[v{v},{j}]")

    r_lo = np.zeros(n_st)
    pool_members = {}
    for i, spec in enumerate(specs):
        if spec.sense == CONVEX:
            grad = np.zeros(nU)
            for veh, M in spec.terms.items():
                grad[veh * layout.block:(veh + 1) * layout.block] += np.asarray(M).ravel()
            rhs = spec.c - float(np.asarray(spec.offset).ravel()[0])
            extra = [] if spec.deterministic else [(s_idx[i], spec.g)]
            add_dense(grad, 0, extra, rhs, spec.label)
        else:
            # affine minorant fhat(U) - g s + sigma >= c
            lin = linearize_norm(spec, controls0)
            grad = lin.gradient(layout)
            add_dense(-grad, 0, [(s_idx[i], spec.g), (sg_idx[i], -1.0)],
                      lin.constant - spec.c, spec.label)
            add_row([(sg_idx[i], -1.0)], 0.0, f"slack>=0[{spec.label}]")
        if spec.deterministic:
            continue
        # the noise term is g times the quantile value: c - g s
        pwa = _pwa_for(spec, pwa_map)
        lo, hi = _risk_bounds(spec, pwa, layout, config)
        r_lo[stoch.index(i)] = lo
        mr, cr = pwa.risk_form()
        for q in range(mr.size):
            add_row([(r_idx[i], float(mr[q])), (s_idx[i], -1.0)], float(-cr[q]),
                    f"pwa[{spec.label},{q}]")
        add_row([(r_idx[i], -1.0)], -lo, f"risk_min[{spec.label}]")
        if hi < layout.pools[spec.pool]:
            add_row([(r_idx[i], 1.0)], hi, f"risk_max[{spec.label}]")
        pool_members.setdefault(spec.pool, []).append(r_idx[i])

    for pool, members in pool_members.items():
        alpha = layout.pools[pool]
        floor_total = sum(r_lo[stoch.index(i)] for i in stoch if specs[i].pool == pool)
        if floor_total > alpha:
            raise AssemblyError(
                f"pool {pool}: {len(members)} risk floors sum to {floor_total:.6g} > {alpha:g}")
        add_row([(c, 1.0) for c in members], alpha, f"pool[{pool}]")

    G = sp.csr_matrix((vals, (rows, cols)), shape=(len(h), n))
    P = np.zeros((n, n))
    P[:nU, :nU] = 2.0 * np.eye(nU)
    qvec = np.zeros(n)
    qvec[sg0:] = penalty
    layout_info = {
        "U": slice(0, nU), "r": slice(r0, s0), "s": slice(s0, sg0), "sigma": slice(sg0, n),
        "stochastic": stoch, "reverse": rev,
    }
    return QpSubproblem(P, qvec, G, np.array(h, dtype=float), layout=layout_info,
                        row_labels=labels)


def _true_slacks(specs, layout, pwa_map, controls, U0_controls, r):
    """Smallest slacks that make the linearised reverse rows hold at ``(U, r)``."""
    out = []
    stoch = [i for i, s in enumerate(specs) if not s.deterministic]
    for i, spec in enumerate(specs):
        if spec.sense != REVERSE:
            continue
        pwa = _pwa_for(spec, pwa_map)
        mr, cr = pwa.risk_form()
        ri = r[stoch.index(i)]
        s_min = float(np.max(mr * ri + cr))
        lin = linearize_norm(spec, U0_controls)
        out.append(max(0.0, spec.c + spec.g * s_min - lin(controls)))
    return np.array(out)


def _allocation(specs, layout, r):
    stoch = [i for i, s in enumerate(specs) if not s.deterministic]
    eta, ups = {}, {}
    sums = {p: 0.0 for p in layout.pools}
    for j, i in enumerate(stoch):
        spec = specs[i]
        (eta if spec.sense == REVERSE else ups)[spec.label] = float(r[j])
        sums[spec.pool] += float(r[j])
    return RiskAllocation(eta, ups, sums, dict(layout.pools))


def _unconstrained(layout, t_start):
    """Without chance constraints ``min U^T U`` separates: project 0 onto the input box."""
    controls = []
    for v in range(layout.n_vehicles):
        lo = -np.inf if layout.lower is None else np.asarray(layout.lower[v], dtype=float)
        hi = np.inf if layout.upper is None else np.asarray(layout.upper[v], dtype=float)
        controls.append(np.clip(np.zeros(layout.block), lo, hi))
    J = float(sum(c @ c for c in controls))
    trace = [{"iteration": 1, "objective": J, "slack_total": 0.0, "penalty": 0.0,
              "qp_status": "closed_form", "qp_iterations": 0}]
    risk = RiskAllocation({}, {}, {p: 0.0 for p in layout.pools}, dict(layout.pools))
    return SolveResult(controls, J, 1, True, 0.0, risk, trace,
                       time.perf_counter() - t_start)


def ccp_solve(layout, specs, pwa_map, config=None, initial=None):
    """Iterate linearised QPs until cost and slack settle.

    Stops when ``|J_t - J_{t-1}| < tol`` and the slack total is below ``tol``;
    a problem without reverse-convex rows is convex and needs one QP.
    """
    config = config or SolverConfig()
    if hasattr(layout, "control_layout"):
        layout = layout.control_layout()
    t_start = time.perf_counter()
    if initial is None:
        controls0 = [np.zeros(layout.block) for _ in range(layout.n_vehicles)]
    else:
        controls0 = [np.asarray(c, dtype=float).ravel() for c in initial]
    if not specs:
        return _unconstrained(layout, t_start)
    has_reverse = any(s.sense == REVERSE for s in specs)
    penalty = config.penalty_init
    prev_J = None
    trace = []
    converged = False
    controls, r, slack_total, J = controls0, np.zeros(0), 0.0, 0.0
    for it in range(1, config.max_iter + 1):
        sub = build_subproblem(layout, specs, pwa_map, controls0, penalty, config)
        res = qp_solve(sub, tol=config.qp_tol, max_iter=config.qp_max_iter,
                       backend=config.backend)
        if res.status == FAILED:
            err = SolverError(
                f"QP subproblem failed at CCP iteration {it} "
                f"(primal residual {res.primal_residual:.3g}, dual residual "
                f"{res.dual_residual:.3g}, gap {res.gap:.3g})")
            err.subproblem = sub
            raise err
        x = res.x
        controls = layout.split(x[sub.layout["U"]])
        r = x[sub.layout["r"]]
        U = x[sub.layout["U"]]
        J = float(U @ U)
        slacks = _true_slacks(specs, layout, pwa_map, controls, controls0, r)
        slack_total = float(slacks.sum())
        trace.append({
            "iteration": it, "objective": J, "slack_total": slack_total,
            "penalty": penalty, "qp_status": res.status, "qp_iterations": res.iterations,
        })
        if not has_reverse:
            converged = slack_total < config.tol
            break
        if prev_J is not None and abs(J - prev_J) < config.tol and slack_total < config.tol:
            converged = True
            break
        prev_J = J
        controls0 = controls
        penalty = min(penalty * config.penalty_growth, config.penalty_max)
    return SolveResult(
        controllers=[c.copy() for c in controls],
        objective=J,
        iterations=len(trace),
        converged=converged,
        slack_total=slack_total,
        risk=_allocation(specs, layout, r),
        trace=trace,
        compute_time=time.perf_counter() - t_start,
    )

