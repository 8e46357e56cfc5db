"""Planning scenarios: parsing, validation and compilation into solver inputs.

A scenario is stored in the units of its file.  Lengths are in metres and
times in seconds; angular states and inputs are in degrees when
``angle_unit`` is ``"deg"``.  Quantities are converted to radians only when
the scenario is compiled, so load/serialise/load is exact.
"""

import copy
import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import BetaPrime, SqrtBetaPrime, StudentT, pairwise_sum_params
from .dynamics import CwhParams, LtiModel, concat, cwh_3d, cwh_planar_attitude
from .exceptions import ScenarioError
from .quantile import build_pwa, convex_region_floor
from .reformulate import (CollisionSpec, TargetSetSpec, block_scale, position_selector,
                          reform_collision, reform_target)
from .solver import ControlLayout, SolverConfig

DYNAMICS_KINDS = ("cwh-planar-attitude", "cwh-3d", "explicit-lti")
POOLS = ("alpha_T", "alpha_o", "alpha_r")
DEFAULT_POOL = {"target": "alpha_T", "obstacle": "alpha_o", "pair": "alpha_r"}

# angular state / input coordinates per built-in model
_ANGULAR = {
    "cwh-planar-attitude": ((2, 5), (2,)),
    "cwh-3d": ((), ()),
}
_POSITIONS = {"cwh-planar-attitude": 2, "cwh-3d": 3}


@dataclass(eq=False)
class Vehicle:
    id: str
    x0: np.ndarray
    u_lower: np.ndarray
    u_upper: np.ndarray


@dataclass(eq=False)
class Target:
    vehicle: str
    k: int
    P: np.ndarray
    q: np.ndarray
    pool: str = "alpha_T"


@dataclass(eq=False)
class Collision:
    kind: str
    vehicles: tuple
    r: float
    times: tuple
    pool: str
    S: np.ndarray = None
    position: np.ndarray = None


@dataclass(eq=False)
class PlanningScenario:
    name: str
    dynamics: dict
    sigma: np.ndarray
    nu: float
    vehicles: list
    targets: list
    collisions: list
    thresholds: dict
    quantile: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    seed: int = 0
    angle_unit: str = "deg"
    batch: dict = field(default_factory=dict)

    @property
    def horizon(self):
        return int(self.dynamics["N"])

    @property
    def vehicle_ids(self):
        return [v.id for v in self.vehicles]

    def vehicle_index(self, vid):
        return self.vehicle_ids.index(vid)

    def to_dict(self):
        return scenario_to_dict(self)

    def __eq__(self, other):
        if not isinstance(other, PlanningScenario):
            return NotImplemented
        return json.dumps(self.to_dict(), sort_keys=True) == json.dumps(other.to_dict(), sort_keys=True)

    def control_layout(self):
        return compile_scenario(self, reformulate=False).layout


# --------------------------------------------------------------------------
# parsing


def _num(value, path):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{path}: expected a number, got {value!r}", field=path) from None
    if not math.isfinite(out):
        raise ScenarioError(f"{path}: must be finite", field=path)
    return out


def _vec(value, path, size=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{path}: expected a numeric vector", field=path) from None
    if arr.ndim != 1:
        raise ScenarioError(f"{path}: expected a vector, got shape {arr.shape}", field=path)
    if size is not None and arr.size != size:
        raise ScenarioError(f"{path}: expected {size} entries, got {arr.size}", field=path)
    if np.any(np.isnan(arr)):
        raise ScenarioError(f"{path}: contains NaN", field=path)
    return arr


def _mat(value, path, shape=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{path}: expected a numeric matrix", field=path) from None
    if arr.ndim != 2:
        raise ScenarioError(f"{path}: expected a matrix (list of rows), got shape {arr.shape}",
                            field=path)
    if shape is not None:
        for want, got in zip(shape, arr.shape):
            if want is not None and want != got:
                raise ScenarioError(f"{path}: expected shape {shape}, got {arr.shape}", field=path)
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{path}: entries must be finite", field=path)
    return arr


def _require(d, key, path):
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError(f"{path}.{key}: missing required field", field=f"{path}.{key}")
    return d[key]


def _dims(dynamics):
    kind = dynamics["kind"]
    if kind == "explicit-lti":
        A = np.asarray(dynamics["A"], dtype=float)
        B = np.asarray(dynamics["B"], dtype=float)
        return A.shape[0], B.shape[1]
    return 6, 3


def _times(value, N, path):
    if isinstance(value, dict):
        lo, hi = int(_require(value, "from", path)), int(_require(value, "to", path))
        value = list(range(lo, hi + 1))
    out = []
    for i, t in enumerate(value):
        if int(t) != t or not 1 <= int(t) <= N:
            raise ScenarioError(f"{path}[{i}]: time {t} outside 1..{N}", field=f"{path}[{i}]")
        out.append(int(t))
    return tuple(out)


def parse_scenario(doc):
    """Validate a scenario document (a dict) and return a :class:`PlanningScenario`."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: top level must be an object", field="")
    dyn = dict(_require(doc, "dynamics", "scenario"))
    kind = _require(dyn, "kind", "dynamics")
    if kind not in DYNAMICS_KINDS:
        raise ScenarioError(f"dynamics.kind: unknown kind {kind!r}, expected one of {DYNAMICS_KINDS}",
                            field="dynamics.kind")
    N = _require(dyn, "N", "dynamics")
    if int(N) != N or N < 1:
        raise ScenarioError(f"dynamics.N: horizon must be a positive integer, got {N}",
                            field="dynamics.N")
    dyn["N"] = int(N)
    dt = _num(_require(dyn, "dt_s", "dynamics"), "dynamics.dt_s")
    if dt <= 0:
        raise ScenarioError("dynamics.dt_s: must be positive", field="dynamics.dt_s")
    if kind == "explicit-lti":
        A = _mat(_require(dyn, "A", "dynamics"), "dynamics.A")
        if A.shape[0] != A.shape[1]:
            raise ScenarioError(f"dynamics.A: must be square, got {A.shape}", field="dynamics.A")
        _mat(_require(dyn, "B", "dynamics"), "dynamics.B", (A.shape[0], None))
    else:
        params = dyn.get("params", {})
        for key in params:
            if key not in ("m_c_kg", "J_theta_kgm2", "R0_m", "mu_m3_s2"):
                raise ScenarioError(f"dynamics.params.{key}: unknown parameter",
                                    field=f"dynamics.params.{key}")
            if _num(params[key], f"dynamics.params.{key}") <= 0:
                raise ScenarioError(f"dynamics.params.{key}: must be positive",
                                    field=f"dynamics.params.{key}")
    n, m = _dims(dyn)

    angle_unit = doc.get("angle_unit", "deg")
    if angle_unit not in ("deg", "rad"):
        raise ScenarioError("angle_unit: must be 'deg' or 'rad'", field="angle_unit")

    dist = _require(doc, "disturbance", "scenario")
    nu = _num(_require(dist, "nu", "disturbance"), "disturbance.nu")
    if nu <= 0:
        raise ScenarioError("disturbance.nu: degrees of freedom must be positive",
                            field="disturbance.nu")
    if "sigma" in dist:
        sigma = _mat(dist["sigma"], "disturbance.sigma", (n, n))
    else:
        sigma = np.diag(_vec(_require(dist, "sigma_diag", "disturbance"), "disturbance.sigma_diag", n))
    if np.abs(sigma - sigma.T).max() > 1e-15 * max(1.0, np.abs(sigma).max()):
        raise ScenarioError("disturbance.sigma: must be symmetric", field="disturbance.sigma")
    if np.linalg.eigvalsh(sigma)[0] < -1e-14 * max(1.0, np.abs(sigma).max()):
        raise ScenarioError("disturbance.sigma: must be positive semidefinite",
                            field="disturbance.sigma")

    vehicles = []
    raw_vehicles = _require(doc, "vehicles", "scenario")
    if not raw_vehicles:
        raise ScenarioError("vehicles: at least one vehicle is required", field="vehicles")
    for i, v in enumerate(raw_vehicles):
        path = f"vehicles[{i}]"
        vid = str(_require(v, "id", path))
        if vid in [w.id for w in vehicles]:
            raise ScenarioError(f"{path}.id: duplicate vehicle id {vid!r}", field=f"{path}.id")
        x0 = _vec(_require(v, "x0", path), f"{path}.x0", n)
        if not np.all(np.isfinite(x0)):
            raise ScenarioError(f"{path}.x0: entries must be finite", field=f"{path}.x0")
        lo = _vec([-np.inf if x is None else x for x in v.get("u_lower", [None] * m)],
                  f"{path}.u_lower", m)
        hi = _vec([np.inf if x is None else x for x in v.get("u_upper", [None] * m)],
                  f"{path}.u_upper", m)
        if np.any(lo > hi):
            raise ScenarioError(f"{path}: u_lower exceeds u_upper", field=f"{path}.u_lower")
        vehicles.append(Vehicle(vid, x0, lo, hi))
    ids = [v.id for v in vehicles]

    def vid_check(vid, path):
        if str(vid) not in ids:
            raise ScenarioError(f"{path}: unknown vehicle id {vid!r}", field=path)
        return str(vid)

    thresholds = {}
    for key, val in dict(doc.get("thresholds", {})).items():
        if key not in POOLS:
            raise ScenarioError(f"thresholds.{key}: unknown pool, expected one of {POOLS}",
                                field=f"thresholds.{key}")
        a = _num(val, f"thresholds.{key}")
        if not 0 < a < 1:
            raise ScenarioError(f"thresholds.{key}: must lie in (0, 1), got {a}",
                                field=f"thresholds.{key}")
        thresholds[key] = a
    if thresholds.get("alpha_T", 0.0) > 0.5:
        raise ScenarioError("thresholds.alpha_T: must not exceed 0.5 (t quantile convex only above the median)",
                            field="thresholds.alpha_T")

    targets = []
    for i, t in enumerate(doc.get("targets", [])):
        path = f"targets[{i}]"
        vid = vid_check(_require(t, "vehicle", path), f"{path}.vehicle")
        k = _times([_require(t, "k", path)], N, f"{path}.k")[0]
        if "box" in t:
            box = t["box"]
            lo = _vec(_require(box, "lower", f"{path}.box"), f"{path}.box.lower", n)
            hi = _vec(_require(box, "upper", f"{path}.box.upper"), f"{path}.box.upper", n)
            if np.any(lo > hi):
                raise ScenarioError(f"{path}.box: lower exceeds upper", field=f"{path}.box")
            P, q = box_to_halfspaces(lo, hi)
        else:
            P = _mat(_require(t, "P", path), f"{path}.P", (None, n))
            q = _vec(_require(t, "q", path), f"{path}.q", P.shape[0])
        pool = t.get("pool", "alpha_T")
        if pool not in thresholds:
            raise ScenarioError(f"{path}.pool: no threshold given for pool {pool!r}", field=f"{path}.pool")
        targets.append(Target(vid, k, P, q, pool))

    collisions = []
    npos = _POSITIONS.get(kind)
    for i, c in enumerate(doc.get("collisions", [])):
        path = f"collisions[{i}]"
        ckind = _require(c, "type", path)
        if ckind not in ("pair", "obstacle"):
            raise ScenarioError(f"{path}.type: must be 'pair' or 'obstacle'", field=f"{path}.type")
        r = _num(_require(c, "r_m", path), f"{path}.r_m")
        if r <= 0:
            raise ScenarioError(f"{path}.r_m: radius must be positive", field=f"{path}.r_m")
        times = _times(_require(c, "times", path), N, f"{path}.times")
        pool = c.get("pool", DEFAULT_POOL[ckind])
        if pool not in thresholds:
            raise ScenarioError(f"{path}.pool: no threshold given for pool {pool!r}", field=f"{path}.pool")
        if "S" in c:
            S = _mat(c["S"], f"{path}.S", (None, n))
        elif npos is not None:
            S = position_selector(npos, n)
        else:
            raise ScenarioError(f"{path}.S: required for explicit-lti dynamics", field=f"{path}.S")
        if np.linalg.matrix_rank(S) < S.shape[0]:
            raise ScenarioError(f"{path}.S: rows must be linearly independent", field=f"{path}.S")
        raw_v = _require(c, "vehicles", path)
        if ckind == "pair":
            if raw_v == "all":
                vs = "all"
            else:
                if len(raw_v) != 2 or raw_v[0] == raw_v[1]:
                    raise ScenarioError(f"{path}.vehicles: a pair needs two distinct ids",
                                        field=f"{path}.vehicles")
                vs = tuple(vid_check(x, f"{path}.vehicles") for x in raw_v)
            position = None
        else:
            vs = "all" if raw_v == "all" else tuple(vid_check(x, f"{path}.vehicles") for x in raw_v)
            position = _vec(c.get("position_m", [0.0] * S.shape[0]), f"{path}.position_m", S.shape[0])
        collisions.append(Collision(ckind, vs, r, times, pool, S, position))

    quantile = {"h": 5e-6, "xi": 0.01, "n_d": 4, "p_l": 1.0 - 1e-4, "p0": 0.5}
    for key, val in dict(doc.get("quantile", {})).items():
        if key not in quantile:
            raise ScenarioError(f"quantile.{key}: unknown setting", field=f"quantile.{key}")
        quantile[key] = _num(val, f"quantile.{key}")
    quantile["n_d"] = int(quantile["n_d"])
    if not 1 <= quantile["n_d"] <= 4:
        raise ScenarioError("quantile.n_d: must be 1..4", field="quantile.n_d")
    if not 0.5 <= quantile["p0"] < quantile["p_l"] < 1:
        raise ScenarioError("quantile.p_l: need 0.5 <= p0 < p_l < 1", field="quantile.p_l")
    if quantile["h"] <= 0 or quantile["xi"] <= 0:
        raise ScenarioError("quantile: h and xi must be positive", field="quantile")

    solver = {"max_iter": 100, "tol": 1e-8, "penalty_init": 10.0, "penalty_growth": 1.5,
              "penalty_max": 1e6}
    for key, val in dict(doc.get("solver", {})).items():
        if key not in solver:
            raise ScenarioError(f"solver.{key}: unknown setting", field=f"solver.{key}")
        solver[key] = _num(val, f"solver.{key}")
    solver["max_iter"] = int(solver["max_iter"])

    batch = dict(doc.get("batch", {}))
    seed = doc.get("seed", 0)
    if int(seed) != seed or seed < 0:
        raise ScenarioError("seed: must be a non-negative integer", field="seed")

    scn = PlanningScenario(
        name=str(doc.get("name", "scenario")),
        dynamics=dyn, sigma=sigma, nu=nu, vehicles=vehicles, targets=targets,
        collisions=collisions, thresholds=thresholds, quantile=quantile, solver=solver,
        seed=int(seed), angle_unit=angle_unit, batch=batch,
    )
    check_convexity_floors(scn)
    return scn


def box_to_halfspaces(lower, upper):
    """``lower <= x <= upper`` as ``P x <= q``; infinite bounds are dropped."""
    n = lower.size
    rows, rhs = [], []
    for i in range(n):
        if np.isfinite(upper[i]):
            e = np.zeros(n)
            e[i] = 1.0
            rows.append(e)
            rhs.append(upper[i])
    for i in range(n):
        if np.isfinite(lower[i]):
            e = np.zeros(n)
            e[i] = -1.0
            rows.append(e)
            rhs.append(-lower[i])
    return np.array(rows).reshape(-1, n), np.array(rhs)


def load_scenario(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"{path}: file not found", field="") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})", field="") from None
    return parse_scenario(doc)


def _listify(a):
    return np.asarray(a, dtype=float).tolist()


def scenario_to_dict(scn):
    doc = {
        "name": scn.name,
        "angle_unit": scn.angle_unit,
        "seed": scn.seed,
        "dynamics": copy.deepcopy(scn.dynamics),
        "disturbance": {"nu": scn.nu, "sigma": _listify(scn.sigma)},
        "vehicles": [{"id": v.id, "x0": _listify(v.x0), "u_lower": _listify(v.u_lower),
                      "u_upper": _listify(v.u_upper)} for v in scn.vehicles],
        "targets": [{"vehicle": t.vehicle, "k": t.k, "P": _listify(t.P), "q": _listify(t.q),
                     "pool": t.pool} for t in scn.targets],
        "collisions": [],
        "thresholds": dict(scn.thresholds),
        "quantile": dict(scn.quantile),
        "solver": dict(scn.solver),
        "batch": copy.deepcopy(scn.batch),
    }
    for c in scn.collisions:
        entry = {"type": c.kind, "vehicles": c.vehicles if c.vehicles == "all" else list(c.vehicles),
                 "r_m": c.r, "times": list(c.times), "pool": c.pool, "S": _listify(c.S)}
        if c.kind == "obstacle":
            entry["position_m"] = _listify(c.position)
        doc["collisions"].append(entry)
    # inf bounds are not JSON; encode them as null and restore on load
    for v in doc["vehicles"]:
        v["u_lower"] = [None if not math.isfinite(x) else x for x in v["u_lower"]]
        v["u_upper"] = [None if not math.isfinite(x) else x for x in v["u_upper"]]
    return doc


def save_scenario(scn, path):
    from .cli import atomic_write_text

    atomic_write_text(path, json.dumps(scenario_to_dict(scn), indent=1) + "\n")


# --------------------------------------------------------------------------
# compilation


@dataclass(eq=False)
class CompiledScenario:
    scenario: PlanningScenario
    model: LtiModel
    system: object
    sigma: np.ndarray
    psi: np.ndarray
    x0s: list
    state_scale: np.ndarray
    input_scale: np.ndarray
    layout: ControlLayout
    targets: list
    collisions: list
    specs: list = None
    pwa_map: dict = None
    solver_config: SolverConfig = None

    def file_controls(self, controls):
        """Internal controls (radians) to file units, as ``N x m`` arrays."""
        N, m = self.scenario.horizon, self.model.input_dim
        return [np.asarray(c).reshape(N, m) * self.input_scale for c in controls]

    def internal_controls(self, file_controls):
        N, m = self.scenario.horizon, self.model.input_dim
        out = []
        for c in file_controls:
            c = np.asarray(c, dtype=float)
            if c.shape != (N, m):
                raise ScenarioError(f"controller shape {c.shape} does not match ({N}, {m})",
                                    field="controllers")
            out.append((c / self.input_scale).ravel())
        return out


def _angle_scales(scn, n, m):
    kind = scn.dynamics["kind"]
    if kind == "explicit-lti":
        ang_x = tuple(scn.dynamics.get("angular_states", ()))
        ang_u = tuple(scn.dynamics.get("angular_inputs", ()))
    else:
        ang_x, ang_u = _ANGULAR[kind]
    f = 180.0 / math.pi if scn.angle_unit == "deg" else 1.0
    sx, su = np.ones(n), np.ones(m)
    sx[list(ang_x)] = f
    su[list(ang_u)] = f
    return sx, su


def build_model(dynamics):
    kind = dynamics["kind"]
    if kind == "explicit-lti":
        return LtiModel(np.asarray(dynamics["A"], float), np.asarray(dynamics["B"], float),
                        float(dynamics["dt_s"]))
    p = dynamics.get("params", {})
    params = CwhParams(
        m_c=float(p.get("m_c_kg", 1.0)),
        J_theta=float(p.get("J_theta_kgm2", 1.0)),
        R0=float(p.get("R0_m", CwhParams.R0)),
        mu_grav=float(p.get("mu_m3_s2", CwhParams.mu_grav)),
        dt=float(dynamics["dt_s"]),
    )
    return cwh_planar_attitude(params) if kind == "cwh-planar-attitude" else cwh_3d(params)


def expand_collisions(scn):
    """Collision entries with ``"all"`` expanded, as reformulation specs (vehicle indices)."""
    ids = scn.vehicle_ids
    out = []
    for c in scn.collisions:
        if c.kind == "pair":
            if c.vehicles == "all":
                pairs = [(i, j) for i in range(len(ids)) for j in range(i + 1, len(ids))]
            else:
                pairs = [(ids.index(c.vehicles[0]), ids.index(c.vehicles[1]))]
            for i, j in pairs:
                out.append(CollisionSpec("pair", (i, j), c.r, c.S, c.times, c.pool))
        else:
            vs = range(len(ids)) if c.vehicles == "all" else [ids.index(v) for v in c.vehicles]
            for i in vs:
                out.append(CollisionSpec("obstacle", (i,), c.r, c.S, c.times, c.pool,
                                         obstacle=c.position))
    return out


def collision_law(kind, q, nu):
    """Law of the scalar random variable in a reformulated collision constraint."""
    if kind == "pair":
        return SqrtBetaPrime(pairwise_sum_params(q, nu))
    return SqrtBetaPrime(BetaPrime(q / 2.0, nu / 2.0))


def check_convexity_floors(scn):
    """Every collision pool threshold must leave ``1 - alpha`` above the quantile's convexity floor."""
    for i, c in enumerate(scn.collisions):
        law = collision_law(c.kind, c.S.shape[0], scn.nu)
        floor = convex_region_floor(law)
        alpha = scn.thresholds[c.pool]
        if 1.0 - alpha <= floor:
            raise ScenarioError(
                f"collisions[{i}]: {c.pool}={alpha:g} reaches below the convexity floor of "
                f"{law.key()}: need 1 - alpha > {floor:.6f}, i.e. alpha < {1.0 - floor:.6f}",
                field=f"thresholds.{c.pool}")


@functools.lru_cache(maxsize=64)
def cached_pwa(dist, h, xi, n_d, p_end, p0, p_lo):
    return build_pwa(dist, h=h, xi=xi, n_d=n_d, p_end=p_end, p0=p0, p_lo=p_lo)


def compile_scenario(scn, reformulate=True, x0_override=None):
    """Build dynamics, constraint specs and PWA quantiles in internal (radian) units."""
    model = build_model(scn.dynamics)
    n, m = model.state_dim, model.input_dim
    N = scn.horizon
    sx, su = _angle_scales(scn, n, m)
    sigma = scn.sigma / np.outer(sx, sx)
    file_x0 = x0_override if x0_override is not None else [v.x0 for v in scn.vehicles]
    x0s = [np.asarray(x, dtype=float) / sx for x in file_x0]
    lower = [np.tile(v.u_lower / su, N) for v in scn.vehicles]
    upper = [np.tile(v.u_upper / su, N) for v in scn.vehicles]
    layout = ControlLayout(len(scn.vehicles), N, m, lower, upper, dict(scn.thresholds))
    system = concat(model, N)
    psi = block_scale(sigma, N)
    targets = [TargetSetSpec(scn.vehicle_index(t.vehicle), t.k, t.P * sx, t.q, t.pool)
               for t in scn.targets]
    collisions = expand_collisions(scn)
    s = scn.solver
    config = SolverConfig(max_iter=s["max_iter"], tol=s["tol"], penalty_init=s["penalty_init"],
                          penalty_growth=s["penalty_growth"], penalty_max=s["penalty_max"],
                          risk_floor=1.0 - scn.quantile["p_l"])
    comp = CompiledScenario(scn, model, system, sigma, psi, x0s, sx, su, layout,
                            targets, collisions, solver_config=config)
    if not reformulate:
        return comp
    specs = []
    for t in targets:
        specs.extend(reform_target(t, system, psi, scn.nu, x0s[t.vehicle]))
    for c in collisions:
        specs.extend(reform_collision(c, system, psi, scn.nu, x0s))
    comp.specs = specs
    comp.pwa_map = build_pwa_map(specs, scn)
    return comp


def build_pwa_map(specs, scn):
    """One PWA quantile per distinct law, reduced on ``[1 - max pool alpha, p_l]``."""
    q = scn.quantile
    widest = {}
    laws = {}
    for spec in specs:
        if spec.deterministic:
            continue
        key = spec.dist.key()
        laws[key] = spec.dist
        widest[key] = max(widest.get(key, 0.0), scn.thresholds[spec.pool])
    out = {}
    for key in sorted(laws):
        _, pwa = cached_pwa(laws[key], q["h"], q["xi"], q["n_d"], q["p_l"], q["p0"],
                            1.0 - widest[key])
        out[key] = pwa
    return out


def quantile_law(spec_text):
    """Parse a law description such as ``t:4``, ``betaprime:1.5,10``,
    ``sqrtbetaprime:1.5,10``, ``pair:3,20`` or ``obstacle:3,20``."""
    try:
        name, _, args = spec_text.partition(":")
        vals = [float(a) for a in args.split(",")] if args else []
        name = name.strip().lower()
        if name in ("t", "student-t", "studentt"):
            (nu,) = vals
            return StudentT(nu)
        if name == "cauchy":
            return StudentT(1.0)
        if name in ("betaprime", "beta-prime"):
            g, d = vals
            return BetaPrime(g, d)
        if name in ("sqrtbetaprime", "sqrt-betaprime"):
            g, d = vals
            return SqrtBetaPrime(BetaPrime(g, d))
        if name in ("pair", "obstacle"):
            q, nu = vals
            return collision_law(name, int(q), nu)
    except ValueError:
        pass
    raise ScenarioError(f"cannot parse distribution {spec_text!r}", field="dist")
