"""Regenerate the shipped scenario files from their geometric descriptions."""

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "heavytail_ccp" / "scenarios"


def r4(x):
    return round(x, 4) + 0.0


def box(centre, half):
    return {"lower": [r4(c - h) for c, h in zip(centre, half)],
            "upper": [r4(c + h) for c, h in zip(centre, half)]}


def observational():
    rt = 11.0
    targets = []
    # positions step clockwise by 45 degrees, headings by +45 degrees
    for j, (phi, heading) in enumerate([(0, 135), (-45, 180), (-90, 225), (-135, 270)]):
        c = [rt * math.cos(math.radians(phi)), rt * math.sin(math.radians(phi)), heading, 0, 0, 0]
        targets.append({"vehicle": "deputy", "k": 2 * (j + 1),
                        "box": box(c, [2, 2, 20, 0.01, 0.01, 0.01]), "pool": "alpha_T"})
    return {
        "name": "observational",
        "angle_unit": "deg",
        "seed": 2024,
        "dynamics": {"kind": "cwh-planar-attitude", "dt_s": 300.0, "N": 8,
                     "params": {"m_c_kg": 1.0, "J_theta_kgm2": 1.0}},
        "disturbance": {"nu": 4.0, "sigma_diag": [1e-4, 1e-4, 1e-6, 5e-8, 5e-8, 5e-10]},
        "vehicles": [{"id": "deputy", "x0": [8.5, 8.5, 90.0, 0.0, 0.0, 0.0],
                      "u_lower": [-3, -3, -90], "u_upper": [3, 3, 90]}],
        "targets": targets,
        "collisions": [{"type": "obstacle", "vehicles": ["deputy"], "position_m": [0.0, 0.0],
                        "r_m": 8.0, "times": {"from": 1, "to": 8}, "pool": "alpha_o"}],
        "thresholds": {"alpha_T": 0.2, "alpha_o": 0.2},
    }


def bipyramid(radius):
    pts = [[0.0, 0.0, radius], [0.0, 0.0, -radius]]
    for i in range(5):
        a = 2 * math.pi * i / 5
        pts.append([radius * math.cos(a), radius * math.sin(a), 0.0])
    return pts


def docking7():
    ids = [f"sat{i + 1}" for i in range(7)]
    tgt = bipyramid(9.0)
    top, bottom, e0, e72, e144, e216, e288 = tgt
    # approach from a hexagonal cluster 25 m out on +x; ports on the far side
    # force paths around the station
    cluster = [(10, 0), (5, 8.66), (5, -8.66), (0, 0), (-5, 8.66), (-5, -8.66), (-10, 0)]
    ports = [e72, top, e144, e0, bottom, e216, e288]
    vehicles, targets = [], []
    for vid, (y, z), t in zip(ids, cluster, ports):
        vehicles.append({"id": vid, "x0": [25.0, float(y), float(z), 0.0, 0.0, 0.0],
                         "u_lower": [-3, -3, -3], "u_upper": [3, 3, 3]})
        targets.append({"vehicle": vid, "k": 8,
                        "box": box(t + [0, 0, 0], [2.5, 2.5, 2.5, 0.01, 0.01, 0.01]),
                        "pool": "alpha_T"})
    return {
        "name": "docking7",
        "angle_unit": "deg",
        "seed": 7,
        "dynamics": {"kind": "cwh-3d", "dt_s": 300.0, "N": 8, "params": {"m_c_kg": 1.0}},
        "disturbance": {"nu": 20.0, "sigma_diag": [1e-4, 1e-4, 1e-4, 5e-8, 5e-8, 5e-8]},
        "vehicles": vehicles,
        "targets": targets,
        "collisions": [
            {"type": "obstacle", "vehicles": "all", "position_m": [0.0, 0.0, 0.0], "r_m": 8.0,
             "times": {"from": 1, "to": 7}, "pool": "alpha_o"},
            {"type": "pair", "vehicles": "all", "r_m": 8.0, "times": {"from": 1, "to": 7},
             "pool": "alpha_r"},
        ],
        "thresholds": {"alpha_T": 0.2, "alpha_o": 0.2, "alpha_r": 0.2},
    }


def debris3():
    ids = ["sat1", "sat2", "sat3"]
    vehicles, targets = [], []
    for i, vid in enumerate(ids):
        a0 = math.radians(90 + 120 * i)
        a1 = a0 + math.radians(60)
        x0 = [9.0 * math.cos(a0), 9.0 * math.sin(a0), 0.0]
        c = [9.0 * math.cos(a1), 9.0 * math.sin(a1), 0.0]
        vehicles.append({"id": vid, "x0": [r4(v) for v in x0] + [0.0, 0.0, 0.0],
                         "u_lower": [-3, -3, -3], "u_upper": [3, 3, 3]})
        targets.append({"vehicle": vid, "k": 8,
                        "box": box(c + [0, 0, 0], [3, 3, 3, 0.1, 0.1, 0.1]), "pool": "alpha_T"})
    return {
        "name": "debris3",
        "angle_unit": "deg",
        "seed": 3,
        "dynamics": {"kind": "cwh-3d", "dt_s": 300.0, "N": 8, "params": {"m_c_kg": 1.0}},
        "disturbance": {"nu": 4.0, "sigma_diag": [1e-4, 1e-4, 1e-4, 5e-8, 5e-8, 5e-8]},
        "vehicles": vehicles,
        "targets": targets,
        "collisions": [{"type": "pair", "vehicles": "all", "r_m": 8.0,
                        "times": {"from": 1, "to": 8}, "pool": "alpha_r"}],
        "thresholds": {"alpha_T": 0.2, "alpha_r": 0.2},
        "batch": {"perturb_nu": 10.0, "perturb_scale_m": 1.0, "position_indices": [0, 1, 2]},
    }


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for make in (observational, docking7, debris3):
        doc = make()
        (OUT / f"{doc['name']}.json").write_text(json.dumps(doc, indent=1) + "\n")
        print("wrote", doc["name"])
