import copy
import json
import warnings

import numpy as np
import pytest

from heavytail_ccp.distributions import BetaPrime, DegenerateMomentWarning, SqrtBetaPrime, StudentT
from heavytail_ccp.exceptions import ScenarioError
from heavytail_ccp.quantile import convex_region_floor
from heavytail_ccp.scenario import (collision_law, compile_scenario, expand_collisions,
                                    load_scenario, parse_scenario, quantile_law, save_scenario,
                                    scenario_to_dict)

from conftest import shipped


def _doc(name):
    return json.loads(shipped(name).read_text())


def _load(name):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateMomentWarning)
        return load_scenario(shipped(name))


@pytest.mark.parametrize("name", ["observational", "docking7", "debris3"])
def test_round_trip(name, tmp_path):
    scn = _load(name)
    save_scenario(scn, tmp_path / "s.json")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateMomentWarning)
        again = load_scenario(tmp_path / "s.json")
    assert scenario_to_dict(again) == scenario_to_dict(scn)


def test_observational_values():
    scn = _load("observational")
    assert scn.horizon == 8 and scn.dynamics["dt_s"] == 300.0
    assert scn.nu == 4.0
    assert np.allclose(np.diag(scn.sigma), [1e-4, 1e-4, 1e-6, 5e-8, 5e-8, 5e-10])
    assert np.count_nonzero(scn.sigma - np.diag(np.diag(scn.sigma))) == 0
    assert scn.thresholds == {"alpha_T": 0.2, "alpha_o": 0.2}
    assert [t.k for t in scn.targets] == [2, 4, 6, 8]
    assert scn.collisions[0].r == 8.0


def test_docking_values():
    scn = _load("docking7")
    assert len(scn.vehicles) == 7 and scn.nu == 20.0
    assert all(c.r == 8.0 for c in scn.collisions)
    specs = expand_collisions(scn)
    # 7 obstacle terms plus 21 pairs, each over 7 steps
    assert len(specs) == 28
    assert sum(len(s.times) for s in specs) == 196


def test_debris_values():
    scn = _load("debris3")
    assert len(scn.vehicles) == 3 and scn.nu == 4.0
    for t in scn.targets:
        hi = t.q[:3]
        lo = -t.q[6:9]
        assert np.allclose(hi - lo, 6.0)


def test_schema_errors_name_the_field():
    cases = [
        (lambda d: d["dynamics"].pop("N"), "dynamics.N"),
        (lambda d: d["dynamics"].update(kind="unknown"), "dynamics.kind"),
        (lambda d: d["disturbance"].update(nu=-1.0), "disturbance.nu"),
        (lambda d: d["vehicles"][0].update(x0=[0.0, 1.0]), "vehicles[0].x0"),
        (lambda d: d["targets"][1].update(k=9), "targets[1].k[0]"),
        (lambda d: d["thresholds"].update(alpha_T=1.5), "thresholds.alpha_T"),
        (lambda d: d["collisions"][0].update(r_m=0.0), "collisions[0].r_m"),
        (lambda d: d["collisions"][0].update(vehicles=["ghost"]), "collisions[0].vehicles"),
        (lambda d: d.update(quantile={"n_d": 6}), "quantile.n_d"),
        (lambda d: d.update(solver={"bogus": 1}), "solver.bogus"),
    ]
    base = _doc("observational")
    for mutate, field in cases:
        d = copy.deepcopy(base)
        mutate(d)
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(d)
        assert exc.value.field == field
        assert str(exc.value).startswith(field)


def test_asymmetric_sigma_rejected():
    d = _doc("observational")
    sigma = np.diag(d["disturbance"].pop("sigma_diag"))
    sigma[0, 1] = 1e-5
    d["disturbance"]["sigma"] = sigma.tolist()
    with pytest.raises(ScenarioError, match="symmetric"):
        parse_scenario(d)


def test_convexity_floor_rejects_large_alpha():
    d = _doc("docking7")
    law = collision_law("pair", 3, 20.0)
    floor = convex_region_floor(law)
    assert 0 < floor < 0.5
    d["thresholds"]["alpha_r"] = min(0.99, 1.0 - floor + 0.01)
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(d)
    assert exc.value.field == "thresholds.alpha_r"
    d["thresholds"]["alpha_r"] = 1.0 - floor - 0.01
    parse_scenario(d)


def test_missing_file_and_bad_json(tmp_path):
    with pytest.raises(ScenarioError, match="not found"):
        load_scenario(tmp_path / "none.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ScenarioError, match="JSON"):
        load_scenario(tmp_path / "bad.json")


def test_quantile_law_parsing():
    assert quantile_law("t:4").key() == StudentT(4.0).key()
    assert quantile_law("cauchy").key() == StudentT(1.0).key()
    assert quantile_law("betaprime:1.5,10").key() == BetaPrime(1.5, 10.0).key()
    assert quantile_law("sqrtbetaprime:1,2").key() == SqrtBetaPrime(BetaPrime(1.0, 2.0)).key()
    assert quantile_law("obstacle:3,20").key() == SqrtBetaPrime(BetaPrime(1.5, 10.0)).key()
    for bad in ("t", "gamma:1", "betaprime:1", "t:x"):
        with pytest.raises(ScenarioError):
            quantile_law(bad)


def test_compile_converts_degrees():
    scn = _load("observational")
    comp = compile_scenario(scn, reformulate=False)
    assert comp.x0s[0][2] == pytest.approx(np.pi / 2)
    assert comp.sigma[2, 2] == pytest.approx(1e-6 * (np.pi / 180) ** 2)
    assert comp.layout.lower[0][2] == pytest.approx(-np.pi / 2)
