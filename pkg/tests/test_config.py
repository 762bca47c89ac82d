import json

import numpy as np
import pytest

from seirgame import config as cfg
from seirgame import model_core as mc

BASE = """
[scenario]
name = "toy"
horizon_days = 30.0

[regions]
names = ["A", "B"]
populations = [1e6, 2e6]

[travel]
stay_fraction = 0.8

[epidemiology]
R0 = 2.0
infectious_days = 10.0
ifr = 0.01
latent_days = 4.0
theta = 0.9
sigma_s = 0.001
sigma_e = 0.001

[cost]
w = 100.0
chi = 1e6
p = 0.01
c = 1000.0
a = 10.0
"""

REORDERED = """
[cost]
a = 10.0
c = 1000.0
p = 0.01
chi = 1e6
w = 100.0

[epidemiology]
sigma_e = 0.001
sigma_s = 0.001
theta = 0.9
latent_days = 4.0
ifr = 0.01
infectious_days = 10.0
R0 = 2.0

[travel]
stay_fraction = 0.8

[regions]
populations = [1e6, 2e6]
names = ["A", "B"]

[scenario]
horizon_days = 30.0
name = "toy"
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_digest_ignores_key_order(tmp_path):
    a = cfg.load_scenario(_write(tmp_path, "a.toml", BASE))
    b = cfg.load_scenario(_write(tmp_path, "b.toml", REORDERED))
    assert a.digest == b.digest


def test_digest_changes_with_values(tmp_path):
    path = _write(tmp_path, "a.toml", BASE)
    assert cfg.load_scenario(path).digest != cfg.load_scenario(path, {"cost.a": 11.0}).digest



def test_json_scenario(tmp_path):
    doc = cfg.load_config(_write(tmp_path, "a.toml", BASE))
    js = _write(tmp_path, "a.json", json.dumps(doc))
    assert cfg.load_scenario(js).digest == cfg.load_scenario(tmp_path / "a.toml").digest


def test_extends_merges_tables(tmp_path):
    _write(tmp_path, "base.toml", BASE)
    child = _write(tmp_path, "child.toml", 'extends = "base.toml"\n[cost]\na = 3.0\n'
                   "[initial_state]\ns = [0.99, 0.98]\ne = [0.005, 0.01]\ni = [0.005, 0.01]\n")
    sc = cfg.load_scenario(child)
    assert sc.params.cost.a == 3.0 and sc.params.cost.w == 100.0
    assert np.allclose(sc.x0, [0.99, 0.98, 0.005, 0.01, 0.005, 0.01])


def test_calibration_values_derived(tmp_path):
    sc = cfg.load_scenario(_write(tmp_path, "a.toml", BASE))
    ep = sc.resolved["epidemiology"]
    assert ep["gamma"] == pytest.approx(0.25)
    assert ep["lam"] == pytest.approx(0.1)
    assert ep["beta"] == pytest.approx(0.2)
    assert ep["kappa"] == pytest.approx(0.001)
    bm = np.array(ep["beta_matrix"])
    assert bm.shape == (2, 2) and np.all(bm > 0)


@pytest.mark.parametrize("override, field", [
    ({"cost.w": -1.0}, "cost.w"),
    ({"epidemiology.theta": 1.5}, "epidemiology.theta"),
    ({"regions.populations": [1e6, -2.0]}, "regions.populations"),
    ({"cost.chi": "lots"}, "cost.chi"),
    ({"epidemiology.sigma_s": [0.1, 0.2, 0.3]}, "epidemiology.sigma_s"),
    ({"initial_state": {"s": [0.9, 0.9], "e": [0.2, 0.0], "i": [0.0, 0.0]}},
     "initial_state"),
])
def test_errors_name_the_field(tmp_path, override, field):
    path = _write(tmp_path, "a.toml", BASE)
    with pytest.raises(cfg.ScenarioError) as info:
        cfg.load_scenario(path, override)
    assert info.value.field_path == field
    assert str(info.value).startswith(field)


def test_missing_field_is_reported(tmp_path):
    path = _write(tmp_path, "a.toml", BASE.replace("w = 100.0\n", ""))
    with pytest.raises(cfg.ScenarioError, match="cost.w"):
        cfg.load_scenario(path)


def test_missing_initial_state_is_an_error_only_when_used(tmp_path):
    sc = cfg.load_scenario(_write(tmp_path, "a.toml", BASE))
    assert not sc.has_x0
    with pytest.raises(cfg.ScenarioError, match="initial_state"):
        sc.x0


def test_scenario_error_is_a_config_error():
    assert issubclass(cfg.ScenarioError, mc.ConfigError)


def test_shipped_scenarios_load():
    sc = cfg.load_scenario("ny-nj-pa")
    assert list(sc.resolved["regions"]["names"]) == ["NY", "NJ", "PA"]
    assert not sc.has_x0
    demo = cfg.load_scenario("ny-nj-pa-demo")
    assert demo.has_x0
    assert demo.params.cost.a == 100.0
