import json

import pytest

from swarmctl.errors import ConfigError
from swarmctl.scenario import Scenario, load_scenario, loads_scenario, scenario_from_dict
from swarmctl.stability import ControlGains
from swarmctl.wireless import WirelessParams


def test_seed_only_gives_defaults(tmp_path):
    f = tmp_path / "s.json"
    f.write_text('{"seed": 7}')
    sc = load_scenario(f)
    assert sc == Scenario().with_seed(7)
    assert sc.gains == ControlGains(1, 1, 1.5, 1.5, 1, 1, 1.5, 1.5)
    assert sc.radio == WirelessParams()
    assert sc.k == 1.01 and sc.seed == 7


@pytest.mark.parametrize("text,where", [
    ('{"targets": {"x_bar_23": 1.0}}', "targets.x_bar_23: derived field"),
    ('{"radio": {"eta": 1.6}}', "radio.eta: derived field"),
    ('{"gains": {"a4": 1.0}}', "gains.a4: unknown key"),
    ('{"speed": 1}', "speed: unknown key"),
    ('{"gains": {"a2": "1"}}', "gains.a2: expected a number"),
    ('{"gains": {"a2": -1}}', "gains.a2: must be > 0"),
    ('{"radio": {"beta": 2.5}}', "radio.beta: expected an integer"),
    ('{"radio": {"alpha": 2}}', "radio.alpha: must be > 2"),
    ('{"k": 1.0}', "k: must be > 1"),
    ('{"sim": {"step": 0.002}}', "sim.step"),
    ('{"sim": {"horizon": 10.0003}}', "sim.horizon: must be an integer multiple"),
    ('{"seed": -1}', "seed: must be in"),
    ('{"seed": 1.5}', "seed: expected an integer"),
    ('{"gains": {"b2": NaN}}', "non-finite"),
    ('[1, 2]', "expected a JSON object"),
])
def test_rejections(text, where):
    with pytest.raises(ConfigError, match=where.replace("(", r"\(").replace(".", r"\.")):
        loads_scenario(text)


def test_malformed_number_names_key():
    with pytest.raises(ConfigError, match="near key 'b_hat2'"):
        loads_scenario('{"gains": {"a2": 1.0, "b_hat2": 1.5.2}}')


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_scenario(tmp_path / "nope.json")


def test_round_trip_idempotent():
    sc = loads_scenario('{"seed": 3, "gains": {"a2": 2}, "radio": {"density_lambda": 0.1, "beta": 2}}')
    text = sc.dumps()
    again = loads_scenario(text)
    assert again == sc
    assert again.dumps() == text
    assert again.digest() == sc.digest()
    assert scenario_from_dict(json.loads(text)) == sc


def test_digest_depends_on_content():
    assert Scenario().digest() != Scenario().with_seed(1).digest()
