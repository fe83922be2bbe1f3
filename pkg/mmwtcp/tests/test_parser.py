import pytest

from mmwtcp import parser
from mmwtcp.config import ScenarioConfig, ConfigError, config_keys, MB
from mmwtcp.presets import PRESETS, preset


def test_empty_file():
    assert parser.parse_config("") == ScenarioConfig()
    assert parser.parse_config("\n# only a comment\n\n") == ScenarioConfig()


def test_override_distance_only():
    cfg = parser.parse_config("distance_m=100")
    assert cfg == ScenarioConfig()
    cfg = parser.parse_config("distance_m = 50")
    assert cfg.distance_m == 50.0
    assert isinstance(cfg.distance_m, float)
    assert cfg.channel == ScenarioConfig().channel


def test_to_pairs_value_types():
    test_str = """
    # scenario
    label = "two words"
    direction = downlink
    harq.enabled = FALSE
    tcp.mss = 1200   # bytes
    mmwave.bandwidth_hz = 1e9
    mobility.enb = (-1, 20.5)
    seeds = 1, 2, 3
    """
    res = parser.to_pairs(test_str)
    exp_res = [("label", "two words"),
               ("direction", "downlink"),
               ("harq.enabled", False),
               ("tcp.mss", 1200),
               ("mmwave.bandwidth_hz", 1e9),
               ("mobility.enb", (-1, 20.5)),
               ("seeds", [1, 2, 3])]
    assert res == exp_res


def test_full_scenario():
    test_str = """
    direction = downlink
    ack_path = lte
    channel.mode = geometric
    mobility.enabled = true
    mobility.speed_mps = 5
    pdcp.buffer_bytes = 2097152
    seeds = 4
    """
    cfg = parser.parse_config(test_str)
    assert cfg.ack_path == 'lte'
    assert cfg.mobility.speed_mps == 5.0
    assert cfg.pdcp.buffer_bytes == 2 * MB
    assert cfg.seeds == (4,)


def test_inconsistent_second_path():
    with pytest.raises(ConfigError) as e:
        parser.parse_config("mptcp.second_path = lte\nmptcp.enabled = false")
    assert e.value.key == 'mptcp.second_path'


@pytest.mark.parametrize("text, key", [
    ("foo = 1", "foo"),
    ("rlc.mode = tm", "rlc.mode"),
    ("harq.enabled = yes", "harq.enabled"),
    ("tcp.mss = 1400.5", "tcp.mss"),
    ("distance_m = far", "distance_m"),
    ("distance_m = ", "distance_m"),
    ("mobility.enb = (1, 2, 3)", "mobility.enb"),
    ("distance_m = 10\ndistance_m = 20", "distance_m"),
    ("app.kind = download", "app.file_bytes"),
    ("ack_path = lte", "ack_path"),
    ("channel.mode = geometric", "mobility.enabled"),
    ("mptcp.enabled = true", "mptcp.enabled"),
    ("app.duration_s = 1", "app.duration_s"),
])
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as e:
        parser.parse_config(text)
    assert e.value.key == key
    assert key in str(e.value)


def test_error_reports_line_number():
    with pytest.raises(ConfigError) as e:
        parser.parse_config("distance_m = 10\n\ntcp.mss = (1")
    assert 'line 3' in str(e.value)


def test_config_error_is_value_error():
    with pytest.raises(ValueError):
        parser.parse_config("bogus = 1")


@pytest.mark.parametrize("name", list(PRESETS))
def test_preset_round_trip(name):
    for cfg in preset(name):
        assert parser.parse_config(cfg.to_text()) == cfg


def test_load_config(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text("distance_m = 75\nrlc.mode = um\n")
    cfg = parser.load_config(str(path))
    assert cfg.distance_m == 75.0
    assert cfg.rlc.mode == 'um'


def test_config_hash_ignores_seeds():
    a = ScenarioConfig()
    b = a.with_values({'seeds': [1, 2]})
    c = a.with_values({'distance_m': 75})
    assert a.config_hash == b.config_hash
    assert a.config_hash != c.config_hash
    assert len(a.config_hash) == 12


def test_every_key_in_canonical_text():
    text = ScenarioConfig().to_text()
    keys = [line.split(' = ')[0] for line in text.splitlines()]
    assert keys == [spec.key for spec in config_keys()]


@pytest.mark.parametrize("name, count", [
    ("fig-retx", 12),
    ("fig-ackpath", 8),
    ("fig-mptcp", 20),
])
def test_preset_sizes(name, count):
    assert len(preset(name)) == count


def test_ackpath_preset_geometry():
    for cfg in preset("fig-ackpath"):
        assert cfg.direction == 'downlink'
        assert cfg.mobility.enb == (-1.0, 20.0)
        assert cfg.mobility.ue_start == (151.0, 0.0)
        assert cfg.mobility.ue_end == (151.0, 40.0)
    buffers = {cfg.pdcp.buffer_bytes for cfg in preset("fig-ackpath")}
    assert buffers == {2 * MB, 20 * MB}
    assert {cfg.core.delay_ms for cfg in preset("fig-ackpath")} == {10.0}


def test_unknown_preset():
    with pytest.raises(ValueError):
        preset("fig-nothing")
