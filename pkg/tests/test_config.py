import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coherent_ratchet.config import TASKS, UNITS, config_from_dict, load_config, parse_config, serialize_config
from coherent_ratchet.errors import ConfigError

MINIMAL = """
task: propagate
system: {source: fmo, sites: [1, 2]}
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.propagation.depth == 8
    assert cfg.propagation.matsubara == 1
    assert cfg.propagation.dt == 0.5
    assert cfg.bath.temperature == 300.0
    assert cfg.hamiltonian().n_sites == 2
    assert cfg.params == TASKS["propagate"]


def test_negative_temperature_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "bath: {temperature: -10}\n")
    assert info.value.path == "bath.temperature"


@pytest.mark.parametrize("text, path", [
    ("task: icc\nfoo: 1\n", "foo"),
    ("task: icc\nsystem: {bogus: 1}\n", "system.bogus"),
    ("task: icc\nparams: {steps: 3}\n", "params.steps"),
    ("task: dimer-scan\nparams: {steps: 2.5}\n", "params.steps"),
    ("task: dimer-scan\nparams: {init: 3}\n", "params.init"),
    ("task: nope\n", "task"),
    ("task: icc\nsystem: {include_site8: true}\n", "system.site8_energy"),
    ("task: ratchet-scan\nparams: {param: x}\n", "params.param"),
    ("task: icc\nbath: {spatial_correlation: 2}\n", "bath.spatial_correlation"),
    ("task: icc\nsystem: {source: fmo, sites: [9]}\n", "system.sites[0]"),
])
def test_schema_violations_name_path(text, path):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.path == path


def test_malformed_yaml():
    with pytest.raises(ConfigError):
        parse_config("task: [unclosed\n")
    with pytest.raises(ConfigError):
        parse_config("")


def test_inline_and_file_systems(tmp_path):
    cfg = parse_config("task: propagate\nsystem: {source: inline, site_energies: [0, 100], "
                       "couplings: [[0, 20], [20, 0]]}\n")
    np.testing.assert_allclose(cfg.hamiltonian().matrix, [[0, 20], [20, 100]])
    f = tmp_path / "h.yaml"
    f.write_text("site_energies: [0, 50]\ncouplings: [[0, 5], [5, 0]]\n")
    cfg = parse_config(f"task: propagate\nsystem: {{source: file, path: {f}}}\n")
    assert cfg.hamiltonian().matrix[1, 1] == 50
    with pytest.raises(ConfigError):
        parse_config("task: propagate\nsystem: {source: inline, site_energies: [0, 1], "
                     "couplings: [[0, 1], [2, 0]]}\n")


def test_scalar_spatial_correlation():
    cfg = parse_config(MINIMAL + "bath: {spatial_correlation: 0.5}\n")
    assert cfg.drude_bath(2).site_correlation[0, 1] == 0.5
    with pytest.raises(ConfigError):
        cfg.drude_bath(3)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


def test_units_cover_physical_keys():
    assert UNITS["bath.temperature"] == "K"
    assert UNITS["propagation.t_final"] == "fs"
    assert UNITS["system.couplings"] == "cm^-1"


scan_configs = st.fixed_dictionaries({
    "task": st.just("ratchet-scan"),
    "seed": st.integers(0, 2**31),
    "output": st.one_of(st.none(), st.text("abcxyz_", min_size=1, max_size=8).map(lambda s: s + ".csv")),
    "bath": st.fixed_dictionaries({
        "reorganization_energy": st.floats(0.1, 200),
        "correlation_time": st.floats(1, 500),
        "temperature": st.floats(1, 500),
    }),
    "propagation": st.fixed_dictionaries({"dt": st.floats(0.05, 2), "depth": st.integers(1, 10)}),
    "params": st.fixed_dictionaries({
        "param": st.sampled_from(["tc", "corr"]),
        "values": st.lists(st.floats(0, 1), min_size=1, max_size=6),
        "j": st.floats(0.1, 100),
        "spatial_correlation": st.floats(-1, 1),
        "chain_depth": st.integers(1, 8),
    }),
})


@settings(max_examples=100, deadline=None)
@given(scan_configs)
def test_round_trip(data):
    cfg = config_from_dict(data)
    assert parse_config(serialize_config(cfg)) == cfg
