"""Scenario file parsing and serialization."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roomloc.config import ConfigError, dumps, loads
from roomloc.experiments import ExperimentConfig, scenario_catalog
from roomloc.geometry import Rectangle


@pytest.mark.parametrize("name", sorted(scenario_catalog()))
def test_presets_round_trip(name):
    cfg = scenario_catalog()[name]
    text = dumps(cfg)
    assert loads(text) == cfg
    assert dumps(loads(text)) == text


def test_minimal_file_uses_defaults():
    cfg = loads("[room]\nshape = rectangle\nlx = 1\nly = 2\n")
    assert cfg.room == Rectangle(1.0, 2.0)
    assert cfg.n_mics == ExperimentConfig().n_mics


def test_comments_and_case():
    text = """
    # a comment line
    [Room]
    shape = rectangle   # trailing comment
    LX = 1
    ly = 1
    [mics]
    count = 17
    """
    assert loads(text).n_mics == 17


def test_missing_room_section():
    with pytest.raises(ConfigError, match=r"\[room\]"):
        loads("[mics]\ncount = 10\n")


def test_unknown_key_reports_line():
    text = "[room]\nshape = rectangle\nlx = 1\nly = 1\n[mics]\ncont = 10\n"
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert info.value.line == 6
    assert "cont" in str(info.value) and "line 6" in str(info.value)


@pytest.mark.parametrize(
    "text, line",
    [
        ("[room]\nshape = rectangle\nlx = one\nly = 1\n", 3),
        ("[room]\nshape = rectangle\nlx = 1\nly = 1\nlx = 2\n", 5),
        ("[room]\nshape = rectangle\nlx = 1\nly = 1\n[room]\n", 5),
        ("[room]\nshape = rectangle\nlx = 1\nly = 1\n[walls]\n", 5),
        ("count = 3\n[room]\n", 1),
        ("[room]\nshape rectangle\n", 2),
        ("[room\n", 1),
    ],
)
def test_malformed_files(text, line):
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert info.value.line == line


def test_semantic_errors():
    with pytest.raises(ConfigError):
        loads("[room]\nshape = hexagon\n")
    with pytest.raises(ConfigError):
        loads("[room]\nshape = rectangle\nlx = 1\n")
    with pytest.raises(ConfigError):
        loads("[room]\n[solver]\nmethod = lasso\n")
    with pytest.raises(ConfigError):
        loads("[room]\n[frequencies]\nband = 1, 2, 3\n")


@settings(max_examples=30, deadline=None)
@given(
    st.integers(1, 200),
    st.integers(0, 6),
    st.floats(0.01, 1.0),
    st.integers(0, 2**64 - 1),
    st.lists(st.integers(1, 99), min_size=1, max_size=5),
)
def test_round_trip_property(n_mics, n_sources, spacing, seed, xs):
    cfg = ExperimentConfig(n_mics=n_mics, n_sources=n_sources, grid_spacing=spacing, seed=seed,
                           x_axis="n_mics", x_values=tuple(xs))
    assert loads(dumps(cfg)) == cfg
