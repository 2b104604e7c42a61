from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from evolvefem.config import ConfigError, emit_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_table3_config():
    cfg = parse_config(CONFIGS / "table3.ini")
    k = cfg.kinetics
    assert (k.d1, k.d2, k.gamma, k.a, k.b) == (0.01, 1.0, 0.1, 0.1, 0.9)
    assert cfg.mapping.kappa == 4.0 and cfg.mapping.period == 2000.0
    assert cfg.final_time == 2000.0
    assert cfg.discretization.tau == 1e-2
    assert cfg.output.snapshot_times == [0, 590, 1000, 1750, 2000]
    assert cfg.run.seed == 42


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    parse_config(path)


def test_empty_file_lists_missing_keys(tmp_path):
    p = tmp_path / "empty.ini"
    p.write_text("")
    with pytest.raises(ConfigError) as info:
        parse_config(p)
    msg = str(info.value)
    for key in ("run.mode", "mapping.kind", "kinetics.d1", "discretization.degree"):
        assert key in msg


def test_negative_diffusion_named():
    with pytest.raises(ConfigError, match="kinetics.d1"):
        parse_config(CONFIGS / "table3.ini", ["kinetics.d1=-0.01"])


@pytest.mark.parametrize("override,fragment", [
    ("mapping.spin=3", "unknown key mapping.spin"),
    ("physics.g=9.8", "unknown section"),
    ("discretization.degree=4", "degree"),
    ("discretization.degree=1.5", "integer"),
    ("solver.preconditioner=ilu", "preconditioner"),
    ("run.strict_picard=maybe", "boolean"),
    ("kinetics.gamma", "section.key=value"),
])
def test_bad_overrides(override, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(CONFIGS / "table3.ini", [override])


def test_defaults_filled():
    text = """
[run]
mode = verify
[mapping]
kind = identity
[kinetics]
model = none
d1 = 1
d2 = 2
[discretization]
degree = 1
[initial]
kind = constant
"""
    cfg = parse_config(text=text)
    assert cfg.mapping.kappa == 1.0
    assert cfg.solver.tol == 1e-10
    assert cfg.run.seed == 42
    assert cfg.final_time == cfg.mapping.period


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "missing.ini")


def test_malformed_file():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config(text="no section header\nkey = 1\n")


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.name)
def test_emit_roundtrip(path):
    cfg = parse_config(path)
    assert parse_config(text=emit_config(cfg)) == cfg


@settings(max_examples=30, deadline=None)
@given(
    st.floats(1e-4, 1e3, allow_nan=False), st.floats(1e-4, 10), st.integers(0, 2**31),
    st.lists(st.integers(0, 8), min_size=1, max_size=4), st.sampled_from(["identity", "linear_periodic", "nonlinear_periodic"]),
)
def test_emit_roundtrip_random(period, d1, seed, levels, kind):
    cfg = parse_config(CONFIGS / "benchmark_linear_p1.ini")
    cfg.mapping.period = period
    cfg.mapping.kind = kind
    cfg.kinetics.d1 = d1
    cfg.run.seed = seed
    cfg.discretization.levels = levels
    assert parse_config(text=emit_config(cfg)) == cfg
