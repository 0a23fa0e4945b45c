import pytest
from hypothesis import given, strategies as st

from displab.config import ExperimentConfig, dump_config, load_config, parse_config
from displab.errors import UsageError


def test_defaults():
    cfg = parse_config("", env={})
    assert cfg == ExperimentConfig()
    assert cfg.dimension == 4 and cfg.h_values == (4.0, 8.0, 16.0, 32.0)


def test_sections_and_keys():
    text = "[general]\ndimension = 5\nsuite = oscint\n[potential]\nid = bump\ncoupling = 0.2\n" \
           "[time]\nper_decade = 12\n[h]\nvalues = 2, 4\n"
    cfg = parse_config(text, env={})
    assert (cfg.dimension, cfg.suite, cfg.potential, cfg.coupling) == (5, "oscint", "bump", 0.2)
    assert cfg.t_per_decade == 12 and cfg.h_values == (2.0, 4.0)


def test_unknown_key_reports_line():
    text = "[general]\nseed = 1\n\n[grids]\nper_decade = 4\nbogus = 3\n"
    with pytest.raises(UsageError, match=r"cfg.ini:6: unknown key 'bogus'.*valid: per_decade"):
        parse_config(text, "cfg.ini", env={})


def test_unknown_section():
    with pytest.raises(UsageError, match="unknown section"):
        parse_config("[extra]\na = 1\n", env={})


def test_bad_values():
    with pytest.raises(UsageError):
        parse_config("[general]\ndimension = four\n", env={})
    with pytest.raises(UsageError):
        parse_config("[general]\nsuite = nope\n", env={})
    with pytest.raises(UsageError):
        parse_config("[time]\nt_min = 5\nt_max = 2\n", env={})


def test_env_override_wins():
    cfg = parse_config("[general]\nseed = 1\n", env={"DISPLAB_GENERAL_SEED": "7", "OTHER": "x"})
    assert cfg.seed == 7
    with pytest.raises(UsageError, match="DISPLAB_GENERAL_SEED"):
        parse_config("", env={"DISPLAB_GENERAL_SEEDS": "7"})


def test_missing_file():
    with pytest.raises(UsageError):
        load_config("/nonexistent/displab.ini", env={})


@given(seed=st.integers(0, 2 ** 31), coupling=st.floats(0.001, 0.25), dim=st.sampled_from([4, 5, 6]),
       hv=st.lists(st.sampled_from([1.0, 2.0, 4.0, 8.0, 16.0, 32.0]), min_size=1, max_size=4))
def test_prop_dump_round_trip(seed, coupling, dim, hv):
    cfg = ExperimentConfig(dimension=dim, seed=seed, coupling=coupling, h_values=tuple(hv))
    back = parse_config(dump_config(cfg), env={})
    assert back.seed == seed and back.dimension == dim and back.h_values == tuple(hv)
    assert back.coupling == pytest.approx(coupling, rel=1e-15)
