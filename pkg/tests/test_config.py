import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rkhscert._json import ConfigError
from rkhscert.config import RunConfig
from rkhscert.norm_certifier import Budget, Tolerances


def test_empty_config_is_all_defaults():
    cfg = RunConfig.from_json({})
    assert cfg == RunConfig()
    assert cfg.budget() == Budget()
    assert cfg.certifier_tolerances() == Tolerances()


configs = st.fixed_dictionaries({}, optional={
    "preset": st.sampled_from(["mobius-half", "identity-disc"]),
    "filter": st.text(max_size=8),
    "points": st.just("pts.csv"),
    "kernel": st.just({"node": "hardy_disc"}),
    "sampling": st.fixed_dictionaries({}, optional={
        "strategy": st.sampled_from(["grid", "uniform_random", "boundary_biased"]),
        "size": st.integers(1, 500),
        "stages": st.lists(st.integers(1, 50), min_size=1, max_size=5, unique=True).map(
            lambda v: sorted(v)),
        "seed": st.integers(0, 2 ** 64 - 1),
        "cap": st.one_of(st.none(), st.floats(1e-12, 0.5)),
    }),
    "tolerances": st.fixed_dictionaries({}, optional={
        "psd_tol": st.floats(1e-15, 1e-3), "ridge": st.floats(0, 1e-6), "oracle_max_iter": st.integers(1, 10)}),
    "oracle": st.fixed_dictionaries({}, optional={"schedule": st.lists(st.integers(1, 400), min_size=1)}),
    "output": st.fixed_dictionaries({}, optional={"dir": st.text(min_size=1, max_size=10)}),
})


@given(configs)
def test_round_trip(obj):
    cfg = RunConfig.from_json(obj)
    text = cfg.dumps()
    again = RunConfig.from_json(json.loads(text))
    assert again == cfg
    assert again.dumps() == text


@pytest.mark.parametrize("obj,path", [
    ({"sampling": {"sed": 1}}, "$.sampling.sed"),
    ({"tolerances": {"psd_tol": "small"}}, "$.tolerances.psd_tol"),
    ({"sampling": {"stages": [50, 25]}}, "$.sampling.stages"),
    ({"sampling": {"seed": -1}}, "$.sampling.seed"),
    ({"sampling": {"seed": 1.5}}, "$.sampling.seed"),
    ({"sampling": {"strategy": "spiral"}}, "$.sampling.strategy"),
    ({"sampling": {"cap": 2.0}}, "$.sampling.cap"),
    ({"oracle": {"schedule": []}}, "$.oracle.schedule"),
    ({"preset": 3}, "$.preset"),
    ({"colour": "red"}, "$.colour"),
    ({"output": []}, "$.output"),
])
def test_errors_name_the_json_path(obj, path):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_json(obj)
    assert info.value.path == path
    assert str(info.value).startswith(path)


def test_overrides_and_cap():
    cfg = RunConfig().with_overrides(seed=5, stages=[3, 6], tol=1e-6, out="x", preset="p", filter="f")
    assert cfg.sampling.seed == 5 and cfg.sampling.stages == (3, 6)
    assert cfg.tolerances.psd_tol == 1e-6 and cfg.output.dir == "x"
    assert cfg.budget(cap=0.1).cap == 0.1
    assert RunConfig.from_json({"sampling": {"cap": 1e-4}}).budget(cap=0.1).cap == 1e-4
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(stages=[5, 5])


def test_load_reports_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.load(p)
