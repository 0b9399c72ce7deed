import json

import pytest

import settings
from settings import ConfigError, SuiteConfig, load_suite_config


@pytest.fixture
def clean_env(monkeypatch):
    for name in ("GEOLAB_WORKERS", "GEOLAB_FD_STEP", "GEOLAB_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    return monkeypatch


def test_defaults_without_environment(clean_env):
    config = SuiteConfig(bundle="flat_product")
    assert config.workers == settings.DEFAULT_WORKERS
    assert config.fd_step == 1e-4
    assert config.suites == list(settings.identity_registry.SUITES)
    assert settings.get_log_level() == "WARNING"


def test_environment_overrides_defaults(clean_env):
    clean_env.setenv("GEOLAB_WORKERS", "2")
    clean_env.setenv("GEOLAB_FD_STEP", "1e-3")
    clean_env.setenv("GEOLAB_LOG_LEVEL", "debug")
    config = SuiteConfig(bundle="flat_product")
    assert config.workers == 2
    assert config.fd_step == 1e-3
    assert settings.get_log_level() == "DEBUG"


@pytest.mark.parametrize("name,value", [("GEOLAB_WORKERS", "many"), ("GEOLAB_WORKERS", "0"),
                                        ("GEOLAB_FD_STEP", "-1e-4"), ("GEOLAB_FD_STEP", "tiny")])
def test_bad_environment_values(clean_env, name, value):
    clean_env.setenv(name, value)
    with pytest.raises(ConfigError):
        SuiteConfig(bundle="flat_product")


@pytest.mark.parametrize("overrides", [
    {'suites': ['cshd', 'curvature']},
    {'suites': []},
    {'points': 0},
    {'workers': 0},
    {'geodesic_steps': 10},
    {'fd_step': 0.0},
    {'tolerances': {'cshd': -1.0}},
    {'tolerances': {'nope': 1e-3}},
    {'schema': 'suite_config.v0'},
])
def test_invalid_configs_rejected(clean_env, overrides):
    with pytest.raises(ConfigError):
        SuiteConfig(bundle="flat_product", **overrides)


def test_from_dict_accepts_comma_suites(clean_env):
    config = SuiteConfig.from_dict({'bundle': 'hyperbolic:n=3', 'suites': 'cshd, torsion'})
    assert config.suites == ['cshd', 'torsion']


def test_from_dict_rejects_unknown_and_missing_fields(clean_env):
    with pytest.raises(ConfigError):
        SuiteConfig.from_dict({'bundle': 'flat_product', 'colour': 'red'})
    with pytest.raises(ConfigError):
        SuiteConfig.from_dict({'suites': ['cshd']})


def test_merged_ignores_unset_flags(clean_env):
    config = SuiteConfig(bundle="flat_product", points=7)
    merged = config.merged(points=None, seed=5, bundle=None)
    assert merged.points == 7 and merged.seed == 5 and merged.bundle == "flat_product"
    with pytest.raises(ConfigError):
        config.merged(points=-1)


def test_load_suite_config(clean_env, tmp_path):
    path = tmp_path / "suite.json"
    payload = {'schema': 'suite_config.v1', 'bundle': 'flat_product', 'suites': ['cshd'], 'points': 3,
               'tolerances': {'cshd': 1e-6}}
    path.write_text(json.dumps(payload))
    config = load_suite_config(str(path))
    assert config.to_dict()['tolerances'] == {'cshd': 1e-6}
    assert config.points == 3


def test_load_suite_config_errors(clean_env, tmp_path):
    with pytest.raises(ConfigError):
        load_suite_config(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        load_suite_config(str(broken))
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_suite_config(str(listed))


def test_example_configs_load(clean_env):
    from pathlib import Path
    root = Path(__file__).resolve().parent.parent / "configs"
    for path in sorted(root.glob("*.json")):
        assert load_suite_config(str(path)).bundle


def test_unknown_log_level():
    with pytest.raises(ConfigError):
        settings.configure_logging("LOUD")
    settings.configure_logging("WARNING")
