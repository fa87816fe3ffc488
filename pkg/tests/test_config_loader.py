import numpy as np

from pytest                 import mark
from pytest                 import raises

from src.config_loader  import ExperimentConfig
from src.config_loader  import apply_overrides
from src.config_loader  import load_defaults
from src.config_loader  import load_experiment_config
from src.config_loader  import parse_flat_config
from src.config_loader  import parse_value
from src.ctmc_core      import AlphaFamily
from src.ctmc_core      import ScheduleKind
from src.errors         import ConfigError
from src.objectives     import ObjectiveKind
from src.samplers       import SamplerScheme


def test_parse_flat_config_skips_comments_and_quotes():
    text = "# comment\n\nseed = 3\nschedule.kind = 'masked'\n  objective=\"kl\"  \n"
    assert parse_flat_config(text) == {"seed": "3", "schedule.kind": "masked", "objective": "kl"}


def test_parse_flat_config_reports_line():
    with raises(ConfigError, match="<config>:2"):
        parse_flat_config("seed = 1\nno equals sign here\n")


@mark.parametrize("raw expected".split(),
                  (("3",           3),
                   ("0.25",        0.25),
                   ("true",        True),
                   ("null",        None),
                   ("",            None),
                   ("[0.5, 0.5]",  [0.5, 0.5]),
                   ("tau_leaping", "tau_leaping")))
def test_parse_value(raw, expected):
    assert parse_value(raw) == expected


def test_defaults_file_loads():
    defaults = load_defaults()
    assert defaults["seed"] is None
    assert defaults["objective"] == "cond_stable"
    assert defaults["optimizer"]["shards"] >= 1


def test_overrides_set_nested_keys_without_touching_defaults():
    defaults = load_defaults()
    merged = apply_overrides(defaults, {"optimizer.learning_rate": "0.5", "seed": "4"})
    assert merged["optimizer"]["learning_rate"] == 0.5
    assert defaults["optimizer"]["learning_rate"] == 0.01


@mark.parametrize("key", ("optimizer.lr", "schedule", "nothing.here", "seed.value"))
def test_unknown_keys_are_rejected(key):
    with raises(ConfigError):
        apply_overrides(load_defaults(), {key: "1"})


def test_seed_is_required():
    with raises(ConfigError, match="seed"):
        load_experiment_config()
    with raises(ConfigError):
        load_experiment_config(overrides={"seed": "-1"})
    with raises(ConfigError):
        load_experiment_config(overrides={"seed": "1.5"})


def test_file_then_overrides(toy_conf):
    config = load_experiment_config(toy_conf, overrides={"optimizer.steps": 5, "objective": None})
    assert config.seed == 7
    assert config.optimizer["steps"] == 5
    assert config.objective is ObjectiveKind.COND_STABLE
    assert config.schedule.kind is ScheduleKind.UNIFORM
    assert config.schedule.family is AlphaFamily.LINEAR
    assert config.sampler.scheme is SamplerScheme.TAU_LEAPING
    assert config.sampler.seed == 7
    np.testing.assert_allclose(config.build_dataset().p_data(), [0.7, 0.3, 0.0])


@mark.parametrize("key value".split(),
                  (("objective",             "elbo"),
                   ("schedule.kind",         "absorbing"),
                   ("schedule.num_states",   "1"),
                   ("model.variant",         "transformer"),
                   ("sampler.scheme",        "midpoint"),
                   ("sampler.steps",         "0"),
                   ("self_correct.temperature", "0"),
                   ("optimizer.lr_schedule", "cosine"),
                   ("logging.level",         "LOUD")))
def test_invalid_values(key, value):
    with raises(ConfigError):
        load_experiment_config(overrides={"seed": "1", key: value})


def test_with_overrides_and_flat_round_trip(tmp_path, toy_conf):
    config = load_experiment_config(toy_conf)
    changed = config.with_overrides(optimizer__workers=3, schedule__family="cosine")
    assert changed.optimizer["workers"] == 3
    assert changed.schedule.family is AlphaFamily.COSINE
    assert config.optimizer["workers"] == 1
    dumped = tmp_path / "dump.conf"
    dumped.write_text(changed.to_flat())
    again = load_experiment_config(dumped)
    assert again.values == changed.values


def test_builders(toy_conf):
    config = load_experiment_config(toy_conf, overrides={"model.variant": "mlp", "model.seq_len": 2})
    model = config.build_model()
    assert model.num_states == 3 and model.seq_len == 2
    assert model.seed == 7
    assert config.log_level == 20
    assert config.wall_clock is False


def test_from_dict_needs_every_section():
    with raises(ConfigError):
        ExperimentConfig.from_dict({"seed": 1, "objective": "kl"})
