import pytest

from mango.config import (ConfigError, ExperimentConfig, METHOD_FLAGS,
                          parse_config, parse_config_text)
from mango.streams import StreamSpec

GOOD = """\
method = mango
seeds = 0,1,2
buffer_capacity = 100
batch_size = 32
output_dir = runs/demo
stream.kind = cil
stream.num_tasks = 5
stream.classes_per_task = 2
stream.samples_per_task = 625
stream.input_dim = 16
stream.noise_scale = 0.3
model.hidden_dims = 32,32
mango.eta = 0.02
mango.eta_lambda = 0.002
mango.momentum = 0.9
mango.glances = 3
mango.meta_every = 3
mango.rho_init = -7.6
"""


def test_parse_reference_hyperparameters():
    cfg = parse_config_text(GOOD)
    assert cfg.method == "mango"
    assert cfg.mango.eta == 0.02
    assert cfg.mango.rho_init == -7.6
    assert cfg.mango.momentum == 0.9
    assert cfg.mango.glances == 3
    assert cfg.mango.meta_every == 3
    assert cfg.hidden_dims == [32, 32]
    assert cfg.seeds == [0, 1, 2]
    assert cfg.num_classes == 10


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="'foo'"):
        parse_config_text(GOOD + "foo = 1\n")


def test_bad_value_names_line():
    text = GOOD.replace("mango.eta = 0.02", "mango.eta = fast")
    with pytest.raises(ConfigError, match="line 13"):
        parse_config_text(text)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text(GOOD + "method = ft\n")


def test_ft_with_zero_buffer_valid():
    text = GOOD.replace("method = mango", "method = ft") \
               .replace("buffer_capacity = 100", "buffer_capacity = 0")
    cfg = parse_config_text(text)
    assert cfg.buffer_capacity == 0


def test_zero_buffer_invalid_for_replay_methods():
    text = GOOD.replace("buffer_capacity = 100", "buffer_capacity = 0")
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_unknown_method_rejected():
    with pytest.raises(ConfigError):
        parse_config_text(GOOD.replace("method = mango", "method = sgd"))


def test_method_flags_applied():
    for method, flags in METHOD_FLAGS.items():
        text = GOOD.replace("method = mango", f"method = {method}")
        if method == "ft":
            text = text.replace("buffer_capacity = 100", "buffer_capacity = 0")
        cfg = parse_config_text(text)
        for key, value in flags.items():
            assert getattr(cfg.mango, key) == value


def test_parse_config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(GOOD)
    cfg = parse_config(path)
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.stream == StreamSpec(kind="cil", num_tasks=5, classes_per_task=2,
                                    samples_per_task=625, input_dim=16,
                                    noise_scale=0.3)


def test_comments_and_blank_lines_ignored():
    cfg = parse_config_text("# a comment\n\n" + GOOD)
    assert cfg.method == "mango"


def test_missing_equals_sign():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("method mango\n")
