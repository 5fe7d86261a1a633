import pytest

from lois_vqa.config import ConfigError, RunConfig, load_config, parse_config


def test_defaults_are_full_scale():
    c = RunConfig()
    assert (c.grid_side, c.feature_dim, c.question_dim, c.glimpses, c.answers) == (12, 2048, 768, 8, 3000)
    assert (c.lr, c.momentum, c.clip_norm, c.batch_size) == (1e-2, 0.9, 0.25, 256)


def test_parse_overrides_and_fractions():
    c = parse_config("[lois]\nlr = 0.02\nwarmup_ratio = 1/3\norder = none\nmask_padding = yes\n")
    assert c.lr == 0.02 and c.warmup_ratio == 1 / 3 and c.order == "none" and c.mask_padding


def test_to_text_round_trip():
    c = RunConfig(rank=5, dropout=0.0, mask_padding=True)
    assert parse_config(c.to_text()) == c


def test_load(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[lois]\nepochs = 3\n")
    assert load_config(p).epochs == 3


@pytest.mark.parametrize("text,field", [
    ("[lois]\nrank = 0\n", "rank"),
    ("[lois]\nrank = two\n", "rank"),
    ("[lois]\ndropout = 1\n", "dropout"),
    ("[lois]\norder = Q-I\n", "order"),
    ("[lois]\nclip_mode = sign\n", "clip_mode"),
    ("[lois]\nbogus = 1\n", "bogus"),
    ("[other]\nrank = 1\n", "<file>"),
    ("rank = 1\n", "<file>"),
    ("[lois]\nmask_padding = maybe\n", "mask_padding"),
])
def test_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == field


def test_model_and_train_configs():
    c = RunConfig(fused_dim=9, order="I-Q", epochs=4, seed=3)
    assert c.model_config().fused_dim == 9 and c.model_config().order == "I-Q"
    assert c.train_config().epochs == 4 and c.train_config().seed == 3
