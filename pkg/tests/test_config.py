import pytest

from shallowflow.config import dump_config, load_config, parse_config
from shallowflow.errors import ConfigError


def test_defaults():
    cfg = load_config(None)
    assert cfg.train.seed == 0 and cfg.train.epochs == 40
    assert cfg.model_config("sfm").n_frames == cfg.data.n_frames


def test_round_trip(tmp_path):
    cfg = parse_config({"train": {"seed": 3, "epochs": 2}, "sample": {"alpha": 2}, "bench": {"alphas": [1, 4]}})
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg))
    again = load_config(path)
    assert again == cfg
    assert again.sample.alpha == 2.0 and isinstance(again.sample.alpha, float)
    assert again.bench.alphas == (1, 4)


@pytest.mark.parametrize(
    "doc, where, reason",
    [
        ({"train": {"epochs": 1}}, "train.seed", "required field is missing"),
        ({"train": {"seed": 0}}, "train.epochs", "required field is missing"),
        ({"train": {"seed": 0, "epochs": 1, "lr": 1}}, "train.lr", "unknown key"),
        ({"train": {"seed": 0, "epochs": 1}, "optim": {}}, "optim", "unknown section"),
        ({"train": {"seed": 0, "epochs": 1}, "model": {"n_frames": 8}}, "model.n_frames", "unknown key"),
        ({"train": {"seed": "zero", "epochs": 1}}, "train.seed", "expected an integer"),
        ({"train": {"seed": 0, "epochs": 1, "start_grad": 1}}, "train.seed" if False else "train.start_grad", "true/false"),
    ],
)
def test_rejections_name_the_field(doc, where, reason):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert where in str(exc.value) and reason in str(exc.value)


def test_value_validation_is_a_config_error():
    with pytest.raises(ConfigError):
        parse_config({"train": {"seed": 0, "epochs": 1}, "sample": {"alpha": 0.5}})
    with pytest.raises(ConfigError):
        parse_config({"train": {"seed": 0, "epochs": 1}, "data": {"kind": "spirals"}})


def test_bad_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("train: [unclosed")
    with pytest.raises(ConfigError):
        load_config(path)
