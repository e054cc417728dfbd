import json

import pytest

from ngc.config import ConfigError, config_from_dict, load_config, save_config


def test_defaults_fill_missing_sections():
    cfg = config_from_dict({"seed": 3})
    assert cfg.seed == 3 and cfg.graph.k == 10 and cfg.propagation.alpha == 0.5
    assert cfg.train.eta == 0.8 and cfg.detect.zeta == 0.5 and cfg.loss.tau1 == 0.3


def test_round_trip(tmp_path):
    cfg = config_from_dict({"seed": 9, "graph": {"k": 7, "symmetrize": "mean"}, "synthetic": {"num_classes": 2, "asym_mapping": [1, 0]}},
                           tmp_path)
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg


@pytest.mark.parametrize(
    "raw, path",
    [
        ({}, "seed"),
        ({"seed": 1, "graph": {"kk": 3}}, "graph.kk"),
        ({"seed": 1, "extra": 1}, "extra"),
        ({"seed": 1, "train": {"epochs": "ten"}}, "train.epochs"),
        ({"seed": 1.5}, "seed"),
        ({"seed": 1, "loss": {"tau1": 0}}, "loss"),
        ({"seed": 1, "propagation": {"alpha": 1.0}}, "propagation"),
        ({"seed": 1, "detect": {"zeta": 2}}, "detect.zeta"),
        ({"seed": 1, "graph": 3}, "graph"),
        ({"seed": 1, "train": {"normalize_soft_labels": 1}}, "train.normalize_soft_labels"),
        ({"seed": 1, "synthetic": {"asym_mapping": "swap"}}, "synthetic.asym_mapping"),
    ],
)
def test_errors_name_the_field(raw, path):
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert str(info.value).startswith(path)


def test_bad_json_reports_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "seed": 1,\n  oops\n}')
    with pytest.raises(ConfigError, match=":3:"):
        load_config(p)


def test_paths_resolve_against_config_dir(tmp_path):
    p = tmp_path / "sub" / "c.json"
    p.parent.mkdir()
    p.write_text(json.dumps({"seed": 0, "data": {"train_csv": "a.csv"}}))
    cfg = load_config(p)
    assert cfg.resolve(cfg.data.train_csv) == p.parent / "a.csv"
    assert cfg.resolve("/abs/x.csv").as_posix() == "/abs/x.csv"
