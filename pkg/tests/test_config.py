from pathlib import Path

import pytest

from ipflab.config import ConfigError, ExperimentConfig

ROOT = Path(__file__).resolve().parents[1]


def test_defaults():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.ipf["u"] == [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] and cfg.ipf["T"] == 30
    assert cfg.ipf["sample_size"] == 200
    # 3 engines x {single, closest, weighted, uniform}
    assert sum(len(e["strategies"]) for e in cfg.engines) == 12


def test_bundled_configs_load():
    proto = ExperimentConfig.load(ROOT / "configs" / "protocol.yaml")
    assert proto == ExperimentConfig.from_dict({})
    quick = ExperimentConfig.load(ROOT / "configs" / "quick.yaml")
    assert quick.ipf["u"] == [0.5, 1.0] and quick.dataset["name"] == "german"


@pytest.mark.parametrize("d, match", [
    ({"ipf": {"u": [0.0]}}, "u must"),
    ({"ipf": {"u": [1.2]}}, "u must"),
    ({"ipf": {"u": []}}, "u must"),
    ({"ipf": {"T": 0}}, "T must"),
    ({"ipf": {"target_p": 0.4}}, "target_p"),
    ({"ipf": {"sample_size": 0}}, "sample_size"),
    ({"model": {"kind": "svm"}}, "model kind"),
    ({"engines": []}, "no engines"),
    ({"engines": [{"name": "dice"}]}, "unknown engine"),
    ({"engines": [{"name": "random", "k": 0}]}, "k must"),
    ({"engines": [{"name": "random", "k": 20, "strategies": ["best"]}]}, "unknown strategy"),
    ({"engines": [{"name": "random", "k": 20, "strategies": ["single"]}]}, "requires k = 1"),
    ({"dataset": {"name": None}}, "bundled name or a path"),
    ({"plots": {}}, "unknown config section"),
])
def test_validation(d, match):
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.from_dict(d)


def test_groups_checked():
    cfg = ExperimentConfig.from_dict({"fairness": {"groups": ["gender", "height"]}})
    with pytest.raises(ConfigError, match="height"):
        cfg.check_groups(["gender", "race"])
    assert ExperimentConfig.from_dict({}).check_groups(["gender", "race"]) == ["gender", "race"]


def test_override_and_digest():
    cfg = ExperimentConfig.from_dict({})
    o = cfg.override(**{"ipf.master_seed": 3, "dataset.name": None})
    assert o.ipf["master_seed"] == 3 and o.dataset["name"] == "adult"
    assert o.digest() != cfg.digest() and cfg.digest() == ExperimentConfig.from_dict({}).digest()
    with pytest.raises(ConfigError):
        cfg.override(**{"engines.k": 3})
    with pytest.raises(ConfigError):
        cfg.override(**{"ipf.u": [2.0]})


def test_malformed_files(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("ipf: [unclosed\n")
    with pytest.raises(ConfigError, match="malformed"):
        ExperimentConfig.load(p)
    p.write_text("- a\n- b\n")
    with pytest.raises(ConfigError, match="mapping"):
        ExperimentConfig.load(p)
    with pytest.raises(ConfigError, match="cannot read"):
        ExperimentConfig.load(tmp_path / "none.yaml")
