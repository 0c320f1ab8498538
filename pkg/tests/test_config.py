import json

import pytest

from sparsecl.config import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)


def minimal_dict(**overrides):
    raw = {"name": "t", "method": "ssd"}
    raw.update(overrides)
    return raw


class TestConfigFromDict:
    def test_defaults_materialize(self):
        cfg = config_from_dict(minimal_dict())
        assert cfg.data.num_tasks == 5
        assert cfg.model.k == 10
        assert cfg.train.distill.alpha == 0.7
        assert cfg.seeds == [0]

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown key 'metod'"):
            config_from_dict({"metod": "ssd"})

    def test_unknown_nested_key_names_path(self):
        raw = minimal_dict(train={"distill": {"alfa": 0.5}})
        with pytest.raises(ConfigError, match="train.distill.alfa"):
            config_from_dict(raw)

    def test_invalid_method(self):
        with pytest.raises(ConfigError, match="method"):
            config_from_dict(minimal_dict(method="magic"))

    def test_ewc_lambda_requires_ewc_method(self):
        with pytest.raises(ConfigError, match="ewc_lambda"):
            config_from_dict(minimal_dict(train={"ewc_lambda": 1.0}))

    def test_ewc_method_requires_lambda(self):
        with pytest.raises(ConfigError, match="ewc_lambda"):
            config_from_dict(minimal_dict(method="ssd_ewc"))

    def test_ewc_method_accepted_with_lambda(self):
        cfg = config_from_dict(
            minimal_dict(method="ssd_ewc", train={"ewc_lambda": 2.0})
        )
        assert cfg.train.ewc_lambda == 2.0

    def test_nested_value_error_surfaces_as_config_error(self):
        raw = minimal_dict(train={"distill": {"alpha": 3.0}})
        with pytest.raises(ConfigError):
            config_from_dict(raw)

    def test_empty_seeds_rejected(self):
        with pytest.raises(ConfigError, match="seeds"):
            config_from_dict(minimal_dict(seeds=[]))

    def test_non_dict_nested_section(self):
        with pytest.raises(ConfigError, match="expected an object"):
            config_from_dict(minimal_dict(train="fast"))


class TestResolvedTrain:
    def test_method_folds_into_flags(self):
        cfg = config_from_dict(minimal_dict(method="sdmlp_baseline"))
        train = cfg.resolved_train(seed=3)
        assert train.seed == 3
        assert not train.distill_enabled
        assert not train.ewc_enabled

    def test_ssd_ewc_enables_both(self):
        cfg = config_from_dict(
            minimal_dict(method="ssd_ewc", train={"ewc_lambda": 1.0})
        )
        train = cfg.resolved_train(seed=0)
        assert train.distill_enabled and train.ewc_enabled

    def test_resolved_copy_is_independent(self):
        cfg = config_from_dict(minimal_dict())
        train = cfg.resolved_train(seed=1)
        train.distill.alpha = 0.0
        assert cfg.train.distill.alpha == 0.7


class TestRoundTrip:
    def test_dict_round_trip(self):
        cfg = config_from_dict(minimal_dict(seeds=[1, 2]))
        raw = config_to_dict(cfg)
        again = config_from_dict(raw)
        assert again == cfg

    def test_load_config_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(minimal_dict()))
        cfg = load_config(path)
        assert isinstance(cfg, ExperimentConfig)
        assert cfg.method == "ssd"

    def test_load_config_invalid_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)
