"""Configuration parsing: defaults, rejection of malformed documents."""

import json

import pytest

from diffinfo.config import ConfigError, load_config, parse_config

MINIMAL = {"seed": 7}

FULL = {
    "seed": 3,
    "output": {"dir": "results"},
    "bits": True,
    "data": {
        "gmm": {
            "components": [
                {"weight": 0.5, "mean": [-4.0], "cov": [[1.0]]},
                {"weight": 0.5, "mean": [4.0], "cov": [[1.0]]},
            ],
            "condition_map": {"neg": [0], "pos": [1]},
        },
        "n_samples": 16,
        "component_conditions": [{"label": "neg"}, {"label": "pos", "context": ["ctx"]}],
    },
    "sampler": {"loc": 1.0, "scale": 2.0, "clip": 3.0, "n_snr": 50, "n_eps": 2},
    "solver": {"n_steps": 25, "alpha_min": -5.0, "alpha_max": 7.0},
    "denoiser": {"kind": "closed_form"},
    "estimate": {"kind": "mi", "estimator_kind": "pointwise_s"},
    "rank": {"n_samples": 10, "candidates": ["neg", "pos"]},
    "intervene": {"n_samples": 5, "swap": {"neg": "pos", "pos": "neg"}},
    "train": {"hidden": [8], "n_steps": 10, "batch_size": 4},
    "oracle": {"op": "gaussian_mi", "correlation": 0.8},
}


class TestDefaults:
    def test_minimal_config_gets_standard_hyperparameters(self):
        cfg = parse_config(MINIMAL)
        assert cfg.seed == 7
        assert (cfg.sampler.loc, cfg.sampler.scale, cfg.sampler.clip) == (1.0, 2.0, 3.0)
        assert cfg.sampler.n_draws == 100
        assert cfg.n_eps == 4
        assert cfg.solver.n_steps == 100
        assert (cfg.solver.alpha_min, cfg.solver.alpha_max) == (-5.0, 7.0)
        assert cfg.denoiser.kind == "closed_form"
        assert cfg.bits is False

    def test_full_config_round_trips_through_resolved(self):
        cfg = parse_config(FULL)
        resolved = cfg.resolved()
        assert resolved["sampler"]["n_snr"] == 50
        assert resolved["estimate"] == {"kind": "mi", "estimator_kind": "pointwise_s"}
        assert resolved["data"]["gmm"]["condition_map"] == {"neg": [0], "pos": [1]}
        assert resolved["train"]["hidden"] == [8]
        # the resolved document is itself a valid configuration
        reparsed = parse_config(json.loads(json.dumps(resolved)))
        assert reparsed.sampler == cfg.sampler
        assert reparsed.estimate == cfg.estimate


class TestRejections:
    def test_missing_seed_named(self):
        with pytest.raises(ConfigError, match="'seed'"):
            parse_config({})

    def test_unknown_top_level_key_named(self):
        with pytest.raises(ConfigError, match="samplerr"):
            parse_config({"seed": 1, "samplerr": {}})

    def test_unknown_nested_key_named(self):
        with pytest.raises(ConfigError, match="sampler"):
            parse_config({"seed": 1, "sampler": {"locc": 2.0}})

    def test_wrong_types_rejected(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config({"seed": "nope"})
        with pytest.raises(ConfigError, match="n_snr"):
            parse_config({"seed": 1, "sampler": {"n_snr": 2.5}})
        with pytest.raises(ConfigError, match="bits"):
            parse_config({"seed": 1, "bits": "yes"})

    def test_invalid_sampler_values_rejected(self):
        with pytest.raises(ConfigError, match="sampler"):
            parse_config({"seed": 1, "sampler": {"scale": -1.0}})

    def test_estimate_kind_validated(self):
        with pytest.raises(ConfigError, match="estimate.kind"):
            parse_config({"seed": 1, "estimate": {"kind": "entropy"}})

    def test_gmm_validation_propagates(self):
        bad = {
            "seed": 1,
            "data": {"gmm": {"components": [{"weight": 0.4, "mean": [0.0], "cov": [[1.0]]}]}},
        }
        with pytest.raises(ConfigError, match="data.gmm"):
            parse_config(bad)

    def test_gmm_and_checkpoint_exclusive(self):
        bad = {
            "seed": 1,
            "data": {
                "gmm": {"components": [{"weight": 1.0, "mean": [0.0], "cov": [[1.0]]}]},
                "checkpoint": "x.ckpt",
            },
        }
        with pytest.raises(ConfigError, match="not both"):
            parse_config(bad)

    def test_oracle_op_params_validated(self):
        with pytest.raises(ConfigError, match="oracle.op"):
            parse_config({"seed": 1, "oracle": {"op": "magic"}})
        with pytest.raises(ConfigError, match="oracle"):
            parse_config({"seed": 1, "oracle": {"op": "gaussian_mi", "rho": 0.8}})

    def test_intervene_swap_required(self):
        with pytest.raises(ConfigError, match="swap"):
            parse_config({"seed": 1, "intervene": {"n_samples": 5}})

    def test_file_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            load_config(bad)
