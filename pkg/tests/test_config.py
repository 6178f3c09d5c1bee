from __future__ import annotations

import pytest
import yaml

from schemqa.config import EngineConfig, load_config
from schemqa.errors import ConfigError


def write_config(tmp_path, payload: dict):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(payload))
    return path


def test_defaults():
    config = load_config(None, env={})
    assert config.retrieval.n_retrieve == 8
    assert config.retrieval.k_rerank == 4
    assert config.selection.k_target == 2
    assert config.loop.max_iters == 3
    assert config.loop.tau == 0.8
    assert config.corpus.window_words == 180
    assert config.corpus.stride_words == 90
    assert config.backend.kind == "scripted"


def test_file_overrides_defaults(tmp_path):
    path = write_config(tmp_path, {"retrieval": {"n_retrieve": 16}, "loop": {"tau": 0.5}})
    config = load_config(path, env={})
    assert config.retrieval.n_retrieve == 16
    assert config.loop.tau == 0.5
    assert config.retrieval.k_rerank == 4  # untouched default


def test_env_overrides_file(tmp_path):
    path = write_config(tmp_path, {"retrieval": {"n_retrieve": 16}})
    config = load_config(path, env={"SCHEMQA_RETRIEVAL_N_RETRIEVE": "32"})
    assert config.retrieval.n_retrieve == 32


def test_cli_overrides_env(tmp_path):
    path = write_config(tmp_path, {"retrieval": {"n_retrieve": 16}})
    config = load_config(
        path,
        env={"SCHEMQA_RETRIEVAL_N_RETRIEVE": "32"},
        overrides={"retrieval": {"n_retrieve": 64}},
    )
    assert config.retrieval.n_retrieve == 64


def test_precedence_matrix(tmp_path):
    """defaults < file < env < flags, checked for every adjacent pair."""
    layers = {
        "file": {"loop": {"max_iters": 5}},
        "env": {"SCHEMQA_LOOP_MAX_ITERS": "6"},
        "flags": {"loop": {"max_iters": 7}},
    }
    # default only
    assert load_config(None, env={}).loop.max_iters == 3
    # file beats default
    path = write_config(tmp_path, layers["file"])
    assert load_config(path, env={}).loop.max_iters == 5
    # env beats file
    assert load_config(path, env=layers["env"]).loop.max_iters == 6
    # flags beat env
    assert load_config(path, env=layers["env"], overrides=layers["flags"]).loop.max_iters == 7
    # env without file still beats default
    assert load_config(None, env=layers["env"]).loop.max_iters == 6


def test_env_type_coercion():
    config = load_config(
        None,
        env={
            "SCHEMQA_LOOP_TAU": "0.25",
            "SCHEMQA_BACKEND_STRICT": "true",
            "SCHEMQA_MEMORY_PROMOTE_ACCEPTED": "no",
        },
    )
    assert config.loop.tau == 0.25
    assert config.backend.strict is True
    assert config.memory.promote_accepted is False


def test_unknown_section_rejected(tmp_path):
    path = write_config(tmp_path, {"retrival": {"n_retrieve": 4}})
    with pytest.raises(ConfigError):
        load_config(path, env={})


def test_unknown_field_rejected(tmp_path):
    path = write_config(tmp_path, {"retrieval": {"n_retreev": 4}})
    with pytest.raises(ConfigError):
        load_config(path, env={})


def test_unknown_env_field_rejected():
    with pytest.raises(ConfigError):
        load_config(None, env={"SCHEMQA_LOOP_MAX_LOOPS": "4"})


@pytest.mark.parametrize(
    "overrides",
    [
        {"retrieval": {"k_rerank": 9}},  # k_rerank > n_retrieve
        {"loop": {"tau": 1.5}},
        {"selection": {"k_target": 9}},
        {"retrieval": {"sim_fn": "EUCLID"}},
        {"backend": {"kind": "carrier-pigeon"}},
        {"loop": {"max_react_steps": 0}},
    ],
)
def test_validation_failures(overrides):
    with pytest.raises(ConfigError):
        load_config(None, env={}, overrides=overrides)


def test_bad_env_value():
    with pytest.raises(ConfigError):
        load_config(None, env={"SCHEMQA_RETRIEVAL_N_RETRIEVE": "plenty"})


def test_config_object_validate_direct():
    config = EngineConfig()
    config.retrieval.k_rerank = 99
    with pytest.raises(ConfigError):
        config.validate()


def test_json_config_file_accepted(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"loop": {"max_iters": 1}}')
    assert load_config(path, env={}).loop.max_iters == 1
