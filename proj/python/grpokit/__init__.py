"""Python interface to the grpokit C++ core."""

import json as _json

from . import _grpokit
from ._grpokit import (
    BackendError,
    ConfigError,
    ExtractedAnswer,
    InputError,
    SchemaError,
    TemplateError,
    TrainingError,
    answers_match,
    clip_ratio,
    detection_reward,
    extract_boxed,
    extract_choice,
    extract_free_form,
    format_reward,
    inference_instruction,
    iou,
    kl_estimator,
    normalize_rewards,
    parse_tags,
    parse_verdict,
    render_prompt,
)


def _config_text(config):
    return "" if config is None else _json.dumps(config)


def grpo_loss(logp_new, logp_ref, rewards, config=None):
    """Loss terms for one group; `config` is a dict of grpo settings."""
    return _grpokit.grpo_loss(logp_new, logp_ref, rewards, _config_text(config))


def train_toy(task, steps, seed=0, config=None):
    """Per-step metrics of a toy run; `config` uses the JSON config schema."""
    return _grpokit.train_toy(task, steps, seed, _config_text(config))


def run_pipeline(input, output, max_in_flight=4, stub_seed=0, accept_rate=1.0, max_regens=0):
    """Runs the data pipeline against the deterministic stub backend."""
    return _json.loads(
        _grpokit.run_pipeline_stub(str(input), str(output), max_in_flight, stub_seed, accept_rate, max_regens)
    )


def validate_manifest(path, published=False):
    return _json.loads(_grpokit.validate_manifest(str(path), published))


def score(manifest, responses, exclude_unanswered=False):
    return _json.loads(_grpokit.score(str(manifest), str(responses), exclude_unanswered))


__all__ = [name for name in dir() if not name.startswith("_")]
