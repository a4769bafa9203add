"""Tool selection by generated task descriptions."""

import json

from ._core import (
    ConfigError,
    DataError,
    Error,
    RemoteError,
    canonical_json,
    combine_modalities,
    dpo_loss,
    dpo_loss_grad,
    dpo_margin,
    evaluate_mock_json,
    fnv1a64,
    hash_embed,
    rank_text,
    run_cli,
    train_count,
    validate_tool,
)


def evaluate_mock(tools_path, queries_path, noise=0.0, seed=0, dim=256, format="json"):
    """Evaluate with the mock generator and local embedder; returns the report as a dict."""
    return json.loads(evaluate_mock_json(str(tools_path), str(queries_path), noise, seed, dim, format))

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "RemoteError",
    "canonical_json",
    "combine_modalities",
    "dpo_loss",
    "dpo_loss_grad",
    "dpo_margin",
    "evaluate_mock",
    "fnv1a64",
    "hash_embed",
    "rank_text",
    "run_cli",
    "train_count",
    "validate_tool",
]
