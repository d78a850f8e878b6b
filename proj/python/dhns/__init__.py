"""Diffusion-generated hierarchical negatives for multimodal KG completion."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    Dataset,
    Error,
    condition,
    default_steps,
    energy,
    forward_noise,
    hardness_adaptive_loss,
    level_margin,
    level_weight,
    noise_schedule,
    positional_embedding,
    reverse_final,
    selftest,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "Error",
    "Model",
    "condition",
    "default_steps",
    "energy",
    "forward_noise",
    "hardness_adaptive_loss",
    "level_margin",
    "level_weight",
    "noise_schedule",
    "normalize_config",
    "positional_embedding",
    "reverse_final",
    "selftest",
    "train",
]


def normalize_config(config=None):
    """Full config dict with defaults filled in; raises ConfigError on bad fields."""
    return _json.loads(_core.normalize_config(_json.dumps(config or {})))


class Model:
    """A trained or restored model bound to its dataset."""

    def __init__(self, core):
        self._core = core

    @classmethod
    def load(cls, checkpoint, dataset):
        return cls(_core.Model.load(checkpoint, dataset))

    def save(self, path):
        self._core.save(path)

    @property
    def config(self):
        return _json.loads(self._core.config_json)

    @property
    def report(self):
        text = self._core.report_json
        return _json.loads(text) if text else None

    @property
    def entity_embeddings(self):
        return self._core.entity_embeddings

    def evaluate(self, split="test", joint=False):
        return _json.loads(self._core.evaluate(split, joint))

    def rank(self, head, relation, tail, side="tail"):
        return self._core.rank(head, relation, tail, side)

    def generate(self, head, relation, tail, side="tail", seed=0):
        return _json.loads(self._core.generate(head, relation, tail, side, seed))


def train(dataset, config=None):
    """Train on `dataset` with a config dict (missing keys keep defaults)."""
    return Model(_core.Model.train(dataset, _json.dumps(config or {})))
