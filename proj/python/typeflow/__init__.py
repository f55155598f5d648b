"""Probabilistic type inference for a JavaScript/TypeScript subset.

Source files become type flow graphs; a family of graph neural networks
ranks a fixed type vocabulary for every identifier. The heavy lifting lives
in the compiled `_core` extension; these wrappers parse its JSON payloads
into plain dicts.
"""

import json as _json

from . import _core
from ._core import DataError, InternalError, Model as _CoreModel

__version__ = "0.1.0"

PRESETS = tuple(_core.presets())


def preset_display_name(preset):
    """Human-readable name of a model preset (e.g. 'rgnn-ns-ctx')."""
    return _core.preset_display_name(preset)


def ast(source):
    """Parse one source file and return its AST as a dict."""
    return _json.loads(_core.ast_json(source))


def tfg(source, file_id="<memory>", max_tokens=0):
    """Extract the type flow graph of one source file as a dict."""
    return _json.loads(_core.tfg_json(source, file_id, max_tokens))


def validate(source, file_id="<memory>"):
    """Structural findings for one file's graph; an empty list means sound."""
    return list(_core.validate_source(source, file_id))


def gen_corpus(out_dir, spec=None, **overrides):
    """Write a synthetic labeled corpus (plus manifest.json) to `out_dir`.

    `spec` is a dict using the corpus-spec schema; keyword overrides win.
    Returns the number of files written.
    """
    merged = dict(spec or {})
    weights = dict(merged.pop("weights", {}))
    for key, value in overrides.items():
        if key in ("literal", "property_flow", "call_return", "name_hint"):
            weights[key] = value
        else:
            merged[key] = value
    if weights:
        merged["weights"] = weights
    return _core.gen_corpus(_json.dumps(merged), out_dir)


def train(data_dir, config, out, epochs=60, batch=64, seed=1, K=-1, lr=1e-3,
          weight_decay=0.01, log="", progress=False):
    """Train a preset on a dataset directory and save the best checkpoint.

    Returns {"best": {...}, "history": [per-epoch stats]}.
    """
    return _json.loads(_core.train_json(
        data_dir, config, out, epochs, batch, seed, K, lr, weight_decay, log,
        progress))


def grad_check(config, seed=1, eps=1e-4, samples=200):
    """Compare backward-pass gradients against central finite differences."""
    return _json.loads(_core.grad_check_json(config, seed, eps, samples))


class Model:
    """A trained checkpoint: prediction, evaluation, and throughput."""

    def __init__(self, core_model):
        self._m = core_model

    @classmethod
    def load(cls, path):
        return cls(_CoreModel.load(path))

    def save(self, path):
        self._m.save(path)

    @property
    def preset(self):
        return self._m.preset

    @property
    def config(self):
        return _json.loads(self._m.config_json)

    @property
    def types(self):
        return list(self._m.types)

    @property
    def epoch(self):
        return self._m.epoch

    @property
    def validation_loss(self):
        return self._m.validation_loss

    def predict(self, source, file_id="<memory>", topk=5):
        """Ranked types with probabilities for every identifier in `source`."""
        return _json.loads(self._m.predict_json(source, file_id, topk))

    def evaluate(self, data_dir, split="test", batch=64):
        """Accuracy report (all / top10 / rest categories) on a dataset split."""
        return _json.loads(self._m.eval_json(data_dir, split, batch))

    def bench(self, data_dir, split="test", batch=64, repeats=6):
        """Prediction throughput (files/second, mean and std over repeats)."""
        return _json.loads(self._m.bench_json(data_dir, split, batch, repeats))
