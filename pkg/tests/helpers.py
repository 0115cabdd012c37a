"""Shared builders: tiny vocabularies, stub language models, a small on-disk
experiment directory.  Imported by the test modules, never collected."""

import json
from pathlib import Path

import numpy as np

from decodelab.corpus import Vocabulary
from decodelab.dist import ProbDist


def make_vocab(*words: str) -> Vocabulary:
    return Vocabulary(["<s>", "</s>", "<unk>", *words])


def pd(*vals: float) -> ProbDist:
    return ProbDist(np.asarray(vals, dtype=np.float64))


class FuncLM:
    """Language-model stub: a vocabulary plus a context -> ProbDist callable."""

    def __init__(self, vocab, fn):
        self.vocab = vocab
        self._fn = fn

    def next_distribution(self, context):
        return self._fn(tuple(context))


def const_lm(vocab, probs) -> FuncLM:
    d = pd(*probs)
    return FuncLM(vocab, lambda ctx: d)


TINY_CORPUS = [
    "the cat sat on the mat .",
    "the dog ran to the gate .",
    "a cat ran past the dog .",
    "the cat and the dog sat .",
    "a dog sat on the mat .",
    "the cat ran to the mat .",
]

TINY_PROMPTS = [
    ("the cat", "the cat sat on the mat ."),
    ("dog|ran", "the dog ran to the gate ."),
    ("mat", "a dog sat on the mat ."),
]


def tiny_config_doc(**overrides) -> dict:
    doc = {
        "version": 1,
        "name": "tiny",
        "corpus": "corpus.txt",
        "prompts": "prompts.tsv",
        "output_dir": "out",
        "seeds": [1, 2],
        "max_length": 8,
        "samples_per_prompt": 1,
        "metrics": ["dist2", "rep2", "bleu2", "ppl", "coverage"],
        "lm": {"order": 2, "add_k": 0.5},
        "strategies": [
            {"name": "greedy", "strategy": "greedy"},
            {"name": "temperature", "strategy": "temperature", "params": {"temperature": 0.7}},
        ],
        "sweep": {"lengths": [4, 8], "strategies": ["greedy"], "metric_n": 2},
    }
    doc.update(overrides)
    return doc


def write_experiment(tmp_path: Path, **overrides) -> Path:
    """Write corpus.txt, prompts.tsv, and config.json under tmp_path."""
    (tmp_path / "corpus.txt").write_text("\n".join(TINY_CORPUS) + "\n", encoding="utf-8")
    rows = [f"{concept}\t{reference}" for concept, reference in TINY_PROMPTS]
    (tmp_path / "prompts.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config_doc(**overrides), indent=1), encoding="utf-8")
    return path
