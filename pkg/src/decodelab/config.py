"""Experiment configuration: a strict JSON schema plus named presets.

Unknown keys anywhere in the document are rejected so typos fail loudly
instead of silently running defaults.  Input paths resolve relative to the
config file; the output directory resolves relative to the working
directory.
"""

from __future__ import annotations

import json
import re

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

CONFIG_VERSION = 1

# Report columns a config may select.  Lower-is-better metrics are repetition
# and perplexity; everything else rewards larger values.
METRIC_KEYS = (
    "dist2",
    "dist4",
    "uniq2",
    "uniq4",
    "rep2",
    "rep3",
    "bleu2",
    "bleu4",
    "rouge1",
    "rouge2",
    "rougeL",
    "ppl",
    "coverage",
)
DEFAULT_METRICS = ("dist2", "uniq2", "rep2", "bleu2", "rouge1", "rouge2", "rougeL", "ppl", "coverage")
LOWER_IS_BETTER = frozenset({"rep2", "rep3", "ppl"})

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")

# Parameter keys each strategy accepts in its "params" object.
STRATEGY_PARAMS: dict[str, frozenset[str]] = {
    "greedy": frozenset(),
    "beam": frozenset({"beam_size", "no_repeat_ngram_n"}),
    "temperature": frozenset({"temperature"}),
    "top_k": frozenset({"k"}),
    "nucleus": frozenset({"p"}),
    "gamma": frozenset(
        {"gamma_rep", "gamma_topic", "gamma_sentence", "clamp", "clamp_threshold", "redistribution", "terminal_extra"}
    ),
    "ifdid": frozenset(
        {
            "gamma_rep",
            "gamma_topic",
            "gamma_sentence",
            "epsilon",
            "clamp",
            "clamp_threshold",
            "redistribution",
            "survivor_sampling",
            "terminal_extra",
        }
    ),
    "ifdid_simi": frozenset(
        {
            "gamma_rep",
            "gamma_topic",
            "gamma_sentence",
            "epsilon",
            "lam",
            "top_n",
            "clamp",
            "clamp_threshold",
            "redistribution",
            "survivor_sampling",
            "terminal_extra",
        }
    ),
}

# Hyper-parameter bundles that reproduce the three study setups.
PRESETS: dict[str, dict[str, Any]] = {
    "commongen": {
        "temperature": 0.5,
        "k": 5,
        "beam_size": 5,
        "gamma_rep": 0.99,
        "gamma_topic": 0.4,
        "gamma_sentence": 0.9,
        "top_n": 350,
        "epsilon": 0.1,
        "lam": 0.0005,
    },
    "rocstories": {
        "k": 5,
        "p": 0.3,
        "gamma_rep": 0.99,
        "gamma_topic": 0.4,
        "gamma_sentence": 0.7,
        "top_n": 300,
        "epsilon": 0.2,
        "lam": 0.0005,
    },
    "adgen": {
        "beam_size": 5,
        "k": 5,
        "p": 0.3,
        "gamma_rep": 0.9,
        "gamma_topic": 0.4,
        "gamma_sentence": 0.5,
        "top_n": 300,
        "epsilon": 0.95,
        "lam": 0.001,
    },
}


class ConfigError(ValueError):
    """Raised on structural or value problems in an experiment config."""


@dataclass
class StrategySpec:
    name: str
    strategy: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class SweepSpec:
    lengths: list[int]
    strategies: list[str]
    metric_n: int = 2
    seeds: list[int] | None = None  # None reuses the experiment's seeds


@dataclass
class ExperimentConfig:
    name: str
    corpus_path: Path
    prompts_path: Path
    output_dir: Path
    seeds: list[int]
    max_length: int
    strategies: list[StrategySpec]
    samples_per_prompt: int = 1
    metrics: tuple[str, ...] = DEFAULT_METRICS
    lm_order: int = 3
    lm_add_k: float = 0.01
    lm_smoothing: str = "add_k"
    lm_weights: tuple[float, ...] | None = None
    embedding_window: int = 4
    embedding_dim: int = 16
    tokenize_mode: str = "whitespace"
    min_count: int = 1
    preset: str | None = None
    sweep: SweepSpec | None = None


def _expect_keys(obj: dict[str, Any], allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{where}: missing required keys {sorted(missing)}")


def _expect_type(value: Any, types: type | tuple[type, ...], where: str) -> Any:
    if isinstance(value, bool) and (types is int or (isinstance(types, tuple) and int in types and bool not in types)):
        raise ConfigError(f"{where}: expected {types}, got bool")
    if not isinstance(value, types):
        raise ConfigError(f"{where}: expected {types}, got {type(value).__name__}")
    return value


def _parse_strategy(entry: Any, index: int) -> StrategySpec:
    where = f"strategies[{index}]"
    _expect_type(entry, dict, where)
    _expect_keys(entry, {"name", "strategy", "params"}, {"strategy"}, where)
    strategy = _expect_type(entry["strategy"], str, f"{where}.strategy")
    if strategy not in STRATEGY_PARAMS:
        raise ConfigError(f"{where}.strategy: unknown strategy {strategy!r}")
    name = entry.get("name", strategy)
    _expect_type(name, str, f"{where}.name")
    if not _NAME_RE.match(name):
        raise ConfigError(f"{where}.name: {name!r} is not a safe directory name")
    params = entry.get("params", {})
    _expect_type(params, dict, f"{where}.params")
    unknown = set(params) - STRATEGY_PARAMS[strategy]
    if unknown:
        raise ConfigError(f"{where}.params: keys {sorted(unknown)} not valid for strategy {strategy!r}")
    return StrategySpec(name=name, strategy=strategy, params=dict(params))


def _parse_seed_list(value: Any, where: str) -> list[int]:
    seeds = _expect_type(value, list, where)
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError(f"{where}: expected a non-empty list of ints")
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"{where}: duplicates not allowed")
    return list(seeds)


def _parse_sweep(obj: Any) -> SweepSpec:
    _expect_type(obj, dict, "sweep")
    _expect_keys(obj, {"lengths", "strategies", "metric_n", "seeds"}, {"lengths", "strategies"}, "sweep")
    lengths = _expect_type(obj["lengths"], list, "sweep.lengths")
    if not lengths or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in lengths):
        raise ConfigError("sweep.lengths: expected a non-empty list of positive ints")
    if sorted(lengths) != lengths or len(set(lengths)) != len(lengths):
        raise ConfigError("sweep.lengths: must be strictly increasing")
    strategies = _expect_type(obj["strategies"], list, "sweep.strategies")
    if not strategies or not all(isinstance(s, str) for s in strategies):
        raise ConfigError("sweep.strategies: expected a non-empty list of strategy names")
    metric_n = obj.get("metric_n", 2)
    _expect_type(metric_n, int, "sweep.metric_n")
    if metric_n < 1:
        raise ConfigError("sweep.metric_n: must be >= 1")
    seeds = _parse_seed_list(obj["seeds"], "sweep.seeds") if "seeds" in obj else None
    return SweepSpec(lengths=list(lengths), strategies=list(strategies), metric_n=metric_n, seeds=seeds)


_TOP_KEYS = {
    "version",
    "name",
    "corpus",
    "prompts",
    "output_dir",
    "seeds",
    "max_length",
    "strategies",
    "samples_per_prompt",
    "metrics",
    "lm",
    "embeddings",
    "tokenize_mode",
    "min_count",
    "preset",
    "sweep",
}


def parse_config(doc: dict[str, Any], base_dir: Path, check_paths: bool = True) -> ExperimentConfig:
    _expect_type(doc, dict, "config")
    _expect_keys(doc, _TOP_KEYS, {"version", "name", "corpus", "prompts", "output_dir", "seeds", "max_length", "strategies"}, "config")
    version = _expect_type(doc["version"], int, "version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"version: expected {CONFIG_VERSION}, got {version}")
    name = _expect_type(doc["name"], str, "name")
    if not _NAME_RE.match(name):
        raise ConfigError(f"name: {name!r} is not a safe directory name")

    # joining with an absolute right-hand side keeps it absolute
    corpus = base_dir / _expect_type(doc["corpus"], str, "corpus")
    prompts = base_dir / _expect_type(doc["prompts"], str, "prompts")
    output_dir = base_dir / _expect_type(doc["output_dir"], str, "output_dir")
    if check_paths:
        for label, path in (("corpus", corpus), ("prompts", prompts)):
            if not path.is_file():
                raise ConfigError(f"{label}: {path} does not exist")

    seeds = _parse_seed_list(doc["seeds"], "seeds")

    max_length = _expect_type(doc["max_length"], int, "max_length")
    if max_length < 1:
        raise ConfigError("max_length: must be >= 1")

    samples_per_prompt = doc.get("samples_per_prompt", 1)
    _expect_type(samples_per_prompt, int, "samples_per_prompt")
    if samples_per_prompt < 1:
        raise ConfigError("samples_per_prompt: must be >= 1")

    metrics: tuple[str, ...] = DEFAULT_METRICS
    if "metrics" in doc:
        raw = _expect_type(doc["metrics"], list, "metrics")
        if not raw:
            raise ConfigError("metrics: selection must be non-empty")
        for m in raw:
            if not isinstance(m, str) or m not in METRIC_KEYS:
                raise ConfigError(f"metrics: unknown metric {m!r}; expected a subset of {list(METRIC_KEYS)}")
        if len(set(raw)) != len(raw):
            raise ConfigError("metrics: duplicates not allowed")
        metrics = tuple(raw)

    raw_strategies = _expect_type(doc["strategies"], list, "strategies")
    if not raw_strategies:
        raise ConfigError("strategies: must be non-empty")
    strategies = [_parse_strategy(e, i) for i, e in enumerate(raw_strategies)]
    names = [s.name for s in strategies]
    if len(set(names)) != len(names):
        raise ConfigError("strategies: names must be unique")

    lm_order, lm_add_k = 3, 0.01
    lm_smoothing: str = "add_k"
    lm_weights: tuple[float, ...] | None = None
    if "lm" in doc:
        lm = _expect_type(doc["lm"], dict, "lm")
        _expect_keys(lm, {"order", "add_k", "smoothing", "weights"}, set(), "lm")
        if "order" in lm:
            lm_order = _expect_type(lm["order"], int, "lm.order")
            if lm_order < 1:
                raise ConfigError("lm.order: must be >= 1")
        if "add_k" in lm:
            lm_add_k = float(_expect_type(lm["add_k"], (int, float), "lm.add_k"))
            if not lm_add_k > 0:
                raise ConfigError("lm.add_k: must be positive")
        if "smoothing" in lm:
            lm_smoothing = _expect_type(lm["smoothing"], str, "lm.smoothing")
            if lm_smoothing not in ("add_k", "interpolated"):
                raise ConfigError(f"lm.smoothing: expected 'add_k' or 'interpolated', got {lm_smoothing!r}")
        if "weights" in lm:
            raw_w = _expect_type(lm["weights"], list, "lm.weights")
            for w in raw_w:
                if isinstance(w, bool) or not isinstance(w, (int, float)) or w < 0:
                    raise ConfigError("lm.weights: entries must be nonnegative numbers")
            lm_weights = tuple(float(w) for w in raw_w)
        if lm_smoothing == "interpolated":
            if lm_weights is None:
                raise ConfigError("lm.weights: required for interpolated smoothing (one weight per order, low to high)")
            if len(lm_weights) != lm_order:
                raise ConfigError(f"lm.weights: expected {lm_order} weights, got {len(lm_weights)}")
            if sum(lm_weights) <= 0:
                raise ConfigError("lm.weights: must have positive sum")
        elif lm_weights is not None:
            raise ConfigError("lm.weights: only valid with interpolated smoothing")

    emb_window, emb_dim = 4, 16
    if "embeddings" in doc:
        emb = _expect_type(doc["embeddings"], dict, "embeddings")
        _expect_keys(emb, {"window", "dim"}, set(), "embeddings")
        if "window" in emb:
            emb_window = _expect_type(emb["window"], int, "embeddings.window")
        if "dim" in emb:
            emb_dim = _expect_type(emb["dim"], int, "embeddings.dim")

    tokenize_mode = doc.get("tokenize_mode", "whitespace")
    _expect_type(tokenize_mode, str, "tokenize_mode")
    if tokenize_mode not in ("whitespace", "char"):
        raise ConfigError(f"tokenize_mode: expected 'whitespace' or 'char', got {tokenize_mode!r}")
    min_count = doc.get("min_count", 1)
    _expect_type(min_count, int, "min_count")
    if min_count < 1:
        raise ConfigError("min_count: must be >= 1")

    preset = doc.get("preset")
    if preset is not None:
        _expect_type(preset, str, "preset")
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; expected one of {sorted(PRESETS)}")

    sweep = _parse_sweep(doc["sweep"]) if "sweep" in doc else None
    if sweep is not None:
        known = set(names)
        bad = [s for s in sweep.strategies if s not in known]
        if bad:
            raise ConfigError(f"sweep.strategies: {bad} not among configured strategy names")

    return ExperimentConfig(
        name=name,
        corpus_path=corpus,
        prompts_path=prompts,
        output_dir=output_dir,
        seeds=list(seeds),
        max_length=max_length,
        strategies=strategies,
        samples_per_prompt=samples_per_prompt,
        metrics=metrics,
        lm_order=lm_order,
        lm_add_k=lm_add_k,
        lm_smoothing=lm_smoothing,
        lm_weights=lm_weights,
        embedding_window=emb_window,
        embedding_dim=emb_dim,
        tokenize_mode=tokenize_mode,
        min_count=min_count,
        preset=preset,
        sweep=sweep,
    )


def bundled_path(name: str = "experiment.json") -> Path:
    """Path of a bundled data file (the packaged corpus, prompts, or config)."""
    p = Path(__file__).resolve().parent / "data" / name
    if not p.is_file():
        raise ConfigError(f"no bundled file named {name!r}")
    return p


def load_config(path: str | Path, check_paths: bool = True) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(doc, path.resolve().parent, check_paths=check_paths)


def effective_params(spec: StrategySpec, preset: str | None) -> dict[str, Any]:
    """Preset values overlaid with the strategy's explicit params.

    Only keys the strategy accepts are taken from the preset; explicit
    params win.
    """
    out: dict[str, Any] = {}
    if preset is not None:
        for key, value in PRESETS[preset].items():
            if key in STRATEGY_PARAMS[spec.strategy]:
                out[key] = value
    out.update(spec.params)
    return out
