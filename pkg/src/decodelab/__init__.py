"""decodelab: a laboratory for comparing text decoding strategies.

The package bundles a deterministic n-gram language model and co-occurrence
embeddings so every strategy, from greedy search to the two-stage
enhance-then-filter samplers, can be run, measured, and swept end to end
with no external model downloads.
"""

from .config import (
    ConfigError,
    DEFAULT_METRICS,
    ExperimentConfig,
    METRIC_KEYS,
    PRESETS,
    StrategySpec,
    SweepSpec,
    bundled_path,
    effective_params,
    load_config,
)
from .corpus import Corpus, Vocabulary, build_vocabulary, load_corpus, tokenize
from .decoders import (
    DecodeConfig,
    DecodeRecord,
    StepDiag,
    STRATEGIES,
    beam_decode,
    decode,
    step_gamma,
    step_greedy,
    step_ifdid,
    step_ifdid_simi,
    step_nucleus,
    step_temperature,
    step_topk,
)
from .dist import (
    ExtremenessPolicy,
    InvalidDistribution,
    ProbDist,
    clamp_extremes,
    entropy,
    information,
    normalize,
)
from .embeddings import EmbeddingTable, cosine, nearest, train_cooccurrence
from .enhance import (
    GammaParams,
    SimiParams,
    TypicalSets,
    activation,
    build_repeated_set,
    build_terminal_set,
    build_theme_set,
    enhance_step,
    gamma_transform,
    simi_enhance,
)
from .harness import (
    build_lm,
    build_resources,
    compute_metrics,
    compute_sweep_rows,
    decode_all,
    load_prompts,
    recompute_metrics,
    render_report,
    run_experiment,
    run_sweep,
)
from .info_filter import FilterParams, filter_dist, passes, survivor_mask
from .metrics import MetricReport, bleu_n, coverage, dist_n, perplexity, rep_n, rouge_l, rouge_n, uniq_n
from .ngram import AddK, EndOfStream, Interpolated, NGramLM, ReplayProvider
from .rng import SplitMix64, derive_seed

__version__ = "0.1.0"

__all__ = [
    "AddK",
    "ConfigError",
    "Corpus",
    "DEFAULT_METRICS",
    "DecodeConfig",
    "DecodeRecord",
    "EmbeddingTable",
    "EndOfStream",
    "ExperimentConfig",
    "ExtremenessPolicy",
    "FilterParams",
    "GammaParams",
    "Interpolated",
    "InvalidDistribution",
    "METRIC_KEYS",
    "MetricReport",
    "NGramLM",
    "PRESETS",
    "ProbDist",
    "ReplayProvider",
    "STRATEGIES",
    "SimiParams",
    "SplitMix64",
    "StepDiag",
    "StrategySpec",
    "SweepSpec",
    "TypicalSets",
    "Vocabulary",
    "activation",
    "beam_decode",
    "bleu_n",
    "bundled_path",
    "build_lm",
    "build_repeated_set",
    "build_resources",
    "build_terminal_set",
    "build_theme_set",
    "build_vocabulary",
    "clamp_extremes",
    "compute_metrics",
    "compute_sweep_rows",
    "cosine",
    "coverage",
    "decode",
    "decode_all",
    "derive_seed",
    "dist_n",
    "effective_params",
    "enhance_step",
    "entropy",
    "filter_dist",
    "gamma_transform",
    "information",
    "load_config",
    "load_corpus",
    "load_prompts",
    "nearest",
    "normalize",
    "passes",
    "perplexity",
    "recompute_metrics",
    "render_report",
    "rep_n",
    "rouge_l",
    "rouge_n",
    "run_experiment",
    "run_sweep",
    "simi_enhance",
    "step_gamma",
    "step_greedy",
    "step_ifdid",
    "step_ifdid_simi",
    "step_nucleus",
    "step_temperature",
    "step_topk",
    "survivor_mask",
    "tokenize",
    "train_cooccurrence",
    "uniq_n",
]
