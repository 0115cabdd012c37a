"""Experiment harness: build the bundled model resources, decode every
(prompt, seed, sample, strategy) cell, aggregate metrics, sweep generation
lengths, and emit report tables.

Every output is deterministic: rerunning the same config produces
byte-identical records, metric files, and sweep tables.  Files are written
atomically (temp file, then rename) and carry no timestamps.

Output layout under <output_dir>/<experiment>/:
    <strategy>/records.jsonl    one decoded sample per line
    <strategy>/metrics.json     that strategy's aggregated metrics
    report.txt, report.json     cross-strategy table, best value flagged
    sweep.csv                   repetition-versus-length table
    report.png, sweep.png       rendered figures (report subcommand)
"""

from __future__ import annotations

import json
import os
import tempfile

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    LOWER_IS_BETTER,
    StrategySpec,
    effective_params,
)
from .corpus import Corpus, SPECIALS, Vocabulary, build_vocabulary, load_corpus, read_lines, tokenize
from .decoders import DecodeConfig, DecodeRecord, StepDiag, decode
from .dist import ExtremenessPolicy
from .embeddings import EmbeddingTable, train_cooccurrence
from .enhance import GammaParams, SimiParams
from .info_filter import FilterParams
from .metrics import MetricReport, bleu_n, coverage, dist_n, perplexity, rep_n, rouge_l, rouge_n, uniq_n
from .ngram import AddK, Interpolated, NGramLM
from .rng import derive_seed

SWEEP_HEADER = "strategy,max_length,mean_rep2,std_rep2,gradient"


@dataclass
class PromptCase:
    """One evaluation case: required concept pieces and a reference text."""

    pieces: list[list[str]]
    reference: list[str]


@dataclass
class Resources:
    """Everything decoding needs, built once per config."""

    vocab: Vocabulary
    lm: NGramLM
    table: EmbeddingTable | None
    prompts: list[PromptCase]


@dataclass
class Cell:
    """One finished decode with its grid coordinates."""

    prompt_id: int
    seed: int
    sample: int
    strategy: str
    record: DecodeRecord
    tokens: list[str]


def _split_pieces(field: str, mode: str) -> list[list[str]]:
    # "a b|c d" means two multi-token pieces; without "|" every
    # whitespace-separated chunk is its own piece.
    segments = [s.strip() for s in field.split("|")] if "|" in field else field.split()
    pieces = [tokenize(s, mode) for s in segments if s]
    return [p for p in pieces if p]


def load_prompts(path: str | Path, mode: str = "whitespace") -> list[PromptCase]:
    """Parse a two-column TSV: concept pieces, then a reference text."""
    out: list[PromptCase] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ConfigError(f"{path}: line {lineno}: expected 2 tab-separated fields, got {len(fields)}")
            pieces = _split_pieces(fields[0], mode)
            if not pieces:
                raise ConfigError(f"{path}: line {lineno}: empty concept field")
            reference = tokenize(fields[1], mode)
            if not reference:
                raise ConfigError(f"{path}: line {lineno}: empty reference field")
            out.append(PromptCase(pieces=pieces, reference=reference))
    return out


def build_lm(cfg: ExperimentConfig) -> tuple[Vocabulary, Corpus, NGramLM]:
    """Vocabulary, encoded corpus, and trained model for a config."""
    lines = read_lines(cfg.corpus_path)
    if not lines:
        raise ConfigError(f"{cfg.corpus_path}: corpus has no non-blank lines")
    vocab = build_vocabulary(lines, cfg.tokenize_mode, cfg.min_count)
    corpus = load_corpus(cfg.corpus_path, vocab, cfg.tokenize_mode)
    if cfg.lm_smoothing == "interpolated":
        smoothing: AddK | Interpolated = Interpolated(cfg.lm_weights, cfg.lm_add_k)
    else:
        smoothing = AddK(cfg.lm_add_k)
    lm = NGramLM.train(corpus, cfg.lm_order, smoothing)
    return vocab, corpus, lm


def build_resources(cfg: ExperimentConfig) -> Resources:
    vocab, corpus, lm = build_lm(cfg)
    table = None
    if any(s.strategy == "ifdid_simi" for s in cfg.strategies):
        table = train_cooccurrence(corpus, window=cfg.embedding_window, dim=cfg.embedding_dim)
    prompts = load_prompts(cfg.prompts_path, cfg.tokenize_mode)
    if not prompts:
        raise ConfigError(f"{cfg.prompts_path}: no prompt cases")
    return Resources(vocab=vocab, lm=lm, table=table, prompts=prompts)


# -- config params -> DecodeConfig --------------------------------------------


def _as_float(params: dict[str, Any], key: str, where: str) -> float | None:
    if key not in params:
        return None
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: {key} must be a number")
    return float(v)


def _as_int(params: dict[str, Any], key: str, where: str) -> int | None:
    if key not in params:
        return None
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}: {key} must be an int")
    return v


def build_decode_config(
    spec: StrategySpec,
    preset: str | None,
    pieces: Sequence[Sequence[int]],
    seed: int,
    max_length: int,
) -> DecodeConfig:
    """Materialize one strategy's DecodeConfig from config params and preset."""
    where = f"strategy {spec.name!r}"
    params = effective_params(spec, preset)
    kw: dict[str, Any] = {}
    try:
        g: dict[str, float] = {}
        for src, dst in (("gamma_rep", "rep"), ("gamma_topic", "topic"), ("gamma_sentence", "sentence")):
            v = _as_float(params, src, where)
            if v is not None:
                g[dst] = v
        if g:
            kw["gamma"] = GammaParams(**g)
        v = _as_float(params, "epsilon", where)
        if v is not None:
            kw["filter"] = FilterParams(epsilon=v)
        s: dict[str, Any] = {}
        v = _as_float(params, "lam", where)
        if v is not None:
            s["lam"] = v
        vi = _as_int(params, "top_n", where)
        if vi is not None:
            s["top_n"] = vi
        if s:
            kw["simi"] = SimiParams(**s)
        v = _as_float(params, "clamp_threshold", where)
        if v is not None:
            kw["extremeness"] = ExtremenessPolicy(threshold=v)
        v = _as_float(params, "temperature", where)
        if v is not None:
            kw["temperature"] = v
        v = _as_float(params, "p", where)
        if v is not None:
            kw["p"] = v
        for key in ("k", "beam_size", "no_repeat_ngram_n"):
            vi = _as_int(params, key, where)
            if vi is not None:
                kw[key] = vi
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    if "clamp" in params:
        if not isinstance(params["clamp"], bool):
            raise ConfigError(f"{where}: clamp must be a bool")
        kw["clamp"] = params["clamp"]
    for key in ("redistribution", "survivor_sampling"):
        if key in params:
            if not isinstance(params[key], str):
                raise ConfigError(f"{where}: {key} must be a string")
            kw[key] = params[key]
    if "terminal_extra" in params:
        v = params["terminal_extra"]
        if not isinstance(v, list) or not all(isinstance(t, str) for t in v):
            raise ConfigError(f"{where}: terminal_extra must be a list of strings")
        kw["terminal_extra"] = tuple(v)
    return DecodeConfig(
        strategy=spec.strategy,
        max_length=max_length,
        seed=seed,
        prompt=(),
        input_pieces=[list(p) for p in pieces],
        **kw,
    )


# -- decoding grid ------------------------------------------------------------


def decode_all(
    cfg: ExperimentConfig,
    res: Resources,
    max_length: int | None = None,
    only: Sequence[str] | None = None,
    seeds: Sequence[int] | None = None,
    samples: int | None = None,
) -> list[Cell]:
    """Decode every (strategy, prompt, seed, sample) cell.

    Each cell gets its own derived RNG stream, so results are independent of
    grid ordering.  `only` restricts to the named strategies; `max_length`,
    `seeds`, and `samples` override the config values (the sweep uses them).
    """
    length = cfg.max_length if max_length is None else max_length
    seed_list = cfg.seeds if seeds is None else list(seeds)
    n_samples = cfg.samples_per_prompt if samples is None else samples
    cells: list[Cell] = []
    for spec in cfg.strategies:
        if only is not None and spec.name not in only:
            continue
        for p_idx, prompt in enumerate(res.prompts):
            piece_ids = [res.vocab.encode(piece) for piece in prompt.pieces]
            for base in seed_list:
                for m in range(n_samples):
                    stream = derive_seed(base, p_idx, m, spec.name)
                    dcfg = build_decode_config(spec, cfg.preset, piece_ids, stream, length)
                    rec = decode(res.lm, dcfg, res.table)
                    cells.append(
                        Cell(
                            prompt_id=p_idx,
                            seed=base,
                            sample=m,
                            strategy=spec.name,
                            record=rec,
                            tokens=res.vocab.decode(rec.tokens),
                        )
                    )
    return cells


def strip_specials(tokens: Sequence[str]) -> list[str]:
    return [t for t in tokens if t not in SPECIALS]


# -- metric aggregation -------------------------------------------------------

# Which aggregate each report column uses: "corpus" pools n-grams over all
# texts, "sample" averages a per-text value, "pooled" is token-weighted.
_METRIC_KIND = {
    "dist2": ("corpus", 2),
    "dist4": ("corpus", 4),
    "uniq2": ("corpus_count", 2),
    "uniq4": ("corpus_count", 4),
    "rep2": ("sample", 2),
    "rep3": ("sample", 3),
    "bleu2": ("sample", 2),
    "bleu4": ("sample", 4),
    "rouge1": ("sample", 1),
    "rouge2": ("sample", 2),
    "rougeL": ("sample", 0),
    "ppl": ("pooled", 0),
    "coverage": ("sample", 0),
}


def _sample_value(key: str, n: int, text: list[str], case: PromptCase) -> float:
    if key.startswith("rep"):
        return rep_n(text, n)
    if key.startswith("bleu"):
        return bleu_n(text, [case.reference], n)
    if key == "rougeL":
        return rouge_l(text, case.reference)[2]
    if key.startswith("rouge"):
        return rouge_n(text, case.reference, n)[2]
    if key == "coverage":
        return coverage(text, case.pieces)
    raise ValueError(f"not a per-sample metric: {key}")


def compute_metrics(cfg: ExperimentConfig, res: Resources, cells: Sequence[Cell]) -> dict[str, MetricReport]:
    """Per-strategy MetricReport over the decode grid, keyed by strategy name.

    Only the config's selected metrics are computed; per-sample values are
    kept for every sample-averaged column.
    """
    reports: dict[str, MetricReport] = {}
    for spec in cfg.strategies:
        rows = [c for c in cells if c.strategy == spec.name]
        if not rows:
            continue
        texts = [strip_specials(c.tokens) for c in rows]
        values: dict[str, float] = {}
        per_sample: dict[str, list[float]] = {}
        for key in cfg.metrics:
            kind, n = _METRIC_KIND[key]
            if kind == "corpus":
                values[key] = dist_n(texts, n)
            elif kind == "corpus_count":
                values[key] = float(uniq_n(texts, n))
            elif kind == "pooled":
                logprobs: list[float] = []
                token_counts: list[int] = []
                for cell in rows:
                    scored = list(cell.record.tokens)
                    if cell.record.termination == "eos":
                        scored.append(res.vocab.eos_id)
                    if scored:
                        logprobs.append(res.lm.sequence_logprob(scored))
                        token_counts.append(len(scored))
                values[key] = perplexity(logprobs, token_counts) if token_counts else float("inf")
            else:
                vals = [
                    _sample_value(key, n, text, res.prompts[cell.prompt_id])
                    for cell, text in zip(rows, texts)
                ]
                per_sample[key] = vals
                values[key] = float(np.mean(vals))
        reports[spec.name] = MetricReport(values=values, per_sample=per_sample, samples=len(rows))
    return reports


# -- serialization ------------------------------------------------------------


def _write_text_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def records_jsonl(cells: Sequence[Cell]) -> str:
    lines = []
    for c in cells:
        row = {
            "prompt_id": c.prompt_id,
            "seed": c.seed,
            "sample": c.sample,
            "strategy": c.strategy,
            "tokens": c.tokens,
            "termination": c.record.termination,
            "per_step": [
                {"entropy": s.entropy, "info": s.info, "survivors": s.survivors} for s in c.record.steps
            ],
        }
        lines.append(json.dumps(row, separators=(",", ":")))
    return "\n".join(lines) + "\n" if lines else ""


def parse_records_jsonl(path: Path, vocab: Vocabulary) -> list[Cell]:
    """Rebuild decode cells from a records file (diagnostics included)."""
    cells: list[Cell] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            steps = [StepDiag(s["entropy"], s["info"], s["survivors"]) for s in row["per_step"]]
            rec = DecodeRecord(
                tokens=vocab.encode(row["tokens"]),
                steps=steps,
                termination=row["termination"],
            )
            cells.append(
                Cell(
                    prompt_id=row["prompt_id"],
                    seed=row["seed"],
                    sample=row["sample"],
                    strategy=row["strategy"],
                    record=rec,
                    tokens=list(row["tokens"]),
                )
            )
    return cells


def _fmt_value(key: str, value: float) -> str:
    if key.startswith("uniq"):
        return "%d" % int(value)
    return "%.4f" % value


def _best_keys(cfg: ExperimentConfig, reports: dict[str, MetricReport]) -> dict[str, list[str]]:
    """Per metric column, the strategy names achieving the best value."""
    out: dict[str, list[str]] = {}
    names = [s.name for s in cfg.strategies if s.name in reports]
    for key in cfg.metrics:
        vals = {n: reports[n].values[key] for n in names}
        target = min(vals.values()) if key in LOWER_IS_BETTER else max(vals.values())
        out[key] = [n for n in names if vals[n] == target]
    return out


def report_text(cfg: ExperimentConfig, reports: dict[str, MetricReport]) -> str:
    """Fixed-width comparison table, best value per column marked with '*'."""
    names = [s.name for s in cfg.strategies if s.name in reports]
    best = _best_keys(cfg, reports)
    header = ["strategy"] + list(cfg.metrics)
    body: list[list[str]] = []
    for name in names:
        row = [name]
        for key in cfg.metrics:
            cell = _fmt_value(key, reports[name].values[key])
            if name in best[key]:
                cell += "*"
            row.append(cell)
        body.append(row)
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) for i in range(len(header))]
    lines = []
    lines.append("  ".join(header[i].ljust(widths[i]) if i == 0 else header[i].rjust(widths[i]) for i in range(len(header))))
    for row in body:
        lines.append("  ".join(row[i].ljust(widths[i]) if i == 0 else row[i].rjust(widths[i]) for i in range(len(header))))
    return "\n".join(lines) + "\n"


def report_json(cfg: ExperimentConfig, reports: dict[str, MetricReport]) -> str:
    best = _best_keys(cfg, reports)
    doc = {
        "experiment": cfg.name,
        "metrics": list(cfg.metrics),
        "strategies": {
            spec.name: {
                "samples": reports[spec.name].samples,
                "values": {k: reports[spec.name].values[k] for k in cfg.metrics},
                "best": [k for k in cfg.metrics if spec.name in best[k]],
            }
            for spec in cfg.strategies
            if spec.name in reports
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def strategy_metrics_json(name: str, cfg: ExperimentConfig, report: MetricReport) -> str:
    doc = {
        "strategy": name,
        "samples": report.samples,
        "values": {k: report.values[k] for k in cfg.metrics},
    }
    return json.dumps(doc, indent=2) + "\n"


# -- sweep --------------------------------------------------------------------


@dataclass
class SweepRow:
    strategy: str
    max_length: int
    mean: float
    std: float
    gradient: float | None


def compute_sweep_rows(cfg: ExperimentConfig, res: Resources) -> list[SweepRow]:
    """Mean/std of rep-n per (strategy, length), plus the discrete gradient.

    Sampling strategies consume exactly one draw per emitted token, so a
    shorter decode is a prefix of a longer one with the same stream; those
    are decoded once at the longest length and truncated.  Beam search has
    no such prefix property and is decoded per length.
    """
    if cfg.sweep is None:
        raise ConfigError("config has no sweep section")
    sweep = cfg.sweep
    seeds = sweep.seeds if sweep.seeds is not None else cfg.seeds
    by_name = {s.name: s for s in cfg.strategies}
    lmax = sweep.lengths[-1]
    rows: list[SweepRow] = []
    for name in sweep.strategies:
        spec = by_name[name]
        per_length: dict[int, list[float]] = {}
        if spec.strategy == "beam":
            for length in sweep.lengths:
                cells = decode_all(cfg, res, max_length=length, only=[name], seeds=seeds, samples=1)
                per_length[length] = [rep_n(strip_specials(c.tokens), sweep.metric_n) for c in cells]
        else:
            cells = decode_all(cfg, res, max_length=lmax, only=[name], seeds=seeds, samples=1)
            for length in sweep.lengths:
                per_length[length] = [
                    rep_n(strip_specials(c.tokens[:length]), sweep.metric_n) for c in cells
                ]
        prev_mean: float | None = None
        prev_len: int | None = None
        for length in sweep.lengths:
            vals = np.asarray(per_length[length], dtype=np.float64)
            mean = float(vals.mean())
            std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            grad = None if prev_mean is None else (mean - prev_mean) / (length - prev_len)
            rows.append(SweepRow(strategy=name, max_length=length, mean=mean, std=std, gradient=grad))
            prev_mean, prev_len = mean, length
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    lines = [SWEEP_HEADER]
    for r in rows:
        grad = "" if r.gradient is None else "%.6f" % r.gradient
        lines.append("%s,%d,%.6f,%.6f,%s" % (r.strategy, r.max_length, r.mean, r.std, grad))
    return "\n".join(lines) + "\n"


# -- entry points -------------------------------------------------------------


def experiment_dir(cfg: ExperimentConfig) -> Path:
    return cfg.output_dir / cfg.name


def _write_metric_outputs(
    cfg: ExperimentConfig, reports: dict[str, MetricReport], out: Path
) -> dict[str, Path]:
    paths: dict[str, Path] = {}
    for spec in cfg.strategies:
        if spec.name not in reports:
            continue
        p = out / spec.name / "metrics.json"
        _write_text_atomic(p, strategy_metrics_json(spec.name, cfg, reports[spec.name]))
        paths[f"metrics:{spec.name}"] = p
    paths["report_txt"] = out / "report.txt"
    paths["report_json"] = out / "report.json"
    _write_text_atomic(paths["report_txt"], report_text(cfg, reports))
    _write_text_atomic(paths["report_json"], report_json(cfg, reports))
    return paths


def _run_grid(
    cfg: ExperimentConfig, res: Resources
) -> tuple[dict[str, Path], dict[str, MetricReport]]:
    cells = decode_all(cfg, res)
    reports = compute_metrics(cfg, res, cells)
    out = experiment_dir(cfg)
    paths: dict[str, Path] = {}
    for spec in cfg.strategies:
        group = [c for c in cells if c.strategy == spec.name]
        p = out / spec.name / "records.jsonl"
        _write_text_atomic(p, records_jsonl(group))
        paths[f"records:{spec.name}"] = p
    paths.update(_write_metric_outputs(cfg, reports, out))
    return paths, reports


def run_experiment(cfg: ExperimentConfig, res: Resources | None = None) -> dict[str, Path]:
    """Decode the full grid; write per-strategy records and metrics plus the
    cross-strategy report tables."""
    res = res or build_resources(cfg)
    return _run_grid(cfg, res)[0]


def recompute_metrics(cfg: ExperimentConfig, res: Resources | None = None) -> dict[str, Path]:
    """Rebuild metric files and reports from the records already on disk."""
    res = res or build_resources(cfg)
    out = experiment_dir(cfg)
    cells: list[Cell] = []
    for spec in cfg.strategies:
        p = out / spec.name / "records.jsonl"
        if not p.is_file():
            raise ConfigError(f"{p}: no records for strategy {spec.name!r}; run the experiment first")
        cells.extend(parse_records_jsonl(p, res.vocab))
    reports = compute_metrics(cfg, res, cells)
    return _write_metric_outputs(cfg, reports, out)


def run_sweep(cfg: ExperimentConfig, res: Resources | None = None) -> Path:
    """Write sweep.csv for the configured length grid."""
    res = res or build_resources(cfg)
    rows = compute_sweep_rows(cfg, res)
    path = experiment_dir(cfg) / "sweep.csv"
    _write_text_atomic(path, sweep_csv(rows))
    return path


def render_report(cfg: ExperimentConfig) -> dict[str, Path]:
    """Run the grid (and sweep when configured) and render figures next to
    the tables."""
    from . import plots

    res = build_resources(cfg)
    paths, reports = _run_grid(cfg, res)
    out = experiment_dir(cfg)
    order = [s.name for s in cfg.strategies if s.name in reports]
    paths["report_png"] = out / "report.png"
    plots.save_report_figure(reports, order, list(cfg.metrics), paths["report_png"])
    if cfg.sweep is not None:
        rows = compute_sweep_rows(cfg, res)
        paths["sweep_csv"] = out / "sweep.csv"
        paths["sweep_png"] = out / "sweep.png"
        _write_text_atomic(paths["sweep_csv"], sweep_csv(rows))
        plots.save_sweep_figure(rows, cfg.sweep.metric_n, paths["sweep_png"])
    return paths
