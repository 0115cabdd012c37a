"""Acceptance suite: one test per top-level guarantee the package makes.

Each test is self-contained and states its tolerance and, where relevant,
its runtime budget inline. The heavy fixtures (the bundled decode grid) are
module-scoped so the trend tests share one decoding pass.
"""

import itertools
import math
import time

import numpy as np
import pytest

from decodelab import cli
from decodelab.config import bundled_path, load_config
from decodelab.decoders import DecodeConfig, decode
from decodelab.dist import ProbDist, clamp_extremes
from decodelab.embeddings import EmbeddingTable
from decodelab.enhance import (
    GammaParams,
    SimiParams,
    TypicalSets,
    enhance_step,
    gamma_transform,
    simi_enhance,
)
from decodelab.harness import build_resources, compute_sweep_rows, decode_all, strip_specials
from decodelab.info_filter import FilterParams, filter_dist, survivor_mask
from decodelab.metrics import bleu_n, coverage, dist_n, rep_n, rouge_l, rouge_n


# -- shared bundled-experiment resources ---------------------------------------


@pytest.fixture(scope="module")
def bundled_res():
    cfg = load_config(bundled_path())
    return cfg, build_resources(cfg)


@pytest.fixture(scope="module")
def bundled_cells(bundled_res):
    # One grid decode shared by the trend tests: 30 seeds x 8 prompts x 128
    # tokens for the strategies those tests compare.
    cfg, res = bundled_res
    t0 = time.monotonic()
    cells = decode_all(cfg, res, only=["greedy", "top_k", "temperature", "ifdid", "gamma"])
    return cells, time.monotonic() - t0


def per_seed_means(cells, strategy, value_fn):
    by_seed = {}
    for c in cells:
        if c.strategy == strategy:
            by_seed.setdefault(c.seed, []).append(value_fn(c))
    return np.array([float(np.mean(v)) for _, v in sorted(by_seed.items())])


def pooled_se(a, b):
    return math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)


# -- 1. mass-shift transform vs direct arithmetic ------------------------------


def direct_transform(p, typical, frozen, gamma):
    """Naive per-entry arithmetic for the proportional rule."""
    h = 1.0 if gamma == 0.5 else math.tan(math.pi * gamma / 2.0)
    p_typ = sum(p[i] for i in typical)
    if p_typ <= 0.0:
        return list(p)
    p_frz = sum(p[i] for i in frozen)
    p_comp = sum(p) - p_typ - p_frz
    p_star = p_typ**h * (1.0 - p_frz) ** (1.0 - h)
    out = list(p)
    if p_comp > 1e-15:
        scale_comp = 1.0 + (p_typ - p_star) / p_comp
        for i in range(len(p)):
            if i in typical:
                out[i] = p[i] * (p_star / p_typ)
            elif i not in frozen:
                out[i] = p[i] * scale_comp
    else:
        for i in typical:
            out[i] = p[i] * (p_star / p_typ) * ((1.0 - p_frz) / p_star)
    return out


def grid_forms(n, total=20):
    """Non-increasing vectors of n grid steps summing to `total`.

    Every grid distribution over n tokens is a relabeling of exactly one of
    these; the transform touches indices only through set membership, so the
    canonical forms are checked exhaustively and relabelings are sampled via
    one random permutation per parameter combination.
    """
    def parts(left, cap, slots):
        if slots == 1:
            if left <= cap:
                yield (left,)
            return
        for first in range(min(left, cap), -1, -1):
            for rest in parts(left - first, first, slots - 1):
                yield (first,) + rest

    yield from parts(total, total, n)


def test_mass_shift_matches_direct_arithmetic_on_the_grid():
    t0 = time.monotonic()
    gammas = (0.1, 0.25, 0.5, 0.75, 0.9, 0.99)
    rng = np.random.default_rng(20260818)
    checked = 0
    for n in range(1, 6):
        for form in grid_forms(n):
            probs = np.array(form, dtype=float) / 20.0
            d = ProbDist(probs)
            p_list = probs.tolist()
            support = [i for i in range(n) if form[i] > 0]
            subsets = itertools.chain.from_iterable(
                itertools.combinations(support, r) for r in range(len(support) + 1)
            )
            for t_tuple in subsets:
                t_set = frozenset(t_tuple)
                f_choices = [frozenset()] + [
                    frozenset({j}) for j in range(n) if j not in t_set
                ]
                for f_set in f_choices:
                    perm = rng.permutation(n)
                    inv = np.empty(n, dtype=int)
                    inv[perm] = np.arange(n)
                    q = probs[perm]
                    dq = ProbDist(q)
                    q_list = q.tolist()
                    t_perm = frozenset(int(inv[i]) for i in t_set)
                    f_perm = frozenset(int(inv[i]) for i in f_set)
                    for gamma in gammas:
                        out, _ = gamma_transform(d, t_set, f_set, gamma)
                        ref = direct_transform(p_list, t_set, f_set, gamma)
                        assert np.abs(out.probs - np.array(ref)).max() <= 1e-10
                        if gamma == 0.5:
                            assert np.abs(out.probs - probs).max() <= 1e-12
                        out_p, _ = gamma_transform(dq, t_perm, f_perm, gamma)
                        ref_p = direct_transform(q_list, t_perm, f_perm, gamma)
                        assert np.abs(out_p.probs - np.array(ref_p)).max() <= 1e-10
                        checked += 2
    assert checked > 200000
    assert time.monotonic() - t0 < 30.0


# -- 2. entropy-band filter vs brute force -------------------------------------


def test_filter_survivors_match_brute_force():
    t0 = time.monotonic()
    rng = np.random.default_rng(20260818)
    for trial in range(10000):
        nv = int(rng.integers(2, 65))
        w = rng.random(nv)
        if trial % 3 == 0:
            kill = rng.random(nv) < 0.3
            if kill.all():
                kill[int(rng.integers(0, nv))] = False
            w[kill] = 0.0
        d = ProbDist(w / w.sum())
        eps = 2.0 * float(rng.random())
        mask = survivor_mask(d, FilterParams(epsilon=eps))

        probs = d.probs.tolist()
        ent = -math.fsum(q * math.log(q) for q in probs if q > 0.0)
        expect = [q > 0.0 and abs(-math.log(q) - ent) <= eps for q in probs]
        assert mask.tolist() == expect

        wider = survivor_mask(d, FilterParams(epsilon=eps + float(rng.random())))
        assert not (mask & ~wider).any()  # widening the band never drops a token

        if trial % 10 == 0:
            out = filter_dist(d, FilterParams(epsilon=0.0))
            survivors = sum(expect_zero for expect_zero in (
                q > 0.0 and abs(-math.log(q) - ent) <= 0.0 for q in probs
            ))
            if survivors == 0:
                assert out.support_size() == 1  # fallback keeps one token
    for nv in (2, 3, 17, 64):
        u = ProbDist(np.full(nv, 1.0 / nv))
        for eps in (0.0, 1e-9, 0.5, 5.0):
            assert filter_dist(u, FilterParams(epsilon=eps)) is u
    assert time.monotonic() - t0 < 10.0


# -- 3. worked-example pins (values recomputed independently before pinning) ---


def test_worked_example_pins():
    shifted, _ = gamma_transform(ProbDist([0.4, 0.3, 0.2, 0.1]), {0}, frozenset(), gamma=0.25)
    np.testing.assert_allclose(
        shifted.probs, [0.684176, 0.157912, 0.105275, 0.052637], atol=1e-4
    )

    banded = filter_dist(ProbDist([0.5, 0.25, 0.125, 0.125]), FilterParams(epsilon=0.6))
    np.testing.assert_allclose(banded.probs, [2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0], atol=1e-4)

    table = EmbeddingTable(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]))
    boosted = simi_enhance(
        ProbDist([0.25, 0.25, 0.25, 0.25]),
        {0},
        np.array([1.0, 0.0]),
        table,
        SimiParams(lam=0.1),
    )
    np.testing.assert_allclose(
        boosted.probs, [0.318182, 0.227273, 0.227273, 0.227273], atol=1e-4
    )


# -- 4. parameter-limit equivalences between strategies -------------------------


def test_strategy_equivalences_on_random_prompts(bundled_res):
    _cfg, res = bundled_res
    rng = np.random.default_rng(426)
    word_ids = np.arange(3, len(res.vocab))
    for trial in range(100):
        length = int(rng.integers(0, 6))
        prompt = [int(i) for i in rng.choice(word_ids, size=length)]
        pieces = [[prompt[0]]] if prompt else [[int(rng.choice(word_ids))]]
        base = dict(prompt=prompt, max_length=32, seed=1000 + trial)

        greedy = decode(res.lm, DecodeConfig(strategy="greedy", **base))
        top1 = decode(res.lm, DecodeConfig(strategy="top_k", k=1, **base))
        assert top1.tokens == greedy.tokens

        tiny_nucleus = decode(res.lm, DecodeConfig(strategy="nucleus", p=1e-9, **base))
        assert tiny_nucleus.tokens == greedy.tokens

        single_beam = decode(
            res.lm, DecodeConfig(strategy="beam", beam_size=1, no_repeat_ngram_n=0, **base)
        )
        assert single_beam.tokens == greedy.tokens

        themed = dict(base, input_pieces=pieces)
        plain = decode(res.lm, DecodeConfig(strategy="gamma", **themed))
        saturated = decode(
            res.lm, DecodeConfig(strategy="ifdid", filter=FilterParams(epsilon=1e9), **themed)
        )
        assert saturated.tokens == plain.tokens


# -- 5. pipeline compositions keep distributions valid --------------------------


def test_pipeline_compositions_preserve_distribution_invariants():
    t0 = time.monotonic()
    rng = np.random.default_rng(20260818)
    n_iter = 1_000_000
    pool = 20000

    weights = rng.random((pool, 8))
    weights /= weights.sum(axis=1, keepdims=True)
    dists = [ProbDist(row) for row in weights]
    subset_pool = [
        frozenset(np.flatnonzero(rng.random(8) < 0.35).tolist()) for _ in range(4096)
    ]
    filt_pool = [FilterParams(epsilon=float(e)) for e in rng.uniform(0.0, 2.5, 4096)]
    gp_pool = [
        GammaParams(rep=float(a), topic=float(b), sentence=float(c))
        for a, b, c in rng.uniform(0.05, 0.95, (1024, 3))
    ]
    sp_pool = [SimiParams(lam=float(x)) for x in rng.uniform(0.0, 0.5, 1024)]
    sets_pool = [
        TypicalSets(
            terminal=subset_pool[i],
            repeated=subset_pool[(i * 7 + 1) % 4096],
            theme=subset_pool[(i * 13 + 5) % 4096],
        )
        for i in range(4096)
    ]
    singletons = [frozenset({i}) for i in range(8)]
    table = EmbeddingTable(np.random.default_rng(2).normal(size=(8, 4)))
    piece = np.random.default_rng(3).normal(size=4)

    d_idx = rng.integers(0, pool, n_iter)
    s_idx = rng.integers(0, 4096, (n_iter, 3))
    p_idx = rng.integers(0, 1024, (n_iter, 2))
    gam = rng.uniform(0.05, 0.95, n_iter)
    u = rng.random((n_iter, 5))
    out = np.empty((n_iter, 8))

    for i in range(n_iter):
        d = dists[d_idx[i]]
        if u[i, 0] < 0.6:
            d = clamp_extremes(d)
        if u[i, 1] < 0.8:
            typical = subset_pool[s_idx[i, 0]]
            frozen = singletons[s_idx[i, 1] % 8] - typical if u[i, 2] >= 0.7 else frozenset()
            d, _ = gamma_transform(d, typical, frozen, float(gam[i]))
        else:
            d = enhance_step(d, sets_pool[s_idx[i, 0]], gp_pool[p_idx[i, 0]])
        if u[i, 3] < 0.2:
            d = simi_enhance(d, subset_pool[s_idx[i, 2]] or {0}, piece, table, sp_pool[p_idx[i, 1]])
        if u[i, 4] < 0.85:
            d = filter_dist(d, filt_pool[s_idx[i, 1]])
        out[i] = d.probs

    assert float(np.abs(out.sum(axis=1) - 1.0).max()) <= 1e-9
    assert float(out.min()) >= 0.0
    assert float(out.max()) <= 1.0
    assert time.monotonic() - t0 < 60.0


# -- 6. repetition ordering and where repetition growth peaks -------------------


def test_repetition_ordering_on_the_bundled_corpus(bundled_res, bundled_cells):
    cfg, res = bundled_res
    cells, decode_elapsed = bundled_cells
    t0 = time.monotonic()

    rep2 = {
        name: per_seed_means(cells, name, lambda c: rep_n(strip_specials(c.tokens), 2))
        for name in ("greedy", "top_k", "temperature", "ifdid")
    }
    for high, low in (
        ("greedy", "top_k"),
        ("greedy", "temperature"),
        ("top_k", "ifdid"),
        ("temperature", "ifdid"),
    ):
        gap = rep2[high].mean() - rep2[low].mean()
        assert gap > pooled_se(rep2[high], rep2[low]), (high, low, gap)

    rows = compute_sweep_rows(cfg, res)

    def steepest_cell(name):
        scored = [r for r in rows if r.strategy == name and r.gradient is not None]
        return max(scored, key=lambda r: r.gradient).max_length

    assert steepest_cell("greedy") < steepest_cell("ifdid")
    assert decode_elapsed + (time.monotonic() - t0) < 300.0


# -- 7. diversity and concept coverage move the advertised way ------------------


def test_diversity_and_coverage_direction_on_the_bundled_corpus(bundled_res, bundled_cells):
    _cfg, res = bundled_res
    cells, _ = bundled_cells

    def seed_dist2(strategy):
        texts_by_seed = {}
        for c in cells:
            if c.strategy == strategy:
                texts_by_seed.setdefault(c.seed, []).append(strip_specials(c.tokens))
        return np.array([dist_n(texts, 2) for _, texts in sorted(texts_by_seed.items())])

    d_ifdid, d_greedy = seed_dist2("ifdid"), seed_dist2("greedy")
    assert d_ifdid.mean() - d_greedy.mean() > pooled_se(d_ifdid, d_greedy)

    def cell_coverage(c):
        return coverage(strip_specials(c.tokens), res.prompts[c.prompt_id].pieces)

    c_ifdid = per_seed_means(cells, "ifdid", cell_coverage)
    c_gamma = per_seed_means(cells, "gamma", cell_coverage)
    assert c_ifdid.mean() - c_gamma.mean() > pooled_se(c_ifdid, c_gamma)


# -- 8. metric self-consistency --------------------------------------------------


def test_metric_self_consistency():
    rng = np.random.default_rng(88)
    alphabet = list("abcdefg")
    for _ in range(1000):
        length = int(rng.integers(4, 30))
        text = [alphabet[int(i)] for i in rng.integers(0, len(alphabet), length)]
        assert bleu_n(text, [text], 4) == pytest.approx(1.0, abs=1e-12)
        assert rouge_n(text, text, 1) == (1.0, 1.0, 1.0)
        assert rouge_n(text, text, 2) == (1.0, 1.0, 1.0)
        assert rouge_l(text, text) == (1.0, 1.0, 1.0)
        for n in (1, 2, 3):
            assert rep_n(text, n) == 1.0 - dist_n([text], n)

    assert bleu_n("a b c".split(), ["a b d".split()], 2) == pytest.approx(
        math.sqrt(1.0 / 3.0), abs=1e-6
    )
    assert bleu_n("a b".split(), ["b a".split()], 2) == pytest.approx(
        math.sqrt(0.5), abs=1e-6
    )
    assert bleu_n("a b".split(), ["a b c d".split()], 2) == pytest.approx(
        math.exp(-1.0), abs=1e-6
    )
    assert bleu_n("a b c".split(), ["a b".split(), "a b c d".split()], 2) == pytest.approx(
        1.0, abs=1e-6
    )
    assert rouge_n("a b c".split(), "a c".split(), 1) == pytest.approx(
        (2.0 / 3.0, 1.0, 0.8), abs=1e-6
    )
    assert rouge_l("a b c d".split(), "a c d".split()) == pytest.approx(
        (0.75, 1.0, 6.0 / 7.0), abs=1e-6
    )


# -- 9. reruns are byte-identical ------------------------------------------------


def test_run_and_sweep_are_reproducible(tmp_path):
    out_dir = tmp_path / "out"
    run_argv = ["run", "--config", str(bundled_path()), "--seed", "1", "--output-dir", str(out_dir)]
    assert cli.main(run_argv) == 0
    exp = out_dir / "bundled"
    targets = sorted(exp.rglob("records.jsonl")) + sorted(exp.rglob("metrics.json"))
    assert len(targets) == 16  # eight strategies, two files each
    first = {p: p.read_bytes() for p in targets}
    assert cli.main(run_argv) == 0
    for path, blob in first.items():
        assert path.read_bytes() == blob, path

    sweep_argv = ["sweep", "--config", str(bundled_path()), "--seed", "1", "--output-dir", str(out_dir)]
    assert cli.main(sweep_argv) == 0
    sweep_blob = (exp / "sweep.csv").read_bytes()
    assert cli.main(sweep_argv) == 0
    assert (exp / "sweep.csv").read_bytes() == sweep_blob
