"""Count-based language models: smoothing arithmetic, scoring, serialization, replay."""

import math

import numpy as np
import pytest

from decodelab.corpus import Corpus, build_vocabulary, load_corpus
from decodelab.metrics import perplexity
from decodelab.ngram import AddK, EndOfStream, Interpolated, NGramLM, ReplayProvider

from helpers import make_vocab


def corpus_of(lines, *words):
    v = make_vocab(*words)
    docs = [v.encode(line.split()) for line in lines]
    return Corpus(documents=docs, vocab=v, source="inline")


def test_unigram_add_k_counts_include_document_end():
    # ["a a a"] contributes three a's plus one end-of-document token,
    # so the add-1 estimate over |V|=4 is (3+1)/(4+4).
    c = corpus_of(["a a a"], "a")
    lm = NGramLM.train(c, order=1, smoothing=AddK(k=1.0))
    d = lm.next_distribution([])
    a = c.vocab.id_of("a")
    assert d.probs[a] == pytest.approx(0.5, abs=1e-12)
    assert d.probs[c.vocab.eos_id] == pytest.approx(0.25, abs=1e-12)
    assert d.probs[c.vocab.bos_id] == pytest.approx(0.125, abs=1e-12)


def test_bigram_add_k_row():
    # ["a b"]: context "a" was followed by "b" once, total 1; |V|=5.
    c = corpus_of(["a b"], "a", "b")
    lm = NGramLM.train(c, order=2, smoothing=AddK(k=1.0))
    a, b = c.vocab.id_of("a"), c.vocab.id_of("b")
    d = lm.next_distribution([a])
    assert d.probs[b] == pytest.approx(1.0 / 3.0, abs=1e-12)
    others = [d.probs[i] for i in range(5) if i != b]
    np.testing.assert_allclose(others, 1.0 / 6.0, atol=1e-12)
    assert d.probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_bigram_add_k_two_documents():
    c = corpus_of(["a b", "a c"], "a", "b", "c")
    lm = NGramLM.train(c, order=2, smoothing=AddK(k=1.0))
    a, b, ch = (c.vocab.id_of(w) for w in "abc")
    d = lm.next_distribution([a])
    assert d.probs[b] == pytest.approx(0.25, abs=1e-12)
    assert d.probs[ch] == pytest.approx(0.25, abs=1e-12)


def test_context_truncated_to_order():
    c = corpus_of(["a b", "b a"], "a", "b")
    lm = NGramLM.train(c, order=2, smoothing=AddK(k=0.5))
    a, b = c.vocab.id_of("a"), c.vocab.id_of("b")
    base = lm.next_distribution([a])
    np.testing.assert_array_equal(lm.next_distribution([b, a]).probs, base.probs)
    np.testing.assert_array_equal(lm.next_distribution([b, b, b, a]).probs, base.probs)


def test_rows_are_full_support_distributions():
    c = corpus_of(["a b c", "c b a", "a a b"], "a", "b", "c")
    lm = NGramLM.train(c, order=3, smoothing=AddK(k=0.01))
    for ctx in ([], [3], [4, 5], [3, 4, 5]):
        d = lm.next_distribution(ctx)
        assert np.all(d.probs > 0.0)
        assert abs(d.probs.sum() - 1.0) <= 1e-9


def test_interpolated_mixes_orders():
    # ["a b"], equal weights, add-1: unigram P(b) = 2/8, bigram P(b|a) = 2/6.
    c = corpus_of(["a b"], "a", "b")
    lm = NGramLM.train(c, order=2, smoothing=Interpolated(weights=(0.5, 0.5), k=1.0))
    a, b = c.vocab.id_of("a"), c.vocab.id_of("b")
    d = lm.next_distribution([a])
    assert d.probs[b] == pytest.approx(0.5 * 0.25 + 0.5 / 3.0, abs=1e-9)
    assert d.probs[a] == pytest.approx(0.5 * 0.25 + 0.5 / 6.0, abs=1e-9)


def test_training_validation():
    c = corpus_of(["a b"], "a", "b")
    with pytest.raises(ValueError):
        NGramLM.train(c, order=0)
    with pytest.raises(ValueError):
        NGramLM.train(Corpus(documents=[], vocab=c.vocab, source=""), order=1)
    with pytest.raises(ValueError):
        NGramLM.train(c, order=2, smoothing=Interpolated(weights=(1.0,), k=1.0))
    with pytest.raises(ValueError):
        AddK(k=0.0)
    with pytest.raises(ValueError):
        Interpolated(weights=(), k=1.0)
    with pytest.raises(ValueError):
        Interpolated(weights=(-1.0, 2.0), k=1.0)


def test_sequence_logprob_matches_stepwise_product():
    c = corpus_of(["a b c", "b c a"], "a", "b", "c")
    lm = NGramLM.train(c, order=2, smoothing=AddK(k=0.2))
    seq = [c.vocab.id_of(w) for w in "abcb"]
    expected = 0.0
    ctx: list[int] = []
    for tok in seq:
        expected += math.log(float(lm.next_distribution(ctx).probs[tok]))
        ctx.append(tok)
    assert lm.sequence_logprob(seq) == pytest.approx(expected, abs=1e-9)
    with pytest.raises(ValueError):
        lm.sequence_logprob([])


def test_save_load_round_trip(tmp_path):
    c = corpus_of(["a b c", "c a"], "a", "b", "c")
    lm = NGramLM.train(c, order=2, smoothing=AddK(k=0.3))
    p1, p2 = tmp_path / "lm1.txt", tmp_path / "lm2.txt"
    lm.save(p1)
    loaded = NGramLM.load(p1)
    for ctx in ([], [3], [4], [5, 3]):
        np.testing.assert_array_equal(
            loaded.next_distribution(ctx).probs, lm.next_distribution(ctx).probs
        )
    loaded.save(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_train_perplexity_beats_held_out(tmp_path):
    # Sanity trend, not a theorem: averaged over splits, the model scores
    # its own training half at most as perplexed as the held-out half.
    from decodelab.config import bundled_path

    vocab = build_vocabulary(open(bundled_path("corpus.txt"), encoding="utf-8").read().splitlines())
    corpus = load_corpus(bundled_path("corpus.txt"), vocab)
    eos = vocab.eos_id
    rng = np.random.default_rng(3)
    gaps = []
    for _ in range(10):
        idx = rng.permutation(len(corpus.documents))
        train_docs = [corpus.documents[i] for i in idx[:60]]
        held_docs = [corpus.documents[i] for i in idx[60:]]
        lm = NGramLM.train(Corpus(documents=train_docs, vocab=vocab, source=""), order=3)

        def pooled(docs):
            ds = [d + [eos] for d in docs if d]
            return perplexity([lm.sequence_logprob(d) for d in ds], [len(d) for d in ds])

        gaps.append(pooled(held_docs) - pooled(train_docs))
    assert float(np.mean(gaps)) > 0.0


def test_replay_provider(tmp_path):
    v = make_vocab("a")
    p = tmp_path / "steps.txt"
    p.write_text("2 1 1 0\n0 0 0 1\n0.25 0.25 0.25 0.25\n", encoding="utf-8")
    rp = ReplayProvider.load(p, v)
    assert len(rp) == 3 and rp.remaining == 3
    np.testing.assert_allclose(rp.next_distribution([]).probs, [0.5, 0.25, 0.25, 0.0])
    np.testing.assert_allclose(rp.replay_next().probs, [0.0, 0.0, 0.0, 1.0])
    rp.next_distribution([1, 2, 3])  # context is ignored, order is not
    with pytest.raises(EndOfStream):
        rp.replay_next()


@pytest.mark.parametrize(
    "body, message",
    [
        ("0.5 0.5 -1 1\n", "row 1"),
        ("0.25 0.25 0.25 0.25\n1 2\n", "row 2"),
        ("0 0 0 0\n", "row 1"),
        ("0.25 x 0.25 0.25\n", "row 1"),
    ],
)
def test_replay_provider_load_errors(tmp_path, body, message):
    v = make_vocab("a")
    p = tmp_path / "bad.txt"
    p.write_text(body, encoding="utf-8")
    with pytest.raises(ValueError, match=message):
        ReplayProvider.load(p, v)
