"""IBM Model 1 EM and the interpolated n-gram language model."""

import math

import pytest

from zpnmt.align import NULL_TOKEN, align_pair, train_ibm1
from zpnmt.errors import ContractError
from zpnmt.lm import NGramLM


def test_ibm1_identity_corpus_converges():
    pairs = [(("a",), ("A",))] * 4
    table, _ = train_ibm1(pairs, iterations=5)
    assert table.prob("A", "a") == pytest.approx(1.0, abs=1e-6)


def test_ibm1_crossing_corpus_breaks_symmetry():
    # two pair types: the short one pins a<->A, leaving b to explain B
    pairs = [(("a",), ("A",)), (("a", "b"), ("B", "A"))] * 5
    table, _ = train_ibm1(pairs, iterations=10)
    assert table.prob("A", "a") > 0.9
    assert table.prob("B", "b") > 0.9


def test_ibm1_loglikelihood_non_decreasing():
    pairs = [(("a",), ("A",)), (("a", "b"), ("B", "A")), (("b", "c"), ("C", "B"))] * 3
    _, history = train_ibm1(pairs, iterations=10)
    assert len(history) == 10
    for earlier, later in zip(history, history[1:]):
        assert later >= earlier - 1e-9


def test_ibm1_rejects_empty_and_bad_iterations():
    with pytest.raises(ContractError):
        train_ibm1([], iterations=3)
    with pytest.raises(ContractError):
        train_ibm1([(("a",), ("A",))], iterations=0)


def test_align_crossing_pair():
    pairs = [(("a",), ("A",)), (("a", "b"), ("B", "A"))] * 5
    table, _ = train_ibm1(pairs, iterations=10)
    links = align_pair(("a", "b"), ("B", "A"), table)
    assert links == {(0, 1), (1, 0)}


def test_align_unseen_words_floor():
    pairs = [(("a",), ("A",))] * 3
    table, _ = train_ibm1(pairs, iterations=3)
    assert table.prob("Z", "zzz") == pytest.approx(1e-9)
    # nothing aligns confidently for fully unseen material
    links = align_pair(("zzz",), ("Z",), table)
    assert links == set()


def test_align_intersection_is_subset_of_both_directions():
    pairs = [(("x", "y"), ("X", "Y"))] * 4 + [(("x",), ("X",))] * 2
    table, _ = train_ibm1(pairs, iterations=8)
    links = align_pair(("x", "y"), ("X", "Y"), table)
    assert links == {(0, 0), (1, 1)}


# -- language model -----------------------------------------------------------


def corpus():
    return [["the", "cat", "sat"], ["the", "dog", "sat"], ["the", "cat", "ran"]]


def test_lm_continuations_sum_to_one():
    lm = NGramLM(order=3).fit(corpus())
    vocab = sorted(lm.vocab)
    for hist in (["the", "cat"], ["sat", "sat"], ["<s>", "the"], ["nope", "nope"]):
        total = sum(lm.prob(w, hist) for w in vocab)
        assert total == pytest.approx(1.0, abs=1e-6)


def test_lm_bigram_hand_computed():
    # unigram+bigram interpolation with add-0.5 smoothing, hand arithmetic
    lm = NGramLM(order=2, lambdas=(0.4, 0.6), alpha=0.5).fit([["a", "b"], ["a", "a"]])
    # vocab: a, b, <unk>, <eos> -> V=4
    # unigram counts over events incl. <eos>: a:3 b:1 <eos>:2, total 6
    # bigram hist ('a',): a:1 b:1 <eos>:1, total 3
    p_uni = (3 + 0.5) / (6 + 0.5 * 4)
    p_bi = (1 + 0.5) / (3 + 0.5 * 4)
    assert lm.prob("a", ["a"]) == pytest.approx(0.4 * p_uni + 0.6 * p_bi, rel=1e-12)


def test_lm_perplexity_matches_direct_computation():
    lm = NGramLM(order=2, lambdas=(0.5, 0.5), alpha=0.1).fit(corpus())
    sent = ["the", "cat", "sat"]
    lp = 0.0
    hist = ["<s>"]
    for w in sent + ["<eos>"]:
        lp += math.log(lm.prob(w, hist))
        hist.append(w)
    assert lm.logprob(sent) == pytest.approx(lp, rel=1e-12)
    assert lm.perplexity(sent) == pytest.approx(math.exp(-lp / 4), rel=1e-12)


def test_lm_seen_continuation_beats_unseen():
    lm = NGramLM(order=3).fit(corpus())
    assert lm.prob("cat", ["<s>", "the"]) > lm.prob("ran", ["<s>", "the"])


def test_lm_unknown_words_map_to_unk():
    lm = NGramLM(order=3).fit(corpus())
    assert lm.prob("xyzzy", ["the", "cat"]) == lm.prob("<unk>", ["the", "cat"])
    assert lm.perplexity(["xyzzy"]) > 0


def test_lm_validates_construction():
    with pytest.raises(ContractError):
        NGramLM(order=0)
    with pytest.raises(ContractError):
        NGramLM(order=2, lambdas=(0.5, 0.6))
    with pytest.raises(ContractError):
        NGramLM(order=2, lambdas=(1.0,))
    with pytest.raises(ContractError):
        NGramLM(order=2, lambdas=(0.5, 0.5), alpha=0.0)


def test_lm_save_load_roundtrip(tmp_path):
    lm = NGramLM(order=3).fit(corpus())
    path = tmp_path / "lm.json"
    lm.save(path)
    back = NGramLM.load(path)
    for hist in (["the", "cat"], ["dog", "sat"]):
        for w in ("sat", "the", "<eos>", "zzz"):
            assert back.prob(w, hist) == pytest.approx(lm.prob(w, hist), rel=1e-12)
    assert back.perplexity(["the", "cat", "sat"]) == \
        pytest.approx(lm.perplexity(["the", "cat", "sat"]), rel=1e-12)
