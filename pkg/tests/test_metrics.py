"""BLEU fixtures, labeling P/R/F1, sign test exact values."""

import math
import random

import pytest

from zpnmt.errors import ContractError
from zpnmt.metrics import bleu, sentence_bleu, sign_test, zp_prf


def test_bleu_identity_is_100():
    sents = [["a", "b", "c", "d"], ["e", "f", "g", "h", "i"]]
    assert bleu(sents, sents) == 100.0


def test_bleu_case_insensitive():
    hyp = [["The", "Cat", "Sat", "On", "Mats"]]
    ref = [["the", "cat", "sat", "on", "mats"]]
    assert bleu(hyp, ref) == 100.0


def test_bleu_clipping_and_zero_order():
    # "the the the the the" vs "the cat sat": unigram precision clipped to
    # 1/5; no bigram match, so unsmoothed BLEU is exactly 0
    hyp = [["the", "the", "the", "the", "the"]]
    ref = [["the", "cat", "sat"]]
    assert bleu(hyp, ref) == 0.0


def test_bleu_hand_computed_two_line_fixture():
    # two 6-token lines; per line: 5/6 unigrams, 3/5 bigrams, 2/4 trigrams,
    # 1/3 four-grams match, so corpus precisions are 5/6, 3/5, 2/4, 1/3 with
    # equal lengths (no brevity penalty):
    # BLEU = 100 * (5/6 * 3/5 * 2/4 * 1/3) ** 0.25 = 100 * (1/12) ** 0.25
    hyp = [["a", "b", "c", "d", "x", "e"], ["g", "h", "i", "j", "y", "k"]]
    ref = [["a", "b", "c", "d", "e", "f"], ["g", "h", "i", "j", "k", "l"]]
    expected = 100.0 * (5 / 6 * 3 / 5 * 2 / 4 * 1 / 3) ** 0.25
    assert expected == pytest.approx(53.728, abs=0.002)
    assert bleu(hyp, ref) == pytest.approx(expected, abs=0.05)


def test_bleu_brevity_penalty():
    # identical content, hypothesis shorter than reference
    hyp = [["a", "b", "c", "d"]]
    ref = [["a", "b", "c", "d", "e"]]
    got = bleu(hyp, ref)
    # p1=4/4 p2=3/3 p3=2/2 p4=1/1, BP=exp(1-5/4)
    assert got == pytest.approx(100.0 * math.exp(1 - 5 / 4), rel=1e-9)
    # longer hypothesis incurs no penalty but loses precision instead
    hyp2 = [["a", "b", "c", "d", "e", "z"]]
    ref2 = [["a", "b", "c", "d", "e"]]
    assert bleu(hyp2, ref2) < 100.0


def test_bleu_corpus_level_not_average():
    # corpus BLEU pools counts; it is not the mean of sentence scores
    hyp = [["a", "b", "c", "d"], ["q", "r", "s", "t"]]
    ref = [["a", "b", "c", "d"], ["q", "r", "x", "y"]]
    pooled = bleu(hyp, ref)
    mean = (bleu(hyp[:1], ref[:1]) + bleu(hyp[1:], ref[1:])) / 2
    assert pooled != pytest.approx(mean)


def test_bleu_errors():
    with pytest.raises(ContractError):
        bleu([["a"]], [])
    with pytest.raises(ContractError):
        bleu([], [])


def test_sentence_bleu_smoothing_orders():
    # a 3-token identical pair has no 4-grams; smoothing keeps it positive
    s = sentence_bleu(["a", "b", "c"], ["a", "b", "c"])
    assert 0.0 < s <= 100.0
    # zero unigram overlap is still zero
    assert sentence_bleu(["x"], ["y"]) == 0.0
    assert sentence_bleu([], ["y"]) == 0.0


def test_sentence_bleu_prefers_better_match():
    ref = ["the", "cat", "sat", "down"]
    good = sentence_bleu(["the", "cat", "sat", "down"], ref)
    ok = sentence_bleu(["the", "cat", "ran", "down"], ref)
    assert good > ok > 0.0


# -- zp_prf -------------------------------------------------------------------


def test_zp_prf_worked_example():
    # 4 gold pronouns, 5 predictions, 3 correct on position+word:
    # P=3/5, R=3/4, F1=2/3
    gold = [
        ["ta", "N", "N"],
        ["N", "wo", "N"],
        ["N", "N", "ta"],
        ["ni", "N", "N"],
    ]
    pred = [
        ["ta", "N", "N"],      # correct
        ["N", "wo", "N"],      # correct
        ["N", "N", "ta"],      # correct
        ["N", "ni", "N"],      # wrong slot
        # extra line: one spurious prediction
    ]
    gold.append(["N", "N", "N"])
    pred.append(["wo", "N", "N"])
    res = zp_prf(gold, pred)
    assert res["word"]["precision"] == pytest.approx(3 / 5)
    assert res["word"]["recall"] == pytest.approx(3 / 4)
    assert res["word"]["f1"] == pytest.approx(2 / 3)


def test_zp_prf_word_no_better_than_position():
    gold = [["ta", "N"], ["N", "wo"]]
    pred = [["wo", "N"], ["N", "wo"]]  # first is right slot, wrong word
    res = zp_prf(gold, pred)
    assert res["position"]["f1"] == pytest.approx(1.0)
    assert res["word"]["f1"] == pytest.approx(0.5)
    assert res["word"]["f1"] <= res["position"]["f1"]


def test_zp_prf_randomized_word_leq_position():
    rng = random.Random(3)
    words = ["N", "N", "N", "ta", "wo"]
    for _ in range(50):
        gold = [[rng.choice(words) for _ in range(4)] for _ in range(6)]
        pred = [[rng.choice(words) for _ in range(4)] for _ in range(6)]
        res = zp_prf(gold, pred)
        assert res["word"]["f1"] <= res["position"]["f1"] + 1e-12


def test_zp_prf_edge_cases():
    empty = [["N", "N"]]
    assert zp_prf(empty, empty)["word"]["f1"] == 1.0
    res = zp_prf(empty, [["ta", "N"]])
    assert res["position"]["precision"] == 0.0
    assert res["position"]["f1"] == 0.0
    with pytest.raises(ContractError):
        zp_prf([["N"]], [["N"], ["N"]])
    with pytest.raises(ContractError):
        zp_prf([["N", "N"]], [["N"]])


# -- sign test ------------------------------------------------------------------


def test_sign_test_ten_zero():
    res = sign_test(list(range(1, 11)), [0] * 10)
    assert res["wins_a"] == 10
    assert res["p_value"] == pytest.approx(2 * 0.5 ** 10)  # 0.001953


def test_sign_test_six_four():
    a = [1, 1, 1, 1, 1, 1, 0, 0, 0, 0]
    b = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1]
    res = sign_test(a, b)
    expected = sum(math.comb(10, k) for k in list(range(5)) + list(range(6, 11))) / 2 ** 10
    assert res["p_value"] == pytest.approx(expected)
    assert res["p_value"] == pytest.approx(0.754, abs=1e-3)


def test_sign_test_all_ties():
    res = sign_test([1.0, 2.0], [1.0, 2.0])
    assert res["n_effective"] == 0
    assert res["p_value"] == 1.0


def test_sign_test_symmetry_and_cap():
    a = [1, 0, 1, 0, 1]
    b = [0, 1, 0, 1, 0]
    assert sign_test(a, b)["p_value"] == pytest.approx(sign_test(b, a)["p_value"])
    even = sign_test([1, 0], [0, 1])
    assert even["p_value"] == 1.0  # capped


def test_sign_test_large_n_normal_approximation():
    rng = random.Random(0)
    a = [rng.random() for _ in range(2000)]
    b = [rng.random() for _ in range(2000)]
    res = sign_test(a, b)
    assert 0.0 <= res["p_value"] <= 1.0
    # strongly one-sided large sample is significant
    res2 = sign_test([1.0] * 1200, [0.0] * 1200)
    assert res2["p_value"] < 1e-6


def test_sign_test_length_mismatch():
    with pytest.raises(ContractError):
        sign_test([1.0], [1.0, 2.0])
