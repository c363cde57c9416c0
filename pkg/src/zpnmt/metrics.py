"""Corpus BLEU, zero-pronoun P/R/F1, and the paired sign test."""

from __future__ import annotations

import math
from collections import Counter

from .data import NO_ZP
from .errors import ContractError

MAX_ORDER = 4


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _fold(tokens):
    return [t.casefold() for t in tokens]


def bleu(hypotheses, references) -> float:
    """Case-insensitive corpus BLEU-4: clipped modified precisions, geometric
    mean, brevity penalty, no smoothing (a zero at any order gives 0.0)."""
    if len(hypotheses) != len(references):
        raise ContractError(
            f"hypothesis count {len(hypotheses)} != reference count {len(references)}")
    if not hypotheses:
        raise ContractError("cannot score an empty corpus")
    matched = [0] * MAX_ORDER
    total = [0] * MAX_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = _fold(hyp)
        ref = _fold(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, MAX_ORDER + 1):
            hg = _ngrams(hyp, n)
            rg = _ngrams(ref, n)
            total[n - 1] += sum(hg.values())
            matched[n - 1] += sum(min(c, rg[g]) for g, c in hg.items())
    if any(t == 0 for t in total) or any(m == 0 for m in matched):
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(matched, total)) / MAX_ORDER
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_p)


def sentence_bleu(hypothesis, reference) -> float:
    """Sentence-level BLEU with add-one smoothing on orders 2..4 (order 1
    raw), for per-sentence comparisons."""
    hyp = _fold(hypothesis)
    ref = _fold(reference)
    if not hyp:
        return 0.0
    precisions = []
    for n in range(1, MAX_ORDER + 1):
        hg = _ngrams(hyp, n)
        rg = _ngrams(ref, n)
        t = sum(hg.values())
        m = sum(min(c, rg[g]) for g, c in hg.items())
        if n == 1:
            if m == 0:
                return 0.0
            precisions.append(m / t)
        else:
            precisions.append((m + 1.0) / (t + 1.0))
    log_p = sum(math.log(p) for p in precisions) / MAX_ORDER
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return 100.0 * bp * math.exp(log_p)


def zp_prf(gold_labels, predicted_labels) -> dict:
    """Precision/recall/F1 of zero-pronoun labels at two granularities.

    Position credits a prediction whose (line, slot) appears in the gold;
    word additionally requires the same pronoun.  Empty-against-empty
    counts as perfect.
    """
    if len(gold_labels) != len(predicted_labels):
        raise ContractError(
            f"gold has {len(gold_labels)} lines, predictions have {len(predicted_labels)}")
    gold = set()
    gold_words = set()
    pred = set()
    pred_words = set()
    for ln, (g, p) in enumerate(zip(gold_labels, predicted_labels)):
        if len(g) != len(p):
            raise ContractError(
                f"line {ln + 1}: gold has {len(g)} slots, prediction has {len(p)}")
        for s, lab in enumerate(g):
            if lab != NO_ZP:
                gold.add((ln, s))
                gold_words.add((ln, s, lab))
        for s, lab in enumerate(p):
            if lab != NO_ZP:
                pred.add((ln, s))
                pred_words.add((ln, s, lab))

    def prf(n_match, n_pred, n_gold):
        if n_pred == 0 and n_gold == 0:
            return {"precision": 1.0, "recall": 1.0, "f1": 1.0}
        p = n_match / n_pred if n_pred else 0.0
        r = n_match / n_gold if n_gold else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return {"precision": p, "recall": r, "f1": f}

    return {
        "position": prf(len(gold & pred), len(pred), len(gold)),
        "word": prf(len(gold_words & pred_words), len(pred_words), len(gold_words)),
        "n_gold": len(gold),
        "n_predicted": len(pred),
    }


def sign_test(scores_a, scores_b) -> dict:
    """Two-sided paired sign test; ties are dropped.

    Exact binomial tail for up to 1000 informative pairs, a normal
    approximation with continuity correction beyond.
    """
    if len(scores_a) != len(scores_b):
        raise ContractError(
            f"paired score lists differ in length: {len(scores_a)} vs {len(scores_b)}")
    wins = sum(1 for a, b in zip(scores_a, scores_b) if a > b)
    losses = sum(1 for a, b in zip(scores_a, scores_b) if a < b)
    n = wins + losses
    if n == 0:
        p = 1.0
    elif n <= 1000:
        k = min(wins, losses)
        tail = sum(math.comb(n, i) for i in range(k + 1)) / 2.0 ** n
        p = min(1.0, 2.0 * tail)
    else:
        k = min(wins, losses)
        z = (k - n / 2.0 + 0.5) / math.sqrt(n / 4.0)
        p = min(1.0, 2.0 * 0.5 * (1.0 + math.erf(z / math.sqrt(2.0))))
    return {"wins_a": wins, "wins_b": losses, "ties": len(scores_a) - n,
            "n_effective": n, "p_value": p}
