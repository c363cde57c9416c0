"""IBM Model 1 lexical translation and best-link alignment.

A single table t(target | source) is trained by EM with uniform
initialization; alignment of a sentence pair intersects the best links taken
in the target-to-source and source-to-target directions.
"""

from __future__ import annotations

from collections import defaultdict

from .errors import ContractError

NULL_TOKEN = "<null>"
FLOOR = 1e-9


class TranslationTable:
    """t(target | source) with a probability floor for unseen pairs."""

    def __init__(self):
        self._t: dict[str, dict[str, float]] = {}

    def prob(self, tgt_word: str, src_word: str) -> float:
        return self._t.get(src_word, {}).get(tgt_word, FLOOR)

    def set(self, src_word: str, dist: dict[str, float]):
        self._t[src_word] = dist

    def sources(self):
        return self._t.keys()


def train_ibm1(pairs, iterations: int = 10) -> tuple[TranslationTable, list[float]]:
    """EM on (source tokens, target tokens) pairs; returns the table and the
    per-iteration corpus log-likelihood (computed before each M-step)."""
    if not pairs:
        raise ContractError("cannot train an aligner on an empty corpus")
    if iterations < 1:
        raise ContractError(f"iterations must be positive, got {iterations}")
    tgt_vocab = sorted({w for _, tgt in pairs for w in tgt})
    src_vocab = sorted({w for src, _ in pairs for w in src} | {NULL_TOKEN})
    if not tgt_vocab:
        raise ContractError("aligner corpus has no target tokens")
    uniform = 1.0 / len(tgt_vocab)
    t = {s: {w: uniform for w in tgt_vocab} for s in src_vocab}

    import math
    history = []
    for _ in range(iterations):
        counts = {s: defaultdict(float) for s in src_vocab}
        totals = {s: 0.0 for s in src_vocab}
        ll = 0.0
        for src, tgt in pairs:
            s_full = list(src) + [NULL_TOKEN]
            for tw in tgt:
                denom = sum(t[sw][tw] for sw in s_full)
                ll += math.log(max(denom, FLOOR)) - math.log(len(s_full))
                for sw in s_full:
                    frac = t[sw][tw] / denom
                    counts[sw][tw] += frac
                    totals[sw] += frac
        history.append(ll)
        for sw in src_vocab:
            if totals[sw] > 0:
                t[sw] = {tw: c / totals[sw] for tw, c in counts[sw].items()}

    table = TranslationTable()
    for sw, dist in t.items():
        table.set(sw, dist)
    return table, history


def align_pair(src_tokens, tgt_tokens, table: TranslationTable) -> set[tuple[int, int]]:
    """Intersection of best links in both directions.

    Target-to-source links each target word to its best source word (or to
    none when the null word wins); source-to-target links each source word to
    its best target word.  Ties break toward the smaller index.
    """
    t2s = set()
    for j, tw in enumerate(tgt_tokens):
        best_i, best_p = None, -1.0
        for i, sw in enumerate(src_tokens):
            p = table.prob(tw, sw)
            if p > best_p:
                best_i, best_p = i, p
        # the null word only claims the target word when strictly better than
        # every real word; an all-floor row (never-seen word) links nowhere
        if best_i is not None and best_p > FLOOR and table.prob(tw, NULL_TOKEN) <= best_p:
            t2s.add((best_i, j))
    s2t = set()
    for i, sw in enumerate(src_tokens):
        best_j, best_p = None, -1.0
        for j, tw in enumerate(tgt_tokens):
            p = table.prob(tw, sw)
            if p > best_p:
                best_j, best_p = j, p
        if best_j is not None and best_p > FLOOR:
            s2t.add((i, best_j))
    return t2s & s2t
