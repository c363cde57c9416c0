"""Interpolated n-gram language model with additive smoothing.

p(w | h) = sum_k lambda_k * p_k(w | last k-1 words of h), where each order's
conditional is add-alpha smoothed over the closed vocabulary (training types
plus unknown and sentence-end markers).  Every order is a proper distribution,
so the interpolation is too.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict

from .errors import ContractError
from .data import BOS_TOKEN, EOS_TOKEN, UNK_TOKEN

_SEP = "\x1f"


class NGramLM:
    def __init__(self, order: int = 3, lambdas: tuple[float, ...] = (0.1, 0.3, 0.6),
                 alpha: float = 0.01):
        if order < 1:
            raise ContractError(f"order must be at least 1, got {order}")
        if len(lambdas) != order:
            raise ContractError(f"need {order} interpolation weights, got {len(lambdas)}")
        if abs(sum(lambdas) - 1.0) > 1e-9:
            raise ContractError(f"interpolation weights must sum to 1, got {sum(lambdas)}")
        if alpha <= 0:
            raise ContractError(f"smoothing constant must be positive, got {alpha}")
        self.order = order
        self.lambdas = tuple(float(w) for w in lambdas)
        self.alpha = float(alpha)
        self.vocab: set[str] = {UNK_TOKEN, EOS_TOKEN}
        # counts[k][history][word] and totals[k][history], k = order of the n-gram
        self.counts: list[dict] = [defaultdict(lambda: defaultdict(float))
                                   for _ in range(order)]
        self.totals: list[dict] = [defaultdict(float) for _ in range(order)]

    def fit(self, sentences) -> "NGramLM":
        for sent in sentences:
            self.vocab.update(sent)
            padded = [BOS_TOKEN] * (self.order - 1) + list(sent) + [EOS_TOKEN]
            for i in range(self.order - 1, len(padded)):
                w = padded[i]
                for k in range(1, self.order + 1):
                    hist = tuple(padded[i - k + 1:i])
                    self.counts[k - 1][hist][w] += 1.0
                    self.totals[k - 1][hist] += 1.0
        return self

    def _norm(self, token: str) -> str:
        return token if token in self.vocab or token == BOS_TOKEN else UNK_TOKEN

    def prob(self, word: str, history) -> float:
        """Interpolated probability of one continuation."""
        w = self._norm(word)
        hist = [self._norm(t) for t in history]
        v = len(self.vocab)
        p = 0.0
        for k in range(1, self.order + 1):
            h = tuple(hist[len(hist) - k + 1:]) if k > 1 else ()
            c = self.counts[k - 1].get(h, {}).get(w, 0.0) if self.counts[k - 1].get(h) else 0.0
            t = self.totals[k - 1].get(h, 0.0)
            p += self.lambdas[k - 1] * (c + self.alpha) / (t + self.alpha * v)
        return p

    def logprob(self, sentence) -> float:
        """Total log-probability of a sentence including the end marker."""
        padded = [BOS_TOKEN] * (self.order - 1) + [self._norm(t) for t in sentence] \
            + [EOS_TOKEN]
        lp = 0.0
        for i in range(self.order - 1, len(padded)):
            lp += math.log(self.prob(padded[i], padded[i - self.order + 1:i]))
        return lp

    def perplexity(self, sentence) -> float:
        n = len(sentence) + 1  # sentence-end event included
        return math.exp(-self.logprob(sentence) / n)

    # -- persistence ---------------------------------------------------------

    def save(self, path):
        blob = {
            "order": self.order,
            "lambdas": list(self.lambdas),
            "alpha": self.alpha,
            "vocab": sorted(self.vocab),
            "counts": [
                {_SEP.join(h): dict(words) for h, words in level.items()}
                for level in self.counts
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(blob, fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "NGramLM":
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
        lm = cls(order=blob["order"], lambdas=tuple(blob["lambdas"]), alpha=blob["alpha"])
        lm.vocab = set(blob["vocab"])
        for k, level in enumerate(blob["counts"]):
            for hkey, words in level.items():
                hist = tuple(hkey.split(_SEP)) if hkey else ()
                for w, c in words.items():
                    lm.counts[k][hist][w] = c
                    lm.totals[k][hist] += c
        return lm
