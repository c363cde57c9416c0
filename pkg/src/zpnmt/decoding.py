"""Beam-search translation, reconstruction re-scoring, and test-time
zero-pronoun labeling.

The translate path consumes only source tokens and previous source
sentences; gold labels and reference targets never enter it.  Labeling runs
the reconstructor over the top hypothesis's decoder states, so predicting
pronouns needs no annotated input either.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import BOS, EOS, Document, Vocab
from .errors import ContractError
from .model import JointModel


@dataclass
class Hypothesis:
    tokens: list[int]
    log_likelihood: float
    state: Tensor | None = field(default=None, repr=False)
    states: list[Tensor] = field(default_factory=list, repr=False)
    finished: bool = False
    rec_score: float | None = None
    combined: float | None = None

    @property
    def normalized(self) -> float:
        return self.log_likelihood / max(1, len(self.tokens))

    def score(self) -> float:
        return self.combined if self.combined is not None else self.normalized


def _rank(hyps: list[Hypothesis]) -> list[Hypothesis]:
    """Best first; exact ties break toward the lexicographically smaller
    token sequence, so ranking is deterministic even for uniform models."""
    return sorted(hyps, key=lambda h: (-h.score(), tuple(h.tokens)))


def beam_search(model: JointModel, x: list[int], context: list[list[int]] | None = None,
                beam_size: int = 4, max_ratio: float = 2.0) -> list[Hypothesis]:
    """N-best decoding ranked by length-normalised log-likelihood.

    Expansion stops at eos or after max_ratio * len(x) tokens; finished
    hypotheses leave the beam, so beam_size bounds the live frontier only.
    """
    if beam_size < 1:
        raise ContractError(f"beam_size must be at least 1, got {beam_size}")
    if max_ratio <= 0:
        raise ContractError(f"max_ratio must be positive, got {max_ratio}")
    with ad.no_grad():
        enc = model.encode(x)
        C = model.discourse_state(context or []) if model.config.use_discourse else None
        C_dec = C if (C is not None and model.config.discourse_target == "decoder") \
            else None
        beam = [Hypothesis(tokens=[], log_likelihood=0.0,
                           state=model.init_decoder(enc))]
        finished: list[Hypothesis] = []
        max_len = max(1, int(max_ratio * len(x)))
        while beam:
            pool = []
            for hyp in beam:
                prev = hyp.tokens[-1] if hyp.tokens else BOS
                s, probs = model.decode_step(hyp.state, prev, enc, C_dec)
                logp = np.log(np.maximum(probs.data, 1e-300))
                for w in range(len(logp)):
                    pool.append(Hypothesis(tokens=hyp.tokens + [w],
                                           log_likelihood=hyp.log_likelihood + logp[w],
                                           state=s, states=hyp.states + [s],
                                           finished=(w == EOS)))
            # prune first, then retire: with beam_size 1 this is exactly greedy
            top = _rank(pool)[:beam_size]
            finished.extend(h for h in top if h.finished)
            beam = [h for h in top if not h.finished]
            if beam and len(beam[0].tokens) >= max_len:
                finished.extend(beam)
                beam = []
        return _rank(finished)[:beam_size]


def rescore(hyps: list[Hypothesis], x: list[int], model: JointModel, beta: float,
            context: list[list[int]] | None = None) -> list[Hypothesis]:
    """Re-rank hypotheses by normalised likelihood plus beta times the
    per-source-token reconstruction score of x from each hypothesis's
    decoder states."""
    if not model.config.use_reconstructor:
        raise ContractError("re-scoring needs a model with a reconstructor")
    with ad.no_grad():
        enc = model.encode(x)
        C = model.discourse_state(context or []) if model.config.use_discourse else None
        out = []
        for hyp in hyps:
            rec = model.reconstruct(x, enc, hyp.states, C)
            hyp.rec_score = -float(rec["nll"].data) / max(1, len(x))
            hyp.combined = hyp.normalized + beta * hyp.rec_score
            out.append(hyp)
    return _rank(out)


def labels_from_probs(rows: list[np.ndarray]) -> list[int]:
    """Per-slot argmax; exact ties resolve to the lowest label id."""
    return [int(np.argmax(np.asarray(r))) for r in rows]


def predict_labels(model: JointModel, x: list[int],
                   context: list[list[int]] | None = None, beam_size: int = 4,
                   max_ratio: float = 2.0) -> list[int]:
    """Zero-pronoun labels for one source sentence, one id per position
    including the eos slot, read off the top hypothesis's decoder states."""
    if not model.config.use_labeler:
        raise ContractError("label prediction needs a model with a labeler")
    best = beam_search(model, x, context, beam_size, max_ratio)[0]
    with ad.no_grad():
        enc = model.encode(x)
        C = model.discourse_state(context or []) if model.config.use_discourse else None
        rec = model.reconstruct(x, enc, best.states, C)
    return labels_from_probs([p.data for p in rec["label_probs"]])


def _doc_contexts(sent_ids: list[list[int]], k: int) -> list[list[list[int]]]:
    out = []
    for s in range(len(sent_ids)):
        out.append(sent_ids[max(0, s - k):s] if k else [])
    return out


def translate_corpus(model: JointModel, docs: list[Document], src_vocab: Vocab,
                     tgt_vocab: Vocab, beam_size: int = 4, max_ratio: float = 2.0,
                     beta: float = 0.0) -> list[list[list[str]]]:
    """Translate documents in order, rolling the source-side context window
    within each document.  Returns token lists per document per sentence."""
    out = []
    for doc in docs:
        xs = [src_vocab.encode(sent, append_eos=True) for sent in doc.src]
        contexts = _doc_contexts(xs, model.config.k_context)
        sents = []
        for x, ctx in zip(xs, contexts):
            hyps = beam_search(model, x, ctx, beam_size, max_ratio)
            if beta != 0.0:
                hyps = rescore(hyps, x, model, beta, ctx)
            sents.append(tgt_vocab.decode(hyps[0].tokens, strip_eos=True))
        out.append(sents)
    return out


def label_corpus(model: JointModel, docs: list[Document], src_vocab: Vocab,
                 beam_size: int = 4, max_ratio: float = 2.0) -> list[list[list[int]]]:
    """Predicted label ids per document per sentence (eos slot included)."""
    out = []
    for doc in docs:
        xs = [src_vocab.encode(sent, append_eos=True) for sent in doc.src]
        contexts = _doc_contexts(xs, model.config.k_context)
        out.append([predict_labels(model, x, ctx, beam_size, max_ratio)
                    for x, ctx in zip(xs, contexts)])
    return out
