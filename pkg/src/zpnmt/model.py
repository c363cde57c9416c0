"""Encoder-decoder translation model with a source reconstructor, a
zero-pronoun labeler, and an optional cross-sentence context encoder.

The pipeline per sentence pair:

  * a bidirectional GRU encodes the source (eos included);
  * an attentional GRU decoder produces the target, one token per step;
  * a reconstructor GRU re-generates the original source from BOTH the
    encoder states and the decoder states through two attentions.  The
    encoder-side context vector joins the query of the decoder-side
    attention, so the two read heads are computed in sequence rather than
    independently;
  * a linear labeler predicts, at each reconstruction step, whether a
    pronoun was dropped in front of that source position (the step that
    re-generates eos covers the sentence-final slot).  Labeler weights live
    in their own parameter group ("gamma"); everything else is "theta";
  * with context enabled, previous source sentences are summarised by the
    shared encoder and folded by a sentence-level GRU into a vector C,
    which either gates the reconstructor's scoring/labeling states or is
    appended to the decoder input, depending on ``discourse_target``.

Losses are raw per-sentence sums; callers normalise per token.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import BOS, Example
from .errors import ContractError
from .nn import AdditiveAttention, Embedding, GRUCell, Linear
from .params import ParameterStore


@dataclass
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    n_labels: int
    emb_dim: int = 32
    enc_hidden: int = 64
    dec_hidden: int = 64
    rec_hidden: int = 64
    ctx_hidden: int = 64
    att_dim: int = 64
    k_context: int = 3
    use_reconstructor: bool = False
    use_labeler: bool = False
    use_discourse: bool = False
    discourse_target: str = "reconstructor"
    interactive_coupling: bool = True

    def validate(self):
        for f in ("src_vocab_size", "tgt_vocab_size", "n_labels", "emb_dim",
                  "enc_hidden", "dec_hidden", "rec_hidden", "ctx_hidden", "att_dim"):
            if getattr(self, f) < 1:
                raise ContractError(f"{f} must be positive, got {getattr(self, f)}")
        if self.k_context < 0:
            raise ContractError(f"k_context must be >= 0, got {self.k_context}")
        if self.use_labeler and not self.use_reconstructor:
            raise ContractError("the labeler reads reconstructor states; "
                                "use_labeler requires use_reconstructor")
        if self.discourse_target not in ("reconstructor", "decoder"):
            raise ContractError(
                f"discourse_target must be 'reconstructor' or 'decoder', "
                f"got {self.discourse_target!r}")
        if self.use_discourse and self.discourse_target == "reconstructor" \
                and not self.use_reconstructor:
            raise ContractError("discourse_target='reconstructor' requires "
                                "use_reconstructor")

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ContractError(f"bad config line {lineno}: {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in types:
                raise ContractError(f"unknown config key {key!r}")
            t = types[key]
            if t == "bool" or t is bool:
                kwargs[key] = value in ("True", "true", "1")
            elif t == "int" or t is int:
                kwargs[key] = int(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)


@dataclass
class Encoding:
    """Everything downstream consumers need about an encoded source."""

    states: Tensor                 # (T, 2*enc_hidden)
    bwd_first: Tensor              # (enc_hidden,) backward state at position 0
    dec_proj: Tensor               # states projected for the decoder attention
    rec_proj: Tensor | None = None  # same, for the reconstructor's encoder read


def _zeros(dim: int) -> Tensor:
    return Tensor(np.zeros(dim))


class JointModel:
    def __init__(self, config: ModelConfig, seed: int = 0):
        config.validate()
        self.config = config
        self.store = ParameterStore()
        rng = np.random.default_rng(seed)
        cfg = config
        store = self.store
        enc_state = 2 * cfg.enc_hidden

        self.src_emb = Embedding(store, "src_emb", cfg.src_vocab_size, cfg.emb_dim, rng)
        self.tgt_emb = Embedding(store, "tgt_emb", cfg.tgt_vocab_size, cfg.emb_dim, rng)
        self.enc_fwd = GRUCell(store, "enc_fwd", cfg.emb_dim, cfg.enc_hidden, rng)
        self.enc_bwd = GRUCell(store, "enc_bwd", cfg.emb_dim, cfg.enc_hidden, rng)

        self.dec_init = Linear(store, "dec_init", cfg.dec_hidden, cfg.enc_hidden, rng)
        self.dec_att = AdditiveAttention(store, "dec_att", cfg.dec_hidden + cfg.emb_dim,
                                         enc_state, cfg.att_dim, rng)
        dec_in = cfg.emb_dim + enc_state
        if cfg.use_discourse and cfg.discourse_target == "decoder":
            dec_in += cfg.ctx_hidden
        self.dec_gru = GRUCell(store, "dec_gru", dec_in, cfg.dec_hidden, rng)
        self.dec_out = Linear(store, "dec_out", cfg.tgt_vocab_size,
                              cfg.dec_hidden + enc_state + cfg.emb_dim, rng)

        if cfg.use_reconstructor:
            self.rec_init = Linear(store, "rec_init", cfg.rec_hidden, cfg.dec_hidden, rng)
            self.rec_att_enc = AdditiveAttention(
                store, "rec_att_enc", cfg.rec_hidden + cfg.emb_dim, enc_state,
                cfg.att_dim, rng)
            dec_query = cfg.rec_hidden + cfg.emb_dim
            if cfg.interactive_coupling:
                dec_query += enc_state
            self.rec_att_dec = AdditiveAttention(
                store, "rec_att_dec", dec_query, cfg.dec_hidden, cfg.att_dim, rng)
            self.rec_gru = GRUCell(store, "rec_gru",
                                   cfg.emb_dim + enc_state + cfg.dec_hidden,
                                   cfg.rec_hidden, rng)
            self.rec_out = Linear(store, "rec_out", cfg.src_vocab_size,
                                  cfg.rec_hidden + enc_state + cfg.dec_hidden + cfg.emb_dim,
                                  rng)
        if cfg.use_labeler:
            self.labeler = Linear(store, "labeler", cfg.n_labels, cfg.rec_hidden,
                                  rng, group="gamma")
        if cfg.use_discourse:
            self.ctx_init = store.add("ctx_init", np.zeros(cfg.ctx_hidden))
            self.ctx_gru = GRUCell(store, "ctx_gru", enc_state, cfg.ctx_hidden, rng)
            if cfg.discourse_target == "reconstructor":
                self.ctx_fuse = Linear(store, "ctx_fuse", cfg.rec_hidden,
                                       cfg.rec_hidden + cfg.ctx_hidden, rng)

    # ------------------------------------------------------------------
    # encoder

    def _birnn(self, ids: list[int]) -> tuple[list[Tensor], list[Tensor]]:
        embs = [self.src_emb(i) for i in ids]
        fwd = []
        h = _zeros(self.config.enc_hidden)
        for e in embs:
            h = self.enc_fwd.step(e, h)
            fwd.append(h)
        bwd = [None] * len(ids)
        h = _zeros(self.config.enc_hidden)
        for t in range(len(ids) - 1, -1, -1):
            h = self.enc_bwd.step(embs[t], h)
            bwd[t] = h
        return fwd, bwd

    def encode(self, ids: list[int]) -> Encoding:
        if not ids:
            raise ContractError("cannot encode an empty sentence")
        fwd, bwd = self._birnn(ids)
        rows = [ad.concat([f, b]) for f, b in zip(fwd, bwd)]
        states = ad.stack(rows)
        return Encoding(states=states, bwd_first=bwd[0],
                        dec_proj=self.dec_att.project(states))

    def sentence_summary(self, ids: list[int]) -> Tensor:
        """Fixed-size view of one sentence: last forward and first backward
        encoder states, concatenated."""
        fwd, bwd = self._birnn(ids)
        return ad.concat([fwd[-1], bwd[0]])

    def discourse_state(self, context: list[list[int]]) -> Tensor:
        """Fold the last ``k_context`` previous sentences (oldest first) into
        a context vector; no context yields the learned initial state."""
        C = self.ctx_init
        for ids in context[-self.config.k_context:] if self.config.k_context else []:
            if not ids:
                continue
            C = self.ctx_gru.step(self.sentence_summary(ids), C)
        return C

    # ------------------------------------------------------------------
    # decoder

    def init_decoder(self, enc: Encoding) -> Tensor:
        return ad.tanh(self.dec_init(enc.bwd_first))

    def decode_step(self, s_prev: Tensor, y_prev: int, enc: Encoding,
                    C: Tensor | None = None) -> tuple[Tensor, Tensor]:
        """One teacher-forced or search step: returns (new state, target
        distribution)."""
        e = self.tgt_emb(y_prev)
        c, _ = self.dec_att(ad.concat([s_prev, e]), enc.states, enc.dec_proj)
        parts = [e, c]
        if C is not None:
            parts.append(C)
        s = self.dec_gru.step(ad.concat(parts), s_prev)
        probs = ad.softmax(self.dec_out(ad.concat([s, c, e])))
        return s, probs

    def _decoder_context(self, C: Tensor | None) -> Tensor | None:
        if C is not None and self.config.discourse_target == "decoder":
            return C
        return None

    def forced_decode(self, y: list[int], enc: Encoding,
                      C: Tensor | None = None) -> tuple[list[Tensor], Tensor]:
        """Run the decoder over gold target ids (ending in eos); returns the
        per-step states and the summed negative log-likelihood."""
        C_dec = self._decoder_context(C)
        s = self.init_decoder(enc)
        states = []
        nll = None
        prev = BOS
        for t, y_t in enumerate(y):
            s, probs = self.decode_step(s, prev, enc, C_dec)
            states.append(s)
            step = ad.cross_entropy(probs, y_t)
            nll = step if nll is None else ad.add(nll, step)
            prev = y_t
        return states, nll

    # ------------------------------------------------------------------
    # reconstructor and labeler

    def init_reconstructor(self, dec_states: list[Tensor]) -> Tensor:
        return ad.tanh(self.rec_init(dec_states[-1]))

    def rec_step(self, h_prev: Tensor, x_prev: int, enc: Encoding,
                 dec_mem: Tensor, dec_proj: Tensor,
                 C: Tensor | None = None) -> dict:
        """One reconstruction step.  The encoder-side read happens first and
        its context vector extends the decoder-side attention query."""
        e = self.src_emb(x_prev)
        if enc.rec_proj is None:
            enc.rec_proj = self.rec_att_enc.project(enc.states)
        q_enc = ad.concat([h_prev, e])
        c_enc, a_enc = self.rec_att_enc(q_enc, enc.states, enc.rec_proj)
        if self.config.interactive_coupling:
            q_dec = ad.concat([h_prev, e, c_enc])
        else:
            q_dec = ad.concat([h_prev, e])
        c_dec, a_dec = self.rec_att_dec(q_dec, dec_mem, dec_proj)
        h = self.rec_gru.step(ad.concat([e, c_enc, c_dec]), h_prev)
        scored = h
        if C is not None and self.config.discourse_target == "reconstructor":
            scored = ad.tanh(self.ctx_fuse(ad.concat([h, C])))
        probs = ad.softmax(self.rec_out(ad.concat([scored, c_enc, c_dec, e])))
        return {"state": h, "scored": scored, "probs": probs,
                "alpha_enc": a_enc, "alpha_dec": a_dec}

    def reconstruct(self, x: list[int], enc: Encoding, dec_states: list[Tensor],
                    C: Tensor | None = None,
                    labels: list[int] | None = None) -> dict:
        """Re-generate the source (eos included) from encoder and decoder
        states.  Returns the reconstruction nll, per-slot label
        distributions when the labeler is enabled, and the label nll when
        gold labels are given."""
        if len(dec_states) == 0:
            raise ContractError("reconstructor needs at least one decoder state")
        if labels is not None and len(labels) != len(x):
            raise ContractError(
                f"{len(labels)} labels for {len(x)} source positions")
        # reuse the attention projections across steps
        enc.rec_proj = self.rec_att_enc.project(enc.states)
        dec_mem = ad.stack(dec_states)
        dec_proj = self.rec_att_dec.project(dec_mem)
        h = self.init_reconstructor(dec_states)
        nll = None
        label_nll = None
        label_probs = []
        alpha_enc = []
        alpha_dec = []
        prev = BOS
        for t, x_t in enumerate(x):
            step = self.rec_step(h, prev, enc, dec_mem, dec_proj, C)
            h = step["state"]
            alpha_enc.append(step["alpha_enc"])
            alpha_dec.append(step["alpha_dec"])
            term = ad.cross_entropy(step["probs"], x_t)
            nll = term if nll is None else ad.add(nll, term)
            if self.config.use_labeler:
                lp = ad.softmax(self.labeler(step["scored"]))
                label_probs.append(lp)
                if labels is not None:
                    lterm = ad.cross_entropy(lp, labels[t])
                    label_nll = lterm if label_nll is None else ad.add(label_nll, lterm)
            prev = x_t
        return {"nll": nll, "label_nll": label_nll, "label_probs": label_probs,
                "alpha_enc": alpha_enc, "alpha_dec": alpha_dec}

    # ------------------------------------------------------------------
    # joint objective

    def joint_loss(self, example: Example, reconstruction_weight: float = 1.0,
                   label_weight: float = 1.0) -> dict:
        """Per-sentence loss terms (raw sums, one entry per enabled term) and
        the token counts callers normalise by.  A term with weight 0 is not
        built at all, so its private parameters see no gradient."""
        cfg = self.config
        want_labels = cfg.use_labeler and label_weight != 0.0
        if want_labels and example.labels is None:
            raise ContractError("use_labeler is set but the example has no labels")
        enc = self.encode(example.x)
        C = self.discourse_state(example.context) if cfg.use_discourse else None
        dec_states, trans_nll = self.forced_decode(example.y, enc, C)
        out = {"translation": trans_nll, "reconstruction": None, "labels": None,
               "n_tgt": len(example.y), "n_src": len(example.x),
               "n_slots": len(example.x)}
        total = trans_nll
        if cfg.use_reconstructor and (reconstruction_weight != 0.0 or want_labels):
            rec = self.reconstruct(example.x, enc, dec_states, C,
                                   labels=example.labels if want_labels else None)
            if reconstruction_weight != 0.0:
                out["reconstruction"] = rec["nll"]
                total = ad.add(total, ad.scale(rec["nll"], reconstruction_weight))
            if want_labels:
                out["labels"] = rec["label_nll"]
                total = ad.add(total, ad.scale(rec["label_nll"], label_weight))
        out["total"] = total
        return out

    # ------------------------------------------------------------------
    # bookkeeping

    def n_params(self, group: str | None = None) -> int:
        return self.store.n_scalars(group)

    def describe(self) -> str:
        lines = ["model configuration:"]
        lines += ["  " + ln for ln in self.config.to_text().splitlines()]
        lines.append(f"parameters (theta): {self.n_params('theta')}")
        lines.append(f"parameters (gamma): {self.n_params('gamma')}")
        lines.append(f"parameters (total): {self.n_params()}")
        return "\n".join(lines)
