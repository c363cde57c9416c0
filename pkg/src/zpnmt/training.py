"""Joint training loop and the ablation matrix.

Each epoch walks seeded length-sorted batches, averages per-example
gradients of the per-token-normalised loss terms, clips the global norm,
and takes one Adadelta step per batch.  Model selection is by validation
BLEU under greedy decoding (ties keep the earlier epoch); training stops
early after ``patience`` epochs without a new best.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import backward
from .data import (Document, LabelVocab, Vocab, examples_from_documents,
                   make_batches)
from .decoding import label_corpus, translate_corpus
from .errors import ContractError, DivergenceError, NumericError
from .metrics import bleu, zp_prf
from .model import JointModel, ModelConfig
from .optim import Adadelta, clip_gradients


@dataclass
class TrainConfig:
    epochs: int = 30
    patience: int = 5
    batch_size: int = 16
    max_len: int = 20
    clip_norm: float = 5.0
    reconstruction_weight: float = 1.0
    label_weight: float = 1.0
    seed: int = 0

    def validate(self):
        if self.epochs < 1 or self.patience < 1 or self.batch_size < 1:
            raise ContractError("epochs, patience and batch_size must be >= 1")
        if self.clip_norm <= 0:
            raise ContractError(f"clip_norm must be positive, got {self.clip_norm}")


@dataclass
class EpochRecord:
    epoch: int
    translation: float              # nats per target token
    reconstruction: float | None    # nats per source token
    labels: float | None            # nats per label slot
    valid_bleu: float
    valid_f1: float | None

    def as_line(self) -> str:
        def num(v):
            return "-" if v is None else f"{v:.6f}"

        return "\t".join([str(self.epoch), num(self.translation),
                          num(self.reconstruction), num(self.labels),
                          f"{self.valid_bleu:.4f}", num(self.valid_f1)])


@dataclass
class TrainResult:
    best_epoch: int
    best_bleu: float
    records: list[EpochRecord] = field(default_factory=list)

    def log_text(self) -> str:
        header = "epoch\tL\tR\tP\tvalid_bleu\tvalid_f1"
        lines = [header] + [r.as_line() for r in self.records]
        lines.append(f"best\t{self.best_epoch}\t{self.best_bleu:.4f}")
        return "\n".join(lines) + "\n"


def _flat_refs(docs: list[Document]) -> list[list[str]]:
    return [sent for doc in docs for sent in doc.tgt]


def validate_model(model: JointModel, docs: list[Document], src_vocab: Vocab,
                   tgt_vocab: Vocab,
                   label_vocab: LabelVocab | None = None) -> tuple[float, float | None]:
    """Greedy-decode BLEU and, when the model labels, word-level ZP F1.
    Never touches parameters."""
    hyp_docs = translate_corpus(model, docs, src_vocab, tgt_vocab, beam_size=1)
    score = bleu([s for d in hyp_docs for s in d], _flat_refs(docs))
    f1 = None
    if model.config.use_labeler and label_vocab is not None:
        pred = label_corpus(model, docs, src_vocab, beam_size=1)
        pred_lines = [label_vocab.decode(ids) for d in pred for ids in d]
        gold_lines = [lab for doc in docs for lab in doc.labels]
        f1 = zp_prf(gold_lines, pred_lines)["word"]["f1"]
    return score, f1


def train(model: JointModel, train_docs: list[Document], valid_docs: list[Document],
          src_vocab: Vocab, tgt_vocab: Vocab, label_vocab: LabelVocab | None,
          cfg: TrainConfig) -> TrainResult:
    cfg.validate()
    if model.config.use_labeler and label_vocab is None:
        raise ContractError("use_labeler needs a label vocabulary for training")
    examples = examples_from_documents(
        train_docs, src_vocab, tgt_vocab,
        label_vocab if model.config.use_labeler else None,
        k_context=model.config.k_context if model.config.use_discourse else 0)
    opt = Adadelta(model.store)
    result = TrainResult(best_epoch=0, best_bleu=-1.0)
    best_snapshot = model.store.snapshot()
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        sums = {"translation": 0.0, "reconstruction": 0.0, "labels": 0.0}
        counts = {"translation": 0, "reconstruction": 0, "labels": 0}
        batches = make_batches(examples, cfg.batch_size, cfg.max_len,
                               seed=cfg.seed + epoch)
        for b, batch in enumerate(batches):
            model.store.zero_grads()
            inv = 1.0 / len(batch.examples)
            for ex in batch.examples:
                try:
                    out = model.joint_loss(ex, cfg.reconstruction_weight,
                                           cfg.label_weight)
                except NumericError as e:
                    raise DivergenceError(
                        f"non-finite values at epoch {epoch}, batch {b}: {e}") from e
                loss = ad.scale(out["translation"], 1.0 / out["n_tgt"])
                sums["translation"] += float(out["translation"].data)
                counts["translation"] += out["n_tgt"]
                if out["reconstruction"] is not None:
                    loss = ad.add(loss, ad.scale(
                        out["reconstruction"],
                        cfg.reconstruction_weight / out["n_src"]))
                    sums["reconstruction"] += float(out["reconstruction"].data)
                    counts["reconstruction"] += out["n_src"]
                if out["labels"] is not None:
                    loss = ad.add(loss, ad.scale(
                        out["labels"], cfg.label_weight / out["n_slots"]))
                    sums["labels"] += float(out["labels"].data)
                    counts["labels"] += out["n_slots"]
                if not np.isfinite(loss.data):
                    raise DivergenceError(
                        f"non-finite loss at epoch {epoch}, batch {b}")
                backward(ad.scale(loss, inv))
            clip_gradients(model.store, cfg.clip_norm)
            opt.step()
        valid_bleu, valid_f1 = validate_model(model, valid_docs, src_vocab,
                                              tgt_vocab, label_vocab)
        result.records.append(EpochRecord(
            epoch=epoch,
            translation=sums["translation"] / counts["translation"],
            reconstruction=(sums["reconstruction"] / counts["reconstruction"]
                            if counts["reconstruction"] else None),
            labels=(sums["labels"] / counts["labels"]
                    if counts["labels"] else None),
            valid_bleu=valid_bleu, valid_f1=valid_f1))
        if valid_bleu > result.best_bleu:
            result.best_bleu = valid_bleu
            result.best_epoch = epoch
            best_snapshot = model.store.snapshot()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.store.restore(best_snapshot)
    return result


ABLATION_ROWS = ["baseline", "+reconstruction", "joint", "joint+discourse"]


def _row_config(base: ModelConfig, row: str) -> ModelConfig:
    over = dict(base.__dict__)
    over["use_reconstructor"] = row != "baseline"
    over["use_labeler"] = row in ("joint", "joint+discourse")
    over["use_discourse"] = row == "joint+discourse"
    return ModelConfig(**over)


def ablation_matrix(train_docs: list[Document], valid_docs: list[Document],
                    test_docs: list[Document], base: ModelConfig,
                    cfg: TrainConfig, src_vocab: Vocab, tgt_vocab: Vocab,
                    label_vocab: LabelVocab, seed: int = 0,
                    rescore_beta: float = 1.0,
                    rows: list[str] | None = None) -> dict:
    """Train each system variant with a shared seed and data, then score the
    test set: plain beam BLEU, beam BLEU with reconstruction re-scoring
    (where applicable), word-level ZP F1 (where applicable), and parameter
    counts."""
    table = {}
    refs = _flat_refs(test_docs)
    for row in rows if rows is not None else ABLATION_ROWS:
        model = JointModel(_row_config(base, row), seed=seed)
        result = train(model, train_docs, valid_docs, src_vocab, tgt_vocab,
                       label_vocab if model.config.use_labeler else None, cfg)
        hyp = translate_corpus(model, test_docs, src_vocab, tgt_vocab, beam_size=4)
        entry = {
            "bleu": bleu([s for d in hyp for s in d], refs),
            "bleu_rescored": None,
            "f1": None,
            "n_params": model.n_params(),
            "best_epoch": result.best_epoch,
            "model": model,
            "log": result.log_text(),
        }
        if model.config.use_reconstructor:
            re_hyp = translate_corpus(model, test_docs, src_vocab, tgt_vocab,
                                      beam_size=4, beta=rescore_beta)
            entry["bleu_rescored"] = bleu([s for d in re_hyp for s in d], refs)
        if model.config.use_labeler:
            pred = label_corpus(model, test_docs, src_vocab, beam_size=1)
            pred_lines = [label_vocab.decode(ids) for d in pred for ids in d]
            gold_lines = [lab for doc in test_docs for lab in doc.labels]
            entry["f1"] = zp_prf(gold_lines, pred_lines)["word"]["f1"]
        table[row] = entry
    return table


def render_ablation(table: dict) -> str:
    def num(v, fmt="{:.2f}"):
        return "n/a" if v is None else fmt.format(v)

    lines = ["system\tbleu\tbleu_rescored\tf1\tn_params"]
    for row, e in table.items():
        lines.append("\t".join([row, num(e["bleu"]), num(e["bleu_rescored"]),
                                num(e["f1"], "{:.4f}"), str(e["n_params"])]))
    return "\n".join(lines) + "\n"


def save_model(model: JointModel, out_dir, src_vocab: Vocab, tgt_vocab: Vocab,
               label_vocab: LabelVocab | None = None):
    """Write a self-contained model directory: checkpoint, config, vocabs."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.store.save(out / "model.ckpt")
    (out / "config.txt").write_text(model.config.to_text(), encoding="utf-8")
    src_vocab.save(out / "src.vocab")
    tgt_vocab.save(out / "tgt.vocab")
    if model.config.use_labeler:
        if label_vocab is None:
            raise ContractError("a labeling model needs its label vocabulary saved")
        label_vocab.save(out / "label.vocab")


def load_model(model_dir) -> tuple[JointModel, Vocab, Vocab, LabelVocab | None]:
    from pathlib import Path

    d = Path(model_dir)
    config = ModelConfig.from_text((d / "config.txt").read_text(encoding="utf-8"))
    model = JointModel(config, seed=0)
    model.store.load(d / "model.ckpt")
    src_vocab = Vocab.load(d / "src.vocab")
    tgt_vocab = Vocab.load(d / "tgt.vocab")
    label_vocab = LabelVocab.load(d / "label.vocab") if config.use_labeler else None
    return model, src_vocab, tgt_vocab, label_vocab
