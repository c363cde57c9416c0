import time

from zpnmt.data import LabelVocab, Vocab
from zpnmt.decoding import label_corpus, translate_corpus
from zpnmt.metrics import bleu, zp_prf
from zpnmt.model import JointModel, ModelConfig
from zpnmt.synth import GenConfig, default_pronoun_vocab, generate_split
from zpnmt.training import TrainConfig, train


def log(*a):
    print(*a, flush=True)


cfg = GenConfig()
t0 = time.time()
train_docs, _ = generate_split(cfg, cfg.train_docs, cfg.seed + 0)
valid_docs, _ = generate_split(cfg, cfg.valid_docs, cfg.seed + 1)
test_docs, _ = generate_split(cfg, cfg.test_docs, cfg.seed + 2)
log(f"gen {time.time()-t0:.1f}s  train={sum(len(d) for d in train_docs)} sents")

src = Vocab.build([s for d in train_docs for s in d.src])
tgt = Vocab.build([s for d in train_docs for s in d.tgt])
labels = LabelVocab(default_pronoun_vocab().pronouns)
log(f"vocab src={len(src)} tgt={len(tgt)} labels={len(labels)}")


def mc(**over):
    base = dict(src_vocab_size=len(src), tgt_vocab_size=len(tgt),
                n_labels=len(labels), emb_dim=16, enc_hidden=32, dec_hidden=32,
                rec_hidden=32, ctx_hidden=32, att_dim=32, k_context=3)
    base.update(over)
    return ModelConfig(**base)


def run(name, mcfg, epochs, seed=1):
    t = time.time()
    model = JointModel(mcfg, seed=seed)
    tc = TrainConfig(epochs=epochs, patience=5, batch_size=16, seed=seed)
    res = train(model, train_docs, valid_docs, src, tgt,
                labels if mcfg.use_labeler else None, tc)
    hyp = translate_corpus(model, test_docs, src, tgt, beam_size=4)
    b = bleu([s for d in hyp for s in d], [s for d in test_docs for s in d.tgt])
    log(f"{name}: test_bleu={b:.2f} best_epoch={res.best_epoch} "
        f"best_valid={res.best_bleu:.2f} time={(time.time()-t)/60:.1f}min "
        f"params={model.n_params()}")
    for r in res.records:
        log("   ", r.as_line())
    f1 = None
    if mcfg.use_labeler:
        pred = label_corpus(model, test_docs, src, beam_size=1)
        pred_lines = [labels.decode(ids) for d in pred for ids in d]
        gold_lines = [lab for doc in test_docs for lab in doc.labels]
        f1 = zp_prf(gold_lines, pred_lines)["word"]["f1"]
        log(f"{name}: word_f1={f1:.4f}")
    return b, f1, model


EP = 10
b0, _, m0 = run("baseline", mc(), EP)
b1, f1_joint, m1 = run("joint", mc(use_reconstructor=True, use_labeler=True), EP)
b2, f1_disc, m2 = run("joint+discourse",
                      mc(use_reconstructor=True, use_labeler=True,
                         use_discourse=True), EP)
log(f"margins: joint-baseline={b1-b0:.2f} disc-joint={b2-b1:.2f}")
log(f"f1: joint={f1_joint:.4f} disc={f1_disc:.4f}")

# criterion 5 contrast: rescoring off vs on for the joint model
hyp_on = translate_corpus(m1, test_docs, src, tgt, beam_size=4, beta=1.0)
b1_on = bleu([s for d in hyp_on for s in d], [s for d in test_docs for s in d.tgt])
log(f"joint rescored: {b1_on:.2f} (delta {b1_on-b1:+.2f})")
