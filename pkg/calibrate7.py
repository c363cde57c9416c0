import time

from zpnmt.data import LabelVocab, Vocab
from zpnmt.decoding import translate_corpus
from zpnmt.metrics import bleu
from zpnmt.model import JointModel, ModelConfig
from zpnmt.synth import GenConfig, default_pronoun_vocab, generate_split
from zpnmt.training import TrainConfig, train


def log(*a):
    print(*a, flush=True)


def probe(nouns, verbs, spr, opr, batch, epochs, systems, seed=1):
    cfg = GenConfig(nouns_a=nouns, nouns_b=nouns, verbs=verbs,
                    subject_pronoun_rate=spr, object_pronoun_rate=opr)
    train_docs, _ = generate_split(cfg, cfg.train_docs, cfg.seed + 0)
    valid_docs, _ = generate_split(cfg, cfg.valid_docs, cfg.seed + 1)
    test_docs, gold = generate_split(cfg, cfg.test_docs, cfg.seed + 2)
    src = Vocab.build([s for d in train_docs for s in d.src])
    tgt = Vocab.build([s for d in train_docs for s in d.tgt])
    labels = LabelVocab(default_pronoun_vocab().pronouns)
    test_refs = [s for d in test_docs for s in d.tgt]
    n_cross = sum(g.antecedent_offset == 1 and g.dropped_object is not None
                  for g in gold)
    log(f"=== vocab={len(src)} spr={spr} opr={opr} batch={batch} seed={seed} "
        f"test_cross_slots={n_cross} ===")
    curves = {}
    for name, over, wl in systems:
        t = time.time()
        base = dict(src_vocab_size=len(src), tgt_vocab_size=len(tgt),
                    n_labels=len(labels), emb_dim=16, enc_hidden=32,
                    dec_hidden=32, rec_hidden=32, ctx_hidden=32, att_dim=32,
                    k_context=3)
        base.update(over)
        model = JointModel(ModelConfig(**base), seed=seed)
        tc = TrainConfig(epochs=epochs, patience=99, batch_size=batch,
                         seed=seed, label_weight=wl)
        res = train(model, train_docs, valid_docs, src, tgt,
                    labels if over.get("use_labeler") else None, tc)
        curves[name] = [r.valid_bleu for r in res.records]
        hyp = translate_corpus(model, test_docs, src, tgt, beam_size=4)
        b = bleu([s for d in hyp for s in d], test_refs)
        log(f"{name}: best_epoch={res.best_epoch} test_bleu={b:.2f} "
            f"time={(time.time()-t)/60:.1f}min")
        for r in res.records:
            log("   ", r.as_line())
    names = [n for n, _, _ in systems]
    log("== valid-BLEU best-so-far per epoch budget ==")
    for e in range(epochs):
        best = {n: max(curves[n][:e + 1]) for n in names if len(curves[n]) > e}
        if len(best) < len(names):
            break
        log("  E=%d: " % (e + 1) +
            " ".join(f"{n}={best[n]:.2f}" for n in names))


SYS_A = [
    ("baseline", {}, 1.0),
    ("joint", dict(use_reconstructor=True, use_labeler=True), 1.0),
    ("disc-k1", dict(use_reconstructor=True, use_labeler=True,
                     use_discourse=True, discourse_target="decoder",
                     k_context=1), 1.0),
]
SYS_B = [
    ("joint-w3", dict(use_reconstructor=True, use_labeler=True), 3.0),
    ("disc-k1-w3", dict(use_reconstructor=True, use_labeler=True,
                        use_discourse=True, discourse_target="decoder",
                        k_context=1), 3.0),
]

probe(nouns=8, verbs=12, spr=0.8, opr=0.8, batch=64, epochs=5,
      systems=SYS_A + SYS_B)
log("done")
