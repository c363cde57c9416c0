import time

from zpnmt.data import LabelVocab, Vocab
from zpnmt.decoding import translate_corpus
from zpnmt.metrics import bleu
from zpnmt.model import JointModel, ModelConfig
from zpnmt.synth import GenConfig, default_pronoun_vocab, generate_split
from zpnmt.training import TrainConfig, train


def log(*a):
    print(*a, flush=True)


SYSTEMS = [
    ("baseline", {}),
    ("joint", dict(use_reconstructor=True, use_labeler=True)),
    ("disc-k1", dict(use_reconstructor=True, use_labeler=True,
                     use_discourse=True, discourse_target="decoder",
                     k_context=1)),
]


def probe(spr, opr, batch, epochs, seed=1):
    cfg = GenConfig(subject_pronoun_rate=spr, object_pronoun_rate=opr)
    train_docs, _ = generate_split(cfg, cfg.train_docs, cfg.seed + 0)
    valid_docs, _ = generate_split(cfg, cfg.valid_docs, cfg.seed + 1)
    test_docs, gold = generate_split(cfg, cfg.test_docs, cfg.seed + 2)
    src = Vocab.build([s for d in train_docs for s in d.src])
    tgt = Vocab.build([s for d in train_docs for s in d.tgt])
    labels = LabelVocab(default_pronoun_vocab().pronouns)
    test_refs = [s for d in test_docs for s in d.tgt]
    n_cross = sum(g.antecedent_offset == 1 and g.dropped_object is not None
                  for g in gold)
    log(f"=== spr={spr} opr={opr} vocab={len(src)} batch={batch} seed={seed} "
        f"test_cross_slots={n_cross} ===")
    curves = {}
    for name, over in SYSTEMS:
        t = time.time()
        base = dict(src_vocab_size=len(src), tgt_vocab_size=len(tgt),
                    n_labels=len(labels), emb_dim=16, enc_hidden=32,
                    dec_hidden=32, rec_hidden=32, ctx_hidden=32, att_dim=32,
                    k_context=3)
        base.update(over)
        model = JointModel(ModelConfig(**base), seed=seed)
        tc = TrainConfig(epochs=epochs, patience=99, batch_size=batch, seed=seed)
        res = train(model, train_docs, valid_docs, src, tgt,
                    labels if over.get("use_labeler") else None, tc)
        curves[name] = [r.valid_bleu for r in res.records]
        hyp = translate_corpus(model, test_docs, src, tgt, beam_size=4)
        b = bleu([s for d in hyp for s in d], test_refs)
        log(f"{name}: best_epoch={res.best_epoch} test_bleu={b:.2f} "
            f"time={(time.time()-t)/60:.1f}min")
        for r in res.records:
            log("   ", r.as_line())
    log("== valid-BLEU best-so-far margins per epoch budget ==")
    for e in range(epochs):
        best = {n: max(c[:e + 1]) for n, c in curves.items() if len(c) > e}
        if len(best) < len(SYSTEMS):
            break
        log(f"  E={e+1}: base={best['baseline']:.2f} "
            f"joint={best['joint']:.2f} disc={best['disc-k1']:.2f} "
            f"| j-b={best['joint']-best['baseline']:+.2f} "
            f"d-j={best['disc-k1']-best['joint']:+.2f}")


probe(spr=0.5, opr=0.6, batch=128, epochs=3)
probe(spr=0.65, opr=0.7, batch=128, epochs=3)
log("done")
