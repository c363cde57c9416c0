import time

from zpnmt.data import LabelVocab, Vocab
from zpnmt.decoding import translate_corpus
from zpnmt.metrics import bleu
from zpnmt.model import JointModel, ModelConfig
from zpnmt.synth import GenConfig, default_pronoun_vocab, generate_split
from zpnmt.training import TrainConfig, train


def log(*a):
    print(*a, flush=True)


cfg = GenConfig()
train_docs, _ = generate_split(cfg, cfg.train_docs, cfg.seed + 0)
valid_docs, _ = generate_split(cfg, cfg.valid_docs, cfg.seed + 1)
test_docs, _ = generate_split(cfg, cfg.test_docs, cfg.seed + 2)
src = Vocab.build([s for d in train_docs for s in d.src])
tgt = Vocab.build([s for d in train_docs for s in d.tgt])
labels = LabelVocab(default_pronoun_vocab().pronouns)
test_refs = [s for d in test_docs for s in d.tgt]


def mc(**over):
    base = dict(src_vocab_size=len(src), tgt_vocab_size=len(tgt),
                n_labels=len(labels), emb_dim=16, enc_hidden=32, dec_hidden=32,
                rec_hidden=32, ctx_hidden=32, att_dim=32, k_context=3)
    base.update(over)
    return ModelConfig(**base)


SYSTEMS = [
    ("baseline", {}),
    ("joint", dict(use_reconstructor=True, use_labeler=True)),
    ("disc-dec", dict(use_reconstructor=True, use_labeler=True,
                      use_discourse=True, discourse_target="decoder")),
]


def probe(batch, epochs=8, seed=1):
    curves = {}
    for name, over in SYSTEMS:
        t = time.time()
        model = JointModel(mc(**over), seed=seed)
        tc = TrainConfig(epochs=epochs, patience=99, batch_size=batch, seed=seed)
        res = train(model, train_docs, valid_docs, src, tgt,
                    labels if over.get("use_labeler") else None, tc)
        curves[name] = [r.valid_bleu for r in res.records]
        hyp = translate_corpus(model, test_docs, src, tgt, beam_size=4)
        b = bleu([s for d in hyp for s in d], test_refs)
        extra = ""
        if over.get("use_reconstructor"):
            hyp_on = translate_corpus(model, test_docs, src, tgt,
                                      beam_size=4, beta=1.0)
            b_on = bleu([s for d in hyp_on for s in d], test_refs)
            extra = f" test_rescored={b_on:.2f}"
        log(f"batch={batch} {name}: best_epoch={res.best_epoch} "
            f"test_bleu={b:.2f}{extra} time={(time.time()-t)/60:.1f}min")
        for r in res.records:
            log("   ", r.as_line())
    log(f"== batch={batch} valid-BLEU best-so-far margins per epoch budget ==")
    for e in range(epochs):
        best = {n: max(c[:e + 1]) for n, c in curves.items() if len(c) > e}
        if len(best) < 3:
            break
        log(f"  E={e+1}: base={best['baseline']:.2f} "
            f"joint={best['joint']:.2f} disc={best['disc-dec']:.2f} "
            f"| j-b={best['joint']-best['baseline']:+.2f} "
            f"d-j={best['disc-dec']-best['joint']:+.2f}")


probe(batch=64, epochs=4)
probe(batch=128, epochs=4)
log("done")
