"""Command-line entry point wiring corpus generation, annotation, training,
decoding, and evaluation into reproducible pipelines.

Configuration resolves in three layers: dataclass defaults, then an optional
key=value config file, then command-line flags (flags win).  Every run logs
its resolved configuration to stderr, and every artifact file written gets a
``<file>.meta`` sidecar naming the tool version and the resolved-config hash.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .align import train_ibm1
from .annotate import PronounVocab, annotate_corpus
from .data import (LabelVocab, Vocab, load_documents, load_source_documents,
                   write_parallel)
from .decoding import label_corpus, translate_corpus
from .errors import ContractError, FormatError, ZpnmtError
from .lm import NGramLM
from .metrics import bleu, sentence_bleu, sign_test, zp_prf
from .model import JointModel, ModelConfig
from .synth import GenConfig, generate_corpus
from .training import (ABLATION_ROWS, TrainConfig, ablation_matrix, load_model,
                       render_ablation, save_model, train)

# vocabulary and label-set sizes are measured from the data, never configured
DERIVED_KEYS = ("src_vocab_size", "tgt_vocab_size", "n_labels")

SPLIT_FILES = ("src.txt", "tgt.txt", "labels.txt", "align.txt", "gold.jsonl")


# ---------------------------------------------------------------------------
# config files


def read_config_file(path) -> dict[str, str]:
    """Key=value pairs, one per line; blank lines and # comments ignored."""
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, eq, value = line.partition("=")
            if not eq or not key.strip():
                raise FormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
            pairs[key.strip()] = value.strip()
    return pairs


def _coerce(key: str, ftype, raw: str):
    # dataclass field types are strings under deferred annotation evaluation
    name = ftype if isinstance(ftype, str) else getattr(ftype, "__name__", str(ftype))
    try:
        if name == "bool":
            if raw in ("true", "True", "1"):
                return True
            if raw in ("false", "False", "0"):
                return False
            raise ValueError(raw)
        if name == "int":
            return int(raw)
        if name == "float":
            return float(raw)
        return raw
    except ValueError:
        raise FormatError(f"config key {key} expects {name}, got {raw!r}") from None


def apply_config(path, *configs, rejected: dict[str, str] | None = None):
    """Overlay a key=value file onto dataclass instances, typed by field.

    Keys listed in ``rejected`` raise with the given reason; keys matching no
    field of any instance raise as unknown.
    """
    if path is None:
        return
    pairs = read_config_file(path)
    for key, why in (rejected or {}).items():
        if key in pairs:
            raise ContractError(f"config key {key} is {why}")
    consumed = set()
    for cfg in configs:
        for f in fields(cfg):
            if f.name in pairs:
                setattr(cfg, f.name, _coerce(f.name, f.type, pairs[f.name]))
                consumed.add(f.name)
    unknown = sorted(set(pairs) - consumed)
    if unknown:
        raise ContractError(f"unknown config key(s): {', '.join(unknown)}")


# ---------------------------------------------------------------------------
# run provenance


class RunLog:
    """Resolved configuration of one invocation.

    Collects key=value pairs, prints them as the run log, and hashes them
    into the provenance stamp.  Pairs recorded with ``hashed=False`` (file
    locations, thread caps) appear in the log but not in the hash, so the
    stamp identifies the configuration rather than where it ran.
    """

    def __init__(self, command: str):
        self.lines = [f"command={command}"]
        self.hashed = [f"command={command}"]

    def record(self, key: str, value, hashed: bool = True):
        line = f"{key}={value}"
        self.lines.append(line)
        if hashed:
            self.hashed.append(line)

    def record_fields(self, cfg):
        for f in fields(cfg):
            self.record(f.name, getattr(cfg, f.name))

    @property
    def config_hash(self) -> str:
        blob = "\n".join(self.hashed).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]

    def emit(self, stream=None):
        stream = sys.stderr if stream is None else stream
        print(f"zpnmt {__version__}", file=stream)
        for line in self.lines:
            print(f"config.{line}", file=stream)
        print(f"config_hash={self.config_hash}", file=stream)

    def stamp(self, *paths):
        meta = f"version={__version__}\nconfig_hash={self.config_hash}\n"
        for p in paths:
            Path(f"{p}.meta").write_text(meta, encoding="utf-8")


# ---------------------------------------------------------------------------
# shared loaders


def _read_paired(primary_path, *other_paths) -> list[list[list[str]]]:
    """Line-parallel token files, one row of token lists per sentence.

    Blank lines in the primary file are document separators and must be blank
    everywhere; at sentence positions the other files may be blank (an empty
    hypothesis is a sentence, not a break).
    """
    paths = (primary_path, *other_paths)
    columns = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            columns.append([line.rstrip("\n") for line in fh])
    n = len(columns[0])
    for p, col in zip(other_paths, columns[1:]):
        if len(col) != n:
            raise ContractError(
                f"line counts differ: {primary_path} has {n}, {p} has {len(col)}")
    rows = []
    for i in range(n):
        if columns[0][i].strip() == "":
            for p, col in zip(other_paths, columns[1:]):
                if col[i].strip() != "":
                    raise ContractError(
                        f"line {i + 1}: document break in {primary_path} "
                        f"but not in {p}")
            continue
        rows.append([col[i].split() for col in columns])
    if not rows:
        raise ContractError(f"{primary_path} contains no sentences")
    return rows


def _load_split(split_dir: Path, need_labels: bool) -> list:
    labels = split_dir / "labels.txt"
    if need_labels and not labels.exists():
        raise ContractError(f"{labels} is required when training the labeler")
    return load_documents(split_dir / "src.txt", split_dir / "tgt.txt",
                          labels_path=labels if labels.exists() else None)


def _build_vocabs(train_docs, max_vocab: int) -> tuple[Vocab, Vocab]:
    src = Vocab.build((s for d in train_docs for s in d.src), max_size=max_vocab)
    tgt = Vocab.build((s for d in train_docs for s in d.tgt), max_size=max_vocab)
    return src, tgt


def _train_configs(args) -> tuple[ModelConfig, TrainConfig]:
    model_cfg = ModelConfig(src_vocab_size=1, tgt_vocab_size=1, n_labels=1)
    train_cfg = TrainConfig()
    apply_config(args.config, model_cfg, train_cfg,
                 rejected={k: "derived from the training data" for k in DERIVED_KEYS})
    for name in ("seed", "epochs", "patience", "batch_size"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(train_cfg, name, value)
    return model_cfg, train_cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_corpus(args) -> int:
    cfg = GenConfig()
    apply_config(args.config, cfg)
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()

    run = RunLog("gen-corpus")
    run.record_fields(cfg)
    run.record("out_dir", args.out_dir, hashed=False)
    run.emit()

    generate_corpus(cfg, args.out_dir)
    out = Path(args.out_dir)
    written = [out / "pronouns.tsv", out / "stats.txt"]
    written += [out / split / name
                for split in ("train", "valid", "test") for name in SPLIT_FILES]
    run.stamp(*written)
    sys.stdout.write((out / "stats.txt").read_text(encoding="utf-8"))
    return 0


def cmd_annotate(args) -> int:
    docs = load_documents(args.src, args.tgt, align_path=args.align)
    pronouns = PronounVocab.load(args.pronouns)

    run = RunLog("annotate")
    run.record("aligner", "gold" if args.align else "ibm1")
    run.record("iterations", args.iterations)
    run.record("lm", "file" if args.lm else ("trained" if args.train_lm else "none"))
    for key in ("src", "tgt", "align", "pronouns", "out_labels"):
        run.record(key, getattr(args, key), hashed=False)
    run.emit()

    table = None
    if args.train_aligner:
        pairs = [(s, t) for d in docs for s, t in zip(d.src, d.tgt)]
        table, _ = train_ibm1(pairs, iterations=args.iterations)
    lm = None
    if args.lm is not None:
        lm = NGramLM.load(args.lm)
    elif args.train_lm:
        # recovered pronouns are source-language words, so the disambiguating
        # model is fit on the source side
        lm = NGramLM().fit(s for d in docs for s in d.src)

    stats = annotate_corpus(docs, pronouns, lm=lm, table=table)
    write_parallel(args.out_labels, docs, "labels")
    run.stamp(args.out_labels)
    sys.stdout.write(stats.as_text())
    return 0


def cmd_train(args) -> int:
    model_cfg, train_cfg = _train_configs(args)
    train_cfg.validate()

    train_docs = _load_split(Path(args.train_dir), model_cfg.use_labeler)
    valid_docs = _load_split(Path(args.valid_dir), model_cfg.use_labeler)
    src_vocab, tgt_vocab = _build_vocabs(train_docs, args.max_vocab)
    label_vocab = None
    if model_cfg.use_labeler:
        if args.pronouns is None:
            raise ContractError("training a labeling model needs --pronouns")
        label_vocab = LabelVocab(PronounVocab.load(args.pronouns).pronouns)
    model_cfg.src_vocab_size = len(src_vocab)
    model_cfg.tgt_vocab_size = len(tgt_vocab)
    model_cfg.n_labels = len(label_vocab) if label_vocab is not None else 1
    model_cfg.validate()

    run = RunLog("train")
    run.record_fields(model_cfg)
    run.record_fields(train_cfg)
    run.record("max_vocab", args.max_vocab)
    for key in ("train_dir", "valid_dir", "out", "pronouns"):
        run.record(key, getattr(args, key), hashed=False)
    run.emit()

    model = JointModel(model_cfg, seed=train_cfg.seed)
    result = train(model, train_docs, valid_docs, src_vocab, tgt_vocab,
                   label_vocab, train_cfg)

    out = Path(args.out)
    save_model(model, out, src_vocab, tgt_vocab, label_vocab)
    (out / "train.log").write_text(result.log_text(), encoding="utf-8")
    written = [out / "model.ckpt", out / "config.txt", out / "src.vocab",
               out / "tgt.vocab", out / "train.log"]
    if model_cfg.use_labeler:
        written.append(out / "label.vocab")
    run.stamp(*written)
    sys.stdout.write(result.log_text())
    return 0


def cmd_translate(args) -> int:
    model, src_vocab, tgt_vocab, label_vocab = load_model(args.model)
    docs = load_source_documents(args.src)

    run = RunLog("translate")
    run.record("beam", args.beam)
    run.record("max_ratio", args.max_ratio)
    run.record("rescore_beta", args.rescore_beta)
    for key in ("model", "src", "out", "emit_labels"):
        run.record(key, getattr(args, key), hashed=False)
    run.emit()

    hyp = translate_corpus(model, docs, src_vocab, tgt_vocab,
                           beam_size=args.beam, max_ratio=args.max_ratio,
                           beta=args.rescore_beta)
    for doc, sents in zip(docs, hyp):
        doc.tgt = sents
    write_parallel(args.out, docs, "tgt")
    run.stamp(args.out)

    if args.emit_labels is not None:
        if label_vocab is None:
            raise ContractError("--emit-labels needs a model trained with the labeler")
        pred = label_corpus(model, docs, src_vocab,
                            beam_size=args.beam, max_ratio=args.max_ratio)
        for doc, ids in zip(docs, pred):
            doc.labels = [label_vocab.decode(i) for i in ids]
        write_parallel(args.emit_labels, docs, "labels")
        run.stamp(args.emit_labels)
    return 0


def cmd_label(args) -> int:
    model, src_vocab, _, label_vocab = load_model(args.model)
    if label_vocab is None:
        raise ContractError("labeling needs a model trained with the labeler")
    docs = load_source_documents(args.src)

    run = RunLog("label")
    run.record("beam", args.beam)
    run.record("max_ratio", args.max_ratio)
    for key in ("model", "src", "out"):
        run.record(key, getattr(args, key), hashed=False)
    run.emit()

    pred = label_corpus(model, docs, src_vocab,
                        beam_size=args.beam, max_ratio=args.max_ratio)
    for doc, ids in zip(docs, pred):
        doc.labels = [label_vocab.decode(i) for i in ids]
    write_parallel(args.out, docs, "labels")
    run.stamp(args.out)
    return 0


def cmd_eval_bleu(args) -> int:
    rows = _read_paired(args.ref, args.hyp)
    run = RunLog("eval-bleu")
    run.record("hyp", args.hyp, hashed=False)
    run.record("ref", args.ref, hashed=False)
    run.emit()
    print(f"sentences={len(rows)}")
    print(f"bleu={bleu([r[1] for r in rows], [r[0] for r in rows]):.4f}")
    return 0


def cmd_eval_zp(args) -> int:
    rows = _read_paired(args.gold, args.pred)
    run = RunLog("eval-zp")
    run.record("pred", args.pred, hashed=False)
    run.record("gold", args.gold, hashed=False)
    run.emit()
    result = zp_prf([r[0] for r in rows], [r[1] for r in rows])
    for level in ("position", "word"):
        for key, value in result[level].items():
            print(f"{level}.{key}={value:.4f}")
    print(f"n_gold={result['n_gold']}")
    print(f"n_predicted={result['n_predicted']}")
    return 0


def cmd_sig_test(args) -> int:
    rows = _read_paired(args.ref, args.a, args.b)
    run = RunLog("sig-test")
    for key in ("a", "b", "ref"):
        run.record(key, getattr(args, key), hashed=False)
    run.emit()
    result = sign_test([sentence_bleu(a, ref) for ref, a, _ in rows],
                       [sentence_bleu(b, ref) for ref, _, b in rows])
    for key in ("wins_a", "wins_b", "ties", "n_effective"):
        print(f"{key}={result[key]}")
    print(f"p_value={result['p_value']:.6f}")
    return 0


def cmd_ablation(args) -> int:
    model_cfg, train_cfg = _train_configs(args)
    train_cfg.validate()
    rows = args.rows.split(",") if args.rows else list(ABLATION_ROWS)
    unknown = [r for r in rows if r not in ABLATION_ROWS]
    if unknown:
        raise ContractError(
            f"unknown ablation row(s) {', '.join(unknown)}; "
            f"choose from {', '.join(ABLATION_ROWS)}")

    corpus = Path(args.corpus_dir)
    train_docs = _load_split(corpus / "train", need_labels=True)
    valid_docs = _load_split(corpus / "valid", need_labels=True)
    test_docs = _load_split(corpus / "test", need_labels=True)
    src_vocab, tgt_vocab = _build_vocabs(train_docs, args.max_vocab)
    label_vocab = LabelVocab(PronounVocab.load(corpus / "pronouns.tsv").pronouns)
    model_cfg.src_vocab_size = len(src_vocab)
    model_cfg.tgt_vocab_size = len(tgt_vocab)
    model_cfg.n_labels = len(label_vocab)

    run = RunLog("ablation")
    run.record_fields(model_cfg)
    run.record_fields(train_cfg)
    run.record("rows", ",".join(rows))
    run.record("rescore_beta", args.rescore_beta)
    run.record("max_vocab", args.max_vocab)
    run.record("corpus_dir", args.corpus_dir, hashed=False)
    run.record("out_dir", args.out_dir, hashed=False)
    run.emit()

    table = ablation_matrix(train_docs, valid_docs, test_docs, model_cfg,
                            train_cfg, src_vocab, tgt_vocab, label_vocab,
                            seed=train_cfg.seed, rescore_beta=args.rescore_beta,
                            rows=rows)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = render_ablation(table)
    (out / "ablation.tsv").write_text(text, encoding="utf-8")
    written = [out / "ablation.tsv"]
    for row, entry in table.items():
        log = out / (row.lstrip("+").replace("+", "-") + ".log")
        log.write_text(entry["log"], encoding="utf-8")
        written.append(log)
    run.stamp(*written)
    sys.stdout.write(text)
    return 0


def cmd_describe(args) -> int:
    model, src_vocab, tgt_vocab, label_vocab = load_model(args.model)
    run = RunLog("describe")
    run.record("model", args.model, hashed=False)
    run.emit()
    print(model.describe())
    print(f"source vocabulary: {len(src_vocab)}")
    print(f"target vocabulary: {len(tgt_vocab)}")
    if label_vocab is not None:
        print(f"label inventory: {' '.join(label_vocab.tokens)}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zpnmt",
        description="Joint zero-pronoun prediction and translation toolkit.")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallelism cap; the modules are single-threaded, "
                             "the flag is accepted for interface stability")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("gen-corpus", help="write a synthetic pro-drop corpus")
    p.add_argument("--config", default=None, help="key=value generator settings")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("annotate",
                       help="recover zero-pronoun labels from a parallel corpus")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--align", default=None, help="alignment file")
    g.add_argument("--train-aligner", action="store_true",
                   help="fit the word-alignment table on the given pair")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lm", default=None, help="language model file")
    g.add_argument("--train-lm", action="store_true",
                   help="fit the word-recovery model on the source side")
    p.add_argument("--pronouns", required=True)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--iterations", type=int, default=10,
                   help="aligner EM iterations")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("train", help="train a translation model")
    p.add_argument("--config", default=None,
                   help="key=value model and trainer settings")
    p.add_argument("--train-dir", required=True,
                   help="directory with src.txt/tgt.txt and optional labels.txt")
    p.add_argument("--valid-dir", required=True)
    p.add_argument("--out", required=True, help="model output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--pronouns", default=None,
                   help="pronoun inventory, required with use_labeler")
    p.add_argument("--max-vocab", type=int, default=30000)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="decode a source file")
    p.add_argument("--model", required=True, help="model directory from train")
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--max-ratio", type=float, default=2.0)
    p.add_argument("--rescore-beta", type=float, default=0.0)
    p.add_argument("--emit-labels", default=None,
                   help="also write predicted zero-pronoun labels here")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("label", help="predict zero-pronoun labels for a source file")
    p.add_argument("--model", required=True, help="model directory from train")
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--max-ratio", type=float, default=2.0)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("eval-bleu", help="corpus BLEU of a hypothesis file")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(func=cmd_eval_bleu)

    p = sub.add_parser("eval-zp", help="zero-pronoun precision/recall/F1")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=cmd_eval_zp)

    p = sub.add_parser("sig-test", help="paired sign test between two systems")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(func=cmd_sig_test)

    p = sub.add_parser("ablation", help="train and score the system variants")
    p.add_argument("--corpus-dir", required=True,
                   help="corpus root with train/valid/test and pronouns.tsv")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", default=None,
                   help="key=value model and trainer settings")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--rows", default=None,
                   help="comma-separated subset of " + ",".join(ABLATION_ROWS))
    p.add_argument("--rescore-beta", type=float, default=1.0)
    p.add_argument("--max-vocab", type=int, default=30000)
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("describe", help="print a saved model's configuration")
    p.add_argument("--model", required=True, help="model directory from train")
    p.set_defaults(func=cmd_describe)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ContractError(f"--threads must be at least 1, got {args.threads}")
        return args.func(args)
    except (ZpnmtError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
