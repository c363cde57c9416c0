"""Synthetic pro-drop corpus generator.

Source sentences follow a SUBJECT VERB OBJECT (PARTICLE) template over a toy
vocabulary; the target side mirrors the full source word for word in an
uppercase surface vocabulary and never drops pronouns.  Source subject and
object pronouns are dropped at configurable rates, which creates the
zero-pronoun supervision: gold label sequences (with the sentence-end slot),
identity alignments over the surviving tokens, and antecedent bookkeeping.

Nouns carry one of two agreement classes; an object pronoun (pa/pb) is keyed
by the class of the most recent noun, which sits in the same sentence when
the subject is a noun and in the immediately previous sentence otherwise, so
one sentence of history always suffices to resolve it.  A sentence-final
particle reflects the subject type, so dropped subjects stay recoverable from
the sentence itself while dropped objects may need cross-sentence context.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .annotate import PronounVocab
from .data import NO_ZP, Document, write_alignments, write_parallel

SUBJECT_PRONOUNS = ["ps1", "ps2"]
OBJECT_PRONOUNS = {"a": "pa", "b": "pb"}
PARTICLES = {"noun": "pd", "ps1": "pe", "ps2": "pq"}


@dataclass
class GenConfig:
    train_docs: int = 2000
    valid_docs: int = 200
    test_docs: int = 200
    sents_per_doc: int = 6
    nouns_a: int = 5
    nouns_b: int = 5
    verbs: int = 6
    subject_pronoun_rate: float = 0.5
    object_pronoun_rate: float = 0.6
    discourse_fraction: float = 0.9
    subject_drop_rate: float = 0.27
    object_drop_rate: float = 0.27
    particle_rate: float = 0.85
    seed: int = 13

    def validate(self):
        from .errors import ContractError
        for name in ("subject_pronoun_rate", "object_pronoun_rate", "discourse_fraction",
                     "subject_drop_rate", "object_drop_rate", "particle_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {v}")
        if min(self.train_docs, self.valid_docs, self.test_docs) < 1 \
                or self.sents_per_doc < 1:
            raise ContractError("document and sentence counts must be positive")
        if self.nouns_a < 1 or self.nouns_b < 1 or self.verbs < 1:
            raise ContractError("need at least one noun of each class and one verb")


@dataclass
class GoldSentence:
    """Per-sentence generation record, enough to rebuild every artifact."""

    doc_id: int
    sent_id: int
    full_src: list[str]
    src: list[str]
    tgt: list[str]
    labels: list[str]
    alignment: list[list[int]]
    dropped_subject: str | None = None
    dropped_object: str | None = None
    object_pronoun: str | None = None
    antecedent_offset: int | None = None   # sentences back; 0 = same sentence
    cross_eligible: bool | None = None     # previous sentence offered a noun

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _nouns(cfg: GenConfig) -> list[tuple[str, str]]:
    return [(f"na{i}", "a") for i in range(cfg.nouns_a)] + \
           [(f"nb{i}", "b") for i in range(cfg.nouns_b)]


def default_pronoun_vocab() -> PronounVocab:
    mapping = [(p, [p.upper()]) for p in SUBJECT_PRONOUNS]
    mapping += [(p, [p.upper()]) for p in OBJECT_PRONOUNS.values()]
    return PronounVocab(mapping)


def _generate_document(cfg: GenConfig, rng: np.random.Generator,
                       doc_id: int) -> tuple[Document, list[GoldSentence]]:
    nouns = _nouns(cfg)
    noun_class = dict(nouns)
    noun_history: list[tuple[int, str]] = []  # (sentence index, noun), in order
    doc = Document(src=[], tgt=[], labels=[], aligns=[])
    gold = []
    for s in range(cfg.sents_per_doc):
        object_is_pronoun = rng.random() < cfg.object_pronoun_rate
        subject = None
        antecedent_offset = None
        cross_eligible = None
        obj = None
        if object_is_pronoun:
            # only the immediately previous sentence may host the antecedent,
            # so one sentence of context always resolves the pronoun class
            prev_nouns = [n for i, n in noun_history if i == s - 1]
            cross_eligible = bool(prev_nouns)
            want_cross = rng.random() < cfg.discourse_fraction
            if want_cross and prev_nouns:
                subject = SUBJECT_PRONOUNS[int(rng.integers(len(SUBJECT_PRONOUNS)))]
                ante_noun = prev_nouns[-1]
                antecedent_offset = 1
            else:
                subject = nouns[int(rng.integers(len(nouns)))][0]
                ante_noun = subject
                antecedent_offset = 0
            obj = OBJECT_PRONOUNS[noun_class[ante_noun]]
        else:
            if rng.random() < cfg.subject_pronoun_rate:
                subject = SUBJECT_PRONOUNS[int(rng.integers(len(SUBJECT_PRONOUNS)))]
            else:
                subject = nouns[int(rng.integers(len(nouns)))][0]
            obj = nouns[int(rng.integers(len(nouns)))][0]
        verb = f"v{int(rng.integers(cfg.verbs))}"

        full = [subject, verb, obj]
        if rng.random() < cfg.particle_rate:
            full.append(PARTICLES.get(subject, PARTICLES["noun"]))

        subj_is_pron = subject in SUBJECT_PRONOUNS
        obj_is_pron = obj in OBJECT_PRONOUNS.values()
        drop_subj = subj_is_pron and rng.random() < cfg.subject_drop_rate
        drop_obj = obj_is_pron and rng.random() < cfg.object_drop_rate

        dropped = set()
        if drop_subj:
            dropped.add(0)
        if drop_obj:
            dropped.add(2)
        src = [w for i, w in enumerate(full) if i not in dropped]
        tgt = [w.upper() for w in full]
        labels = [NO_ZP] * (len(src) + 1)
        alignment = []
        new_index = {}
        k = 0
        for i, w in enumerate(full):
            if i in dropped:
                continue
            new_index[i] = k
            alignment.append([k, i])
            k += 1
        if drop_subj:
            labels[0] = subject
        if drop_obj:
            # the pronoun sits before the next surviving token, or at the
            # sentence-end slot when it was sentence-final
            later = [new_index[i] for i in new_index if i > 2]
            labels[min(later) if later else len(src)] = obj

        # record nouns of this sentence for future antecedents, left to right
        for w in full:
            if w in noun_class:
                noun_history.append((s, w))

        doc.src.append(src)
        doc.tgt.append(tgt)
        doc.labels.append(labels)
        doc.aligns.append({(i, j) for i, j in alignment})
        gold.append(GoldSentence(
            doc_id=doc_id, sent_id=s, full_src=full, src=src, tgt=tgt,
            labels=labels, alignment=sorted(alignment),
            dropped_subject=subject if drop_subj else None,
            dropped_object=obj if drop_obj else None,
            object_pronoun=obj if obj_is_pron else None,
            antecedent_offset=antecedent_offset,
            cross_eligible=cross_eligible))
    return doc, gold


def generate_split(cfg: GenConfig, n_docs: int,
                   seed: int) -> tuple[list[Document], list[GoldSentence]]:
    rng = np.random.default_rng(seed)
    docs = []
    gold = []
    for d in range(n_docs):
        doc, g = _generate_document(cfg, rng, d)
        docs.append(doc)
        gold.extend(g)
    return docs, gold


def generate_corpus(cfg: GenConfig, out_dir) -> dict:
    """Write train/valid/test splits plus the pronoun inventory and a stats
    report; returns the stats mapping."""
    from pathlib import Path

    cfg.validate()
    out = Path(out_dir)
    all_stats = {}
    for split, n_docs, offset in (("train", cfg.train_docs, 0),
                                  ("valid", cfg.valid_docs, 1),
                                  ("test", cfg.test_docs, 2)):
        docs, gold = generate_split(cfg, n_docs, cfg.seed + offset)
        d = out / split
        d.mkdir(parents=True, exist_ok=True)
        write_parallel(d / "src.txt", docs, "src")
        write_parallel(d / "tgt.txt", docs, "tgt")
        write_parallel(d / "labels.txt", docs, "labels")
        write_alignments(d / "align.txt", docs)
        with open(d / "gold.jsonl", "w", encoding="utf-8") as fh:
            for g in gold:
                fh.write(g.to_json() + "\n")
        all_stats[split] = split_stats(gold)
    default_pronoun_vocab().save(out / "pronouns.tsv")
    text = render_stats(cfg, all_stats)
    (out / "stats.txt").write_text(text, encoding="utf-8")
    return all_stats


def load_gold(path) -> list[GoldSentence]:
    gold = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            gold.append(GoldSentence(**json.loads(line)))
    return gold


def split_stats(gold: list[GoldSentence]) -> dict:
    n_sents = len(gold)
    n_pronouns = 0
    n_dropped = 0
    n_obj_pron = 0
    n_obj_eligible = 0
    n_obj_cross = 0
    n_obj_dropped = 0
    n_obj_dropped_cross = 0
    for g in gold:
        subj_pron = g.full_src[0] in SUBJECT_PRONOUNS
        n_pronouns += int(subj_pron) + int(g.object_pronoun is not None)
        n_dropped += int(g.dropped_subject is not None) + int(g.dropped_object is not None)
        if g.object_pronoun is not None:
            n_obj_pron += 1
            n_obj_eligible += int(bool(g.cross_eligible))
            cross = (g.antecedent_offset or 0) >= 1
            n_obj_cross += int(cross)
            if g.dropped_object is not None:
                n_obj_dropped += 1
                n_obj_dropped_cross += int(cross)
    return {
        "documents": len({g.doc_id for g in gold}),
        "sentences": n_sents,
        "pronouns": n_pronouns,
        "zero_pronouns": n_dropped,
        "zp_rate": n_dropped / n_pronouns if n_pronouns else 0.0,
        "object_pronouns": n_obj_pron,
        "object_pronouns_cross_eligible": n_obj_eligible,
        "object_pronouns_cross_sentence": n_obj_cross,
        # conditional on an antecedent being available; tracks the config knob
        "cross_sentence_fraction": n_obj_cross / n_obj_eligible if n_obj_eligible else 0.0,
        "cross_sentence_share": n_obj_cross / n_obj_pron if n_obj_pron else 0.0,
        "object_zps": n_obj_dropped,
        "object_zps_cross_sentence": n_obj_dropped_cross,
        "object_zp_cross_fraction":
            n_obj_dropped_cross / n_obj_dropped if n_obj_dropped else 0.0,
    }


def render_stats(cfg: GenConfig, stats: dict) -> str:
    lines = [f"config.{k}={v}" for k, v in sorted(asdict(cfg).items())]
    for split in stats:
        for k, v in stats[split].items():
            val = f"{v:.4f}" if isinstance(v, float) else str(v)
            lines.append(f"{split}.{k}={val}")
    return "\n".join(lines) + "\n"
