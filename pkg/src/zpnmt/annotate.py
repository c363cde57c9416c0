"""Zero-pronoun annotation from word alignments.

A dropped source pronoun shows up as a target pronoun with no alignment
link.  Its source-side slot is projected from the aligned neighbourhood: the
pronoun belongs immediately after the rightmost source word that aligns to
any target word left of the unaligned pronoun (slot 0 when there is none;
slot == len(source) marks the position before the sentence-end).  The
concrete source word is recovered by inserting each candidate pronoun into
the slot and asking a language model which completion reads best.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .align import TranslationTable, align_pair
from .data import NO_ZP, Document
from .errors import AnnotationError, ContractError, FormatError
from .lm import NGramLM


class PronounVocab:
    """Source pronoun inventory and its target-side equivalents.

    File format: one ``source_pronoun<TAB>tgt1,tgt2`` line per pronoun.
    Candidate order (for tie-breaking) is file order.
    """

    def __init__(self, mapping: list[tuple[str, list[str]]]):
        if not mapping:
            raise ContractError("pronoun inventory is empty")
        self.pronouns = [src for src, _ in mapping]
        if len(set(self.pronouns)) != len(self.pronouns):
            raise ContractError("duplicate source pronoun in inventory")
        self.targets_of = {src: list(tgts) for src, tgts in mapping}
        self.target_pronouns = {t for _, tgts in mapping for t in tgts}

    def candidates_for(self, tgt_pronoun: str) -> list[str]:
        """Source pronouns whose equivalents include the target pronoun;
        falls back to the whole inventory when nothing maps to it."""
        cands = [src for src in self.pronouns if tgt_pronoun in self.targets_of[src]]
        return cands if cands else list(self.pronouns)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for src in self.pronouns:
                fh.write(f"{src}\t{','.join(self.targets_of[src])}\n")

    @classmethod
    def load(cls, path) -> "PronounVocab":
        mapping = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0] or not parts[1]:
                    raise FormatError(f"{path}:{lineno}: expected 'pronoun<TAB>equivalents'")
                mapping.append((parts[0], [t for t in parts[1].split(",") if t]))
        return cls(mapping)


def detect_zp_targets(tgt_tokens, alignment, target_pronouns) -> list[int]:
    """Indices of target pronouns that no alignment link covers."""
    aligned = {j for _, j in alignment}
    return [j for j, w in enumerate(tgt_tokens)
            if w in target_pronouns and j not in aligned]


def project_zp_position(alignment, tgt_index: int, src_len: int) -> int:
    """Source slot for a pronoun missing before the given target position.

    Returns s in [0, src_len]: the pronoun belongs before source token s,
    with s == src_len meaning before the sentence end.
    """
    if tgt_index < 0:
        raise ContractError(f"target index must be non-negative, got {tgt_index}")
    left = [i for (i, j) in alignment if j < tgt_index]
    for i, _ in alignment:
        if not 0 <= i < src_len:
            raise ContractError(f"alignment source index {i} out of range for {src_len}")
    if not left:
        return 0
    return max(left) + 1


def recover_zp_word(src_tokens, slot: int, candidates, lm: NGramLM | None) -> str:
    """Pick the candidate whose insertion yields the lowest perplexity.

    Ties (and the single-candidate case) resolve to the earliest candidate
    in inventory order.
    """
    cands = list(candidates)
    if not cands:
        raise AnnotationError("no candidate pronouns to recover from")
    if not 0 <= slot <= len(src_tokens):
        raise ContractError(f"slot {slot} out of range for {len(src_tokens)} tokens")
    if len(cands) == 1 or lm is None:
        return cands[0]
    best_word, best_ppl = None, None
    for w in cands:
        trial = list(src_tokens[:slot]) + [w] + list(src_tokens[slot:])
        ppl = lm.perplexity(trial)
        if best_ppl is None or ppl < best_ppl - 1e-12:
            best_word, best_ppl = w, ppl
    return best_word


def annotate_pair(src_tokens, tgt_tokens, alignment, pronouns: PronounVocab,
                  lm: NGramLM | None) -> list[str]:
    """Label sequence for one sentence pair: one label per source token plus
    the sentence-end slot."""
    labels = [NO_ZP] * (len(src_tokens) + 1)
    for j in detect_zp_targets(tgt_tokens, alignment, pronouns.target_pronouns):
        slot = project_zp_position(alignment, j, len(src_tokens))
        if labels[slot] != NO_ZP:
            continue  # first pronoun claims the slot
        word = recover_zp_word(src_tokens, slot, pronouns.candidates_for(tgt_tokens[j]), lm)
        labels[slot] = word
    return labels


@dataclass
class AnnotationStats:
    sentences: int = 0
    zp_labels: int = 0
    skipped: int = 0
    slots: dict = field(default_factory=dict)

    def as_text(self) -> str:
        lines = [f"sentences={self.sentences}", f"zp_labels={self.zp_labels}",
                 f"skipped={self.skipped}"]
        return "\n".join(lines) + "\n"


def annotate_corpus(docs: list[Document], pronouns: PronounVocab,
                    lm: NGramLM | None = None,
                    table: TranslationTable | None = None) -> AnnotationStats:
    """Fill in ``labels`` for every document, using supplied alignments when
    present and the translation table otherwise."""
    if table is None and any(doc.aligns is None for doc in docs):
        raise ContractError("documents lack alignments and no translation table given")
    stats = AnnotationStats()
    for doc in docs:
        doc.labels = []
        for s in range(len(doc)):
            src, tgt = doc.src[s], doc.tgt[s]
            if doc.aligns is not None:
                links = doc.aligns[s]
            else:
                links = align_pair(src, tgt, table)
            try:
                labels = annotate_pair(src, tgt, links, pronouns, lm)
            except AnnotationError:
                labels = [NO_ZP] * (len(src) + 1)
                stats.skipped += 1
            doc.labels.append(labels)
            stats.sentences += 1
            stats.zp_labels += sum(1 for l in labels if l != NO_ZP)
    return stats
