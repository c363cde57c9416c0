"""Corpora, vocabularies, label and alignment files, batching.

File conventions: one sentence per line, whitespace tokenized; blank lines
separate documents and must appear at identical positions in every parallel
file.  Label lines are token-parallel with the source plus one trailing slot
for the sentence-end position.  Alignment lines are space-separated "i-j"
pairs (source index - target index).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, EmptyDatasetError, FormatError

PAD, UNK, BOS, EOS = 0, 1, 2, 3
PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN = "<pad>", "<unk>", "<s>", "<eos>"
RESERVED = [PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN]
NO_ZP = "N"


class Vocab:
    """Token-id mapping with four reserved entries at ids 0..3.

    ``max_size`` caps the number of non-reserved entries.
    """

    def __init__(self, tokens: list[str]):
        self._tokens = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self._ids = {t: i for i, t in enumerate(self._tokens)}

    @classmethod
    def build(cls, sentences, max_size: int = 30000) -> "Vocab":
        """Rank tokens by frequency, ties broken lexicographically."""
        if max_size < 1:
            raise ContractError(f"max_size must be at least 1, got {max_size}")
        counts = Counter()
        for sent in sentences:
            counts.update(sent)
        for r in RESERVED:
            counts.pop(r, None)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls([t for t, _ in ranked[:max_size]])

    def __len__(self):
        return len(self._tokens)

    def id(self, token: str) -> int:
        return self._ids.get(token, UNK)

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def encode(self, tokens, append_eos: bool = False) -> list[int]:
        ids = [self._ids.get(t, UNK) for t in tokens]
        if append_eos:
            ids.append(EOS)
        return ids

    def decode(self, ids, strip_eos: bool = False) -> list[str]:
        toks = [self._tokens[i] for i in ids]
        if strip_eos and toks and toks[-1] == EOS_TOKEN:
            toks = toks[:-1]
        return toks

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for t in self._tokens:
                fh.write(t + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        if tokens[:4] != RESERVED:
            raise FormatError(f"{path}: vocab file must start with the reserved entries")
        return cls(tokens[4:])


class LabelVocab:
    """Labels for zero-pronoun slots: index 0 is the no-pronoun label N."""

    def __init__(self, pronouns: list[str]):
        if NO_ZP in pronouns:
            raise ContractError(f"{NO_ZP!r} is reserved for the empty label")
        self._tokens = [NO_ZP] + list(pronouns)
        self._ids = {t: i for i, t in enumerate(self._tokens)}

    def __len__(self):
        return len(self._tokens)

    def id(self, token: str) -> int:
        if token not in self._ids:
            raise FormatError(f"unknown label token {token!r}")
        return self._ids[token]

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def encode(self, labels) -> list[int]:
        return [self.id(t) for t in labels]

    def decode(self, ids) -> list[str]:
        return [self._tokens[i] for i in ids]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for t in self._tokens:
                fh.write(t + "\n")

    @classmethod
    def load(cls, path) -> "LabelVocab":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        if not tokens or tokens[0] != NO_ZP:
            raise FormatError(f"{path}: label vocab must start with {NO_ZP!r}")
        return cls(tokens[1:])


@dataclass
class Document:
    """Sentence-parallel views of one document, as surface tokens."""

    src: list[list[str]]
    tgt: list[list[str]]
    labels: list[list[str]] | None = None
    aligns: list[set[tuple[int, int]]] | None = None

    def __len__(self):
        return len(self.src)


@dataclass
class Example:
    """One encoded sentence pair with its document context."""

    x: list[int]                      # source ids, ends with EOS
    y: list[int]                      # target ids, ends with EOS
    labels: list[int] | None = None   # one per source position incl. the EOS slot
    context: list[list[int]] = field(default_factory=list)  # previous source sentences
    doc_id: int = 0
    sent_id: int = 0


@dataclass
class Batch:
    examples: list[Example]
    src: np.ndarray          # (B, Tmax) int, PAD-filled
    tgt: np.ndarray
    src_lengths: list[int]
    tgt_lengths: list[int]

    def __len__(self):
        return len(self.examples)


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def load_documents(src_path, tgt_path, labels_path=None, align_path=None,
                   valid_labels: set[str] | None = None) -> list[Document]:
    """Parse parallel files into documents split on blank lines."""
    src_lines = _read_lines(src_path)
    tgt_lines = _read_lines(tgt_path)
    files = {"source": src_lines, "target": tgt_lines}
    if labels_path is not None:
        files["labels"] = _read_lines(labels_path)
    if align_path is not None:
        files["alignments"] = _read_lines(align_path)

    n = len(src_lines)
    for name, lines in files.items():
        if len(lines) != n:
            raise FormatError(
                f"line counts differ: source has {n}, {name} has {len(lines)}")

    docs = [Document(src=[], tgt=[], labels=[] if labels_path else None,
                     aligns=[] if align_path else None)]
    for i in range(n):
        lineno = i + 1
        blank = src_lines[i].strip() == ""
        for name, lines in files.items():
            # an alignment line may be legitimately empty (no links), so it
            # only has to be blank where the source marks a document break
            if name == "alignments":
                if blank and lines[i].strip() != "":
                    raise FormatError(
                        f"line {lineno}: document break in source but not in {name}")
                continue
            if (lines[i].strip() == "") != blank:
                raise FormatError(
                    f"line {lineno}: document break in source but not in {name}"
                    if blank else
                    f"line {lineno}: document break in {name} but not in source")
        if blank:
            if len(docs[-1]) > 0:
                docs.append(Document(src=[], tgt=[], labels=[] if labels_path else None,
                                     aligns=[] if align_path else None))
            continue
        src = src_lines[i].split()
        tgt = tgt_lines[i].split()
        docs[-1].src.append(src)
        docs[-1].tgt.append(tgt)
        if labels_path is not None:
            labels = files["labels"][i].split()
            want = len(src) + 1
            if len(labels) != want:
                raise FormatError(
                    f"line {lineno}: label line has {len(labels)} entries, "
                    f"expected {want} (source tokens plus the sentence-end slot)")
            if valid_labels is not None:
                for lab in labels:
                    if lab != NO_ZP and lab not in valid_labels:
                        raise FormatError(f"line {lineno}: unknown label token {lab!r}")
            docs[-1].labels.append(labels)
        if align_path is not None:
            docs[-1].aligns.append(
                parse_alignment_line(files["alignments"][i], len(src), len(tgt), lineno))
    if len(docs[-1]) == 0:
        docs.pop()
    return docs


def load_source_documents(src_path) -> list[Document]:
    """Parse a source-only token file into documents split on blank lines."""
    docs = [Document(src=[], tgt=[])]
    for line in _read_lines(src_path):
        if line.strip() == "":
            if len(docs[-1]) > 0:
                docs.append(Document(src=[], tgt=[]))
            continue
        docs[-1].src.append(line.split())
        docs[-1].tgt.append([])
    if len(docs[-1]) == 0:
        docs.pop()
    return docs


def parse_alignment_line(line: str, src_len: int, tgt_len: int, lineno: int = 0):
    links = set()
    where = f"line {lineno}: " if lineno else ""
    for pair in line.split():
        try:
            i_str, j_str = pair.split("-")
            i, j = int(i_str), int(j_str)
        except ValueError:
            raise FormatError(f"{where}malformed alignment pair {pair!r}") from None
        if not (0 <= i < src_len and 0 <= j < tgt_len):
            raise FormatError(
                f"{where}alignment {pair} out of range for lengths "
                f"{src_len}/{tgt_len}")
        links.add((i, j))
    return links


def format_alignment_line(links) -> str:
    return " ".join(f"{i}-{j}" for i, j in sorted(links))


def write_parallel(path, docs: list[Document], side: str):
    """Write one side ('src', 'tgt' or 'labels') with blank document breaks."""
    with open(path, "w", encoding="utf-8") as fh:
        for d, doc in enumerate(docs):
            if d > 0:
                fh.write("\n")
            rows = getattr(doc, side)
            for sent in rows:
                fh.write(" ".join(sent) + "\n")


def write_alignments(path, docs: list[Document]):
    with open(path, "w", encoding="utf-8") as fh:
        for d, doc in enumerate(docs):
            if d > 0:
                fh.write("\n")
            for links in doc.aligns:
                fh.write(format_alignment_line(links) + "\n")


def examples_from_documents(docs: list[Document], src_vocab: Vocab, tgt_vocab: Vocab,
                            label_vocab: LabelVocab | None = None,
                            k_context: int = 0) -> list[Example]:
    examples = []
    for d, doc in enumerate(docs):
        ctx: list[list[int]] = []
        for s in range(len(doc)):
            x = src_vocab.encode(doc.src[s], append_eos=True)
            y = tgt_vocab.encode(doc.tgt[s], append_eos=True)
            labels = None
            if label_vocab is not None and doc.labels is not None:
                labels = label_vocab.encode(doc.labels[s])
            examples.append(Example(x=x, y=y, labels=labels,
                                    context=list(ctx[-k_context:]) if k_context else [],
                                    doc_id=d, sent_id=s))
            ctx.append(x)
    return examples


def make_batches(examples: list[Example], batch_size: int, max_len: int = 20,
                 seed: int = 0) -> list[Batch]:
    """Filter over-length pairs, shuffle, group by source length, pad.

    Iteration order is a pure function of (seed, batch_size).  Lengths count
    real tokens, excluding the sentence-end marker.
    """
    if batch_size < 1:
        raise ContractError(f"batch_size must be positive, got {batch_size}")
    kept = [ex for ex in examples
            if len(ex.x) - 1 <= max_len and len(ex.y) - 1 <= max_len]
    if not kept:
        raise EmptyDatasetError(
            f"no examples remain after the length-{max_len} filter "
            f"({len(examples)} supplied)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(kept))
    shuffled = [kept[i] for i in order]
    shuffled.sort(key=lambda ex: len(ex.x))  # stable: shuffle breaks ties
    chunks = [shuffled[i:i + batch_size] for i in range(0, len(shuffled), batch_size)]
    chunk_order = rng.permutation(len(chunks))
    batches = []
    for ci in chunk_order:
        chunk = chunks[ci]
        slen = [len(ex.x) for ex in chunk]
        tlen = [len(ex.y) for ex in chunk]
        src = np.full((len(chunk), max(slen)), PAD, dtype=np.int64)
        tgt = np.full((len(chunk), max(tlen)), PAD, dtype=np.int64)
        for r, ex in enumerate(chunk):
            src[r, :slen[r]] = ex.x
            tgt[r, :tlen[r]] = ex.y
        batches.append(Batch(chunk, src, tgt, slen, tlen))
    return batches
