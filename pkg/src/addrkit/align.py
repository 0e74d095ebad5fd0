"""Subword alignment for exporting training data to external subword models.

Word-level BIO labels are projected onto subword pieces: the first piece of
every word carries the word's label, continuation pieces and the [CLS] /
[SEP] sentinels carry the placeholder label UNK.  Consumers decide what to
do with UNK positions (typically mask them out of the loss).

The splitter is pluggable: any callable ``word -> pieces``, where
continuation pieces start with ``##`` and the pieces, markers stripped,
concatenate back to the word.  :class:`FixedVocabSplitter` is a small
greedy longest-prefix splitter over a fixed vocabulary for offline use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .ingest import Corpus
from .schema import AddrkitError, BioLabel, Sample

CLS_PIECE = "[CLS]"
SEP_PIECE = "[SEP]"
UNK_LABEL = "UNK"
CONTINUATION_MARKER = "##"

# Hyperparameters shipped in the sidecar config for external fine-tuning.
FINETUNE_DEFAULTS: dict[str, object] = {
    "num_train_epochs": 1,
    "train_batch_size": 1024,
    "eval_batch_size": 1024,
    "dropout": 0.1,
    "warmup_steps": 500,
    "optimizer": "adamw",
    "weight_decay": 0.01,
    "evaluation_steps": 20,
    "patience": 5,
    "seed": 42,
}

Splitter = Callable[[str], Sequence[str]]


class SplitterRoundTripError(AddrkitError):
    """Splitter output does not concatenate back to the input word."""


class AlignmentFormatError(AddrkitError):
    pass


def _ascii_chars() -> frozenset[str]:
    chars = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    chars += ".,-/'&#$()+_:;"
    return frozenset(chars)


_DEFAULT_INITIAL = _ascii_chars() | {
    "ki", "24", "36", "gem", "klein", "po", "ni",
}
_DEFAULT_CONTINUATION = _ascii_chars() | {
    "rch", "ens", "tr", "60", "ein", "de", "ch", "lar",
    "ede", "ros", "ter", "re", "ich",
}


@dataclass(frozen=True)
class FixedVocabSplitter:
    """Greedy longest-prefix subword splitter over a fixed vocabulary.

    Characters missing from the vocabulary become single-character pieces,
    so splits always reconstruct the word.
    """

    initial: frozenset[str] = field(default_factory=lambda: _DEFAULT_INITIAL)
    continuation: frozenset[str] = field(
        default_factory=lambda: _DEFAULT_CONTINUATION
    )

    def __call__(self, word: str) -> list[str]:
        if not word:
            raise ValueError("cannot split an empty word")
        pieces: list[str] = []
        pos = 0
        while pos < len(word):
            vocab = self.initial if pos == 0 else self.continuation
            longest = max(len(e) for e in vocab) if vocab else 0
            match = ""
            for end in range(min(len(word), pos + longest), pos, -1):
                if word[pos:end] in vocab:
                    match = word[pos:end]
                    break
            if not match:
                match = word[pos]
            pieces.append(match if pos == 0 else CONTINUATION_MARKER + match)
            pos += len(match)
        return pieces


def default_splitter() -> FixedVocabSplitter:
    return FixedVocabSplitter()


@dataclass(frozen=True)
class AlignedSequence:
    """Subword pieces with per-piece labels; ``None`` renders as UNK."""

    pieces: tuple[str, ...]
    labels: tuple[BioLabel | None, ...]
    id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.pieces) != len(self.labels):
            raise ValueError(
                f"{len(self.pieces)} pieces vs {len(self.labels)} labels"
            )

    def label_strings(self) -> tuple[str, ...]:
        return tuple(UNK_LABEL if l is None else str(l) for l in self.labels)


def align(
    words: Sequence[str],
    labels: Sequence[BioLabel],
    splitter: Splitter,
    sentinels: bool = True,
    id: str = "",
) -> AlignedSequence:
    """Project word labels onto the splitter's pieces.

    First piece of each word gets the word's label, continuations UNK,
    sentinels UNK.  Raises :class:`SplitterRoundTripError` if any word's
    pieces do not concatenate back to the word.
    """
    if len(words) != len(labels):
        raise ValueError(f"{len(words)} words vs {len(labels)} labels")
    pieces: list[str] = []
    piece_labels: list[BioLabel | None] = []
    if sentinels:
        pieces.append(CLS_PIECE)
        piece_labels.append(None)
    for word, label in zip(words, labels):
        split = list(splitter(word))
        joined = "".join(
            p[len(CONTINUATION_MARKER):] if i else p for i, p in enumerate(split)
        )
        if not split or joined != word:
            raise SplitterRoundTripError(
                f"pieces {split!r} do not reconstruct word {word!r}"
            )
        pieces.extend(split)
        piece_labels.append(label)
        piece_labels.extend([None] * (len(split) - 1))
    if sentinels:
        pieces.append(SEP_PIECE)
        piece_labels.append(None)
    return AlignedSequence(tuple(pieces), tuple(piece_labels), id=id)


def align_sample(
    sample: Sample, splitter: Splitter, sentinels: bool = True
) -> AlignedSequence:
    return align(sample.words, sample.labels, splitter, sentinels, id=sample.id)


_HEADER = "# addrkit aligned v1"


def export_training_file(
    corpus: Corpus,
    splitter: Splitter,
    path: str | Path,
    hyper_defaults: dict | None = None,
) -> Path:
    """Write aligned sequences as tab-separated piece/label rows.

    Sequences are separated by blank lines and preceded by an ``# id=``
    comment.  A ``<path>.config.json`` sidecar carries the fine-tuning
    hyperparameter defaults for the downstream trainer.
    """
    path = Path(path)
    lines = [_HEADER]
    for sample in corpus:
        seq = align_sample(sample, splitter)
        lines.append(f"# id={sample.id}")
        for piece, label in zip(seq.pieces, seq.label_strings()):
            lines.append(f"{piece}\t{label}")
        lines.append("")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    config = dict(FINETUNE_DEFAULTS)
    if hyper_defaults:
        config.update(hyper_defaults)
    sidecar = path.with_name(path.name + ".config.json")
    sidecar.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return path


def read_training_file(path: str | Path) -> list[AlignedSequence]:
    """Parse a file written by :func:`export_training_file`."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != _HEADER:
        raise AlignmentFormatError(f"{path}: missing header {_HEADER!r}")
    sequences: list[AlignedSequence] = []
    cur_id = ""
    pieces: list[str] = []
    labels: list[BioLabel | None] = []

    def flush() -> None:
        nonlocal pieces, labels, cur_id
        if pieces:
            sequences.append(AlignedSequence(tuple(pieces), tuple(labels), cur_id))
        pieces, labels, cur_id = [], [], ""

    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            flush()
            continue
        if line.startswith("# id="):
            flush()
            cur_id = line[len("# id="):]
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise AlignmentFormatError(
                f"{path}:{lineno}: expected piece<TAB>label, got {line!r}"
            )
        piece, label = parts
        pieces.append(piece)
        labels.append(None if label == UNK_LABEL else BioLabel.parse(label))
    flush()
    return sequences
