"""Corpus loading, Latin filtering, capped sampling, and split construction.

All sampling and splitting is deterministic: every operation that takes a seed
derives an independent :class:`random.Random` stream from a string key, so
results are reproducible across runs and platforms.
"""

from __future__ import annotations

import json
import random
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

from .schema import AddrkitError, Sample, UnknownTagError, parse_tag_strings


class MalformedRecordError(AddrkitError):
    """A record that cannot be turned into a valid sample; carries file:line."""


class MissingCountryError(AddrkitError):
    pass


class SplitError(AddrkitError):
    pass


@dataclass(frozen=True)
class Corpus:
    samples: tuple[Sample, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def ids(self) -> list[str]:
        return [s.id for s in self.samples]

    def countries(self) -> set[str]:
        return {s.country for s in self.samples if s.country is not None}


@dataclass(frozen=True)
class SplitSpec:
    per_country_cap: int = 100_000
    test_size: int = 100_000
    zero_shot_countries: frozenset[str] = field(default_factory=frozenset)
    seed: int = 42

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "zero_shot_countries", frozenset(self.zero_shot_countries)
        )


def _record_to_sample(
    record: dict, where: str, default_country: str | None
) -> Sample:
    address = record.get("address")
    tags = record.get("tags")
    if not isinstance(address, str) or not isinstance(tags, list):
        raise MalformedRecordError(f"{where}: need 'address' string and 'tags' list")
    words = address.split()
    if len(words) != len(tags):
        raise MalformedRecordError(
            f"{where}: {len(words)} words but {len(tags)} tags"
        )
    country = record.get("country") or default_country
    try:
        labels = parse_tag_strings(tags)
        return Sample(
            words=tuple(words),
            labels=tuple(labels),
            country=country.lower() if country else None,
            id=record.get("id") or where,
        )
    except UnknownTagError as exc:
        raise MalformedRecordError(f"{where}: {exc}") from exc
    except ValueError as exc:
        raise MalformedRecordError(f"{where}: {exc}") from exc


def load_corpus(
    path: str | Path,
    format: str = "jsonl",
    default_country: str | None = None,
) -> Corpus:
    """Load a corpus file.

    JSON-Lines records look like
    ``{"id": str?, "address": str, "tags": [str], "country": str?}``;
    the TSV alternative has columns id, country, address, space-joined tags.
    Tags may be plain base tags or BIO strings. Records whose word and tag
    counts differ are rejected with their line number.
    """
    path = Path(path)
    samples: list[Sample] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            where = f"{path.name}:{lineno}"
            if format == "jsonl":
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedRecordError(f"{where}: bad JSON: {exc}") from exc
                if not isinstance(record, dict):
                    raise MalformedRecordError(f"{where}: record is not an object")
            elif format == "tsv":
                parts = line.split("\t")
                if len(parts) != 4:
                    raise MalformedRecordError(
                        f"{where}: expected 4 tab-separated columns, got {len(parts)}"
                    )
                rec_id, country, address, tag_text = parts
                record = {
                    "id": rec_id or None,
                    "country": country or None,
                    "address": address,
                    "tags": tag_text.split(),
                }
            else:
                raise ValueError(f"unknown corpus format {format!r}")
            samples.append(_record_to_sample(record, where, default_country))
    return Corpus(tuple(samples), provenance=str(path))


def sample_to_record(sample: Sample) -> dict:
    record = {
        "id": sample.id,
        "address": sample.address,
        "tags": [str(label) for label in sample.labels],
    }
    if sample.country is not None:
        record["country"] = sample.country
    return record


def dumps_corpus(corpus: Corpus) -> str:
    """Serialize to JSON-Lines with BIO tag strings; byte-stable for fixed input."""
    return "".join(json.dumps(sample_to_record(s)) + "\n" for s in corpus)


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(dumps_corpus(corpus), encoding="utf-8")


@lru_cache(maxsize=4096)
def _is_latin_char(ch: str) -> bool:
    return unicodedata.name(ch, "").startswith("LATIN")


def is_latin(address: str) -> bool:
    """True iff every alphabetic character is Latin script.

    Digits, punctuation, and whitespace are neutral; an address with no
    alphabetic characters passes.
    """
    if address.isascii():
        return True
    return all(not ch.isalpha() or _is_latin_char(ch) for ch in address)


def filter_latin(corpus: Corpus) -> Corpus:
    kept = tuple(s for s in corpus if is_latin(s.address))
    return Corpus(kept, provenance=corpus.provenance)


def sample_capped(corpus: Corpus, spec: SplitSpec) -> Corpus:
    """Per country, retain at most ``spec.per_country_cap`` samples.

    Selection is seeded uniform sampling without replacement over each
    country's samples in file order; the survivors keep their file order.
    """
    by_country: dict[str, list[int]] = {}
    for idx, sample in enumerate(corpus.samples):
        if sample.country is None:
            raise MissingCountryError(
                f"sample {sample.id!r} has no country code; "
                "pass default_country at load time"
            )
        by_country.setdefault(sample.country, []).append(idx)

    kept: list[int] = []
    for country in sorted(by_country):
        indices = by_country[country]
        k = min(spec.per_country_cap, len(indices))
        if k == len(indices):
            kept.extend(indices)
        else:
            rng = random.Random(f"{spec.seed}:cap:{country}")
            kept.extend(sorted(rng.sample(indices, k)))
    kept.sort()
    return Corpus(
        tuple(corpus.samples[i] for i in kept), provenance=corpus.provenance
    )


def split_zero_shot(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Partition into (main, zero_shot) by country membership."""
    zs_countries = {c.lower() for c in spec.zero_shot_countries}
    main = tuple(s for s in corpus if (s.country or "") not in zs_countries)
    zs = tuple(s for s in corpus if (s.country or "") in zs_countries)
    return (
        Corpus(main, provenance=corpus.provenance),
        Corpus(zs, provenance=f"{corpus.provenance} [zero-shot]"),
    )


def split_train_test(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Disjoint (train, test) partition with ``|test| == spec.test_size``."""
    n = len(corpus)
    if spec.test_size > n:
        raise SplitError(f"test size {spec.test_size} exceeds corpus size {n}")
    rng = random.Random(f"{spec.seed}:split")
    order = list(range(n))
    rng.shuffle(order)
    test_idx = set(order[: spec.test_size])
    train = tuple(s for i, s in enumerate(corpus.samples) if i not in test_idx)
    test = tuple(s for i, s in enumerate(corpus.samples) if i in test_idx)
    return (
        Corpus(train, provenance=f"{corpus.provenance} [train]"),
        Corpus(test, provenance=f"{corpus.provenance} [test]"),
    )


def kfold(corpus: Corpus, k: int, seed: int) -> list[tuple[Corpus, Corpus]]:
    """k (train, validation) pairs whose validation parts partition the corpus.

    Fold sizes differ by at most one.
    """
    n = len(corpus)
    if k < 2 or k > n:
        raise SplitError(f"k={k} invalid for corpus of size {n}")
    rng = random.Random(f"{seed}:fold:{k}")
    order = list(range(n))
    rng.shuffle(order)
    base, extra = divmod(n, k)
    pairs: list[tuple[Corpus, Corpus]] = []
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        val_idx = set(order[start : start + size])
        start += size
        train = tuple(s for i, s in enumerate(corpus.samples) if i not in val_idx)
        val = tuple(s for i, s in enumerate(corpus.samples) if i in val_idx)
        pairs.append(
            (
                Corpus(train, provenance=f"{corpus.provenance} [fold{fold} train]"),
                Corpus(val, provenance=f"{corpus.provenance} [fold{fold} val]"),
            )
        )
    return pairs
