"""Tag taxonomy, BIO labels, and the validity rules shared by the whole pipeline.

Tokenized address messages carry exactly one label per word.  The base tags
form a closed set; the BIO wrapper marks where a field starts (``B-``) and
where it continues (``I-``).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence


class AddrkitError(Exception):
    """Base class for errors raised by this package."""


class UnknownTagError(AddrkitError):
    """A tag string outside the closed vocabulary."""


class BaseTag(Enum):
    NAME = "Name"
    STREET_NUMBER = "StreetNumber"
    STREET_NAME = "StreetName"
    UNIT = "Unit"
    POSTAL_CODE = "PostalCode"
    MUNICIPALITY = "Municipality"
    PROVINCE = "Province"
    COUNTRY = "Country"
    COUNTRY_CODE = "CountryCode"
    HARD_SEP = "HardSep"
    OOA = "OOA"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def from_string(cls, text: str) -> "BaseTag":
        try:
            return _TAG_BY_STRING[text]
        except KeyError:
            raise UnknownTagError(f"unknown tag {text!r}") from None


_TAG_BY_STRING = {tag.value: tag for tag in BaseTag}

# The six tags of the clean source corpora; V0/V1 data never uses anything else.
ORIGINAL_TAGS = frozenset(
    {
        BaseTag.STREET_NAME,
        BaseTag.STREET_NUMBER,
        BaseTag.UNIT,
        BaseTag.POSTAL_CODE,
        BaseTag.MUNICIPALITY,
        BaseTag.PROVINCE,
    }
)

# Tags that only augmented (V2) data may carry.
AUGMENTED_TAGS = frozenset(set(BaseTag) - ORIGINAL_TAGS)


@dataclass(frozen=True)
class BioLabel:
    """A base tag with a B-/I- positional prefix; the unit of prediction."""

    prefix: str  # "B" or "I"
    base: BaseTag

    def __post_init__(self) -> None:
        if self.prefix not in ("B", "I"):
            raise UnknownTagError(f"bad BIO prefix {self.prefix!r}")

    def __str__(self) -> str:
        return f"{self.prefix}-{self.base.value}"

    @classmethod
    def parse(cls, text: str) -> "BioLabel":
        prefix, sep, base = text.partition("-")
        if sep != "-" or prefix not in ("B", "I"):
            raise UnknownTagError(f"not a BIO label: {text!r}")
        return cls(prefix, BaseTag.from_string(base))

    @classmethod
    def b(cls, base: BaseTag) -> "BioLabel":
        return cls("B", base)

    @classmethod
    def i(cls, base: BaseTag) -> "BioLabel":
        return cls("I", base)


ALL_LABELS: tuple[BioLabel, ...] = tuple(
    BioLabel(prefix, base) for base in BaseTag for prefix in ("B", "I")
)


def to_bio(base_tags: Sequence[BaseTag]) -> list[BioLabel]:
    """Wrap a base-tag sequence in BIO: B- opens each maximal run, I- continues it."""
    labels: list[BioLabel] = []
    prev: BaseTag | None = None
    for tag in base_tags:
        labels.append(BioLabel("I" if tag == prev else "B", tag))
        prev = tag
    return labels


@dataclass(frozen=True)
class BioViolation:
    index: int
    label: BioLabel
    reason: str


def validate_bio(labels: Sequence[BioLabel]) -> list[BioViolation]:
    """Report every index where an I-label lacks a same-base B/I predecessor.

    An empty list means the sequence is valid.  Violations are data, not
    failures: callers decide whether to raise.
    """
    violations: list[BioViolation] = []
    for i, label in enumerate(labels):
        if label.prefix != "I":
            continue
        if i == 0:
            violations.append(BioViolation(i, label, "I-label at sequence start"))
        elif labels[i - 1].base != label.base:
            violations.append(
                BioViolation(i, label, f"I-label follows {labels[i - 1]}")
            )
    return violations


def strip_prefix(labels: Sequence[BioLabel]) -> list[BaseTag]:
    """Drop the B-/I- prefixes, preserving order and length."""
    return [label.base for label in labels]


@dataclass(frozen=True)
class Sample:
    """A tokenized address message with one label per token.

    ``country`` is the ISO-3166 alpha-2 code of the address when known; it is
    required metadata for augmentation but optional elsewhere.
    """

    words: tuple[str, ...]
    labels: tuple[BioLabel, ...]
    country: str | None = None
    id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.words) != len(self.labels):
            raise ValueError(
                f"sample {self.id!r}: {len(self.words)} words vs "
                f"{len(self.labels)} labels"
            )
        for word in self.words:
            if not word or word.split() != [word]:
                raise ValueError(f"sample {self.id!r}: bad token {word!r}")
        violations = validate_bio(self.labels)
        if violations:
            v = violations[0]
            raise ValueError(
                f"sample {self.id!r}: invalid BIO at index {v.index}: {v.reason}"
            )

    @property
    def address(self) -> str:
        return " ".join(self.words)

    def base_tags(self) -> list[BaseTag]:
        return strip_prefix(self.labels)


def parse_tag_strings(tags: Iterable[str]) -> list[BioLabel]:
    """Parse a record's tag strings, accepting plain base tags or BIO labels.

    A record is either entirely BIO ("B-..."/"I-...") and used as-is, or
    entirely base tags and converted with :func:`to_bio`.
    """
    tags = list(tags)
    if tags and all(t.startswith(("B-", "I-")) for t in tags):
        return [BioLabel.parse(t) for t in tags]
    return to_bio([BaseTag.from_string(t) for t in tags])
