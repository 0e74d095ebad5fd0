"""Noising pipeline that turns clean address corpora into payment-style data.

Given a clean (V0) sample, the augmenter can prepend a synthetic person or
company name, insert the country as a localized name or ISO code, restructure
the address with a production-derived tag mask, add out-of-address (OOA)
junk terms, and insert the "$" hard separator between name and address.

Three dataset versions are derivable:

* V0 - the input, BIO-labeled, untouched.
* V1 - cleaned and mask-restructured, using only fields the sample already
  has (rearrange or remove, never synthesize).
* V2 - the full treatment: masks may demand synthesized Name / Country /
  CountryCode / OOA fields, and a configurable fraction of samples gets the
  hard separator.

Every sample derives its own random stream from ``(cfg.seed, sample.id)``,
so parallel and serial runs produce identical corpora.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ingest import Corpus
from .schema import (
    AddrkitError,
    BaseTag,
    BioLabel,
    Sample,
    to_bio,
)

COUNTRY_FORMS = ("full-name", "iso-code", "absent")
COUNTRY_LANGUAGES = ("en", "fr", "de", "it", "native")
OOA_KINDS = ("random-number", "alphanumeric-code", "postbox", "duplicate-term")
NAME_KINDS = ("person", "company")

POSTBOX_TEMPLATES: tuple[tuple[str, ...], ...] = (
    ("po", "box"),
    ("p.o.", "box"),
    ("postbox",),
    ("pob",),
)

_DIST_SUM_TOL = 1e-9


class UnsatisfiableMaskError(AddrkitError):
    """A mask demands a field that can be neither reused nor synthesized."""


class MissingNameError(AddrkitError):
    pass


class UnknownCountryError(AddrkitError):
    pass


class ConfigError(AddrkitError):
    pass


@dataclass(frozen=True)
class MaskSpec:
    """Ordered base-tag sequence imposed on a synthetic address."""

    tags: tuple[BaseTag, ...]
    source_id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "tags", tuple(self.tags))
        if not self.tags:
            raise ValueError("mask must be non-empty")


def _check_dist(name: str, dist: Mapping[str, float], keys: Sequence[str]) -> dict:
    dist = dict(dist)
    unknown = set(dist) - set(keys)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    if any(v < 0 for v in dist.values()):
        raise ConfigError(f"{name}: negative probability")
    total = sum(dist.values())
    if abs(total - 1.0) > _DIST_SUM_TOL:
        raise ConfigError(f"{name}: probabilities sum to {total}, expected 1")
    return dist


def _uniform(keys: Sequence[str]) -> dict[str, float]:
    return {k: 1.0 / len(keys) for k in keys}


@dataclass(frozen=True)
class NoiseConfig:
    """Distributions steering the augmentation; defaults are uniform placeholders.

    The production distributions these stand in for are not public; drop in
    measured values through a config file when available.
    """

    country_form_dist: Mapping[str, float] = field(
        default_factory=lambda: _uniform(COUNTRY_FORMS)
    )
    country_language_dist: Mapping[str, float] = field(
        default_factory=lambda: _uniform(COUNTRY_LANGUAGES)
    )
    ooa_kind_dist: Mapping[str, float] = field(
        default_factory=lambda: _uniform(OOA_KINDS)
    )
    name_kind_dist: Mapping[str, float] = field(
        default_factory=lambda: _uniform(NAME_KINDS)
    )
    hardsep_fraction: float = 1.0 / 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "country_form_dist",
            _check_dist("country_form_dist", self.country_form_dist, COUNTRY_FORMS),
        )
        object.__setattr__(
            self,
            "country_language_dist",
            _check_dist(
                "country_language_dist",
                self.country_language_dist,
                COUNTRY_LANGUAGES,
            ),
        )
        object.__setattr__(
            self,
            "ooa_kind_dist",
            _check_dist("ooa_kind_dist", self.ooa_kind_dist, OOA_KINDS),
        )
        object.__setattr__(
            self,
            "name_kind_dist",
            _check_dist("name_kind_dist", self.name_kind_dist, NAME_KINDS),
        )
        if not 0.0 <= self.hardsep_fraction <= 1.0:
            raise ConfigError(
                f"hardsep_fraction {self.hardsep_fraction} outside [0, 1]"
            )

    @classmethod
    def from_file(cls, path: str | Path) -> "NoiseConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        known = {
            "country_form_dist",
            "country_language_dist",
            "ooa_kind_dist",
            "name_kind_dist",
            "hardsep_fraction",
            "seed",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**data)

    def to_file(self, path: str | Path) -> None:
        data = {
            "country_form_dist": dict(self.country_form_dist),
            "country_language_dist": dict(self.country_language_dist),
            "ooa_kind_dist": dict(self.ooa_kind_dist),
            "name_kind_dist": dict(self.name_kind_dist),
            "hardsep_fraction": self.hardsep_fraction,
            "seed": self.seed,
        }
        Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def _draw(rng: random.Random, dist: Mapping[str, float]) -> str:
    keys = sorted(dist)
    return rng.choices(keys, weights=[dist[k] for k in keys], k=1)[0]


def _read_word_list(name: str) -> tuple[str, ...]:
    text = resources.files("addrkit").joinpath("data", name).read_text("utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class NameCorpora:
    """Word lists backing fake person and company names."""

    given_names: tuple[str, ...]
    surnames: tuple[str, ...]
    company_stems: tuple[str, ...]
    company_suffixes: tuple[str, ...]

    def __post_init__(self) -> None:
        for attr in (
            "given_names",
            "surnames",
            "company_stems",
            "company_suffixes",
        ):
            entries = tuple(getattr(self, attr))
            object.__setattr__(self, attr, entries)
            if not entries:
                raise ConfigError(f"name corpus {attr} is empty")

    @classmethod
    def load_default(cls) -> "NameCorpora":
        return cls(
            given_names=_read_word_list("given_names.txt"),
            surnames=_read_word_list("surnames.txt"),
            company_stems=_read_word_list("company_stems.txt"),
            company_suffixes=_read_word_list("company_suffixes.txt"),
        )


_country_table_cache: dict[str, dict[str, str]] | None = None


def country_table() -> dict[str, dict[str, str]]:
    """Bundled localization table: iso code -> language -> lowercase name."""
    global _country_table_cache
    if _country_table_cache is None:
        text = (
            resources.files("addrkit")
            .joinpath("data", "country_names.tsv")
            .read_text("utf-8")
        )
        table: dict[str, dict[str, str]] = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            iso, en, fr, de, it, native = line.split("\t")
            table[iso] = {"en": en, "fr": fr, "de": de, "it": it, "native": native}
        _country_table_cache = table
    return _country_table_cache


@dataclass(frozen=True)
class LocalizedCountry:
    words: tuple[str, ...]
    tag: BaseTag
    language_used: str
    fallback: bool = False


def localize_country(
    country: str, form: str, language: str = "en"
) -> LocalizedCountry:
    """Render a country as a full name in the requested language or as its ISO code.

    A missing translation falls back to English and flags the result.
    """
    iso = country.lower()
    entry = country_table().get(iso)
    if entry is None:
        raise UnknownCountryError(f"country {country!r} not in localization table")
    if form == "iso-code":
        return LocalizedCountry((iso.upper(),), BaseTag.COUNTRY_CODE, "iso", False)
    if form != "full-name":
        raise ValueError(f"unknown country form {form!r}")
    name = entry.get(language, "")
    fallback = False
    if not name:
        name = entry["en"]
        fallback = True
    return LocalizedCountry(
        tuple(name.split()), BaseTag.COUNTRY, "en" if fallback else language, fallback
    )


def gen_name(
    rng: random.Random, kind: str, corpora: NameCorpora
) -> tuple[tuple[str, ...], tuple[BaseTag, ...]]:
    """Generate 1-4 fake name tokens, all tagged Name."""
    if kind == "person":
        words = [rng.choice(corpora.given_names)]
        if rng.random() < 0.2:
            words.append(rng.choice(corpora.given_names))
        words.append(rng.choice(corpora.surnames))
    elif kind == "company":
        stem = rng.choice(corpora.company_stems)
        words = stem.split()
        if rng.random() < 0.25 and len(words) < 3:
            words.extend(rng.choice(corpora.company_stems).split()[:1])
        words.append(rng.choice(corpora.company_suffixes))
    else:
        raise ValueError(f"unknown name kind {kind!r}")
    words = words[:4]
    return tuple(words), (BaseTag.NAME,) * len(words)


# A field is one mask-level unit: a tag plus the words it spans.
Field = tuple[BaseTag, tuple[str, ...]]


def sample_fields(sample: Sample) -> list[Field]:
    """Split a sample into fields at B- boundaries."""
    fields: list[Field] = []
    for word, label in zip(sample.words, sample.labels):
        if label.prefix == "B":
            fields.append((label.base, (word,)))
        else:
            tag, words = fields[-1]
            fields[-1] = (tag, words + (word,))
    return fields


def fields_to_sample(
    fields: Sequence[Field], country: str | None = None, id: str = ""
) -> Sample:
    """Assemble fields into a sample; B- restarts at every field boundary.

    Labeling runs to_bio within each field, so two adjacent fields of the
    same tag stay distinct instead of merging into one run.
    """
    words: list[str] = []
    labels: list[BioLabel] = []
    for tag, field_words in fields:
        words.extend(field_words)
        labels.extend(to_bio([tag] * len(field_words)))
    return Sample(tuple(words), tuple(labels), country=country, id=id)


def extract_mask(sample: Sample) -> MaskSpec:
    """The ordered base tags of a sample's fields: one entry per B- boundary."""
    return MaskSpec(
        tags=tuple(label.base for label in sample.labels if label.prefix == "B"),
        source_id=sample.id,
    )


def gen_ooa(
    rng: random.Random, sample: Sample, kind: str
) -> tuple[tuple[str, ...], tuple[BaseTag, ...]]:
    """Generate an out-of-address term: junk tokens, all tagged OOA.

    ``duplicate-term`` copies an existing field of ``sample`` (preferring the
    country field) but labels the copy OOA, since the repetition is redundant.
    """
    if kind == "random-number":
        length = rng.randint(4, 12)
        words = ("".join(rng.choice("0123456789") for _ in range(length)),)
    elif kind == "alphanumeric-code":
        length = rng.randint(6, 10)
        alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
        words = ("".join(rng.choice(alphabet) for _ in range(length)),)
    elif kind == "postbox":
        template = rng.choice(POSTBOX_TEMPLATES)
        number = str(rng.randint(1, 99999))
        words = template + (number,)
    elif kind == "duplicate-term":
        fields = sample_fields(sample)
        if not fields:
            raise ValueError("duplicate-term OOA needs a non-empty sample")
        preferred = [
            f for f in fields if f[0] in (BaseTag.COUNTRY, BaseTag.COUNTRY_CODE)
        ]
        tag, words = rng.choice(preferred or fields)
    else:
        raise ValueError(f"unknown OOA kind {kind!r}")
    return tuple(words), (BaseTag.OOA,) * len(words)


def apply_mask(
    sample: Sample,
    mask: MaskSpec,
    rng: random.Random,
    cfg: NoiseConfig,
    corpora: NameCorpora,
) -> Sample:
    """Impose a production tag ordering on a clean sample.

    Mask entries whose tag exists in the source reuse the source's words, in
    source order.  Entries absent from the source are synthesized where
    possible (Name, Country, CountryCode, HardSep, OOA); anything else raises
    :class:`UnsatisfiableMaskError`.  Source fields not in the mask are
    dropped.

    OOA terms are generated in a second pass so a duplicate-term can copy any
    field of the restructured address, matching how redundant mentions show
    up after the real fields.
    """
    queues: dict[BaseTag, deque[Field]] = {}
    for f in sample_fields(sample):
        queues.setdefault(f[0], deque()).append(f)

    resolved: list[Field | None] = []
    for tag in mask.tags:
        if tag is BaseTag.OOA:
            resolved.append(None)  # second pass
            continue
        queue = queues.get(tag)
        if queue:
            resolved.append(queue.popleft())
            continue
        if tag is BaseTag.NAME:
            words, _ = gen_name(rng, _draw(rng, cfg.name_kind_dist), corpora)
            resolved.append((tag, words))
        elif tag is BaseTag.COUNTRY:
            if sample.country is None:
                raise UnsatisfiableMaskError(
                    f"sample {sample.id!r}: mask needs Country but sample "
                    "has no country code"
                )
            loc = localize_country(
                sample.country, "full-name", _draw(rng, cfg.country_language_dist)
            )
            resolved.append((tag, loc.words))
        elif tag is BaseTag.COUNTRY_CODE:
            if sample.country is None:
                raise UnsatisfiableMaskError(
                    f"sample {sample.id!r}: mask needs CountryCode but sample "
                    "has no country code"
                )
            loc = localize_country(sample.country, "iso-code")
            resolved.append((tag, loc.words))
        elif tag is BaseTag.HARD_SEP:
            resolved.append((tag, ("$",)))
        else:
            raise UnsatisfiableMaskError(
                f"sample {sample.id!r}: mask needs {tag} which the sample "
                "lacks and which cannot be synthesized"
            )

    context_fields = [f for f in resolved if f is not None]
    context = fields_to_sample(context_fields, sample.country, sample.id)
    out_fields: list[Field] = []
    for tag, slot in zip(mask.tags, resolved):
        if slot is not None:
            out_fields.append(slot)
            continue
        kind = _draw(rng, cfg.ooa_kind_dist)
        if kind == "duplicate-term" and not context_fields:
            kind = _draw(
                rng,
                {k: v for k, v in cfg.ooa_kind_dist.items() if k != "duplicate-term"}
                or {"random-number": 1.0},
            )
        words, _ = gen_ooa(rng, context, kind)
        out_fields.append((BaseTag.OOA, words))

    return fields_to_sample(out_fields, sample.country, sample.id)


def add_hardsep(sample: Sample) -> Sample:
    """Insert the "$" separator token right after the leading Name field(s)."""
    fields = sample_fields(sample)
    if not fields or fields[0][0] is not BaseTag.NAME:
        raise MissingNameError(f"sample {sample.id!r} does not start with a Name")
    cut = 0
    while cut < len(fields) and fields[cut][0] is BaseTag.NAME:
        cut += 1
    fields.insert(cut, (BaseTag.HARD_SEP, ("$",)))
    return fields_to_sample(fields, sample.country, sample.id)


def clean_sample(sample: Sample) -> Sample:
    """V1 basic cleaning: lowercase tokens (whitespace is normalized at load)."""
    return replace(sample, words=tuple(w.lower() for w in sample.words))


@dataclass(frozen=True)
class WeightedMask:
    mask: MaskSpec
    weight: float = 1.0


def read_masks(path: str | Path) -> list[WeightedMask]:
    """Load a JSON-Lines mask file: {"mask": ["Name", ...], "weight": float?}."""
    masks: list[WeightedMask] = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            tags = tuple(BaseTag.from_string(t) for t in record["mask"])
            masks.append(
                WeightedMask(
                    MaskSpec(tags, source_id=f"{path.name}:{lineno}"),
                    float(record.get("weight", 1.0)),
                )
            )
    return masks


def write_masks(masks: Iterable[WeightedMask], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for wm in masks:
            fh.write(
                json.dumps(
                    {"mask": [str(t) for t in wm.mask.tags], "weight": wm.weight}
                )
                + "\n"
            )


def default_masks() -> list[WeightedMask]:
    """Documented sample masks shipped with the package."""
    with resources.as_file(
        resources.files("addrkit").joinpath("data", "sample_masks.jsonl")
    ) as p:
        return read_masks(p)


def synthesize_masks(
    n: int,
    cfg: NoiseConfig,
    seed: int,
    ooa_rate: float = 0.35,
    unit_rate: float = 0.08,
) -> list[WeightedMask]:
    """Seeded stand-in for a production mask distribution.

    Masks always lead with Name (payment messages carry the beneficiary
    first), permute and drop the address core, and add a country entry per
    ``cfg.country_form_dist``.  Real mask files can be dropped in through
    :func:`read_masks` whenever measured distributions exist.
    """
    rng = random.Random(f"{seed}:masks")
    core_orders = (
        (BaseTag.STREET_NAME, BaseTag.STREET_NUMBER, BaseTag.POSTAL_CODE,
         BaseTag.MUNICIPALITY, BaseTag.PROVINCE),
        (BaseTag.STREET_NUMBER, BaseTag.STREET_NAME, BaseTag.POSTAL_CODE,
         BaseTag.MUNICIPALITY, BaseTag.PROVINCE),
        (BaseTag.STREET_NAME, BaseTag.STREET_NUMBER, BaseTag.MUNICIPALITY,
         BaseTag.POSTAL_CODE),
        (BaseTag.STREET_NUMBER, BaseTag.STREET_NAME, BaseTag.MUNICIPALITY,
         BaseTag.PROVINCE, BaseTag.POSTAL_CODE),
        (BaseTag.POSTAL_CODE, BaseTag.MUNICIPALITY, BaseTag.STREET_NAME,
         BaseTag.STREET_NUMBER),
        (BaseTag.STREET_NAME, BaseTag.STREET_NUMBER, BaseTag.MUNICIPALITY),
    )
    masks: list[WeightedMask] = []
    for i in range(n):
        tags: list[BaseTag] = [BaseTag.NAME]
        core = list(rng.choice(core_orders))
        if rng.random() < unit_rate:
            core.insert(min(2, len(core)), BaseTag.UNIT)
        tags.extend(core)
        form = _draw(rng, cfg.country_form_dist)
        if form == "full-name":
            tags.append(BaseTag.COUNTRY)
        elif form == "iso-code":
            tags.append(BaseTag.COUNTRY_CODE)
        if rng.random() < ooa_rate:
            pos = len(tags) if rng.random() < 0.7 else rng.randint(1, len(tags))
            tags.insert(pos, BaseTag.OOA)
        masks.append(WeightedMask(MaskSpec(tuple(tags), f"synth:{i}"), 1.0))
    return masks


def _restrict_mask(mask: MaskSpec, sample: Sample) -> MaskSpec | None:
    """Drop mask entries beyond what the sample's own fields can cover."""
    available: dict[BaseTag, int] = {}
    for tag, _ in sample_fields(sample):
        available[tag] = available.get(tag, 0) + 1
    kept: list[BaseTag] = []
    for tag in mask.tags:
        if available.get(tag, 0) > 0:
            available[tag] -= 1
            kept.append(tag)
    if not kept:
        return None
    return MaskSpec(tuple(kept), source_id=mask.source_id)


@dataclass
class SkipReport:
    """Samples passed through unmodified after exhausting mask redraws."""

    skipped_ids: list[str] = field(default_factory=list)
    redraws: int = 0

    @property
    def skipped(self) -> int:
        return len(self.skipped_ids)


MASK_REDRAW_LIMIT = 8


def _draw_mask(rng: random.Random, masks: Sequence[WeightedMask]) -> MaskSpec:
    weights = [wm.weight for wm in masks]
    return rng.choices(masks, weights=weights, k=1)[0].mask


def build_version(
    corpus: Corpus,
    version: str,
    masks: Sequence[WeightedMask] | None = None,
    cfg: NoiseConfig | None = None,
    corpora: NameCorpora | None = None,
) -> tuple[Corpus, SkipReport]:
    """Derive a dataset version ("v0", "v1", or "v2") from a clean corpus.

    Samples whose drawn mask is unsatisfiable are re-drawn up to
    ``MASK_REDRAW_LIMIT`` times, then passed through unmodified and counted
    in the returned :class:`SkipReport`.
    """
    version = version.lower()
    if version not in ("v0", "v1", "v2"):
        raise ConfigError(f"unknown dataset version {version!r}")
    report = SkipReport()
    if version == "v0":
        return Corpus(corpus.samples, provenance=f"{corpus.provenance} [v0]"), report

    if not masks:
        raise ConfigError(f"{version} requires a non-empty mask list")
    cfg = cfg or NoiseConfig()
    corpora = corpora or NameCorpora.load_default()

    out: list[Sample] = []
    for sample in corpus:
        rng = random.Random(f"{cfg.seed}:{version}:{sample.id}")
        if version == "v1":
            cleaned = clean_sample(sample)
            result: Sample | None = None
            for _ in range(MASK_REDRAW_LIMIT):
                restricted = _restrict_mask(_draw_mask(rng, masks), cleaned)
                if restricted is None:
                    report.redraws += 1
                    continue
                result = apply_mask(cleaned, restricted, rng, cfg, corpora)
                break
            if result is None:
                report.skipped_ids.append(sample.id)
                result = cleaned
            out.append(result)
        else:  # v2
            cleaned = clean_sample(sample)
            hardsep_coin = rng.random()
            result = None
            for _ in range(MASK_REDRAW_LIMIT):
                mask = _draw_mask(rng, masks)
                try:
                    result = apply_mask(cleaned, mask, rng, cfg, corpora)
                    break
                except UnsatisfiableMaskError:
                    report.redraws += 1
            if result is None:
                report.skipped_ids.append(sample.id)
                result = cleaned
            elif (
                hardsep_coin < cfg.hardsep_fraction
                and result.labels
                and result.labels[0].base is BaseTag.NAME
            ):
                result = add_hardsep(result)
            out.append(result)
    return Corpus(tuple(out), provenance=f"{corpus.provenance} [{version}]"), report
