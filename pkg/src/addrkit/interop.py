"""Mapping external parser vocabularies onto the internal tag set.

The reference external vocabulary is the 20-tag postal one.  Two mappings
exist because the clean datasets (V0, V1) lack Name / Country / OOA
fields: under V0V1 every external tag folds into an original address tag,
while under V2 several fold into the augmentation tags instead.

The table is frozen as-is, oddities included (e.g. "island" maps to OOA
under V2 while "world_region" stays Province): scored comparisons are only
meaningful if every consumer applies the identical mapping.
"""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .schema import AddrkitError, BaseTag, BioLabel, Sample, to_bio


class TagMapVersion(Enum):
    V0V1 = "V0V1"
    V2 = "V2"

    @classmethod
    def from_string(cls, s: str) -> "TagMapVersion":
        for v in cls:
            if v.value.lower() == s.lower():
                return v
        raise ValueError(f"unknown tag-map version {s!r}; expected V0V1 or V2")


class UnknownExternalTagError(AddrkitError):
    pass


class PredictionLengthError(AddrkitError):
    pass


_T = BaseTag

# external tag -> (V0V1 mapping, V2 mapping)
EXTERNAL_TAG_TABLE: dict[str, tuple[BaseTag, BaseTag]] = {
    "house_number": (_T.STREET_NUMBER, _T.STREET_NUMBER),
    "road": (_T.STREET_NAME, _T.STREET_NAME),
    "house": (_T.UNIT, _T.NAME),
    "level": (_T.UNIT, _T.UNIT),
    "city": (_T.MUNICIPALITY, _T.MUNICIPALITY),
    "state": (_T.PROVINCE, _T.PROVINCE),
    "state_district": (_T.PROVINCE, _T.PROVINCE),
    "unit": (_T.UNIT, _T.UNIT),
    "postcode": (_T.POSTAL_CODE, _T.POSTAL_CODE),
    "country": (_T.PROVINCE, _T.COUNTRY),
    "suburb": (_T.MUNICIPALITY, _T.MUNICIPALITY),
    "city_district": (_T.MUNICIPALITY, _T.MUNICIPALITY),
    "category": (_T.STREET_NAME, _T.OOA),
    "near": (_T.MUNICIPALITY, _T.OOA),
    "po_box": (_T.POSTAL_CODE, _T.OOA),
    "entrance": (_T.UNIT, _T.OOA),
    "country_region": (_T.PROVINCE, _T.COUNTRY),
    "staircase": (_T.UNIT, _T.OOA),
    "world_region": (_T.PROVINCE, _T.PROVINCE),
    "island": (_T.PROVINCE, _T.OOA),
}


def map_external(tag: str, version: TagMapVersion) -> BaseTag:
    """Map one external tag string under the requested dataset version."""
    try:
        v0v1, v2 = EXTERNAL_TAG_TABLE[tag]
    except KeyError:
        raise UnknownExternalTagError(f"unknown external tag {tag!r}")
    return v0v1 if version is TagMapVersion.V0V1 else v2


def map_external_sequence(
    tags: Sequence[str], version: TagMapVersion
) -> list[BioLabel]:
    """Map a per-word external tag sequence and convert to BIO.

    Adjacent external tags that map to the same internal tag merge into one
    field (B- then I-): the external vocabulary is finer-grained, and per
    token scoring does not distinguish the boundary.
    """
    return to_bio([map_external(t, version) for t in tags])


def import_predictions(
    path: str | Path,
    version: TagMapVersion,
    gold: Mapping[str, Sample] | None = None,
) -> dict[str, list[BioLabel]]:
    """Read external predictions: JSON-Lines {"id": str, "tags": [str]}.

    When ``gold`` is given, each prediction's length is checked against the
    gold sample's word count.
    """
    path = Path(path)
    out: dict[str, list[BioLabel]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                sample_id = record["id"]
                tags = record["tags"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise AddrkitError(f"{path}:{lineno}: bad prediction record: {exc}")
            try:
                out[sample_id] = map_external_sequence(tags, version)
            except UnknownExternalTagError as exc:
                raise UnknownExternalTagError(f"{path}:{lineno}: {exc}")
            if gold is not None:
                if sample_id not in gold:
                    raise PredictionLengthError(
                        f"{path}:{lineno}: prediction for unknown sample "
                        f"{sample_id!r}"
                    )
                expected = len(gold[sample_id].words)
                if len(tags) != expected:
                    raise PredictionLengthError(
                        f"{path}:{lineno}: sample {sample_id!r} has {expected} "
                        f"words but {len(tags)} predicted tags"
                    )
    return out
