from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from helpers import mk_sample, table1_sample  # noqa: E402

from addrkit.augment import NameCorpora, NoiseConfig  # noqa: E402
from addrkit.ingest import Corpus  # noqa: E402

settings.register_profile(
    "addrkit",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("addrkit")


@pytest.fixture(scope="session")
def corpora() -> NameCorpora:
    return NameCorpora.load_default()


@pytest.fixture()
def noise_cfg() -> NoiseConfig:
    return NoiseConfig(seed=42)


@pytest.fixture()
def table1() -> "Sample":
    return table1_sample()


@pytest.fixture()
def tiny_corpus() -> Corpus:
    samples = (
        table1_sample("a"),
        mk_sample(
            ["12", "rue", "de", "la", "paix", "75002", "paris"],
            [
                "StreetNumber",
                "StreetName",
                "StreetName",
                "StreetName",
                "StreetName",
                "PostalCode",
                "Municipality",
            ],
            country="fr",
            id="b",
        ),
        mk_sample(
            ["baker", "street", "221b", "london", "nw1", "6xe"],
            [
                "StreetName",
                "StreetName",
                "StreetNumber",
                "Municipality",
                "PostalCode",
                "PostalCode",
            ],
            country="gb",
            id="c",
        ),
        mk_sample(
            ["piazza", "navona", "3", "00186", "roma", "lazio"],
            [
                "StreetName",
                "StreetName",
                "StreetNumber",
                "PostalCode",
                "Municipality",
                "Province",
            ],
            country="it",
            id="d",
        ),
    )
    return Corpus(samples=samples, provenance="tiny-fixture")
