"""Synthetic clean address corpora for desk-scale experiments.

Real multinational address corpora cannot ship with this package, so the
experiment scripts and the test suite generate stand-ins: per-country
recipes produce clean, lowercase samples over the six original tags with
country-typical field orders, street/municipality morphology, and postal
code shapes.  The point is not realism but learnable, country-dependent
structure, so that pipeline effects (noising, zero-shot evaluation, early
stopping) are measurable at desk scale.

Everything is derived from ``Random(f"{seed}:desk:{country}:{i}")``, so a
corpus is fully determined by (n, countries, seed).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .augment import Field, fields_to_sample
from .ingest import Corpus
from .schema import BaseTag, Sample

_T = BaseTag

DESK_TRAIN_COUNTRIES: tuple[str, ...] = (
    "br", "de", "es", "fr", "gb", "it", "nl", "pl", "se", "us",
)
DESK_ZERO_SHOT_COUNTRIES: tuple[str, ...] = ("at", "dk", "no", "pt")

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class CountryRecipe:
    """Morphology and field-order habits of one country's addresses.

    Templates use ``{stem}`` for a drawn stem and ``{n}``/``{d}`` for a
    small or single-digit number; spaces inside a template produce
    multi-word fields.  ``postal`` patterns use ``#`` for a digit and
    ``x`` for a letter.
    """

    street_templates: tuple[str, ...]
    street_stems: tuple[str, ...]
    muni_templates: tuple[str, ...]
    muni_stems: tuple[str, ...]
    provinces: tuple[str, ...]
    postal_patterns: tuple[str, ...]
    unit_templates: tuple[str, ...]
    orders: tuple[tuple[BaseTag, ...], ...]


def _fill(template: str, rng: random.Random, stems: Sequence[str]) -> tuple[str, ...]:
    text = template
    if "{stem}" in text:
        text = text.replace("{stem}", rng.choice(stems))
    if "{n}" in text:
        text = text.replace("{n}", str(rng.randint(1, 99)))
    if "{d}" in text:
        text = text.replace("{d}", str(rng.randint(1, 9)))
    return tuple(text.split())


def _postal(pattern: str, rng: random.Random) -> tuple[str, ...]:
    out = []
    for token in pattern.split():
        out.append(
            "".join(
                str(rng.randint(0, 9)) if c == "#"
                else rng.choice(_LETTERS) if c == "x"
                else c
                for c in token
            )
        )
    return tuple(out)


_DE_ORDERS = (
    (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE, _T.MUNICIPALITY,
     _T.PROVINCE),
    (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE, _T.MUNICIPALITY),
    (_T.STREET_NAME, _T.STREET_NUMBER, _T.UNIT, _T.POSTAL_CODE,
     _T.MUNICIPALITY, _T.PROVINCE),
)

RECIPES: dict[str, CountryRecipe] = {
    "de": CountryRecipe(
        street_templates=("{stem}strasse", "{stem}weg", "{stem}gasse",
                          "{stem}platz", "{stem}-str."),
        street_stems=("berg", "bach", "kirch", "haupt", "schul", "garten",
                      "linden", "markt", "muhlen", "wald", "ring", "rosen",
                      "feld", "brunnen", "jahn", "goethe", "schiller", "amsel"),
        muni_templates=("{stem}burg", "{stem}heim", "{stem}dorf",
                        "{stem}stadt", "{stem}hausen", "bad {stem}feld"),
        muni_stems=("alten", "neuen", "ober", "unter", "gross", "klein",
                    "hohen", "licht", "frank", "rothen", "blanken", "wolfs"),
        provinces=("bayern", "hessen", "sachsen", "brandenburg", "saarland",
                   "nordrhein westfalen", "baden wurttemberg", "thuringen"),
        postal_patterns=("#####",),
        unit_templates=("wohnung {d}", "{d}. og", "zimmer {n}"),
        orders=_DE_ORDERS,
    ),
    "at": CountryRecipe(
        street_templates=("{stem}gasse", "{stem}strasse", "{stem}allee"),
        street_stems=("wiener", "grazer", "linzer", "dom", "schloss", "berg",
                      "donau", "kaiser", "lerchen", "tauben", "alpen", "mozart"),
        muni_templates=("{stem}kirchen", "{stem}bach", "sankt {stem}",
                        "{stem}see"),
        muni_stems=("neun", "alt", "hinter", "vorder", "maria", "ober",
                    "unter", "bruck"),
        provinces=("tirol", "steiermark", "karnten", "salzburg",
                   "vorarlberg", "burgenland", "niederosterreich"),
        postal_patterns=("####",),
        unit_templates=("tur {d}", "top {n}"),
        orders=_DE_ORDERS,
    ),
    "fr": CountryRecipe(
        street_templates=("rue de {stem}", "rue {stem}", "avenue {stem}",
                          "boulevard {stem}", "impasse {stem}"),
        street_stems=("la gare", "paris", "verdun", "la paix", "voltaire",
                      "pasteur", "la fontaine", "des lilas", "du moulin",
                      "hugo", "jaures", "la mairie"),
        muni_templates=("{stem}ville", "{stem}-sur-mer", "saint {stem}",
                        "{stem}ac"),
        muni_stems=("neuf", "beau", "mont", "chateau", "bel", "clair",
                    "haute", "basse", "vern", "orl"),
        provinces=("bretagne", "normandie", "occitanie", "grand est",
                   "ile de france", "nouvelle aquitaine"),
        postal_patterns=("#####",),
        unit_templates=("appartement {n}", "batiment {d}", "etage {d}"),
        orders=(
            (_T.STREET_NUMBER, _T.STREET_NAME, _T.POSTAL_CODE,
             _T.MUNICIPALITY),
            (_T.STREET_NUMBER, _T.STREET_NAME, _T.POSTAL_CODE,
             _T.MUNICIPALITY, _T.PROVINCE),
            (_T.STREET_NUMBER, _T.STREET_NAME, _T.UNIT, _T.POSTAL_CODE,
             _T.MUNICIPALITY),
        ),
    ),
    "it": CountryRecipe(
        street_templates=("via {stem}", "vicolo {stem}", "corso {stem}",
                          "piazza {stem}", "viale {stem}"),
        street_stems=("roma", "garibaldi", "dante", "verdi", "marconi",
                      "cavour", "mazzini", "delle rose", "dei pini", "milano"),
        muni_templates=("{stem}ano", "monte{stem}", "castel {stem}",
                        "villa {stem}"),
        muni_stems=("bre", "ver", "bas", "tre", "cas", "mor", "sal", "pan"),
        provinces=("lombardia", "toscana", "lazio", "piemonte", "veneto",
                   "campania", "sicilia"),
        postal_patterns=("#####",),
        unit_templates=("interno {d}", "scala {d}", "piano {d}"),
        orders=(
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE,
             _T.MUNICIPALITY, _T.PROVINCE),
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.UNIT, _T.POSTAL_CODE,
             _T.MUNICIPALITY),
        ),
    ),
    "es": CountryRecipe(
        street_templates=("calle {stem}", "calle de {stem}", "avenida {stem}",
                          "plaza {stem}", "camino {stem}"),
        street_stems=("mayor", "sol", "luna", "cervantes", "goya", "colon",
                      "del rio", "de la cruz", "granada", "sevilla"),
        muni_templates=("{stem}ares", "villa{stem}", "san {stem}",
                        "{stem}osa"),
        muni_stems=("man", "tor", "alc", "mir", "fuent", "card", "pen",
                    "madr"),
        provinces=("andalucia", "aragon", "castilla", "galicia", "murcia",
                   "valencia", "extremadura"),
        postal_patterns=("#####",),
        unit_templates=("piso {d}", "puerta {d}", "{d}o {d}a"),
        orders=(
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE,
             _T.MUNICIPALITY, _T.PROVINCE),
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.UNIT, _T.POSTAL_CODE,
             _T.MUNICIPALITY, _T.PROVINCE),
        ),
    ),
    "nl": CountryRecipe(
        street_templates=("{stem}straat", "{stem}laan", "{stem}weg",
                          "{stem}kade", "{stem}plein"),
        street_stems=("kerk", "molen", "dorps", "school", "beatrix",
                      "oranje", "wilhelmina", "nieuw", "polder", "tulp"),
        muni_templates=("{stem}dam", "{stem}wijk", "{stem}hoven", "{stem}lo"),
        muni_stems=("amstel", "zaan", "rijs", "eind", "alk", "delf", "venn",
                    "harder"),
        provinces=("gelderland", "utrecht", "friesland", "zeeland",
                   "limburg", "drenthe", "noord holland"),
        postal_patterns=("#### xx",),
        unit_templates=("{d} hoog", "unit {n}"),
        orders=(
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE,
             _T.MUNICIPALITY),
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE,
             _T.MUNICIPALITY, _T.PROVINCE),
        ),
    ),
    "pl": CountryRecipe(
        street_templates=("ulica {stem}", "ul. {stem}", "aleja {stem}",
                          "plac {stem}"),
        street_stems=("polna", "lesna", "krotka", "szkolna", "ogrodowa",
                      "mickiewicza", "slowackiego", "kwiatowa", "dluga"),
        muni_templates=("{stem}ow", "{stem}owice", "nowy {stem}",
                        "{stem}no"),
        muni_stems=("krak", "tarn", "piotr", "katt", "gniez", "szczec",
                    "radom", "lesz"),
        provinces=("mazowieckie", "slaskie", "pomorskie", "lubelskie",
                   "podlaskie", "opolskie"),
        postal_patterns=("##-###",),
        unit_templates=("m. {n}", "lok. {n}"),
        orders=(
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE,
             _T.MUNICIPALITY),
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.UNIT, _T.POSTAL_CODE,
             _T.MUNICIPALITY, _T.PROVINCE),
        ),
    ),
    "br": CountryRecipe(
        street_templates=("rua {stem}", "avenida {stem}", "travessa {stem}",
                          "alameda {stem}"),
        street_stems=("das flores", "brasil", "sao joao", "tiradentes",
                      "ipiranga", "das palmeiras", "santos dumont",
                      "boa vista", "quinze"),
        muni_templates=("{stem}landia", "sao {stem}", "nova {stem}",
                        "porto {stem}"),
        muni_stems=("uber", "feliz", "campo", "ita", "mira", "faz", "cruz",
                    "rio"),
        provinces=("bahia", "parana", "ceara", "pernambuco", "maranhao",
                   "sao paulo", "minas gerais"),
        postal_patterns=("#####-###", "##### ###"),
        unit_templates=("apto {n}", "bloco {d}", "casa {d}"),
        orders=(
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.MUNICIPALITY,
             _T.PROVINCE, _T.POSTAL_CODE),
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.UNIT, _T.MUNICIPALITY,
             _T.POSTAL_CODE),
        ),
    ),
    "us": CountryRecipe(
        street_templates=("{stem} street", "{stem} avenue", "{stem} road",
                          "{stem} drive", "{stem} lane"),
        street_stems=("main", "oak", "maple", "washington", "park", "cedar",
                      "lincoln", "jefferson", "sunset", "hill", "2nd",
                      "river"),
        muni_templates=("{stem}ville", "{stem}field", "{stem} springs",
                        "{stem}town", "lake {stem}"),
        muni_stems=("spring", "green", "frank", "george", "clark", "madi",
                    "harri", "river"),
        provinces=("texas", "ohio", "georgia", "oregon", "vermont", "utah",
                   "kansas", "maine"),
        postal_patterns=("#####", "#####-####"),
        unit_templates=("apt {n}", "suite {n}", "unit {d}"),
        orders=(
            (_T.STREET_NUMBER, _T.STREET_NAME, _T.MUNICIPALITY, _T.PROVINCE,
             _T.POSTAL_CODE),
            (_T.STREET_NUMBER, _T.STREET_NAME, _T.UNIT, _T.MUNICIPALITY,
             _T.PROVINCE, _T.POSTAL_CODE),
        ),
    ),
    "gb": CountryRecipe(
        street_templates=("{stem} street", "{stem} road", "{stem} close",
                          "{stem} gardens", "high {stem}"),
        street_stems=("church", "station", "victoria", "mill", "king",
                      "queen", "london", "york", "green", "castle"),
        muni_templates=("{stem}ton", "{stem}bury", "{stem}ford",
                        "{stem}mouth", "{stem}shire"),
        muni_stems=("nor", "sut", "ash", "brad", "ox", "can", "dur",
                    "wel"),
        provinces=("kent", "essex", "surrey", "devon", "cornwall",
                   "yorkshire", "cumbria"),
        postal_patterns=("xx# #xx", "x## #xx"),
        unit_templates=("flat {d}", "unit {n}"),
        orders=(
            (_T.STREET_NUMBER, _T.STREET_NAME, _T.MUNICIPALITY,
             _T.POSTAL_CODE),
            (_T.STREET_NUMBER, _T.STREET_NAME, _T.MUNICIPALITY,
             _T.PROVINCE, _T.POSTAL_CODE),
            (_T.UNIT, _T.STREET_NUMBER, _T.STREET_NAME, _T.MUNICIPALITY,
             _T.POSTAL_CODE),
        ),
    ),
    "se": CountryRecipe(
        street_templates=("{stem}gatan", "{stem}vagen", "{stem}grand",
                          "{stem} alle"),
        street_stems=("storgat", "kungs", "drottning", "skol", "park",
                      "strand", "bjork", "industri", "ring"),
        muni_templates=("{stem}stad", "{stem}koping", "{stem}berg",
                        "{stem}holm"),
        muni_stems=("karl", "vast", "oster", "norr", "soder", "fil", "lind",
                    "eke"),
        provinces=("skane", "varmland", "dalarna", "halland", "gotland",
                   "norrbotten"),
        postal_patterns=("### ##",),
        unit_templates=("lgh {n}",),
        orders=(
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE,
             _T.MUNICIPALITY),
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.UNIT, _T.POSTAL_CODE,
             _T.MUNICIPALITY, _T.PROVINCE),
        ),
    ),
    "dk": CountryRecipe(
        street_templates=("{stem}vej", "{stem}gade", "{stem} alle",
                          "{stem}vaenget"),
        street_stems=("strand", "skov", "moelle", "kirke", "soender",
                      "vester", "oester", "birke", "rosen"),
        muni_templates=("{stem}borg", "{stem}sund", "{stem}lund",
                        "{stem}koebing"),
        muni_stems=("aal", "sil", "hol", "ribe", "kolding", "vejle", "hjor",
                    "ska"),
        provinces=("jylland", "fyn", "sjaelland", "bornholm"),
        postal_patterns=("####",),
        unit_templates=("{d} th", "{d} tv", "st {d}"),
        orders=(
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE,
             _T.MUNICIPALITY),
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.UNIT, _T.POSTAL_CODE,
             _T.MUNICIPALITY),
        ),
    ),
    "no": CountryRecipe(
        street_templates=("{stem}veien", "{stem}gata", "{stem} terrasse"),
        street_stems=("fjell", "bekke", "skole", "kirke", "havne", "elve",
                      "lille", "store", "gran"),
        muni_templates=("{stem}vik", "{stem}nes", "{stem}dal", "{stem}fjord"),
        muni_stems=("sand", "lar", "stav", "troms", "nar", "mol", "bod",
                    "ham"),
        provinces=("viken", "innlandet", "rogaland", "nordland",
                   "troendelag"),
        postal_patterns=("####",),
        unit_templates=("leil {n}", "h{d}"),
        orders=(
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE,
             _T.MUNICIPALITY),
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE,
             _T.MUNICIPALITY, _T.PROVINCE),
        ),
    ),
    "pt": CountryRecipe(
        street_templates=("rua {stem}", "rua de {stem}", "avenida {stem}",
                          "travessa {stem}", "largo {stem}"),
        street_stems=("liberdade", "camoes", "do sol", "das oliveiras",
                      "nova", "do carmo", "da igreja", "pombal"),
        muni_templates=("vila {stem}", "{stem}eira", "santo {stem}",
                        "{stem}al"),
        muni_stems=("francisco", "tir", "ant", "real", "fund", "cov", "set",
                    "bej"),
        provinces=("alentejo", "algarve", "minho", "beira", "estremadura"),
        postal_patterns=("####-###",),
        unit_templates=("{d} esq", "{d} dto", "rc {d}"),
        orders=(
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.POSTAL_CODE,
             _T.MUNICIPALITY),
            (_T.STREET_NAME, _T.STREET_NUMBER, _T.UNIT, _T.POSTAL_CODE,
             _T.MUNICIPALITY, _T.PROVINCE),
        ),
    ),
}


def _gen_field(tag: BaseTag, recipe: CountryRecipe, rng: random.Random) -> Field:
    if tag is _T.STREET_NAME:
        words = _fill(rng.choice(recipe.street_templates), rng,
                      recipe.street_stems)
    elif tag is _T.STREET_NUMBER:
        number = str(rng.randint(1, 299))
        if rng.random() < 0.1:
            number += rng.choice("abc")
        words = (number,)
    elif tag is _T.UNIT:
        words = _fill(rng.choice(recipe.unit_templates), rng, ())
    elif tag is _T.POSTAL_CODE:
        words = _postal(rng.choice(recipe.postal_patterns), rng)
    elif tag is _T.MUNICIPALITY:
        words = _fill(rng.choice(recipe.muni_templates), rng,
                      recipe.muni_stems)
    elif tag is _T.PROVINCE:
        words = tuple(rng.choice(recipe.provinces).split())
    else:
        raise ValueError(f"desk recipes do not generate {tag}")
    return (tag, words)


def generate_sample(country: str, index: int, seed: int = 42) -> Sample:
    recipe = RECIPES[country]
    rng = random.Random(f"{seed}:desk:{country}:{index}")
    order = rng.choice(recipe.orders)
    fields = [_gen_field(tag, recipe, rng) for tag in order]
    return fields_to_sample(
        fields, country=country, id=f"desk:{country}:{index}"
    )


def generate_corpus(
    n: int,
    countries: Sequence[str] = DESK_TRAIN_COUNTRIES,
    seed: int = 42,
) -> Corpus:
    """n clean samples spread as evenly as possible over the countries."""
    if n < 0:
        raise ValueError("n must be >= 0")
    unknown = [c for c in countries if c not in RECIPES]
    if unknown:
        raise ValueError(f"no desk recipe for countries {unknown}")
    samples: list[Sample] = []
    per, extra = divmod(n, len(countries))
    for pos, country in enumerate(countries):
        count = per + (1 if pos < extra else 0)
        samples.extend(
            generate_sample(country, i, seed) for i in range(count)
        )
    return Corpus(tuple(samples), provenance=f"desk(seed={seed},n={n})")
