"""Generative-parser benchmarking: indexed prompts, completion client, repair.

The protocol asks a completion endpoint to classify every word of an
address message into a fixed set of JSON keys.  Each word is prefixed with
its index as ``[i]-`` so the raw completion can be re-anchored to input
positions even when the model reorders, drops, or invents text.  The
repair pass (:func:`parse_output`) turns an arbitrary completion into
per-word labels plus a log of everything it had to fix or give up on.

The client is a minimal text-in/text-out completion call (JSON body over
HTTP); the model behind the endpoint is an opaque label.  With a fixture
directory configured, responses are served from files keyed by request
hash instead, making every test and sweep fully offline and deterministic.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from hashlib import blake2b
from pathlib import Path
from typing import Mapping, Sequence

import httpx

from .metrics import score
from .schema import AddrkitError, BaseTag, BioLabel, Sample

# Classification keys, in prompt order; first-claim-wins follows this order.
TEMPLATE_KEYS: tuple[str, ...] = (
    "Name",
    "StreetNumber",
    "StreetName",
    "Municipality",
    "PostalCode",
    "Unit",
    "Country",
    "CountryCode",
)

KEY_TO_TAG: dict[str, BaseTag] = {k: BaseTag.from_string(k) for k in TEMPLATE_KEYS}

# The exact prompt sent to the endpoint, with {address} substituted.  The
# wording, numbering, spacing, and the worked example are deliberately
# frozen; downstream results are only comparable against this template.
PROMPT_TEMPLATE = '''<s>[INST]
    You are a word classifier that classifies words from a text corresponding to an address free text field.
    You should analyze with deep precision the INPUT and return a dictionary with the following keys: "Name", "StreetNumber", "StreetName", "Municipality", "PostalCode", "Unit", "Country", "CountryCode".
    Each word is separated by a space and should be classified without any modification.
    Each word in the input has a prefix with the index i as '[i]-' and it should be ignored for the classification but it should remain AS-IS in the output.
    Sub sequence of words should be classified as follow:
    'Name': words corresponding to an indiviual name or institution name.
    'StreetNumber': words corresponding to a street number.
    'StreetName': words corresponding to a street name.
    'Municipality': words corresponding to a municipality or city.
    'PostalCode': words corresponding to a postal code.
    'Unit': words corresponding to a unit number.
    'Country': words corresponding to a full country name.
    'CountryCode': words corresponding to a country iso2 code.

    Output Indicator:
    2. Usually a name comes before the address.
    3. "$" is indicating a large separator and it should not be classified.
    4. The output words should be taken from the input only and it should not be modified
    5. The same word cannot be used in two different classes.
    6. Words are classified subsequently.
    7. Empty classes should not appear in the output.
    8. Output should not include nested values.
    9. Each index are taken from the input itself and the index matches, e.g. the prefix '[i]-' remains unchanged for all words.

    For example:
    ### INPUT:
    "[0]-THOMASSEN [1]-GULBRANDSEN [2]-OG [3]-GUNDERSEN [4]-$ [5]-TV [6]-SD [7]-9 [8]-JAPARATINGA [9]-57950 [10]-000 [11]-BR"
    ### OUTPUT:
    {"Name": "[0]-THOMASSEN [1]-GULBRANDSEN [2]-OG [3]-GUNDERSEN", "StreetName": "[5]-TV [6]-SD [7]-9", "Municipality": "[8]-JAPARATINGA", "PostalCode": "[9]-57950 [10]-000", "CountryCode": "[11]-BR"}


    ### INPUT:
    {address}
    [/INST]

    ### OUTPUT:
    '''

TEMPLATE_ID = "word-classifier-v1"

EXAMPLE_INPUT_WORDS: tuple[str, ...] = (
    "THOMASSEN", "GULBRANDSEN", "OG", "GUNDERSEN", "$", "TV", "SD", "9",
    "JAPARATINGA", "57950", "000", "BR",
)
EXAMPLE_OUTPUT = (
    '{"Name": "[0]-THOMASSEN [1]-GULBRANDSEN [2]-OG [3]-GUNDERSEN", '
    '"StreetName": "[5]-TV [6]-SD [7]-9", "Municipality": "[8]-JAPARATINGA", '
    '"PostalCode": "[9]-57950 [10]-000", "CountryCode": "[11]-BR"}'
)


class LlmError(AddrkitError):
    pass


class EndpointConfigError(LlmError):
    pass


class FixtureMissingError(LlmError):
    pass


class TransportFailure(LlmError):
    pass


class CompletionHttpError(LlmError):
    def __init__(self, message: str, status: int, request_id: str) -> None:
        super().__init__(message)
        self.status = status
        self.request_id = request_id


@dataclass(frozen=True)
class GenParams:
    """Sampling parameters; min_p and top_p are mutually exclusive."""

    temperature: float
    min_p: float | None = None
    top_p: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside (0, 2]")
        if self.min_p is not None and self.top_p is not None:
            raise ValueError("min_p and top_p cannot both be set")
        for name in ("min_p", "top_p"):
            value = getattr(self, name)
            if value is not None and not 0.0 < value < 1.0:
                raise ValueError(f"{name} {value} outside (0, 1)")

    @classmethod
    def parse(cls, spec: str) -> "GenParams":
        """Parse "temperature=0.2,min_p=0.1" style strings."""
        kwargs: dict[str, float] = {}
        for item in spec.split(","):
            item = item.strip()
            if not item:
                continue
            key, sep, value = item.partition("=")
            if sep != "=" or key not in ("temperature", "min_p", "top_p"):
                raise ValueError(f"bad generation parameter {item!r}")
            kwargs[key] = float(value)
        if "temperature" not in kwargs:
            raise ValueError(f"generation params {spec!r} lack temperature")
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out: dict = {"temperature": self.temperature}
        if self.min_p is not None:
            out["min_p"] = self.min_p
        if self.top_p is not None:
            out["top_p"] = self.top_p
        return out

    @property
    def label(self) -> str:
        parts = [f"temperature={self.temperature:g}"]
        if self.min_p is not None:
            parts.append(f"min_p={self.min_p:g}")
        if self.top_p is not None:
            parts.append(f"top_p={self.top_p:g}")
        return ",".join(parts)


def default_grid() -> list[GenParams]:
    """The benchmark grid: 3 temperatures x (3 min_p + 3 top_p) settings."""
    grid = []
    for sampling in ({"min_p": p} for p in (0.1, 0.3, 0.5)):
        for t in (0.8, 0.5, 0.2):
            grid.append(GenParams(temperature=t, **sampling))
    for sampling in ({"top_p": p} for p in (0.9, 0.7, 0.5)):
        for t in (0.8, 0.5, 0.2):
            grid.append(GenParams(temperature=t, **sampling))
    return grid


@dataclass(frozen=True)
class PromptRequest:
    """An address rendered as "[i]-word" tokens plus the template it fills."""

    indexed_text: str
    template_id: str = TEMPLATE_ID

    def render(self) -> str:
        return PROMPT_TEMPLATE.replace("{address}", self.indexed_text)


def build_prompt(words: Sequence[str]) -> PromptRequest:
    """Index words as "[0]-w0 [1]-w1 ..." and wrap them in the template."""
    if not words:
        raise ValueError("cannot build a prompt from zero words")
    for word in words:
        if not word or word.split() != [word]:
            raise ValueError(f"bad prompt word {word!r}")
    indexed = " ".join(f"[{i}]-{w}" for i, w in enumerate(words))
    return PromptRequest(indexed_text=indexed)


def request_hash(prompt: str, params: GenParams, model_label: str = "") -> str:
    """Stable key for a (prompt, params, model) triple; names fixture files."""
    payload = json.dumps(
        {"prompt": prompt, "params": params.to_dict(), "model": model_label},
        sort_keys=True,
    ).encode("utf-8")
    return blake2b(payload, digest_size=16).hexdigest()


@dataclass
class LlmClient:
    """Completion client: live HTTP endpoint or offline fixture directory.

    Live mode posts ``{"model", "prompt", "temperature", "min_p"/"top_p",
    "max_tokens"}`` and accepts either ``{"text": ...}`` or
    ``{"choices": [{"text": ...}]}`` responses.  Fixture mode reads
    ``<fixtures_dir>/<request_hash>.txt`` and never touches the network.
    """

    endpoint_url: str | None = None
    token: str | None = None
    timeout_s: float = 60.0
    model_label: str = ""
    retries: int = 0
    max_concurrency: int = 4
    max_tokens: int = 512
    fixtures_dir: Path | None = None

    @classmethod
    def from_env(cls, fixtures_dir: str | Path | None = None, **kwargs) -> "LlmClient":
        env = os.environ
        merged = {
            "endpoint_url": env.get("ADDRKIT_LLM_URL"),
            "token": env.get("ADDRKIT_LLM_TOKEN"),
            "timeout_s": float(env.get("ADDRKIT_LLM_TIMEOUT", "60")),
        }
        merged.update(kwargs)
        if fixtures_dir is not None:
            merged["fixtures_dir"] = Path(fixtures_dir)
        return cls(**merged)

    def complete(self, prompt: "str | PromptRequest", params: GenParams) -> str:
        """Return the raw completion body for one prompt."""
        if isinstance(prompt, PromptRequest):
            prompt = prompt.render()
        rid = request_hash(prompt, params, self.model_label)
        if self.fixtures_dir is not None:
            path = Path(self.fixtures_dir) / f"{rid}.txt"
            if not path.exists():
                raise FixtureMissingError(
                    f"no fixture {path} for request {rid}"
                )
            return path.read_text(encoding="utf-8")
        if not self.endpoint_url:
            raise EndpointConfigError(
                "no endpoint configured: set ADDRKIT_LLM_URL or pass "
                "fixtures_dir for offline mode"
            )
        body: dict = {"model": self.model_label, "prompt": prompt,
                      "max_tokens": self.max_tokens}
        body.update(params.to_dict())
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                response = httpx.post(
                    self.endpoint_url,
                    json=body,
                    headers=headers,
                    timeout=self.timeout_s,
                )
            except httpx.TimeoutException as exc:
                last_error = TransportFailure(
                    f"timeout after {self.timeout_s}s against "
                    f"{self.endpoint_url} (request {rid}): {exc}"
                )
                continue
            except httpx.HTTPError as exc:
                last_error = TransportFailure(
                    f"transport error against {self.endpoint_url} "
                    f"(request {rid}): {exc}"
                )
                continue
            if response.status_code != 200:
                last_error = CompletionHttpError(
                    f"endpoint {self.endpoint_url} returned "
                    f"{response.status_code} (request {rid})",
                    status=response.status_code,
                    request_id=rid,
                )
                continue
            data = response.json()
            if isinstance(data, dict) and isinstance(data.get("text"), str):
                return data["text"]
            try:
                return data["choices"][0]["text"]
            except (KeyError, IndexError, TypeError):
                raise CompletionHttpError(
                    f"endpoint {self.endpoint_url} returned an unrecognized "
                    f"body (request {rid})",
                    status=response.status_code,
                    request_id=rid,
                )
        assert last_error is not None
        raise last_error

    def complete_many(
        self, prompts: Sequence[str], params: GenParams
    ) -> list[str]:
        """Bounded-concurrency completion preserving input order."""
        if self.max_concurrency <= 1 or len(prompts) <= 1:
            return [self.complete(p, params) for p in prompts]
        with ThreadPoolExecutor(max_workers=self.max_concurrency) as pool:
            return list(pool.map(lambda p: self.complete(p, params), prompts))


@dataclass(frozen=True)
class RepairEntry:
    kind: str  # one of REPAIR_KINDS
    detail: str
    position: int | None = None


REPAIR_KINDS = (
    "index-corrupted-recovered",
    "ambiguous-failure",
    "invented-tag-dropped",
    "nested-flattened",
    "duplicate-class-resolved",
    "format-failure",
)


@dataclass(frozen=True)
class ParsedLlmOutput:
    """Per-word labels recovered from a completion, plus the repair trail.

    ``labels[i]`` is ``None`` where the word could not be resolved;
    ``mentioned`` holds the positions some output token resolved to.
    """

    labels: tuple[BioLabel | None, ...]
    repair_log: tuple[RepairEntry, ...]
    mentioned: frozenset[int] = frozenset()


def _first_json_object(raw: str) -> tuple[dict | None, str]:
    """First balanced {...} span that parses as a JSON object, else None."""
    starts = [i for i, c in enumerate(raw) if c == "{"]
    for start in starts:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(raw)):
            c = raw[i]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
                continue
            if c == '"':
                in_string = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    candidate = raw[start : i + 1]
                    try:
                        parsed = json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    if isinstance(parsed, dict):
                        return parsed, candidate
                    break
        # unbalanced from this start, or candidate rejected: try next "{"
    return None, ""


def _collect_values(
    obj: dict, log: list[RepairEntry], depth: int = 0
) -> list[tuple[str, str]]:
    """DFS over the object for template keys; nested objects are flattened."""
    pairs: list[tuple[str, str]] = []
    for key, value in obj.items():
        if isinstance(value, dict):
            log.append(
                RepairEntry(
                    "nested-flattened",
                    f"descended into nested object under key {key!r}",
                )
            )
            pairs.extend(_collect_values(value, log, depth + 1))
            continue
        if isinstance(value, list):
            value = " ".join(str(v) for v in value)
        elif isinstance(value, (int, float)):
            value = str(value)
        if not isinstance(value, str):
            continue
        if key in KEY_TO_TAG:
            pairs.append((key, value))
        else:
            log.append(
                RepairEntry(
                    "invented-tag-dropped",
                    f"dropped unknown key {key!r} with value {value!r}",
                )
            )
    return pairs


_INDEXED_TOKEN = re.compile(r"\[(\d+)\]-(.+)", re.DOTALL)


def parse_output(raw: str, words: Sequence[str]) -> ParsedLlmOutput:
    """Repair a raw completion into per-word labels.

    Pipeline: extract the first balanced JSON object; flatten nested
    objects by searching for known keys; re-anchor every "[i]-word" token
    (recovering corrupted indices when the bare word is unique in the
    input); drop invented keys and invented words; resolve duplicate
    claims first-come in template key order; leave unmentioned words
    unresolved; convert per-class runs to BIO.
    """
    n = len(words)
    log: list[RepairEntry] = []
    obj, _ = _first_json_object(raw)
    if obj is None:
        log.append(
            RepairEntry("format-failure", "no balanced JSON object in output")
        )
        return ParsedLlmOutput((None,) * n, tuple(log), frozenset())

    pairs = _collect_values(obj, log)
    by_key: dict[str, list[str]] = {}
    for key, value in pairs:
        by_key.setdefault(key, []).append(value)

    word_positions: dict[str, list[int]] = {}
    for i, w in enumerate(words):
        word_positions.setdefault(w, []).append(i)

    assigned: dict[int, BaseTag] = {}
    mentioned: set[int] = set()
    for key in TEMPLATE_KEYS:  # template order decides duplicate claims
        if key not in by_key:
            continue
        tag = KEY_TO_TAG[key]
        for value in by_key[key]:
            for token in value.split():
                match = _INDEXED_TOKEN.fullmatch(token)
                if match:
                    idx = int(match.group(1))
                    word = match.group(2)
                    if 0 <= idx < n and words[idx] == word:
                        position = idx
                    else:
                        position = _recover_position(
                            word, word_positions, log, claimed_index=idx
                        )
                else:
                    position = _recover_position(
                        token, word_positions, log, claimed_index=None
                    )
                if position is None:
                    continue
                mentioned.add(position)
                if position in assigned:
                    if assigned[position] is not tag:
                        log.append(
                            RepairEntry(
                                "duplicate-class-resolved",
                                f"word {position} kept {assigned[position]}, "
                                f"ignored later claim {tag}",
                                position=position,
                            )
                        )
                    continue
                assigned[position] = tag

    labels: list[BioLabel | None] = []
    prev: BaseTag | None = None
    for i in range(n):
        tag = assigned.get(i)
        if tag is None:
            labels.append(None)
            prev = None
            continue
        labels.append(BioLabel("I" if tag is prev else "B", tag))
        prev = tag
    return ParsedLlmOutput(tuple(labels), tuple(log), frozenset(mentioned))


def _recover_position(
    word: str,
    word_positions: Mapping[str, list[int]],
    log: list[RepairEntry],
    claimed_index: int | None,
) -> int | None:
    """Re-anchor a token whose index prefix is wrong or missing."""
    occurrences = word_positions.get(word, [])
    claim = (
        f"index {claimed_index}" if claimed_index is not None else "no index"
    )
    if len(occurrences) == 1:
        position = occurrences[0]
        log.append(
            RepairEntry(
                "index-corrupted-recovered",
                f"token {word!r} carried {claim}; unique occurrence "
                f"recovered at {position}",
                position=position,
            )
        )
        return position
    if not occurrences:
        log.append(
            RepairEntry(
                "ambiguous-failure",
                f"token {word!r} ({claim}) does not occur in the input",
                position=None,
            )
        )
    else:
        log.append(
            RepairEntry(
                "ambiguous-failure",
                f"token {word!r} ({claim}) occurs {len(occurrences)} times; "
                "cannot re-anchor",
                position=None,
            )
        )
    return None


def render_expected(sample: Sample) -> str:
    """A well-formed output for gold labels, for fixtures and round-trips.

    Only the eight template classes are expressible; other tags are simply
    not mentioned.
    """
    values: dict[str, list[str]] = {}
    for i, (word, label) in enumerate(zip(sample.words, sample.labels)):
        key = label.base.value
        if key in KEY_TO_TAG:
            values.setdefault(key, []).append(f"[{i}]-{word}")
    out = {k: " ".join(values[k]) for k in TEMPLATE_KEYS if k in values}
    return json.dumps(out)


@dataclass(frozen=True)
class SweepCell:
    params: GenParams
    macro_f1: float | None
    unresolved: int = 0
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    model_label: str
    cells: tuple[SweepCell, ...]

    def render(self) -> str:
        """Grid text table: one row per sampling setting, temperatures across."""
        temps = sorted({c.params.temperature for c in self.cells}, reverse=True)
        rows: dict[str, dict[float, SweepCell]] = {}
        for cell in self.cells:
            p = cell.params
            key = (
                f"min_p={p.min_p:g}" if p.min_p is not None
                else f"top_p={p.top_p:g}" if p.top_p is not None
                else "plain"
            )
            rows.setdefault(key, {})[p.temperature] = cell
        header = f"{'sampling':<12}" + "".join(
            f"{'T=' + format(t, 'g'):>10}" for t in temps
        )
        lines = [f"model: {self.model_label}" if self.model_label else "model: -",
                 "macro F1 by generation parameters",
                 header, "-" * len(header)]
        for key in sorted(rows):
            cells = rows[key]
            line = f"{key:<12}"
            for t in temps:
                cell = cells.get(t)
                if cell is None:
                    line += f"{'-':>10}"
                elif cell.error is not None:
                    line += f"{'FAILED':>10}"
                else:
                    line += f"{cell.macro_f1:>10.4f}"
            lines.append(line)
        return "\n".join(lines)


def parse_dataset(
    samples: Sequence[Sample],
    client: LlmClient,
    params: GenParams,
) -> dict[str, ParsedLlmOutput]:
    """Run the full protocol over samples: prompt, complete, repair."""
    prompts = [build_prompt(s.words).render() for s in samples]
    raws = client.complete_many(prompts, params)
    return {
        s.id: parse_output(raw, s.words) for s, raw in zip(samples, raws)
    }


def sweep(
    grid: Sequence[GenParams],
    samples: Sequence[Sample],
    client: LlmClient,
) -> SweepResult:
    """Macro F1 for every parameter cell; per-cell failures are recorded,
    not fatal."""
    if not samples:
        raise ValueError("sweep needs a non-empty dataset")
    cells: list[SweepCell] = []
    for params in grid:
        try:
            outputs = parse_dataset(samples, client, params)
        except LlmError as exc:
            cells.append(SweepCell(params, None, error=str(exc)))
            continue
        predictions = {sid: list(out.labels) for sid, out in outputs.items()}
        result = score(list(samples), predictions, strip=True)
        cells.append(
            SweepCell(params, result.macro_f1, unresolved=result.unresolved)
        )
    return SweepResult(client.model_label, tuple(cells))
