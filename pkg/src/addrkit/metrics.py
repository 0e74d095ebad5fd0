"""Token-level evaluation: per-tag precision/recall/F1, macro F1, fold stats.

Scoring compares gold and predicted labels token by token, either as full
BIO labels or prefix-stripped base tags (``strip=True``, the default).
Unresolved predictions (``None``) count as a false negative for the gold
label and a false positive for nothing.  Macro F1 averages over labels
present in the gold data; labels only ever predicted still get a score row
but stay out of the macro denominator.

Excluded tags are masked out: tokens whose gold tag is excluded are
skipped entirely, and excluded predictions on kept tokens count as
unresolved.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ingest import Corpus
from .schema import AddrkitError, BaseTag, BioLabel, Sample

# A score row is keyed by BaseTag when stripped, BioLabel otherwise.
LabelKey = BaseTag | BioLabel


class LengthMismatchError(AddrkitError):
    pass


class MissingPredictionError(AddrkitError):
    pass


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class TagScore:
    tag: "BaseTag | BioLabel"
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        return _f1(self.precision, self.recall)

    @property
    def support(self) -> int:
        return self.tp + self.fn


@dataclass(frozen=True)
class EvalResult:
    """Scores for one gold/prediction pairing."""

    per_tag: tuple[TagScore, ...]
    token_count: int
    unresolved: int = 0

    def score_for(self, tag: "BaseTag | BioLabel") -> TagScore:
        for s in self.per_tag:
            if s.tag == tag:
                return s
        return TagScore(tag, 0, 0, 0)

    @property
    def gold_tags(self) -> tuple:
        return tuple(s.tag for s in self.per_tag if s.support > 0)

    @property
    def macro_f1(self) -> float:
        scores = [s.f1 for s in self.per_tag if s.support > 0]
        return sum(scores) / len(scores) if scores else 0.0

    @property
    def micro_f1(self) -> float:
        tp = sum(s.tp for s in self.per_tag)
        fp = sum(s.fp for s in self.per_tag)
        fn = sum(s.fn for s in self.per_tag)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        return _f1(p, r)

    @property
    def accuracy(self) -> float:
        tp = sum(s.tp for s in self.per_tag)
        return tp / self.token_count if self.token_count else 0.0


Prediction = Sequence["BioLabel | None"]


def score(
    gold: Sequence[Sample],
    predictions: Mapping[str, Prediction],
    strip: bool = True,
    exclude: Iterable[BaseTag] = (),
) -> EvalResult:
    """Score a map sample-id -> predicted labels against gold samples."""
    excluded = frozenset(exclude)
    counts: dict = {}  # key -> [tp, fp, fn]
    token_count = 0
    unresolved = 0

    def key(label: BioLabel):
        return label.base if strip else label

    for sample in gold:
        try:
            pred = predictions[sample.id]
        except KeyError:
            raise MissingPredictionError(f"no prediction for sample {sample.id!r}")
        if len(pred) != len(sample.words):
            raise LengthMismatchError(
                f"sample {sample.id!r}: {len(sample.words)} tokens, "
                f"{len(pred)} predictions"
            )
        for gold_label, pred_label in zip(sample.labels, pred):
            if gold_label.base in excluded:
                continue
            if pred_label is not None and pred_label.base in excluded:
                pred_label = None
            token_count += 1
            g = key(gold_label)
            if pred_label is None:
                unresolved += 1
                counts.setdefault(g, [0, 0, 0])[2] += 1
                continue
            p = key(pred_label)
            if g == p:
                counts.setdefault(g, [0, 0, 0])[0] += 1
            else:
                counts.setdefault(g, [0, 0, 0])[2] += 1
                counts.setdefault(p, [0, 0, 0])[1] += 1
    per_tag = tuple(
        TagScore(k, *counts[k]) for k in sorted(counts, key=str)
    )
    return EvalResult(per_tag, token_count, unresolved)


def score_corpora(
    gold: Corpus,
    predicted: Corpus,
    strip: bool = True,
    exclude: Iterable[BaseTag] = (),
) -> EvalResult:
    """Score a fully-labeled predicted corpus against gold, matched by id."""
    predictions = {s.id: list(s.labels) for s in predicted}
    return score(list(gold), predictions, strip, exclude)


@dataclass(frozen=True)
class FoldSummary:
    """Mean and population standard deviation of one metric across folds."""

    mean: float
    std: float
    n_folds: int

    @classmethod
    def of(cls, values: Sequence[float]) -> "FoldSummary":
        if not values:
            raise ValueError("no fold values")
        if len(values) == 1:
            return cls(values[0], 0.0, 1)
        return cls(statistics.fmean(values), statistics.pstdev(values), len(values))

    @property
    def std_scaled(self) -> float:
        """Std in thousandths, the unit used in result tables."""
        return self.std * 1000.0


@dataclass(frozen=True)
class FoldReport:
    """Cross-fold aggregation: per-tag F1 summaries plus the macro summary."""

    per_tag: Mapping["BaseTag | BioLabel", FoldSummary]
    macro: FoldSummary
    folds: tuple[EvalResult, ...]


def aggregate_folds(results: Sequence[EvalResult]) -> FoldReport:
    if not results:
        raise ValueError("no fold results to aggregate")
    tags = sorted(
        {s.tag for r in results for s in r.per_tag if s.support > 0}, key=str
    )
    per_tag = {
        tag: FoldSummary.of([r.score_for(tag).f1 for r in results])
        for tag in tags
    }
    macro = FoldSummary.of([r.macro_f1 for r in results])
    return FoldReport(per_tag, macro, tuple(results))


@dataclass(frozen=True)
class ReportRow:
    """One line of a results table; ``std`` is unscaled (rendered x1e3)."""

    model: str
    data_version: str
    split: str
    mean: float
    std: float
    n_folds: int = 1

    @classmethod
    def from_summary(
        cls, model: str, data_version: str, split: str, summary: FoldSummary
    ) -> "ReportRow":
        return cls(
            model, data_version, split, summary.mean, summary.std, summary.n_folds
        )


REPORT_COLUMNS = ("model", "data_version", "split", "mean_macro_f1", "std_x1e3")


def render_report(rows: Sequence[ReportRow], format: str = "text-table") -> bytes:
    """Render result rows; columns model, data version, split, mean, std(x1e3)."""
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(REPORT_COLUMNS)
        for r in rows:
            writer.writerow(
                [r.model, r.data_version, r.split, repr(r.mean), repr(r.std * 1e3)]
            )
        return buf.getvalue().encode("utf-8")
    if format == "jsonl":
        lines = [
            json.dumps(
                {
                    "model": r.model,
                    "data_version": r.data_version,
                    "split": r.split,
                    "mean_macro_f1": r.mean,
                    "std_x1e3": r.std * 1e3,
                }
            )
            for r in rows
        ]
        return ("\n".join(lines) + "\n").encode("utf-8")
    if format == "text-table":
        body = [
            [r.model, r.data_version, r.split, f"{r.mean:.4f}", f"{r.std * 1e3:.1f}"]
            for r in rows
        ]
        widths = [
            max(len(REPORT_COLUMNS[i]), *(len(cells[i]) for cells in body), 0)
            if body
            else len(REPORT_COLUMNS[i])
            for i in range(len(REPORT_COLUMNS))
        ]
        header = "  ".join(c.ljust(w) for c, w in zip(REPORT_COLUMNS, widths))
        lines = [header, "-" * len(header)]
        for r, cells in zip(rows, body):
            line = "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
            if r.n_folds == 1:
                line += "  (single fold)"
            lines.append(line)
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {format!r}")


def read_report_csv(data: bytes) -> list[ReportRow]:
    rows: list[ReportRow] = []
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    header = next(reader)
    if tuple(header) != REPORT_COLUMNS:
        raise ValueError(f"unexpected report header {header!r}")
    for model, version, split, mean, std_scaled in reader:
        rows.append(
            ReportRow(model, version, split, float(mean), float(std_scaled) / 1e3)
        )
    return rows


def write_predictions(
    predictions: Mapping[str, Prediction], path: str | Path
) -> None:
    """Prediction file: JSON-Lines {"id", "tags"}; unresolved tags are null."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for sample_id, labels in predictions.items():
            tags = [None if l is None else str(l) for l in labels]
            fh.write(json.dumps({"id": sample_id, "tags": tags}) + "\n")


def read_predictions(path: str | Path) -> dict[str, list["BioLabel | None"]]:
    path = Path(path)
    out: dict[str, list[BioLabel | None]] = {}
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
            out[sample_id] = [
                None if t is None else BioLabel.parse(t) for t in tags
            ]
    return out


def _fmt_pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def render_eval(result: EvalResult, title: str = "") -> str:
    """Plain-text score table: one row per tag, then macro / micro / accuracy."""
    lines: list[str] = []
    if title:
        lines.append(title)
    header = f"{'tag':<16}{'prec':>7}{'rec':>7}{'f1':>7}{'support':>9}"
    lines.append(header)
    lines.append("-" * len(header))
    for s in result.per_tag:
        lines.append(
            f"{str(s.tag):<16}{_fmt_pct(s.precision):>7}{_fmt_pct(s.recall):>7}"
            f"{_fmt_pct(s.f1):>7}{s.support:>9}"
        )
    lines.append("-" * len(header))
    lines.append(f"{'macro f1':<16}{'':>7}{'':>7}{_fmt_pct(result.macro_f1):>7}")
    lines.append(f"{'micro f1':<16}{'':>7}{'':>7}{_fmt_pct(result.micro_f1):>7}")
    lines.append(f"{'accuracy':<16}{'':>7}{'':>7}{_fmt_pct(result.accuracy):>7}")
    if result.unresolved:
        lines.append(f"unresolved tokens: {result.unresolved}")
    return "\n".join(lines)


def result_to_dict(result: EvalResult) -> dict:
    return {
        "per_tag": {
            str(s.tag): {
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "tp": s.tp,
                "fp": s.fp,
                "fn": s.fn,
            }
            for s in result.per_tag
        },
        "macro_f1": result.macro_f1,
        "micro_f1": result.micro_f1,
        "accuracy": result.accuracy,
        "token_count": result.token_count,
        "unresolved": result.unresolved,
    }


def write_result(result: EvalResult, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(result_to_dict(result), indent=2) + "\n", encoding="utf-8"
    )
