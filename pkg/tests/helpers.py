"""Shared test utilities: sample builders and an independent scoring oracle.

The brute-force scorer here deliberately avoids every abstraction used by
addrkit.metrics (no TagScore, no shared counting helpers) so that agreement
between the two is meaningful evidence, not a tautology.
"""

from __future__ import annotations

import random

from addrkit.schema import BaseTag, BioLabel, Sample, parse_tag_strings, to_bio


def mk_sample(
    words: list[str] | tuple[str, ...],
    tags: list[str] | tuple[str, ...],
    country: str | None = None,
    id: str = "s0",
) -> Sample:
    """Build a Sample from tag strings, accepting bare base tags or BIO forms."""
    return Sample(
        words=tuple(words),
        labels=tuple(parse_tag_strings(tags)),
        country=country,
        id=id,
    )


def table1_sample(id: str = "t1") -> Sample:
    return mk_sample(
        ["jakob-sturm-w.", "35", "80995", "munich", "bavaria"],
        ["StreetName", "StreetNumber", "PostalCode", "Municipality", "Province"],
        country="de",
        id=id,
    )


def random_gold_pred(
    rng: random.Random,
    max_tags: int = 5,
    max_tokens: int = 50,
) -> tuple[list[BioLabel], list["BioLabel | None"]]:
    """One randomized gold/pred pair over a small tag alphabet.

    Gold is BIO-valid (built via to_bio); predictions are arbitrary labels
    drawn from the same alphabet, with occasional None gaps.
    """
    alphabet = rng.sample(list(BaseTag), rng.randint(1, max_tags))
    n = rng.randint(1, max_tokens)
    gold = list(to_bio([rng.choice(alphabet) for _ in range(n)]))
    pred: list[BioLabel | None] = []
    for g in gold:
        roll = rng.random()
        if roll < 0.5:
            pred.append(g)
        elif roll < 0.9:
            base = rng.choice(alphabet)
            pred.append(BioLabel(rng.choice("BI"), base))
        else:
            pred.append(None)
    return gold, pred


def score_pairs(pairs, strip=True, exclude=()):
    """Adapter: run metrics.score over bare (gold, pred) label-sequence pairs."""
    from addrkit.metrics import score

    gold_samples = []
    predictions = {}
    for i, (gold, pred) in enumerate(pairs):
        sid = f"p{i}"
        words = tuple(f"w{j}" for j in range(len(gold)))
        gold_samples.append(
            Sample(words=words, labels=tuple(gold), country=None, id=sid)
        )
        predictions[sid] = list(pred)
    return score(gold_samples, predictions, strip=strip, exclude=exclude)


def brute_force_metrics(
    pairs: list[tuple[list[BioLabel], list["BioLabel | None"]]],
    strip: bool,
) -> dict:
    """Confusion-matrix scoring from first principles.

    Returns {"per_tag": {key: {precision, recall, f1, support}}, "macro_f1": x}.
    Keys are BaseTag when strip else BioLabel. A None prediction counts as a
    false negative for the gold key and nothing else.
    """

    def key(label: BioLabel):
        return label.base if strip else label

    tp: dict = {}
    fp: dict = {}
    fn: dict = {}
    seen: set = set()
    for gold, pred in pairs:
        assert len(gold) == len(pred)
        for g, p in zip(gold, pred):
            gk = key(g)
            seen.add(gk)
            if p is None:
                fn[gk] = fn.get(gk, 0) + 1
                continue
            pk = key(p)
            seen.add(pk)
            if pk == gk:
                tp[gk] = tp.get(gk, 0) + 1
            else:
                fn[gk] = fn.get(gk, 0) + 1
                fp[pk] = fp.get(pk, 0) + 1

    per_tag = {}
    gold_present = []
    for k in seen:
        t, p_, n_ = tp.get(k, 0), fp.get(k, 0), fn.get(k, 0)
        precision = t / (t + p_) if t + p_ else 0.0
        recall = t / (t + n_) if t + n_ else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        per_tag[k] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": t + n_,
        }
        if t + n_ > 0:
            gold_present.append(f1)
    macro = sum(gold_present) / len(gold_present) if gold_present else 0.0
    return {"per_tag": per_tag, "macro_f1": macro}
