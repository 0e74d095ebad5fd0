#!/usr/bin/env python
"""Directional robustness experiment on a synthetic desk corpus.

Trains one tagger on clean (V0) data and one on fully-noised (V2) data,
then evaluates both on a held-out V2 test set.  Clean-trained models have
never seen names, countries, separators, or junk terms, so their macro F1
collapses on noisy input while the V2-trained model holds up; the printed
gap is the quantity of interest.

Example:
    python scripts/make_desk_corpus.py --n 20000 --out-dir runs/desk
    python scripts/robustness_experiment.py --data-dir runs/desk
"""

from __future__ import annotations

import argparse
from pathlib import Path

from addrkit import augment, ingest, metrics, tagger


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", type=Path, default=Path("runs/desk"))
    parser.add_argument("--test-size", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--eval-every", type=int, default=4000)
    args = parser.parse_args()

    clean = ingest.load_corpus(args.data_dir / "clean.jsonl")
    zero_shot = ingest.load_corpus(args.data_dir / "zero_shot.jsonl")
    masks = augment.read_masks(args.data_dir / "masks.jsonl")
    cfg = augment.NoiseConfig(seed=args.seed)

    spec = ingest.SplitSpec(test_size=args.test_size, seed=args.seed)
    train_clean, test_clean = ingest.split_train_test(clean, spec)

    v2_train, train_report = augment.build_version(train_clean, "v2", masks, cfg)
    v2_test, test_report = augment.build_version(test_clean, "v2", masks, cfg)
    v2_dev, _ = augment.build_version(zero_shot, "v2", masks, cfg)
    print(
        f"v2 train {len(v2_train)} (skipped {train_report.skipped}), "
        f"v2 test {len(v2_test)} (skipped {test_report.skipped})"
    )

    train_cfg = tagger.TrainConfig(
        eval_every_updates=args.eval_every, seed=args.seed
    )
    model_v0 = tagger.train(
        train_clean, zero_shot, train_cfg, train_version="v0"
    )
    model_v2 = tagger.train(v2_train, v2_dev, train_cfg, train_version="v2")

    rows = []
    for label, model in (("train-v0", model_v0), ("train-v2", model_v2)):
        predictions = {s.id: model.predict(s.words) for s in v2_test}
        result = metrics.score(list(v2_test), predictions, strip=True)
        rows.append((label, result))
        print()
        print(metrics.render_eval(result, title=f"{label} -> test-v2"))

    gap = rows[1][1].macro_f1 - rows[0][1].macro_f1
    print()
    print(
        f"macro F1 gap (v2-trained minus v0-trained on v2 test): "
        f"{100 * gap:.1f} points"
    )


if __name__ == "__main__":
    main()
