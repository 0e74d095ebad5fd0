#!/usr/bin/env python
"""Generate the synthetic desk corpora used by the experiment scripts.

Writes three files under the output directory:

* clean.jsonl      - V0-style clean samples over the training countries
* zero_shot.jsonl  - clean samples from countries absent from training
* masks.jsonl      - a synthesized production-style mask file

Example:
    python scripts/make_desk_corpus.py --n 20000 --out-dir runs/desk
"""

from __future__ import annotations

import argparse
from pathlib import Path

from addrkit import augment, desk, ingest


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=20000,
                        help="training-country sample count")
    parser.add_argument("--zero-shot-n", type=int, default=2000)
    parser.add_argument("--n-masks", type=int, default=400)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out-dir", type=Path, default=Path("runs/desk"))
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    clean = desk.generate_corpus(args.n, desk.DESK_TRAIN_COUNTRIES, args.seed)
    zero_shot = desk.generate_corpus(
        args.zero_shot_n, desk.DESK_ZERO_SHOT_COUNTRIES, args.seed
    )
    cfg = augment.NoiseConfig(seed=args.seed)
    masks = augment.synthesize_masks(args.n_masks, cfg, args.seed)

    ingest.write_corpus(clean, args.out_dir / "clean.jsonl")
    ingest.write_corpus(zero_shot, args.out_dir / "zero_shot.jsonl")
    augment.write_masks(masks, args.out_dir / "masks.jsonl")
    print(
        f"wrote {len(clean)} clean, {len(zero_shot)} zero-shot samples and "
        f"{len(masks)} masks under {args.out_dir}"
    )


if __name__ == "__main__":
    main()
