"""End-to-end offline demo: corpus, both engines, comparison table.

Generates a labeled corpus, trains the feature-engine classifier, runs the
offline pipeline with each engine, and prints detected intervals next to
ground truth plus the per-engine timing/accuracy table.

Usage: python3 scripts/demo_offline.py --workdir /tmp/adsplice-demo
"""

from __future__ import annotations

import argparse
import shutil
import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from adsplice.corpus import CorpusConfig, generate_corpus, load_truth, parse_schedule
from adsplice.features import TrainConfig
from adsplice.pipeline import (
    ENGINES,
    MODEL_NAME,
    PipelineConfig,
    bench_engines,
    load_model,
    process_corpus,
    save_model,
    train_on_corpus,
)

SCHEDULE = "p20,a10:auto,p15,a10:food,p20,a10:tech,p15"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", type=Path, default=Path("demo-workdir"))
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--fresh", action="store_true",
                        help="wipe the workdir first")
    args = parser.parse_args(argv)

    if args.fresh and args.workdir.exists():
        shutil.rmtree(args.workdir)
    corpus = args.workdir / "corpus"

    config = CorpusConfig(
        seed=args.seed,
        width=160,
        height=96,
        fps=Fraction(10, 1),
        segment_seconds=2.0,
        schedule=tuple(parse_schedule(SCHEDULE)),
    )
    summary = generate_corpus(config, corpus)
    print(f"corpus: {summary.total_segments} segments, "
          f"{len(summary.truth)} ad intervals")

    model = train_on_corpus(corpus, TrainConfig())
    save_model(model, corpus / MODEL_NAME)
    print(f"model: classes={list(model.classes)} "
          f"features={list(model.feature_indices)}")

    truth = [(t.start_frame, t.end_frame, t.category) for t in load_truth(corpus)]
    print(f"\ntruth intervals: {truth}")
    for engine in ENGINES:
        result = process_corpus(
            corpus, args.workdir / f"out-{engine}", PipelineConfig(engine=engine)
        )
        got = [(m.start_frame, m.end_frame, m.category) for m in result.intervals]
        print(f"{engine:>8}: {got}  ({result.processing_ms} ms)")

    print(f"\n{'engine':<10}{'mean ms/segment':>18}{'accuracy':>12}")
    for row in bench_engines(corpus, load_model(corpus / MODEL_NAME)):
        print(f"{row.engine:<10}{row.mean_ms:>18.1f}{row.accuracy * 100:>11.1f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
