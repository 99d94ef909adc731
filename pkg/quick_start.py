#!/usr/bin/env python3
"""
Quick Start Guide for the toonphoto package

Builds a synthetic two-domain corpus, trains tiny networks for two epochs,
plots the FID curve and translates the validation cartoons. Runs on a laptop
CPU in a few minutes and needs no downloads.
"""

import sys
from pathlib import Path

from toonphoto import (
    DiscriminatorSpec, FIDConfig, GeneratorSpec, TrainConfig, TrainingLog, fit, plot_fid_curves,
    translate, write_toy_corpus,
)
from toonphoto.errors import ToonPhotoError
from toonphoto.training_log import LOG_NAME

OUTPUT_DIR = Path('quick_start_output')


def main():
    """Main function demonstrating package usage."""

    print("=" * 60)
    print("toonphoto - Quick Start")
    print("=" * 60)

    corpus = write_toy_corpus(OUTPUT_DIR / 'corpus', split_counts=(24, 8), size=32, seed=0)
    for domain, splits in corpus.items():
        counts = ', '.join(f"{split} {len(m)}" for split, m in splits.items())
        print(f"  ✓ {domain}: {counts}")

    config = TrainConfig(
        cartoon_root=OUTPUT_DIR / 'corpus' / 'cartoon',
        real_root=OUTPUT_DIR / 'corpus' / 'real',
        out_dir=OUTPUT_DIR / 'run',
        epochs=2,
        batch_size=4,
        image_size=32,
        fid_interval=1,
        lr_decay=False,
        generator=GeneratorSpec(base_filters=8, n_residual=2),
        discriminator=DiscriminatorSpec(base_filters=8, n_layers=1),
        # Seeded projection features; the real metric downloads Inception-v3 weights
        fid=FIDConfig(extractor='test_linear', batch_size=8),
    )

    try:
        print("\nTraining...")
        state = fit(config, corpus, progress=True)
        print(f"✅ Trained {state.step} steps, best weighted FID {state.best_fid:.4f}")

        log = TrainingLog(config.out_dir / LOG_NAME)
        paths = plot_fid_curves([log], OUTPUT_DIR / 'plots')
        print(f"✅ FID curve saved to {paths['png']}")

        written = translate(config.out_dir / 'checkpoints' / 'best',
                            corpus['cartoon']['val'].root, OUTPUT_DIR / 'translated')
        print(f"✅ Translated {len(written)} validation cartoons into {OUTPUT_DIR / 'translated'}")
    except ToonPhotoError as e:
        print(f"❌ {e}")
        return 1

    print("\n📝 Next steps:")
    print("1. Curate real corpora with `toonphoto prepare --videos ...` and `--photos ...`")
    print("2. Train with `toonphoto train --cartoon ... --real ... --out run/`")
    print("3. Compare runs with `toonphoto plot-fid --log run/train_log.jsonl --out plots/`")
    return 0


if __name__ == "__main__":
    sys.exit(main())
