#!/usr/bin/env python3
"""
Discriminator stability with and without spectral normalization

Trains tiny networks on the synthetic two-domain corpus for a fixed number of
steps, for every (seed, arm) pair, and compares:

  * reconstruction loss (forward + backward) at the end against the start
  * variance of the per-step discriminator loss over the last window of steps

Results are written as a CSV of per-step losses and a JSON summary.

Usage:
    python scripts/benchmark_stability.py --out stability_run
    python scripts/benchmark_stability.py --seeds 0 1 2 --steps 300
"""

import argparse
import json
import logging
import sys
from itertools import product
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from toonphoto.config import DiscriminatorSpec, GeneratorSpec, TrainConfig
from toonphoto.imagedata import ImageBatch
from toonphoto.toy import toy_batch
from toonphoto.trainer import init_state, train_step

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

ARMS = {'spectral': 'spectral', 'no_spectral': 'instance'}


def batches(pool: ImageBatch, batch_size: int, steps: int, seed: int):
    """Cycle through a fixed image pool in seeded per-pass orders"""
    rng = np.random.default_rng(seed)
    order = []
    for _ in range(steps):
        if len(order) < batch_size:
            order.extend(rng.permutation(pool.size).tolist())
        idx, order = order[:batch_size], order[batch_size:]
        yield ImageBatch(pool.data[idx], pool.domain_tag)


def run_arm(seed: int, norm: str, images: int, size: int, steps: int, batch_size: int) -> pd.DataFrame:
    config = TrainConfig(
        seed=seed,
        batch_size=batch_size,
        image_size=size,
        lr_decay=False,
        generator=GeneratorSpec(base_filters=8, n_residual=2),
        discriminator=DiscriminatorSpec(base_filters=8, n_layers=1, norm=norm),
    )
    state = init_state(config)
    cartoons = toy_batch('cartoon', images, size, seed=seed)
    reals = toy_batch('real', images, size, seed=seed)
    rows = []
    pairs = zip(batches(cartoons, batch_size, steps, seed), batches(reals, batch_size, steps, seed + 1))
    for cartoon, real in tqdm(pairs, total=steps, desc=f'seed {seed} {norm}', leave=False):
        report = train_step(state, cartoon, real, config.lambda_cyc)
        rows.append({'step': state.step, **report.to_dict()})
    frame = pd.DataFrame(rows)
    frame['reconstruction'] = frame['forward_cyc'] + frame['backward_cyc']
    return frame


def summarize(runs: dict, window: int) -> dict:
    per_run = {}
    for (seed, arm), frame in runs.items():
        tail = frame.tail(window)
        per_run[f'{arm}/seed{seed}'] = {
            'reconstruction_start': float(frame['reconstruction'].iloc[0]),
            'reconstruction_end': float(tail['reconstruction'].mean()),
            'd_loss_variance': float(tail['total_d'].var(ddof=1)),
        }
    decreased = all(r['reconstruction_end'] < r['reconstruction_start'] for r in per_run.values())

    seeds = sorted({seed for seed, _ in runs})
    pairs = []
    for on_seed, off_seed in product(seeds, seeds):
        on = per_run[f'spectral/seed{on_seed}']['d_loss_variance']
        off = per_run[f'no_spectral/seed{off_seed}']['d_loss_variance']
        pairs.append({'spectral_seed': on_seed, 'no_spectral_seed': off_seed,
                      'spectral_steadier': on <= off})
    steadier = sum(p['spectral_steadier'] for p in pairs)
    return {
        'runs': per_run,
        'pairs': pairs,
        'reconstruction_decreased_everywhere': decreased,
        'spectral_steadier_pairs': f'{steadier}/{len(pairs)}',
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split('\n\n')[0])
    parser.add_argument('--out', type=Path, default=Path('stability_run'))
    parser.add_argument('--seeds', type=int, nargs='+', default=[0, 1])
    parser.add_argument('--steps', type=int, default=200)
    parser.add_argument('--window', type=int, default=100, help='Trailing steps for the variance')
    parser.add_argument('--images', type=int, default=64, help='Images per domain')
    parser.add_argument('--size', type=int, default=32)
    parser.add_argument('--batch-size', type=int, default=4)
    args = parser.parse_args(argv)

    if args.window > args.steps:
        logger.error(f"--window ({args.window}) cannot exceed --steps ({args.steps})")
        return 1
    args.out.mkdir(parents=True, exist_ok=True)

    runs = {}
    for seed, arm in product(args.seeds, ARMS):
        logger.info(f"Training seed {seed} with {arm} discriminators")
        runs[(seed, arm)] = run_arm(seed, ARMS[arm], args.images, args.size, args.steps, args.batch_size)

    losses = pd.concat([frame.assign(seed=seed, arm=arm) for (seed, arm), frame in runs.items()],
                       ignore_index=True)
    losses.to_csv(args.out / 'stability_losses.csv', index=False)
    summary = summarize(runs, args.window)
    (args.out / 'stability_summary.json').write_text(json.dumps(summary, indent=2) + '\n', encoding='utf-8')

    print("\n" + "=" * 60)
    print("STABILITY BENCHMARK")
    print("=" * 60)
    for name, result in summary['runs'].items():
        print(f"{name:22s} recon {result['reconstruction_start']:.4f} -> {result['reconstruction_end']:.4f}"
              f"   D-loss var {result['d_loss_variance']:.3e}")
    print(f"\nReconstruction decreased in every run: {summary['reconstruction_decreased_everywhere']}")
    print(f"Spectral arm steadier in {summary['spectral_steadier_pairs']} seed pairs")
    print(f"Results saved to {args.out}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
