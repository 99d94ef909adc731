"""
Synthetic two-domain image corpus

Cartoon-like images are a few flat blocks from a saturated palette;
photo-like images are smooth muted gradients with a fine noise texture.
Both are deterministic in the seed and come at any size.
"""

import logging
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import torch
from PIL import Image

from .imagedata import DatasetManifest, ImageBatch, build_manifest, normalize

logger = logging.getLogger(__name__)

CARTOON_PALETTE = np.array([
    [0.95, 0.20, 0.20],
    [0.15, 0.55, 0.95],
    [0.98, 0.85, 0.10],
    [0.20, 0.80, 0.35],
    [0.95, 0.95, 0.95],
    [0.60, 0.25, 0.80],
])
PHOTO_NOISE_STD = 0.04


def cartoon_image(rng: np.random.Generator, size: int) -> np.ndarray:
    """(size, size, 3) array in [0, 1] made of flat rectangles"""
    image = np.empty((size, size, 3))
    image[:] = CARTOON_PALETTE[rng.integers(len(CARTOON_PALETTE))]
    for _ in range(int(rng.integers(2, 5))):
        y0, x0 = rng.integers(0, size - 1, size=2)
        h, w = rng.integers(size // 4, size // 2 + 1, size=2)
        image[y0:y0 + h, x0:x0 + w] = CARTOON_PALETTE[rng.integers(len(CARTOON_PALETTE))]
    return image


def photo_image(rng: np.random.Generator, size: int) -> np.ndarray:
    """(size, size, 3) array in [0, 1] with a smooth two-color gradient and noise"""
    angle = rng.uniform(0, 2 * np.pi)
    ys, xs = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    t = (np.cos(angle) * xs + np.sin(angle) * ys)
    t = (t - t.min()) / max(np.ptp(t), 1e-8)
    start = rng.uniform(0.2, 0.6, size=3)
    end = rng.uniform(0.3, 0.8, size=3)
    image = start + t[..., None] * (end - start)
    image += rng.normal(0.0, PHOTO_NOISE_STD, size=image.shape)
    return np.clip(image, 0.0, 1.0)


def toy_images(domain: str, count: int, size: int = 32, seed: int = 0) -> np.ndarray:
    """(count, size, size, 3) float array of one domain"""
    rng = np.random.default_rng([seed, 0 if domain == 'cartoon' else 1])
    draw = cartoon_image if domain == 'cartoon' else photo_image
    return np.stack([draw(rng, size) for _ in range(count)])


def toy_batch(domain: str, count: int, size: int = 32, seed: int = 0) -> ImageBatch:
    """Toy images as a normalized batch, quantized to 8 bits like images read from disk"""
    pixels = np.round(toy_images(domain, count, size, seed) * 255.0) / 255.0
    data = normalize(torch.from_numpy(pixels).permute(0, 3, 1, 2).float())
    return ImageBatch(data=data.clamp(-1.0, 1.0), domain_tag=domain,
                      names=tuple(f"{domain}_{i:04d}.png" for i in range(count)))


def write_toy_images(directory: Union[str, Path], domain: str, count: int,
                     size: int = 32, seed: int = 0) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, pixels in enumerate(toy_images(domain, count, size, seed)):
        array = np.round(pixels * 255.0).astype(np.uint8)
        Image.fromarray(array, mode='RGB').save(directory / f"{domain}_{i:04d}.png", format='PNG')
    return directory


def write_toy_corpus(root: Union[str, Path],
                     split_counts: Tuple[int, int] = (24, 8),
                     size: int = 32,
                     seed: int = 0) -> Dict[str, Dict[str, DatasetManifest]]:
    """
    Write both domains as a curated corpus under root

    Raw images go to <root>/raw/<domain>/, curated splits to <root>/<domain>/<split>/.

    Returns:
        {domain: {split: manifest}}
    """
    root = Path(root)
    count = sum(split_counts)
    corpus = {}
    for domain in ('cartoon', 'real'):
        raw = write_toy_images(root / 'raw' / domain, domain, count, size, seed)
        corpus[domain] = build_manifest(raw, domain, split_counts, seed=seed,
                                        out_root=root, image_size=size)
    logger.info(f"Toy corpus with {count} images per domain written to {root}")
    return corpus
