"""
Frechet Inception Distance and the weighted target/input score

Given feature statistics (mu_a, S_a) and (mu_b, S_b) of two image sets,

    FID = ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2))

The weighted score blends the distance of generated images to the target
(photo) domain and to the input (cartoon) domain, 0.8 / 0.2 by default.
"""

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from scipy import linalg
from torch import nn
from torchvision.models import inception_v3

from .config import FIDConfig
from .errors import ConfigError, NumericalError, SampleSizeError, ShapeError
from .imagedata import ImageBatch
from .weights import WeightFetcher, inception_sha256, inception_url

logger = logging.getLogger(__name__)

MIN_STATS_SAMPLES = 2

SQRT_EPS = 1e-6
IMAG_TOLERANCE = 1e-3
NEGATIVE_TOLERANCE = 1e-6
SINGULAR_TOLERANCE = 1e-10
INCEPTION_SIZE = 299
INCEPTION_DIM = 2048


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass
class FIDStats:
    """Mean and covariance of the features of one image set"""

    mu: np.ndarray
    sigma: np.ndarray
    n: int
    extractor: str = 'unknown'

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        d = self.mu.shape[0]
        if self.mu.ndim != 1 or self.sigma.shape != (d, d):
            raise ShapeError(f"Inconsistent stats shapes: mu {self.mu.shape}, sigma {self.sigma.shape}")
        if self.n < MIN_STATS_SAMPLES:
            raise SampleSizeError(f"FID statistics need at least {MIN_STATS_SAMPLES} samples, got {self.n}")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-8):
            raise NumericalError("Covariance matrix is not symmetric")

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])

    def save(self, path: Union[str, Path]) -> Path:
        """Write <path>.bin (little-endian float64 mu then sigma) and <path>.json header"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        blob = path.with_suffix('.bin')
        header = path.with_suffix('.json')
        with open(blob, 'wb') as f:
            f.write(self.mu.astype('<f8').tobytes())
            f.write(self.sigma.astype('<f8').tobytes())
        header.write_text(json.dumps({'d': self.dim, 'n': self.n, 'extractor': self.extractor},
                                     indent=2, sort_keys=True) + '\n', encoding='utf-8')
        return blob

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'FIDStats':
        path = Path(path)
        header = json.loads(path.with_suffix('.json').read_text(encoding='utf-8'))
        raw = np.frombuffer(path.with_suffix('.bin').read_bytes(), dtype='<f8')
        d = header['d']
        if raw.size != d + d * d:
            raise ShapeError(f"Stats blob holds {raw.size} values, header says d={d}")
        return cls(mu=raw[:d].copy(), sigma=raw[d:].reshape(d, d).copy(),
                   n=header['n'], extractor=header['extractor'])


class RunningStats:
    """Single-pass mean/covariance accumulator with a shard merge"""

    def __init__(self, dim: Optional[int] = None):
        self.n = 0
        self.mean: Optional[np.ndarray] = None
        self.m2: Optional[np.ndarray] = None
        if dim is not None:
            self._allocate(dim)

    def _allocate(self, dim: int) -> None:
        self.mean = np.zeros(dim, dtype=np.float64)
        self.m2 = np.zeros((dim, dim), dtype=np.float64)

    def _combine(self, n_b: int, mean_b: np.ndarray, m2_b: np.ndarray) -> None:
        if self.mean is None:
            self._allocate(mean_b.shape[0])
        if mean_b.shape[0] != self.mean.shape[0]:
            raise ShapeError(f"Feature dimension {mean_b.shape[0]} does not match {self.mean.shape[0]}")
        n_a = self.n
        total = n_a + n_b
        delta = mean_b - self.mean
        self.mean = self.mean + delta * (n_b / total)
        self.m2 = self.m2 + m2_b + np.outer(delta, delta) * (n_a * n_b / total)
        self.n = total

    def update(self, features: np.ndarray) -> 'RunningStats':
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if features.shape[0] == 0:
            return self
        batch_mean = features.mean(axis=0)
        centered = features - batch_mean
        self._combine(features.shape[0], batch_mean, centered.T @ centered)
        return self

    def merge(self, other: 'RunningStats') -> 'RunningStats':
        if other.n:
            self._combine(other.n, other.mean, other.m2)
        return self

    def finalize(self, extractor: str = 'unknown') -> FIDStats:
        if self.n < MIN_STATS_SAMPLES:
            raise SampleSizeError(f"FID statistics need at least {MIN_STATS_SAMPLES} images, got {self.n}")
        sigma = self.m2 / (self.n - 1)
        return FIDStats(mu=self.mean.copy(), sigma=(sigma + sigma.T) / 2.0, n=self.n, extractor=extractor)


def stats_from_features(features: np.ndarray, extractor: str = 'unknown') -> FIDStats:
    return RunningStats().update(features).finalize(extractor)


# ---------------------------------------------------------------------------
# Feature extractors
# ---------------------------------------------------------------------------

class FeatureExtractor(ABC):
    """Maps a batch of images in [-1, 1] to one feature vector per image"""

    identity: str = 'abstract'
    dim: int = 0

    @abstractmethod
    def extract(self, images: torch.Tensor) -> np.ndarray:
        pass


class LinearTestExtractor(FeatureExtractor):
    """Fixed seeded random projection of 8x8 average-pooled pixels; no pretrained weights needed"""

    identity = 'test_linear'
    POOL = 8

    def __init__(self, dim: int = 2, seed: int = 0):
        self.dim = dim
        rng = torch.Generator().manual_seed(seed)
        fan_in = 3 * self.POOL * self.POOL
        self.projection = torch.randn(fan_in, dim, generator=rng, dtype=torch.float64) / fan_in ** 0.5

    def extract(self, images: torch.Tensor) -> np.ndarray:
        pooled = F.adaptive_avg_pool2d(images.to(torch.float64), self.POOL)
        return (pooled.flatten(1) @ self.projection).numpy()


class InceptionExtractor(FeatureExtractor):
    """2048-d final pooling features of a pretrained Inception-v3"""

    identity = 'inception_v3_pool3'
    dim = INCEPTION_DIM

    def __init__(self, weights_path: Optional[Path] = None, device: str = 'cpu'):
        if weights_path is None:
            weights_path = WeightFetcher().fetch(inception_url(), inception_sha256())
        net = inception_v3(weights=None, aux_logits=True, init_weights=False, transform_input=False)
        net.load_state_dict(torch.load(weights_path, map_location='cpu'))
        net.fc = nn.Identity()
        self.net = net.eval().to(device)
        self.device = device

    def extract(self, images: torch.Tensor) -> np.ndarray:
        # The ported TF weights expect inputs already in [-1, 1]
        x = F.interpolate(images.to(self.device), size=(INCEPTION_SIZE, INCEPTION_SIZE),
                          mode='bilinear', align_corners=False)
        with torch.no_grad():
            features = self.net(x)
        return features.double().cpu().numpy()


def make_extractor(config: FIDConfig = FIDConfig()) -> FeatureExtractor:
    if config.extractor == 'test_linear':
        return LinearTestExtractor(dim=config.linear_dim, seed=config.linear_seed)
    return InceptionExtractor()


def compute_stats(images: Iterable[Union[ImageBatch, torch.Tensor]],
                  extractor: FeatureExtractor) -> FIDStats:
    """Feature mean and unbiased covariance of a stream of batches in one pass"""
    running = RunningStats()
    with torch.no_grad():
        for batch in images:
            data = batch.data if isinstance(batch, ImageBatch) else batch
            if data.shape[0]:
                running.update(extractor.extract(data))
    return running.finalize(extractor.identity)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def _is_singular(sigma: np.ndarray) -> bool:
    return float(linalg.eigvalsh(sigma).min()) < SINGULAR_TOLERANCE


def _psd_sqrt(sigma: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and its inverse of a positive definite matrix"""
    values, vectors = linalg.eigh((sigma + sigma.T) / 2.0)
    values = np.clip(values, 0.0, None)
    root = np.sqrt(values)
    with np.errstate(divide='ignore'):
        inv_root = np.where(root > 0, 1.0 / root, 0.0)
    return (vectors * root) @ vectors.T, (vectors * inv_root) @ vectors.T


def _sqrt_product(sigma_a: np.ndarray, sigma_b: np.ndarray) -> Tuple[np.ndarray, float]:
    """(S_a S_b)^(1/2) and the ridge offset that had to be added to both inputs"""
    offset = 0.0
    if _is_singular(sigma_a) or _is_singular(sigma_b):
        offset = SQRT_EPS
        logger.warning(f"Singular covariance; adding {offset:g} to the diagonal of both inputs")
        eye = np.eye(sigma_a.shape[0])
        sigma_a = sigma_a + offset * eye
        sigma_b = sigma_b + offset * eye

    # S_a S_b = A (A S_b A) A^-1 with A = S_a^(1/2); the middle factor is symmetric PSD
    a_half, a_inv_half = _psd_sqrt(sigma_a)
    middle = a_half @ sigma_b @ a_half
    values, vectors = linalg.eigh((middle + middle.T) / 2.0)
    if values.min() < 0:
        imaginary = float(np.sqrt(-values.min()))
        if imaginary > IMAG_TOLERANCE:
            cond = float(np.linalg.cond(sigma_a) * np.linalg.cond(sigma_b))
            raise NumericalError(
                f"Matrix square root has imaginary component {imaginary:.3g} "
                f"(condition product {cond:.3g}); use more samples"
            )
        values = np.clip(values, 0.0, None)
    middle_half = (vectors * np.sqrt(values)) @ vectors.T
    result = a_half @ middle_half @ a_inv_half
    if not np.all(np.isfinite(result)):
        raise NumericalError("Matrix square root did not converge to a finite result")
    return result, offset


def matrix_sqrt_product(sigma_a: np.ndarray, sigma_b: np.ndarray) -> np.ndarray:
    """Principal square root of S_a S_b for symmetric positive semidefinite inputs"""
    sigma_a = np.atleast_2d(np.asarray(sigma_a, dtype=np.float64))
    sigma_b = np.atleast_2d(np.asarray(sigma_b, dtype=np.float64))
    if sigma_a.shape != sigma_b.shape or sigma_a.shape[0] != sigma_a.shape[1]:
        raise ShapeError(f"Cannot multiply covariances of shapes {sigma_a.shape} and {sigma_b.shape}")
    return _sqrt_product(sigma_a, sigma_b)[0]


def frechet_distance(a: FIDStats, b: FIDStats) -> float:
    """Squared Frechet distance between two Gaussian fits; clamped to 0 within tolerance"""
    if a.dim != b.dim:
        raise ShapeError(f"Feature dimensions differ: {a.dim} vs {b.dim}")
    diff = a.mu - b.mu
    covmean, offset = _sqrt_product(a.sigma, b.sigma)
    # Trace of the regularized pair so the ridge cancels
    trace = np.trace(a.sigma) + np.trace(b.sigma) + 2.0 * offset * a.dim - 2.0 * np.trace(covmean)
    distance = float(diff @ diff + trace)
    if distance < 0:
        if distance < -NEGATIVE_TOLERANCE:
            raise NumericalError(f"Frechet distance is negative ({distance:.3g})")
        distance = 0.0
    return distance


def weighted_score(target_distance: float, input_distance: float,
                   w_target: float = 0.8, w_input: float = 0.2) -> float:
    if w_target < 0 or w_input < 0 or abs(w_target + w_input - 1.0) > 1e-9:
        raise ConfigError(f"FID weights must be non-negative and sum to 1, got {w_target} and {w_input}")
    return w_target * target_distance + w_input * input_distance


def weighted_fid(gen: FIDStats, real: FIDStats, cartoon: FIDStats,
                 w_target: float = 0.8, w_input: float = 0.2) -> float:
    """w_target * FID(gen, real) + w_input * FID(gen, cartoon)"""
    weighted_score(0.0, 0.0, w_target, w_input)
    return weighted_score(frechet_distance(gen, real), frechet_distance(gen, cartoon),
                          w_target, w_input)
