"""
Curated image corpora for both domains

Frame records with provenance, the dark-frame filter, deterministic
train/val manifests and the normalized batch loader.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from PIL import Image
from torch.utils.data import DataLoader, Dataset
from torchvision import transforms

from .config import DEFAULT_DARK_THRESHOLD, DEFAULT_IMAGE_SIZE
from .errors import ConfigError, CorpusSizeError, DecodeError, IntegrityError, ShapeError

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = ('.png', '.jpg', '.jpeg', '.bmp', '.webp')
MANIFEST_NAME = 'manifest.json'
FRAMES_RECORD_NAME = 'frames.json'

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

RejectReason = Literal['dark', 'head_trim', 'tail_trim', 'excluded', 'none']
DomainTag = Literal['cartoon', 'real', 'generated']
SPLITS = ('train', 'val')


@dataclass
class FrameRecord:
    """One candidate image and the curation decision taken on it"""

    source_id: str
    frame_index: int
    timestamp_s: float
    mean_luminance: float
    accepted: bool
    reject_reason: RejectReason = 'none'
    image_file: Optional[str] = None

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be non-negative, got {self.frame_index}")
        if not 0.0 <= self.mean_luminance <= 1.0:
            raise ValueError(f"mean_luminance must lie in [0, 1], got {self.mean_luminance}")
        if self.accepted and self.reject_reason != 'none':
            raise ValueError(f"Accepted record cannot carry reject_reason '{self.reject_reason}'")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> 'FrameRecord':
        return cls(**data)


@dataclass
class DatasetManifest:
    """Accepted records of one domain split, persisted as manifest.json"""

    domain: Literal['cartoon', 'real']
    split: Literal['train', 'val']
    records: List[FrameRecord] = field(default_factory=list)
    image_size: int = DEFAULT_IMAGE_SIZE
    root: Optional[Path] = None

    def __len__(self) -> int:
        return len(self.records)

    def image_paths(self) -> List[Path]:
        base = self.root or Path('.')
        return [base / r.image_file for r in self.records if r.accepted and r.image_file]

    def to_json(self) -> str:
        payload = {
            'domain': self.domain,
            'split': self.split,
            'image_size': self.image_size,
            'records': [r.to_dict() for r in self.records],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + '\n'

    def save(self, directory: Optional[Union[str, Path]] = None) -> Path:
        directory = Path(directory) if directory else self.root
        if directory is None:
            raise ValueError("No directory given for manifest")
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / MANIFEST_NAME
        path.write_text(self.to_json(), encoding='utf-8')
        self.root = directory
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'DatasetManifest':
        """Load a manifest from its file or from the split directory holding it"""
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.exists():
            raise IntegrityError(f"Manifest not found: {path}")
        data = json.loads(path.read_text(encoding='utf-8'))
        return cls(
            domain=data['domain'],
            split=data['split'],
            image_size=int(data['image_size']),
            records=[FrameRecord.from_dict(r) for r in data['records']],
            root=path.parent,
        )


@dataclass
class ImageBatch:
    """Rank-4 (m, 3, H, W) tensor of pixels in [-1, 1] tagged with its domain"""

    data: torch.Tensor
    domain_tag: DomainTag
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.data.dim() != 4:
            raise ShapeError(f"ImageBatch must be rank 4, got shape {tuple(self.data.shape)}")
        if self.data.shape[0] < 1:
            raise ShapeError("ImageBatch must hold at least one image")
        if self.data.shape[1] != 3:
            raise ShapeError(f"ImageBatch must have 3 channels, got {self.data.shape[1]}")
        if self.data.numel() and (self.data.min() < -1.0 or self.data.max() > 1.0):
            raise ValueError("ImageBatch values must lie in [-1, 1]")

    @property
    def size(self) -> int:
        return int(self.data.shape[0])


# ---------------------------------------------------------------------------
# Pixel conversions
# ---------------------------------------------------------------------------

def normalize(x: torch.Tensor) -> torch.Tensor:
    """Map pixel values from [0, 1] to [-1, 1]"""
    return x * 2.0 - 1.0


def denormalize(x: torch.Tensor) -> torch.Tensor:
    """Map [-1, 1] tensors (C, H, W) or (m, C, H, W) back to 8-bit pixel values"""
    return ((x.clamp(-1.0, 1.0) + 1.0) / 2.0 * 255.0).round().to(torch.uint8)


def to_pil(x: torch.Tensor) -> Image.Image:
    """Convert one (3, H, W) tensor in [-1, 1] to an RGB image"""
    array = denormalize(x).permute(1, 2, 0).cpu().numpy()
    return Image.fromarray(array, mode='RGB')


def load_image(path: Union[str, Path]) -> Image.Image:
    try:
        with Image.open(path) as img:
            return img.convert('RGB')
    except (OSError, ValueError) as e:
        raise DecodeError(f"Cannot decode image {path}: {e}") from e


def resize_center_crop(img: Image.Image, size: int) -> Image.Image:
    """Shorter-side resize to ``size`` then center crop to size x size"""
    pipeline = transforms.Compose([
        transforms.Resize(size, interpolation=transforms.InterpolationMode.BICUBIC),
        transforms.CenterCrop(size),
    ])
    return pipeline(img)


def list_images(directory: Union[str, Path]) -> List[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS)


# ---------------------------------------------------------------------------
# Curation
# ---------------------------------------------------------------------------

def mean_luminance(frame: np.ndarray) -> float:
    """Mean BT.601 luminance of an (H, W, 3) RGB frame in [0, 1] (uint8 is rescaled)"""
    frame = np.asarray(frame)
    if frame.dtype == np.uint8:
        frame = frame.astype(np.float64) / 255.0
    if frame.ndim != 3 or frame.shape[-1] != 3:
        raise ShapeError(f"Expected an (H, W, 3) frame, got shape {frame.shape}")
    luma = frame[..., 0] * LUMA_WEIGHTS[0] + frame[..., 1] * LUMA_WEIGHTS[1] + frame[..., 2] * LUMA_WEIGHTS[2]
    return float(np.clip(luma.mean(), 0.0, 1.0))


def dark_frame_filter(frame: np.ndarray,
                      threshold: float = DEFAULT_DARK_THRESHOLD) -> Tuple[bool, float]:
    """
    Decide whether a frame is bright enough to keep

    Args:
        frame: (H, W, 3) RGB array with values in [0, 1]
        threshold: Minimum mean luminance

    Returns:
        (accepted, mean_luminance) where accepted <=> mean_luminance >= threshold
    """
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"Dark threshold must lie in [0, 1], got {threshold}")
    luminance = mean_luminance(frame)
    return luminance >= threshold, luminance


def read_exclusion_list(path: Optional[Union[str, Path]]) -> List[str]:
    """One image name per line; blank lines and '#' comments are ignored"""
    if path is None:
        return []
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Exclusion list not found: {path}")
    names = []
    for line in path.read_text(encoding='utf-8').splitlines():
        line = line.strip()
        if line and not line.startswith('#'):
            names.append(line)
    return names


def load_frame_records(image_dir: Union[str, Path]) -> Optional[List[FrameRecord]]:
    """Records written by frame extraction, if the directory has them"""
    path = Path(image_dir) / FRAMES_RECORD_NAME
    if not path.exists():
        return None
    data = json.loads(path.read_text(encoding='utf-8'))
    return [FrameRecord.from_dict(r) for r in data['records']]


def save_frame_records(records: Sequence[FrameRecord], image_dir: Union[str, Path]) -> Path:
    path = Path(image_dir) / FRAMES_RECORD_NAME
    payload = {'records': [r.to_dict() for r in records]}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def build_manifest(image_dir: Union[str, Path],
                   domain: Literal['cartoon', 'real'],
                   split_counts: Tuple[int, int],
                   seed: int = 0,
                   out_root: Optional[Union[str, Path]] = None,
                   image_size: int = DEFAULT_IMAGE_SIZE,
                   exclude: Sequence[str] = (),
                   dark_threshold: Optional[float] = None) -> Dict[str, DatasetManifest]:
    """
    Split accepted images into train/val, resize them and persist both manifests

    Args:
        image_dir: Directory of candidate images; frames.json from frame extraction is
            used for provenance when present, otherwise every image is a candidate
        domain: 'cartoon' or 'real'
        split_counts: (train, val) image counts
        seed: Shuffle seed for the split
        out_root: Corpus root; images land in <out_root>/<domain>/<split>/
        image_size: Side of the square output images
        exclude: Image names removed before splitting
        dark_threshold: Optional luminance threshold applied to folders without frames.json

    Returns:
        Dict {'train': manifest, 'val': manifest}
    """
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise IntegrityError(f"Image directory not found: {image_dir}")
    train_count, val_count = split_counts
    if train_count < 0 or val_count < 0:
        raise ConfigError(f"Split counts must be non-negative, got {split_counts}")

    records = load_frame_records(image_dir)
    if records is None:
        from .sources.photos import PhotoFolderSource
        records = PhotoFolderSource(image_dir, dark_threshold=dark_threshold).scan()

    excluded = set(exclude)
    candidates = [r for r in records
                  if r.accepted and r.image_file and r.image_file not in excluded]
    n_excluded = sum(1 for r in records if r.accepted and r.image_file in excluded)
    if n_excluded:
        logger.info(f"Excluded {n_excluded} images by exclusion list")

    required = train_count + val_count
    if len(candidates) < required:
        raise CorpusSizeError(required, len(candidates), len(records))

    # Sort first so the split depends only on directory contents and seed
    candidates.sort(key=lambda r: r.image_file)
    order = np.random.default_rng(seed).permutation(len(candidates))
    chosen = {
        'train': [candidates[i] for i in order[:train_count]],
        'val': [candidates[i] for i in order[train_count:required]],
    }

    out_root = Path(out_root) if out_root else image_dir.parent
    manifests = {}
    for split, split_records in chosen.items():
        split_dir = out_root / domain / split
        split_dir.mkdir(parents=True, exist_ok=True)
        kept = []
        for record in sorted(split_records, key=lambda r: r.image_file):
            name = Path(record.image_file).stem + '.png'
            img = resize_center_crop(load_image(image_dir / record.image_file), image_size)
            img.save(split_dir / name, format='PNG')
            kept.append(FrameRecord(
                source_id=record.source_id,
                frame_index=record.frame_index,
                timestamp_s=record.timestamp_s,
                mean_luminance=record.mean_luminance,
                accepted=True,
                reject_reason='none',
                image_file=name,
            ))
        manifest = DatasetManifest(domain=domain, split=split, records=kept,
                                   image_size=image_size, root=split_dir)
        manifest.save(split_dir)
        manifests[split] = manifest
        logger.info(f"{domain}/{split}: {len(kept)} images -> {split_dir}")
    return manifests


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def verify_manifest_files(manifest: DatasetManifest) -> None:
    """Raise IntegrityError naming the first image the manifest lists but the disk lacks"""
    for path in manifest.image_paths():
        if not path.is_file():
            raise IntegrityError(f"Manifest {manifest.domain}/{manifest.split} lists missing file: {path}")


class ManifestDataset(Dataset):
    """Torch dataset over the accepted images of a manifest"""

    def __init__(self, manifest: DatasetManifest):
        verify_manifest_files(manifest)
        self.manifest = manifest
        self.paths = manifest.image_paths()
        self.to_tensor = transforms.ToTensor()

    def __len__(self) -> int:
        return len(self.paths)

    def __getitem__(self, idx: int):
        path = self.paths[idx]
        if not path.is_file():
            raise IntegrityError(f"Image disappeared during loading: {path}")
        img = load_image(path)
        size = self.manifest.image_size
        if img.size != (size, size):
            raise IntegrityError(f"Image {path} is {img.size[0]}x{img.size[1]}, manifest says {size}x{size}")
        return normalize(self.to_tensor(img)), path.name


def load_batches(manifest: DatasetManifest,
                 batch_size: int,
                 shuffle_seed: int = 0,
                 epoch: int = 0,
                 shuffle: bool = True,
                 num_workers: int = 0) -> Iterator[ImageBatch]:
    """
    Stream normalized batches from a manifest

    Order is a function of (shuffle_seed, epoch) in single-worker mode, so every
    epoch reshuffles while staying reproducible. The last partial batch is kept.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if num_workers > 0:
        logger.warning(f"Loading with {num_workers} workers; batch order is not guaranteed deterministic")

    dataset = ManifestDataset(manifest)
    generator = torch.Generator()
    generator.manual_seed(shuffle_seed * 100003 + epoch)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=shuffle,
                        generator=generator, num_workers=num_workers, drop_last=False)
    tag = manifest.domain
    for data, names in loader:
        yield ImageBatch(data=data, domain_tag=tag, names=tuple(names))


def load_image_folder(directory: Union[str, Path],
                      image_size: Optional[int] = None) -> Tuple[List[str], torch.Tensor]:
    """Load every image in a folder as one normalized tensor, resizing when ``image_size`` is set"""
    to_tensor = transforms.ToTensor()
    names, tensors = [], []
    for path in list_images(directory):
        img = load_image(path)
        if image_size is not None:
            img = resize_center_crop(img, image_size)
        names.append(path.name)
        tensors.append(normalize(to_tensor(img)))
    if not tensors:
        return names, torch.empty(0, 3, 0, 0)
    return names, torch.stack(tensors)
