"""Configuration models for data preparation, training and evaluation"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, ClassVar, Dict, Literal, Optional, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

logger = logging.getLogger(__name__)

M = TypeVar('M', bound=BaseModel)

Domain = Literal['cartoon', 'real']
ExtractorName = Literal['inception_v3_pool3', 'test_linear']

# Defaults for curation; the source method states none of these numbers.
DEFAULT_DARK_THRESHOLD = 0.15
DEFAULT_TRIM_FRACTION = 0.05
DEFAULT_SAMPLE_RATE = 1.0
DEFAULT_IMAGE_SIZE = 128


class GeneratorSpec(BaseModel):
    """Shape manifest of the residual generator (c7s1-64, d128, d256, 6xR256, u128, u64, c7s1-3)"""

    model_config = ConfigDict(extra='forbid', frozen=True)

    base_filters: int = Field(64, ge=1)
    n_residual: int = Field(6, ge=0)
    n_downsampling: int = Field(2, ge=1)
    initial_kernel: int = Field(7, ge=1)
    down_kernel: int = Field(3, ge=1)
    up_kernel: int = Field(3, ge=1)
    in_channels: int = 3
    out_channels: int = 3


class DiscriminatorSpec(BaseModel):
    """Shape manifest of the PatchGAN discriminator (C64-C128-C256-C512, 4x4 kernels)"""

    model_config = ConfigDict(extra='forbid', frozen=True)

    base_filters: int = Field(64, ge=1)
    n_layers: int = Field(3, ge=1)
    kernel: int = Field(4, ge=1)
    padding: int = Field(1, ge=0)
    leaky_slope: float = Field(0.2, ge=0.0)
    norm: Literal['spectral', 'instance', 'none'] = 'spectral'
    in_channels: int = 3


class PrepareConfig(BaseModel):
    """Curation settings for one domain"""

    model_config = ConfigDict(extra='forbid')

    domain: Domain = 'cartoon'
    sample_rate: float = Field(DEFAULT_SAMPLE_RATE, gt=0)
    trim_fraction: float = Field(DEFAULT_TRIM_FRACTION, ge=0.0, lt=0.5)
    dark_threshold: float = Field(DEFAULT_DARK_THRESHOLD, ge=0.0, le=1.0)
    image_size: int = Field(DEFAULT_IMAGE_SIZE, ge=4)
    train_count: Optional[int] = Field(None, ge=0)
    val_count: Optional[int] = Field(None, ge=0)
    seed: int = 0
    exclude_file: Optional[Path] = None


class FIDConfig(BaseModel):
    """Evaluation settings"""

    model_config = ConfigDict(extra='forbid')

    extractor: ExtractorName = 'inception_v3_pool3'
    w_target: float = Field(0.8, ge=0.0, le=1.0)
    w_input: float = Field(0.2, ge=0.0, le=1.0)
    batch_size: int = Field(32, ge=1)
    linear_dim: int = Field(2, ge=1)
    linear_seed: int = 0

    @model_validator(mode='after')
    def _weights_sum_to_one(self) -> 'FIDConfig':
        if abs(self.w_target + self.w_input - 1.0) > 1e-9:
            raise ValueError(
                f"FID weights must sum to 1, got {self.w_target} + {self.w_input}"
            )
        return self


class TrainConfig(BaseModel):
    """Full training configuration"""

    model_config = ConfigDict(extra='forbid')

    cartoon_root: Optional[Path] = None
    real_root: Optional[Path] = None
    out_dir: Optional[Path] = None

    epochs: int = Field(200, ge=0)
    lambda_cyc: float = Field(10.0, ge=0.0)
    lr: float = Field(2e-4, gt=0.0)
    beta1: float = Field(0.5, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    lr_decay: bool = True
    batch_size: int = Field(1, ge=1)
    image_size: int = Field(DEFAULT_IMAGE_SIZE, ge=4)
    fid_interval: int = Field(5, ge=1)
    use_replay_buffer: bool = False
    buffer_capacity: int = Field(50, ge=0)
    seed: int = 0
    shuffle_seed: int = 0
    num_workers: int = Field(0, ge=0)
    log_every: int = Field(100, ge=1)
    deterministic: bool = True

    generator: GeneratorSpec = GeneratorSpec()
    discriminator: DiscriminatorSpec = DiscriminatorSpec()
    fid: FIDConfig = FIDConfig()

    # Fields that do not change the trajectory of a run
    UNHASHED_FIELDS: ClassVar[Tuple[str, ...]] = (
        'cartoon_root', 'real_root', 'out_dir', 'epochs', 'fid_interval',
        'num_workers', 'log_every',
    )

    def config_hash(self) -> str:
        """SHA-256 over the canonical JSON of the training-relevant fields"""
        payload = self.model_dump(mode='json', exclude=set(self.UNHASHED_FIELDS))
        canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def build_config(model: Type[M],
                 file_path: Optional[Union[str, Path]] = None,
                 overrides: Optional[Dict[str, Any]] = None) -> M:
    """
    Resolve a config model from defaults, an optional JSON file and flag overrides

    Args:
        model: Pydantic model class to build
        file_path: JSON config file; its keys override model defaults
        overrides: Flag values; ``None`` entries are ignored so unset flags fall through

    Returns:
        Validated config instance
    """
    values: Dict[str, Any] = {}
    if file_path is not None:
        file_path = Path(file_path)
        if not file_path.exists():
            raise ConfigError(f"Config file not found: {file_path}")
        try:
            values.update(json.loads(file_path.read_text(encoding='utf-8')))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {file_path} is not valid JSON: {e}") from e

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict):
            merged = dict(values.get(key) or {})
            merged.update({k: v for k, v in value.items() if v is not None})
            if merged:
                values[key] = merged
        else:
            values[key] = value

    try:
        return model.model_validate(values)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def dump_config(config: BaseModel, directory: Union[str, Path]) -> Path:
    """Write the resolved config beside outputs and return its path"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / 'resolved_config.json'
    path.write_text(config.model_dump_json(indent=2), encoding='utf-8')
    logger.info(f"Resolved config written to {path}")
    return path
