"""
toonphoto

Unpaired cartoon-to-photo translation: corpus curation from videos and photo
folders, a cycle-consistent adversarial model with spectrally normalized
PatchGAN discriminators, and plain and weighted FID evaluation.
"""

__version__ = "0.1.0"

from .config import DiscriminatorSpec, FIDConfig, GeneratorSpec, PrepareConfig, TrainConfig
from .data_integrity_checker import ManifestIntegrityChecker
from .errors import ToonPhotoError
from .fid import FIDStats, compute_stats, frechet_distance, weighted_fid
from .imagedata import DatasetManifest, FrameRecord, ImageBatch, build_manifest, load_batches
from .models import Generator, PatchDiscriminator, build_discriminator, build_generator
from .toy import write_toy_corpus
from .trainer import TrainState, fit, train_step, translate
from .training_log import TrainingLog, plot_fid_curves

__all__ = [
    'DatasetManifest',
    'DiscriminatorSpec',
    'FIDConfig',
    'FIDStats',
    'FrameRecord',
    'Generator',
    'GeneratorSpec',
    'ImageBatch',
    'ManifestIntegrityChecker',
    'PatchDiscriminator',
    'PrepareConfig',
    'ToonPhotoError',
    'TrainConfig',
    'TrainState',
    'TrainingLog',
    'build_discriminator',
    'build_generator',
    'build_manifest',
    'compute_stats',
    'fit',
    'frechet_distance',
    'load_batches',
    'plot_fid_curves',
    'train_step',
    'translate',
    'weighted_fid',
    'write_toy_corpus',
    '__version__',
]
