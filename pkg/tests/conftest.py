"""Shared fixtures: tiny network specs, a toy two-domain corpus and a synthetic video"""

import logging

import cv2
import numpy as np
import pytest

from toonphoto.config import DiscriminatorSpec, FIDConfig, GeneratorSpec, TrainConfig
from toonphoto.toy import write_toy_corpus

logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

TOY_SIZE = 32


@pytest.fixture
def tiny_generator_spec():
    return GeneratorSpec(base_filters=4, n_residual=1)


@pytest.fixture
def tiny_discriminator_spec():
    # Receptive field 16, so 32x32 inputs give a 14x14 patch grid
    return DiscriminatorSpec(base_filters=4, n_layers=1)


@pytest.fixture
def tiny_config(tmp_path, tiny_generator_spec, tiny_discriminator_spec):
    return TrainConfig(
        out_dir=tmp_path / 'run',
        epochs=2,
        batch_size=4,
        image_size=TOY_SIZE,
        fid_interval=1,
        lr_decay=False,
        generator=tiny_generator_spec,
        discriminator=tiny_discriminator_spec,
        fid=FIDConfig(extractor='test_linear', batch_size=8),
    )


@pytest.fixture
def toy_corpus(tmp_path):
    """{domain: {split: manifest}} with 12 train and 4 val images per domain"""
    return write_toy_corpus(tmp_path / 'corpus', split_counts=(12, 4), size=TOY_SIZE, seed=0)


@pytest.fixture
def gray_video(tmp_path):
    """10 bright frames at 1 fps in an MJPG AVI; frame k has gray level 100 + 10k"""
    path = tmp_path / 'videos' / 'clip.avi'
    path.parent.mkdir(parents=True)
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*'MJPG'), 1.0, (32, 32))
    for k in range(10):
        writer.write(np.full((32, 32, 3), 100 + 10 * k, dtype=np.uint8))
    writer.release()
    return path
