"""Curation records, dark filter, manifests and the batch loader"""

import numpy as np
import pytest
import torch
from PIL import Image

from toonphoto.errors import ConfigError, CorpusSizeError, IntegrityError, ShapeError
from toonphoto.imagedata import (
    DatasetManifest, FrameRecord, ImageBatch, build_manifest, dark_frame_filter, denormalize,
    load_batches, normalize, read_exclusion_list,
)


def write_images(directory, count, size=40, value=180):
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        array = np.full((size, size, 3), value, dtype=np.uint8)
        array[i % size, :, 0] = 20
        Image.fromarray(array).save(directory / f'img_{i:02d}.png')
    return directory


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

def test_accepted_record_cannot_carry_reject_reason():
    with pytest.raises(ValueError):
        FrameRecord('clip', 0, 0.0, 0.5, accepted=True, reject_reason='dark')


def test_record_luminance_must_be_unit_interval():
    with pytest.raises(ValueError):
        FrameRecord('clip', 0, 0.0, 1.5, accepted=False, reject_reason='dark')


def test_image_batch_validation():
    with pytest.raises(ShapeError):
        ImageBatch(torch.zeros(3, 8, 8), 'cartoon')
    with pytest.raises(ShapeError):
        ImageBatch(torch.zeros(1, 1, 8, 8), 'cartoon')
    with pytest.raises(ValueError):
        ImageBatch(torch.full((1, 3, 8, 8), 1.5), 'real')
    assert ImageBatch(torch.zeros(2, 3, 8, 8), 'real').size == 2


# ---------------------------------------------------------------------------
# Dark filter
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('level, expected', [(0.0, (False, 0.0)), (1.0, (True, 1.0)), (0.10, (False, 0.10))])
def test_dark_frame_filter_examples(level, expected):
    accepted, luminance = dark_frame_filter(np.full((8, 8, 3), level), 0.15)
    assert accepted is expected[0]
    assert luminance == pytest.approx(expected[1], abs=1e-12)


def test_dark_frame_filter_uses_bt601_weights():
    frame = np.zeros((4, 4, 3))
    frame[..., 1] = 1.0
    _, luminance = dark_frame_filter(frame, 0.0)
    assert luminance == pytest.approx(0.587)


def test_dark_frame_filter_is_monotone_in_threshold():
    rng = np.random.default_rng(0)
    frames = [rng.uniform(0, 1, (6, 6, 3)) * rng.uniform() for _ in range(50)]
    previous = set()
    for threshold in np.linspace(1.0, 0.0, 11):
        accepted = {i for i, f in enumerate(frames) if dark_frame_filter(f, threshold)[0]}
        assert previous <= accepted
        previous = accepted


def test_dark_frame_filter_rejects_bad_threshold():
    with pytest.raises(ConfigError):
        dark_frame_filter(np.zeros((2, 2, 3)), 1.5)


# ---------------------------------------------------------------------------
# Pixel mapping
# ---------------------------------------------------------------------------

def test_mid_gray_maps_to_zero():
    assert float(normalize(torch.tensor(0.5))) == 0.0


def test_denormalize_inverts_normalize_on_8bit_values():
    pixels = torch.arange(256, dtype=torch.uint8)
    restored = denormalize(normalize(pixels.float() / 255.0))
    assert torch.equal(restored, pixels)


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def test_build_manifest_is_deterministic(tmp_path):
    images = write_images(tmp_path / 'raw', 10)
    first = build_manifest(images, 'cartoon', (8, 2), seed=7, out_root=tmp_path / 'a', image_size=32)
    second = build_manifest(images, 'cartoon', (8, 2), seed=7, out_root=tmp_path / 'b', image_size=32)
    for split in ('train', 'val'):
        a = (tmp_path / 'a' / 'cartoon' / split / 'manifest.json').read_bytes()
        b = (tmp_path / 'b' / 'cartoon' / split / 'manifest.json').read_bytes()
        assert a == b
    assert len(first['train']) == 8 and len(second['val']) == 2


def test_build_manifest_splits_are_disjoint_and_resized(tmp_path):
    images = write_images(tmp_path / 'raw', 10, size=48)
    manifests = build_manifest(images, 'real', (6, 3), seed=1, out_root=tmp_path / 'out', image_size=32)
    train = {r.image_file for r in manifests['train'].records}
    val = {r.image_file for r in manifests['val'].records}
    assert not train & val
    for path in manifests['train'].image_paths():
        with Image.open(path) as img:
            assert img.size == (32, 32)


def test_build_manifest_reports_counts_when_too_small(tmp_path):
    images = write_images(tmp_path / 'raw', 10)
    with pytest.raises(CorpusSizeError) as err:
        build_manifest(images, 'cartoon', (8, 3), out_root=tmp_path / 'out')
    assert 'need 11' in str(err.value) and 'found 10' in str(err.value)


def test_build_manifest_drops_excluded_names(tmp_path):
    images = write_images(tmp_path / 'raw', 10)
    exclusion = tmp_path / 'exclude.txt'
    exclusion.write_text('# hand-picked\nimg_00.png\n\nimg_01.png\n')
    names = read_exclusion_list(exclusion)
    manifests = build_manifest(images, 'cartoon', (6, 2), out_root=tmp_path / 'out',
                               image_size=32, exclude=names)
    kept = {r.image_file for m in manifests.values() for r in m.records}
    assert 'img_00.png' not in kept and 'img_01.png' not in kept
    with pytest.raises(CorpusSizeError):
        build_manifest(images, 'cartoon', (8, 1), out_root=tmp_path / 'out2', exclude=names)


def test_manifest_load_round_trip(toy_corpus):
    manifest = toy_corpus['cartoon']['train']
    loaded = DatasetManifest.load(manifest.root)
    assert loaded.records == manifest.records
    assert loaded.image_size == manifest.image_size


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def test_load_batches_keeps_last_partial_batch(tmp_path):
    images = write_images(tmp_path / 'raw', 6)
    manifest = build_manifest(images, 'cartoon', (6, 0), out_root=tmp_path / 'out', image_size=16)['train']
    sizes = [batch.size for batch in load_batches(manifest, 4)]
    assert sizes == [4, 2]


def test_load_batches_range_and_determinism(toy_corpus):
    manifest = toy_corpus['real']['train']
    first = [b.names for b in load_batches(manifest, 4, shuffle_seed=3, epoch=0)]
    second = [b.names for b in load_batches(manifest, 4, shuffle_seed=3, epoch=0)]
    reshuffled = [b.names for b in load_batches(manifest, 4, shuffle_seed=3, epoch=1)]
    assert first == second
    assert first != reshuffled
    for batch in load_batches(manifest, 5):
        assert batch.data.min() >= -1.0 and batch.data.max() <= 1.0
        assert batch.domain_tag == 'real'


def test_load_batches_names_missing_file(toy_corpus):
    manifest = toy_corpus['cartoon']['val']
    missing = manifest.image_paths()[0]
    missing.unlink()
    with pytest.raises(IntegrityError, match=missing.name):
        list(load_batches(manifest, 2))
