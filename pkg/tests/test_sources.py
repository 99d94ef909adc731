"""Frame extraction from video and photo folders"""

import json

import cv2
import numpy as np
import pytest
from PIL import Image

from toonphoto.errors import ConfigError, DecodeError, EmptyCorpusError
from toonphoto.imagedata import FRAMES_RECORD_NAME, build_manifest
from toonphoto.sources import PhotoFolderSource, VideoFrameSource, extract_frames, extract_video_dir
from toonphoto.sources.video import sample_indices, trim_reason


def test_trim_reason_on_100_second_timeline():
    assert trim_reason(4.0, 100.0, 0.05) == 'head_trim'
    assert trim_reason(5.0, 100.0, 0.05) == 'none'
    assert trim_reason(95.0, 100.0, 0.05) == 'tail_trim'
    assert trim_reason(96.0, 100.0, 0.05) == 'tail_trim'
    assert trim_reason(50.0, 100.0, 0.05) == 'none'


def test_zero_trim_rejects_nothing():
    assert all(trim_reason(t, 10.0, 0.0) == 'none' for t in np.arange(0, 10, 0.5))


def test_sample_indices_at_half_rate():
    assert sample_indices(10, 2.0, 1.0) == [0, 2, 4, 6, 8]
    assert sample_indices(10, 1.0, 1.0) == list(range(10))


def test_ten_frame_clip_with_twenty_percent_trim(gray_video, tmp_path):
    records = extract_frames(gray_video, sample_rate=1.0, trim_fraction=0.2, out_dir=tmp_path / 'frames')
    accepted = [r.frame_index for r in records if r.accepted]
    assert accepted == [2, 3, 4, 5, 6, 7]
    reasons = {r.frame_index: r.reject_reason for r in records}
    assert reasons[0] == reasons[1] == 'head_trim'
    assert reasons[8] == reasons[9] == 'tail_trim'
    assert len(list((tmp_path / 'frames').glob('*.png'))) == 6
    saved = json.loads((tmp_path / 'frames' / FRAMES_RECORD_NAME).read_text())
    assert len(saved['records']) == 10


def test_dark_threshold_rejects_dim_frames(gray_video, tmp_path):
    # Frames 0..4 have gray levels 100..140 (luminance <= 0.549), frames 5..9 are >= 0.588
    records = extract_frames(gray_video, 1.0, 0.0, tmp_path / 'frames', dark_threshold=0.57)
    dark = [r.frame_index for r in records if r.reject_reason == 'dark']
    assert dark == [0, 1, 2, 3, 4]
    assert all(0.0 <= r.mean_luminance <= 1.0 for r in records)


def test_default_threshold_drops_black_frames(tmp_path):
    path = tmp_path / 'night.avi'
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*'MJPG'), 1.0, (32, 32))
    for k in range(6):
        writer.write(np.full((32, 32, 3), 10 if k % 2 else 200, dtype=np.uint8))
    writer.release()
    records = extract_frames(path, 1.0, 0.0, tmp_path / 'frames')
    assert [r.frame_index for r in records if r.reject_reason == 'dark'] == [1, 3, 5]
    assert [r.frame_index for r in records if r.accepted] == [0, 2, 4]

    photos = tmp_path / 'photos'
    photos.mkdir()
    Image.fromarray(np.full((20, 20, 3), 5, dtype=np.uint8)).save(photos / 'night.png')
    assert PhotoFolderSource(photos).scan()[0].reject_reason == 'dark'


def test_everything_trimmed_is_an_empty_corpus(gray_video, tmp_path):
    with pytest.raises(EmptyCorpusError):
        extract_frames(gray_video, 1.0, 0.2, tmp_path / 'frames', dark_threshold=1.0)


def test_unreadable_video_is_a_decode_error(tmp_path):
    bogus = tmp_path / 'broken.mp4'
    bogus.write_bytes(b'not a video')
    with pytest.raises(DecodeError):
        extract_frames(bogus, out_dir=tmp_path / 'frames')
    with pytest.raises(DecodeError, match='missing'):
        extract_video_dir(tmp_path / 'missing', tmp_path / 'frames')


def test_invalid_arguments(gray_video):
    with pytest.raises(ConfigError):
        VideoFrameSource(gray_video, sample_rate=0)
    with pytest.raises(ConfigError):
        VideoFrameSource(gray_video, trim_fraction=0.5)


def test_extracted_frames_feed_build_manifest(gray_video, tmp_path):
    extract_video_dir(gray_video.parent, tmp_path / 'frames', 1.0, 0.2)
    manifests = build_manifest(tmp_path / 'frames', 'cartoon', (4, 2), out_root=tmp_path / 'corpus',
                               image_size=16)
    sources = {r.source_id for m in manifests.values() for r in m.records}
    assert sources == {'clip'}
    assert sorted(r.frame_index for m in manifests.values() for r in m.records) == [2, 3, 4, 5, 6, 7]


def test_photo_folder_source(tmp_path):
    photos = tmp_path / 'photos'
    photos.mkdir()
    Image.fromarray(np.full((20, 20, 3), 230, dtype=np.uint8)).save(photos / 'beach.jpg')
    Image.fromarray(np.full((20, 20, 3), 5, dtype=np.uint8)).save(photos / 'night.png')
    source = PhotoFolderSource(photos, dark_threshold=0.15)
    records = source.extract(tmp_path / 'out')
    by_id = {r.source_id: r for r in records}
    assert by_id['beach'].accepted and by_id['beach'].image_file == 'beach.png'
    assert by_id['night'].reject_reason == 'dark'
    assert (tmp_path / 'out' / 'beach.png').exists()
    assert not (tmp_path / 'out' / 'night.png').exists()
