"""Video frame source for the cartoon domain"""

from pathlib import Path
from typing import Dict, List, Optional, Union

import cv2
import numpy as np

from ..config import DEFAULT_DARK_THRESHOLD, DEFAULT_SAMPLE_RATE, DEFAULT_TRIM_FRACTION
from ..errors import ConfigError, DecodeError, EmptyCorpusError
from ..imagedata import FrameRecord, save_frame_records
from .base import BaseSource

VIDEO_EXTENSIONS = ('.mp4', '.avi', '.mkv', '.mov', '.webm', '.m4v')


def trim_reason(timestamp_s: float, duration_s: float, trim_fraction: float) -> str:
    """'head_trim', 'tail_trim' or 'none' for a timestamp on a timeline of duration_s"""
    if timestamp_s < trim_fraction * duration_s:
        return 'head_trim'
    if trim_fraction > 0 and timestamp_s >= (1.0 - trim_fraction) * duration_s:
        return 'tail_trim'
    return 'none'


def sample_indices(frame_count: int, fps: float, sample_rate: float) -> List[int]:
    """Frame indices closest to the instants k / sample_rate, k = 0, 1, ..."""
    duration = frame_count / fps
    indices = []
    k = 0
    while True:
        t = k / sample_rate
        if t >= duration:
            break
        idx = min(int(round(t * fps)), frame_count - 1)
        if not indices or idx != indices[-1]:
            indices.append(idx)
        k += 1
    return indices


class VideoFrameSource(BaseSource):
    """Samples frames from one video, trimming the head and tail of the timeline"""

    def __init__(self, video_path: Union[str, Path],
                 sample_rate: float = DEFAULT_SAMPLE_RATE,
                 trim_fraction: float = DEFAULT_TRIM_FRACTION,
                 dark_threshold: Optional[float] = DEFAULT_DARK_THRESHOLD):
        if sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {sample_rate}")
        if not 0.0 <= trim_fraction < 0.5:
            raise ConfigError(f"trim_fraction must lie in [0, 0.5), got {trim_fraction}")
        self.video_path = Path(video_path)
        self.sample_rate = sample_rate
        self.trim_fraction = trim_fraction
        super().__init__(f'video:{self.video_path.stem}', dark_threshold)

    def list_items(self) -> List[Dict]:
        fps, count = self._read_header()
        return [{'id': self.video_path.stem, 'path': str(self.video_path),
                 'fps': fps, 'frame_count': count, 'duration_s': count / fps}]

    def _open(self) -> cv2.VideoCapture:
        if not self.video_path.is_file():
            raise DecodeError(f"Video not found: {self.video_path}")
        cap = cv2.VideoCapture(str(self.video_path))
        if not cap.isOpened():
            raise DecodeError(f"Cannot open video: {self.video_path}")
        return cap

    def _read_header(self):
        cap = self._open()
        try:
            fps = cap.get(cv2.CAP_PROP_FPS)
            count = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
            if count <= 0:
                # Container without a frame count; count by grabbing
                count = 0
                while cap.grab():
                    count += 1
        finally:
            cap.release()
        if not fps or fps <= 0 or count <= 0:
            raise DecodeError(f"Video has no decodable frames: {self.video_path}")
        return float(fps), count

    def extract(self, out_dir: Union[str, Path]) -> List[FrameRecord]:
        """
        Sample, trim and dark-filter frames, writing accepted ones as PNG

        Returns:
            All sampled records, accepted and rejected
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        fps, frame_count = self._read_header()
        duration = frame_count / fps
        wanted = sample_indices(frame_count, fps, self.sample_rate)
        wanted_set = set(wanted)
        self.logger.info(f"{self.video_path.name}: {frame_count} frames at {fps:.2f} fps, "
                         f"sampling {len(wanted)}")

        records = []
        cap = self._open()
        try:
            index = 0
            last = wanted[-1] if wanted else -1
            while index <= last:
                if not cap.grab():
                    break
                if index in wanted_set:
                    ok, bgr = cap.retrieve()
                    if not ok:
                        raise DecodeError(f"Failed to decode frame {index} of {self.video_path}")
                    records.append(self._record(bgr, index, index / fps, duration, out_dir))
                index += 1
        finally:
            cap.release()

        if not any(r.accepted for r in records):
            raise EmptyCorpusError(
                f"No frames left in {self.video_path} after sampling at {self.sample_rate} fps "
                f"and trimming {self.trim_fraction:.0%} at each end"
            )
        self.summarize(records)
        return records

    def _record(self, bgr: np.ndarray, index: int, timestamp: float,
                duration: float, out_dir: Path) -> FrameRecord:
        rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
        accepted, luminance = self._judge(rgb)
        reason = trim_reason(timestamp, duration, self.trim_fraction)
        if reason == 'none' and not accepted:
            reason = 'dark'
        accepted = reason == 'none'
        image_file = None
        if accepted:
            image_file = f"{self.video_path.stem}_{index:06d}.png"
            cv2.imwrite(str(out_dir / image_file), bgr)
        return FrameRecord(
            source_id=self.video_path.stem,
            frame_index=index,
            timestamp_s=round(timestamp, 6),
            mean_luminance=luminance,
            accepted=accepted,
            reject_reason=reason,
            image_file=image_file,
        )


def extract_frames(video_path: Union[str, Path],
                   sample_rate: float = DEFAULT_SAMPLE_RATE,
                   trim_fraction: float = DEFAULT_TRIM_FRACTION,
                   out_dir: Optional[Union[str, Path]] = None,
                   dark_threshold: Optional[float] = DEFAULT_DARK_THRESHOLD) -> List[FrameRecord]:
    """
    Extract frames from one video into out_dir and record every decision

    Args:
        video_path: Video file
        sample_rate: Frames per second to sample
        trim_fraction: Fraction of the timeline rejected at each end
        out_dir: Destination for PNG frames and frames.json (defaults to <video>_frames)
        dark_threshold: Minimum mean luminance; None disables the dark filter

    Returns:
        List of FrameRecord, accepted and rejected
    """
    video_path = Path(video_path)
    out_dir = Path(out_dir) if out_dir else video_path.with_name(video_path.stem + '_frames')
    source = VideoFrameSource(video_path, sample_rate, trim_fraction, dark_threshold)
    records = source.extract(out_dir)
    save_frame_records(records, out_dir)
    return records


def extract_video_dir(video_dir: Union[str, Path], out_dir: Union[str, Path],
                      sample_rate: float = DEFAULT_SAMPLE_RATE,
                      trim_fraction: float = DEFAULT_TRIM_FRACTION,
                      dark_threshold: Optional[float] = DEFAULT_DARK_THRESHOLD) -> List[FrameRecord]:
    """Extract every video of a directory into one frame folder with a combined frames.json"""
    video_dir = Path(video_dir)
    if not video_dir.is_dir():
        raise DecodeError(f"Video directory not found: {video_dir}")
    videos = sorted(p for p in video_dir.iterdir() if p.suffix.lower() in VIDEO_EXTENSIONS)
    if not videos:
        raise EmptyCorpusError(f"No videos found in {video_dir}")
    records: List[FrameRecord] = []
    for video in videos:
        source = VideoFrameSource(video, sample_rate, trim_fraction, dark_threshold)
        records.extend(source.extract(out_dir))
    save_frame_records(records, out_dir)
    return records
