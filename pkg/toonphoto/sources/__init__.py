"""Candidate image sources for corpus curation"""

from .base import BaseSource
from .photos import PhotoFolderSource
from .video import VideoFrameSource, extract_frames, extract_video_dir

__all__ = [
    'BaseSource',
    'PhotoFolderSource',
    'VideoFrameSource',
    'extract_frames',
    'extract_video_dir',
]
