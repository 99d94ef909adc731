"""Base class for image sources feeding the curation pipeline"""

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Optional, Union

from ..imagedata import FrameRecord, dark_frame_filter


class BaseSource(ABC):
    """Abstract base class for candidate-image sources"""

    def __init__(self, source_name: str, dark_threshold: Optional[float] = None):
        self.source_name = source_name
        self.logger = logging.getLogger(source_name)
        self.dark_threshold = dark_threshold

    @abstractmethod
    def list_items(self) -> List[Dict]:
        """List the raw inputs this source would read"""
        pass

    @abstractmethod
    def extract(self, out_dir: Union[str, Path]) -> List[FrameRecord]:
        """Write accepted images to out_dir and return every record"""
        pass

    def _judge(self, frame) -> tuple:
        """Apply the dark filter when a threshold is configured"""
        threshold = self.dark_threshold if self.dark_threshold is not None else 0.0
        return dark_frame_filter(frame, threshold)

    def summarize(self, records: List[FrameRecord]) -> Dict[str, int]:
        """Counts per curation decision"""
        summary = {'total': len(records), 'accepted': 0}
        for record in records:
            if record.accepted:
                summary['accepted'] += 1
            else:
                summary[record.reject_reason] = summary.get(record.reject_reason, 0) + 1
        self.logger.info(f"{self.source_name}: {summary}")
        return summary
