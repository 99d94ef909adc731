"""Photo folder source for the real domain"""

from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from ..config import DEFAULT_DARK_THRESHOLD
from ..imagedata import FrameRecord, list_images, load_image, save_frame_records
from .base import BaseSource


class PhotoFolderSource(BaseSource):
    """Treats each photo in a folder as a single-frame candidate"""

    def __init__(self, photo_dir: Union[str, Path],
                 dark_threshold: Optional[float] = DEFAULT_DARK_THRESHOLD):
        self.photo_dir = Path(photo_dir)
        super().__init__(f'photos:{self.photo_dir.name}', dark_threshold)

    def list_items(self) -> List[Dict]:
        return [{'id': p.stem, 'path': str(p)} for p in list_images(self.photo_dir)]

    def scan(self) -> List[FrameRecord]:
        """Judge photos in place without copying them"""
        records = []
        for path in list_images(self.photo_dir):
            frame = np.asarray(load_image(path), dtype=np.uint8)
            accepted, luminance = self._judge(frame)
            records.append(FrameRecord(
                source_id=path.stem,
                frame_index=0,
                timestamp_s=0.0,
                mean_luminance=luminance,
                accepted=accepted,
                reject_reason='none' if accepted else 'dark',
                image_file=path.name,
            ))
        return records

    def extract(self, out_dir: Union[str, Path]) -> List[FrameRecord]:
        """Copy accepted photos as PNG into out_dir"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        records = self.scan()
        for record in records:
            if record.accepted:
                name = Path(record.image_file).stem + '.png'
                load_image(self.photo_dir / record.image_file).save(out_dir / name, format='PNG')
                record.image_file = name
            else:
                record.image_file = None
        save_frame_records(records, out_dir)
        self.summarize(records)
        return records
