"""
Integrity checks for curated corpora
Validates that manifests and the images on disk agree before training
"""

import logging
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Union

from PIL import Image

from .errors import IntegrityError
from .imagedata import SPLITS, DatasetManifest

logger = logging.getLogger(__name__)

REPORT_NAME = 'integrity_report.txt'


class ManifestIntegrityChecker:
    """
    Checks manifests for missing or malformed images, inconsistent records and split leakage
    """

    def __init__(self):
        self.issues: List[str] = []
        self.warnings: List[str] = []
        self.validations: List[str] = []

    @property
    def passed(self) -> bool:
        return not self.issues

    def check_manifest(self, manifest: DatasetManifest) -> None:
        """
        Check that every accepted record points at an RGB image of the manifest's size
        """
        name = f"{manifest.domain}/{manifest.split}"
        size = manifest.image_size
        missing, malformed, inconsistent = [], [], []

        for record in manifest.records:
            if record.accepted and record.reject_reason != 'none':
                inconsistent.append(record.image_file)
            if not record.accepted:
                continue
            path = (manifest.root or Path('.')) / (record.image_file or '')
            if not record.image_file or not path.is_file():
                missing.append(record.image_file)
                continue
            try:
                with Image.open(path) as img:
                    if img.size != (size, size) or img.mode != 'RGB':
                        malformed.append(f"{record.image_file} ({img.size[0]}x{img.size[1]} {img.mode})")
            except OSError:
                malformed.append(f"{record.image_file} (undecodable)")

        if missing:
            self.issues.append(f"{name}: {len(missing)} missing images, first {missing[0]}")
        if malformed:
            self.issues.append(f"{name}: {len(malformed)} malformed images, first {malformed[0]}")
        if inconsistent:
            self.issues.append(f"{name}: {len(inconsistent)} accepted records carry a reject reason")
        if not manifest.records:
            self.warnings.append(f"{name}: manifest is empty")

        if not (missing or malformed or inconsistent):
            self.validations.append(f"{name}: {len(manifest)} images of {size}x{size}x3")

    def check_disjoint(self, train: DatasetManifest, val: DatasetManifest) -> None:
        """Train and val must not share a source image"""
        name = train.domain
        keys = lambda m: {(r.source_id, r.frame_index) for r in m.records}  # noqa: E731
        shared = keys(train) & keys(val)
        if shared:
            self.issues.append(f"{name}: {len(shared)} source images appear in both train and val")
        else:
            self.validations.append(f"{name}: train and val are disjoint")

    def check_corpus(self, domain_root: Union[str, Path]) -> bool:
        """
        Check both splits under <domain_root>/train and <domain_root>/val

        Returns:
            True when no issue was found
        """
        domain_root = Path(domain_root)
        manifests = {}
        for split in SPLITS:
            try:
                manifests[split] = DatasetManifest.load(domain_root / split)
            except IntegrityError as e:
                self.issues.append(str(e))
                continue
            self.check_manifest(manifests[split])
        if len(manifests) == len(SPLITS):
            self.check_disjoint(manifests['train'], manifests['val'])
        self._log_summary(domain_root)
        return self.passed

    def _log_summary(self, domain_root: Path) -> None:
        for issue in self.issues:
            logger.error(f"{domain_root}: {issue}")
        for warning in self.warnings:
            logger.warning(f"{domain_root}: {warning}")
        verdict = 'validated' if self.passed else f"{len(self.issues)} issues"
        logger.info(f"Integrity check of {domain_root}: {verdict}")

    def save_report(self, path: Union[str, Path], title: Optional[str] = None) -> Path:
        """
        Save a detailed integrity report to file
        """
        path = Path(path)
        with open(path, 'w', encoding='utf-8') as f:
            f.write("CORPUS INTEGRITY REPORT\n")
            if title:
                f.write(f"{title}\n")
            f.write(f"Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")
            f.write("=" * 80 + "\n\n")

            for heading, items in (('CRITICAL ISSUES', self.issues),
                                   ('WARNINGS', self.warnings),
                                   ('VALIDATED', self.validations)):
                if items:
                    f.write(f"{heading}:\n")
                    for item in items:
                        f.write(f"- {item}\n")
                    f.write("\n")

            f.write("=" * 80 + "\n")
            f.write(f"Total Issues: {len(self.issues)}\n")
            f.write(f"Total Warnings: {len(self.warnings)}\n")
            f.write(f"Total Validated: {len(self.validations)}\n")
        logger.info(f"Integrity report saved to {path}")
        return path
