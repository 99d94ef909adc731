"""Download and cache pretrained backbone weights with checksum pinning"""

import hashlib
import logging
import os
from pathlib import Path
from typing import Optional

import requests
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from .errors import CheckpointError, DownloadError

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    # python-dotenv is optional, environment variables can be set directly
    pass

logger = logging.getLogger(__name__)

# torchvision's port of the TF Inception-v3 weights; the file name embeds its SHA-256 prefix
DEFAULT_INCEPTION_URL = 'https://download.pytorch.org/models/inception_v3_google-0cc3c7bd.pth'
DEFAULT_INCEPTION_SHA256 = '0cc3c7bd'


def cache_dir() -> Path:
    return Path(os.getenv('TOONPHOTO_CACHE_DIR', Path.home() / '.cache' / 'toonphoto'))


def inception_url() -> str:
    return os.getenv('TOONPHOTO_INCEPTION_URL', DEFAULT_INCEPTION_URL)


def inception_sha256() -> str:
    return os.getenv('TOONPHOTO_INCEPTION_SHA256', DEFAULT_INCEPTION_SHA256)


def sha256_of(path: Path, chunk_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()


class WeightFetcher:
    """Fetches a weight file once, verifies it, and serves it from the cache afterwards"""

    def __init__(self, session: Optional[requests.Session] = None, timeout: int = 60):
        self.session = session or requests.Session()
        self.timeout = timeout

    @retry(stop=stop_after_attempt(3), wait=wait_exponential(multiplier=1, max=10),
           retry=retry_if_exception_type(requests.exceptions.RequestException), reraise=True)
    def _download(self, url: str, target: Path) -> None:
        response = self.session.get(url, stream=True, timeout=self.timeout)
        response.raise_for_status()
        with open(target, 'wb') as f:
            for chunk in response.iter_content(chunk_size=1 << 20):
                if chunk:
                    f.write(chunk)

    def fetch(self, url: str, sha256_prefix: str, directory: Optional[Path] = None) -> Path:
        """
        Return a verified local copy of url

        Args:
            url: Remote weight file
            sha256_prefix: Leading hex digits the file's SHA-256 must start with
            directory: Cache directory (defaults to TOONPHOTO_CACHE_DIR)
        """
        directory = Path(directory) if directory else cache_dir()
        directory.mkdir(parents=True, exist_ok=True)
        target = directory / url.rstrip('/').split('/')[-1]
        if target.exists() and sha256_of(target).startswith(sha256_prefix):
            return target

        logger.info(f"Downloading {url} -> {target}")
        partial = target.with_suffix(target.suffix + '.part')
        try:
            self._download(url, partial)
        except requests.exceptions.RequestException as e:
            logger.error(f"Download failed: {e}")
            partial.unlink(missing_ok=True)
            raise DownloadError(f"Download of {url} failed: {e}") from e
        digest = sha256_of(partial)
        if not digest.startswith(sha256_prefix):
            partial.unlink()
            raise CheckpointError(f"Checksum mismatch for {url}: got {digest[:len(sha256_prefix)]}, "
                                  f"pinned {sha256_prefix}")
        os.replace(partial, target)
        return target
