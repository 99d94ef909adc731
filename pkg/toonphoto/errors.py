"""Exception hierarchy for toonphoto

Each error also derives from the builtin a caller would naturally catch,
so ``except ValueError`` style handling keeps working.
"""

from typing import Dict, Optional


class ToonPhotoError(Exception):
    """Base class for all toonphoto errors"""


class DecodeError(ToonPhotoError, IOError):
    """A video or image could not be decoded"""


class EmptyCorpusError(ToonPhotoError, ValueError):
    """No usable frames remained after sampling and trimming"""


class CorpusSizeError(ToonPhotoError, ValueError):
    """Not enough accepted images for the requested split"""

    def __init__(self, required: int, available: int, total: int):
        self.required = required
        self.available = available
        self.total = total
        super().__init__(
            f"Corpus too small: need {required} accepted images, "
            f"found {available} accepted out of {total} total"
        )


class IntegrityError(ToonPhotoError, FileNotFoundError):
    """A manifest references an image that is missing or malformed"""


class ShapeError(ToonPhotoError, ValueError):
    """Tensor or matrix shape precondition violated"""


class ConfigError(ToonPhotoError, ValueError):
    """Invalid configuration value"""


class SampleSizeError(ToonPhotoError, ValueError):
    """Too few samples to estimate statistics"""


class NumericalError(ToonPhotoError, ArithmeticError):
    """A numerical routine failed to produce a usable result"""


class CheckpointError(ToonPhotoError, RuntimeError):
    """A checkpoint is missing, corrupt or incompatible"""


class DownloadError(ToonPhotoError, IOError):
    """A remote weight file could not be fetched"""


class NonFiniteLossError(ToonPhotoError, FloatingPointError):
    """A training loss became NaN or infinite"""

    def __init__(self, component: str, report: Optional[Dict[str, float]] = None):
        self.component = component
        self.report = dict(report or {})
        super().__init__(f"Non-finite loss in component '{component}': {self.report}")


class EmptyLogError(ToonPhotoError, ValueError):
    """A training log holds none of the requested entries"""
