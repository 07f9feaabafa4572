"""EEG-based human-robot trust recognition: preprocessing, DE features, spatial images, ViT and baselines."""
from .errors import ConfigError, DataError, EEGTrustError, NumericalError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "EEGTrustError", "NumericalError", "__version__"]
