"""Reference embedding HTTP service implementing the veritab wire protocol."""

from .config import DEFAULT_MODEL, ServiceConfig
from .conformance import ConformanceResult, conformance_check
from .encoder import Encoder, EncoderLoadError, build_test_model, bundled_paraphrases, load_encoder

__version__ = "0.1.0"
