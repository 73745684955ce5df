"""rfbkit: remote framebuffer toolkit — synthetic RFB server, pixel-rectangle
codecs, transcoding relay with a throttled link, browser bridge, and an
encoding benchmark harness."""

from .codecs import (
    ENC_COPYRECT,
    ENC_HEXTILE,
    ENC_RAW,
    ENC_RRE,
    ENC_ZLIB,
    EncodingChoice,
    ZlibStream,
    negotiate_encoding,
)
from .errors import (
    BoundsError,
    FramingError,
    HandshakeError,
    ProtocolError,
    RfbError,
    TransportError,
)
from .model import (
    DamageRegion,
    Framebuffer,
    PixelFormat,
    Rect,
    RectUpdate,
    SessionMetrics,
    compute_damage,
    region_normalize,
)
from .scene import Scenario, ScenarioStep, SceneState, load_scenario

__version__ = "0.1.0"

__all__ = [
    "ENC_RAW", "ENC_COPYRECT", "ENC_RRE", "ENC_HEXTILE", "ENC_ZLIB",
    "EncodingChoice", "ZlibStream", "negotiate_encoding",
    "RfbError", "TransportError", "HandshakeError", "ProtocolError", "FramingError", "BoundsError",
    "PixelFormat", "Framebuffer", "Rect", "RectUpdate", "DamageRegion", "SessionMetrics",
    "compute_damage", "region_normalize",
    "Scenario", "ScenarioStep", "SceneState", "load_scenario",
    "__version__",
]
