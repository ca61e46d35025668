"""Learned joint source-channel coding of images with windowed-attention codecs."""

from .codec import CodecConfig, preset
from .model import JSCCModel

__all__ = ["CodecConfig", "JSCCModel", "preset"]
__version__ = "0.1.0"
