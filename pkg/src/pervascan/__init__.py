"""Book-barcode image computation: EAN-13 decoding plus the online/offline service."""

from .barcode import DecodeReport, Ean13, decode_image, decode_scanline
from .imagekit import Degradation, GrayImage, RenderSpec, degrade, load_pgm, render_ean13, save_pgm

__version__ = "0.1.0"

__all__ = [
    "DecodeReport",
    "Degradation",
    "Ean13",
    "GrayImage",
    "RenderSpec",
    "decode_image",
    "decode_scanline",
    "degrade",
    "load_pgm",
    "render_ean13",
    "save_pgm",
    "__version__",
]
