"""Grayscale raster type, binary PGM I/O, symbol rendering, and degradation.

Everything here is a pure function over immutable values: GrayImage pixels
are locked after construction, so images are safe to share across threads.
The renderer plus the deterministic degradation pipeline double as the test
oracle for the decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .barcode import Ean13, symbol_modules
from .rng import gaussian


class PgmError(ValueError):
    """Base for PGM parse failures."""

    code = "invalid_image"


class BadMagic(PgmError):
    pass


class BadHeader(PgmError):
    pass


class UnsupportedMaxval(PgmError):
    pass


class TruncatedPayload(PgmError):
    pass


class GrayImage:
    """Immutable 8-bit grayscale raster, row-major."""

    __slots__ = ("_data",)

    def __init__(self, width: int, height: int, pixels):
        if width < 1 or height < 1:
            raise ValueError(f"dimensions must be >= 1, got {width}x{height}")
        if isinstance(pixels, (bytes, bytearray, memoryview)):
            arr = np.frombuffer(pixels, dtype=np.uint8)
        else:
            arr = np.asarray(pixels).reshape(-1)
        if arr.size != width * height:
            raise ValueError(
                f"expected {width * height} pixels for {width}x{height}, got {arr.size}"
            )
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError("intensities must be integers")
            if int(arr.min()) < 0 or int(arr.max()) > 255:
                raise ValueError("intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        data = arr.reshape(height, width).copy()
        data.setflags(write=False)
        self._data = data

    @classmethod
    def from_array(cls, array: np.ndarray) -> "GrayImage":
        a = np.asarray(array)
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(a.shape[1], a.shape[0], a.reshape(-1))

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def array(self) -> np.ndarray:
        """Read-only 2-D uint8 view, shape (height, width)."""
        return self._data

    @property
    def pixels(self) -> np.ndarray:
        """Read-only flat row-major view."""
        return self._data.reshape(-1)

    def tobytes(self) -> bytes:
        return self._data.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(
            np.array_equal(self._data, other._data)
        )

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


_WHITESPACE = b" \t\r\n\v\f"


def _skip_space_and_comments(data: bytes, pos: int) -> int:
    while pos < len(data):
        byte = data[pos]
        if byte in _WHITESPACE:
            pos += 1
        elif byte == ord("#"):
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    return pos


def _read_header_int(data: bytes, pos: int, name: str) -> tuple[int, int]:
    pos = _skip_space_and_comments(data, pos)
    start = pos
    while pos < len(data) and ord("0") <= data[pos] <= ord("9"):
        pos += 1
    if pos == start:
        raise BadHeader(f"missing or non-numeric {name}")
    return int(data[start:pos]), pos


def load_pgm(data: bytes) -> GrayImage:
    """Parse a binary PGM (magic P5, maxval 255).

    '#' comments may appear between header tokens; exactly one whitespace
    byte separates the maxval from the pixel payload. Trailing bytes after
    the payload are ignored.
    """
    data = bytes(data)
    magic_end = 0
    while magic_end < len(data) and data[magic_end] not in _WHITESPACE and data[magic_end] != ord("#"):
        magic_end += 1
    if data[:magic_end] != b"P5":
        raise BadMagic(f"expected P5 magic, got {data[:magic_end][:8]!r}")
    pos = magic_end
    width, pos = _read_header_int(data, pos, "width")
    height, pos = _read_header_int(data, pos, "height")
    maxval, pos = _read_header_int(data, pos, "maxval")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} not supported (only 255)")
    if width < 1 or height < 1:
        raise BadHeader(f"dimensions must be >= 1, got {width}x{height}")
    if pos >= len(data):
        raise TruncatedPayload("payload missing after header")
    if data[pos] not in _WHITESPACE:
        raise BadHeader("missing whitespace separator before payload")
    pos += 1
    need = width * height
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise TruncatedPayload(f"payload has {len(payload)} of {need} octets")
    return GrayImage(width, height, payload)


def save_pgm(image: GrayImage) -> bytes:
    """Emit the canonical binary PGM; load_pgm(save_pgm(x)) == x bit-for-bit."""
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.tobytes()


@dataclass(frozen=True)
class RenderSpec:
    """Geometry and intensity levels for synthetic symbol rendering."""

    module_px: int = 3
    bar_height_px: int = 60
    quiet_modules: int = 9
    fg_level: int = 0
    bg_level: int = 255

    def __post_init__(self):
        if self.module_px < 1:
            raise ValueError("module_px must be >= 1")
        if self.bar_height_px < 1:
            raise ValueError("bar_height_px must be >= 1")
        if self.quiet_modules < 0:
            raise ValueError("quiet_modules must be >= 0")
        if not 0 <= self.fg_level < self.bg_level <= 255:
            raise ValueError("need 0 <= fg_level < bg_level <= 255")


def render_modules(bits: np.ndarray, spec: RenderSpec = RenderSpec()) -> GrayImage:
    """Rasterize a 0/1 module sequence with quiet zones on both sides.

    No validity checks on the sequence itself, so broken symbols can be
    rendered for negative tests.
    """
    quiet = np.zeros(spec.quiet_modules, dtype=np.uint8)
    modules = np.concatenate([quiet, np.asarray(bits, dtype=np.uint8), quiet])
    row = np.where(
        np.repeat(modules, spec.module_px) == 1, spec.fg_level, spec.bg_level
    ).astype(np.uint8)
    return GrayImage.from_array(np.tile(row, (spec.bar_height_px, 1)))


def render_ean13(code: Ean13 | str, spec: RenderSpec = RenderSpec()) -> GrayImage:
    """Draw a clean symbol: quiet zone, guards, the 12 encoded digits, quiet zone.

    Width is (95 + 2 * quiet_modules) * module_px. Raises InvalidCode when
    the checksum fails.
    """
    ean = code if isinstance(code, Ean13) else Ean13(str(code))
    return render_modules(symbol_modules(ean.digits), spec)


@dataclass(frozen=True)
class Degradation:
    """Deterministic photo-like damage; `seed` fixes the noise field."""

    noise_stddev: float = 0.0
    blur_radius: int = 0
    brightness_slope: float = 0.0
    rotation_deg: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_stddev < 0:
            raise ValueError("noise_stddev must be >= 0")
        if self.blur_radius < 0:
            raise ValueError("blur_radius must be >= 0")
        if abs(self.rotation_deg) > 3.0:
            raise ValueError("rotation_deg is limited to +/-3 degrees")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


def _border_fill(a: np.ndarray) -> float:
    h = a.shape[0]
    edges = [a[0, :], a[-1, :]]
    if h > 2:
        edges += [a[1:-1, 0], a[1:-1, -1]]
    return float(np.median(np.concatenate(edges)))


def _rotate_about_center(a: np.ndarray, degrees: float) -> np.ndarray:
    # inverse-map with bilinear sampling; samples falling outside the frame
    # take the border's median value (quiet-zone white on symbol photos)
    h, w = a.shape
    fill = _border_fill(a)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    yy, xx = np.indices((h, w), dtype=np.float64)
    dx = xx - cx
    dy = yy - cy
    sx = cx + cos_t * dx + sin_t * dy
    sy = cy - sin_t * dx + cos_t * dy
    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(sx - x0, 0.0, 1.0)
    fy = np.clip(sy - y0, 0.0, 1.0)
    top = a[y0, x0] * (1.0 - fx) + a[y0, x1] * fx
    bottom = a[y1, x0] * (1.0 - fx) + a[y1, x1] * fx
    return np.where(inside, top * (1.0 - fy) + bottom * fy, fill)


def _box_blur(a: np.ndarray, radius: int) -> np.ndarray:
    # uniform (2r+1)-wide window, separable, borders clamped to the edge value
    size = 2 * radius + 1
    out = a
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(out, pad, mode="edge")
        out = sliding_window_view(padded, size, axis=axis).mean(axis=-1)
    return out


def degrade(image: GrayImage, d: Degradation) -> GrayImage:
    """Apply rotation, box blur, brightness slope, then Gaussian noise.

    Steps run in that fixed order and each is skipped at its zero value, so
    the all-zero Degradation is the identity. Output is rounded and clamped
    to [0, 255]; identical (image, d) inputs give identical outputs.
    """
    a = image.array.astype(np.float64)
    if d.rotation_deg != 0.0:
        a = _rotate_about_center(a, d.rotation_deg)
    if d.blur_radius > 0:
        a = _box_blur(a, d.blur_radius)
    if d.brightness_slope != 0.0 and image.width > 1:
        a = a + np.linspace(0.0, d.brightness_slope, image.width)
    if d.noise_stddev > 0.0:
        a = a + d.noise_stddev * gaussian(d.seed, a.size).reshape(a.shape)
    return GrayImage.from_array(np.clip(np.rint(a), 0, 255).astype(np.uint8))
