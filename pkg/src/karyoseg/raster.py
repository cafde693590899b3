"""Core raster types: 8-bit grayscale images, boolean masks, structuring
kernels, and grayscale PNG/TIFF I/O.

Images are immutable once constructed (the backing array is marked
read-only), which makes every operator in the package safe to call from
multiple threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, InvalidArgumentError

# ITU-R BT.601 luma weights, the same integer approximation Pillow uses
# for mode "L": L = (299 R + 587 G + 114 B) / 1000.
LUMA_WEIGHTS = (299, 587, 114)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GrayImage:
    """Single-channel 8-bit image, row-major, intensities in [0, 255]."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = self.pixels
        if not isinstance(arr, np.ndarray) or arr.ndim != 2:
            raise InvalidArgumentError("GrayImage needs a 2-D array")
        if arr.size == 0:
            raise InvalidArgumentError("GrayImage must be at least 1x1")
        if arr.dtype != np.uint8:
            raise InvalidArgumentError("GrayImage pixels must be uint8")
        object.__setattr__(self, "pixels", _freeze(arr))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        arr = np.asarray(arr)
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise InvalidArgumentError("intensities must lie in [0, 255]")
        return cls(arr.astype(np.uint8))

    @classmethod
    def constant(cls, width: int, height: int, value: int) -> "GrayImage":
        if width < 1 or height < 1:
            raise InvalidArgumentError("image dimensions must be >= 1")
        return cls(np.full((height, width), value, dtype=np.uint8))


@dataclass(frozen=True)
class BinaryMask:
    """Boolean foreground mask with the same layout as its source image."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = self.pixels
        if not isinstance(arr, np.ndarray) or arr.ndim != 2:
            raise InvalidArgumentError("BinaryMask needs a 2-D array")
        if arr.size == 0:
            raise InvalidArgumentError("BinaryMask must be at least 1x1")
        object.__setattr__(self, "pixels", _freeze(arr.astype(bool)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.pixels))

    @classmethod
    def from_array(cls, arr) -> "BinaryMask":
        return cls(np.asarray(arr).astype(bool))

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    def to_gray(self, fg: int = 255, bg: int = 0) -> GrayImage:
        out = np.where(self.pixels, np.uint8(fg), np.uint8(bg))
        return GrayImage(out.astype(np.uint8))


@dataclass(frozen=True)
class Kernel:
    """Boolean structuring element with an anchor point.

    The anchor (``origin``) is an (x, y) position inside the kernel; all
    morphology offsets are taken relative to it.
    """

    pixels: np.ndarray
    origin: tuple

    def __post_init__(self):
        arr = np.asarray(self.pixels).astype(bool)
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidArgumentError("Kernel needs a non-empty 2-D array")
        if not arr.any():
            raise InvalidArgumentError("Kernel needs at least one true element")
        ox, oy = self.origin
        if not (0 <= ox < arr.shape[1] and 0 <= oy < arr.shape[0]):
            raise InvalidArgumentError("Kernel origin must lie inside the kernel")
        object.__setattr__(self, "pixels", _freeze(arr))
        object.__setattr__(self, "origin", (int(ox), int(oy)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def offsets(self) -> np.ndarray:
        """(dy, dx) displacement of every true element from the origin."""
        ys, xs = np.nonzero(self.pixels)
        ox, oy = self.origin
        return np.stack([ys - oy, xs - ox], axis=1)

    @classmethod
    def square(cls, size: int, origin: tuple | None = None) -> "Kernel":
        if origin is None:
            origin = (size // 2, size // 2)
        return cls(np.ones((size, size), dtype=bool), origin)

    @classmethod
    def cross(cls, size: int = 3) -> "Kernel":
        if size % 2 == 0:
            raise InvalidArgumentError("cross kernel size must be odd")
        arr = np.zeros((size, size), dtype=bool)
        arr[size // 2, :] = True
        arr[:, size // 2] = True
        return cls(arr, (size // 2, size // 2))


def load_gray(path) -> GrayImage:
    """Decode an 8-bit grayscale PNG/TIFF; color inputs are converted by
    BT.601 luminance."""
    try:
        with Image.open(path) as im:
            return _to_gray(im)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from None


def decode_gray(data: bytes) -> GrayImage:
    """load_gray for in-memory bytes (uploads)."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            return _to_gray(im)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from None


def _to_gray(im) -> GrayImage:
    if im.mode not in ("L", "I;16", "1"):
        im = im.convert("RGB").convert("L")
    elif im.mode != "L":
        im = im.convert("L")
    return GrayImage(np.asarray(im, dtype=np.uint8))


def encode_png(img: GrayImage) -> bytes:
    """PNG bytes for a grayscale image, as written by save_gray."""
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def save_gray(img: GrayImage, path) -> None:
    """Encode a grayscale image as PNG or TIFF, chosen by file extension."""
    suffix = Path(path).suffix.lower()
    if suffix not in (".png", ".tif", ".tiff"):
        raise InvalidArgumentError(f"unsupported image format: {suffix}")
    Image.fromarray(img.pixels, mode="L").save(path)


def save_rgb(rgb: np.ndarray, path) -> None:
    """Encode an (H, W, 3) uint8 array, e.g. the inspect overlay."""
    Image.fromarray(rgb.astype(np.uint8), mode="RGB").save(path)
