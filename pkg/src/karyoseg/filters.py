"""Low-level image operators: median blur, Otsu binarization, binary and
grayscale morphology, and a four-stage edge detector.

All windowed grayscale operators replicate edge pixels at the border so
that flat image margins never produce spurious responses. Binary
morphology instead treats out-of-bounds pixels as background, the usual
set-theoretic convention.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateHistogramError, InvalidArgumentError
from .raster import BinaryMask, GrayImage, Kernel

DILATE = "dilate"
ERODE = "erode"


def median_blur(img: GrayImage, window: int) -> GrayImage:
    """Replace each pixel with the median of its window x window
    neighborhood. ``window`` must be odd and fit inside the image."""
    if window % 2 == 0 or window < 3:
        raise InvalidArgumentError(f"median window must be odd and >= 3, got {window}")
    if window > min(img.width, img.height):
        raise InvalidArgumentError(
            f"median window {window} exceeds image size {img.width}x{img.height}"
        )
    r = window // 2
    padded = np.pad(img.pixels, r, mode="edge")
    windows = sliding_window_view(padded, (window, window))
    out = np.median(windows, axis=(2, 3))
    # window*window is odd, so the median is always an actual sample value
    return GrayImage(out.astype(np.uint8))


def _histogram_moments(pixels: np.ndarray):
    hist = np.bincount(pixels.ravel(), minlength=256)
    cum = np.cumsum(hist)
    weighted = np.cumsum(hist * np.arange(256, dtype=np.int64))
    return hist, cum, weighted


def otsu_threshold(img: GrayImage, dark_foreground: bool = True):
    """Split intensities at the threshold maximizing between-class variance.

    Classes are [0, t] and [t+1, 255]. The comparison is carried out in
    exact integer arithmetic (variance numerators/denominators as Python
    ints), so the reported threshold is the smallest maximizer with no
    floating-point tie ambiguity.

    Returns ``(threshold, mask)`` where mask foreground is ``<= t`` under
    the default dark-on-light convention and ``> t`` otherwise.
    """
    hist, cum, weighted = _histogram_moments(img.pixels)
    if np.count_nonzero(hist) < 2:
        raise DegenerateHistogramError("all pixels share one intensity; no threshold separates them")

    total = int(cum[-1])
    total_sum = int(weighted[-1])
    # sigma_b(t) is proportional to (total*weighted[t] - cum[t]*total_sum)^2
    # / (cum[t] * (total - cum[t])); compare as exact fractions.
    best_t = -1
    best_num = -1
    best_den = 1
    for t in range(256):
        w0 = int(cum[t])
        if w0 == 0 or w0 == total:
            continue
        num = (total * int(weighted[t]) - w0 * total_sum) ** 2
        den = w0 * (total - w0)
        # num/den > best_num/best_den  <=>  num*best_den > best_num*den
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    threshold = best_t
    if dark_foreground:
        mask = BinaryMask(img.pixels <= threshold)
    else:
        mask = BinaryMask(img.pixels > threshold)
    return threshold, mask


def _shifted(arr: np.ndarray, dy: int, dx: int, fill) -> np.ndarray:
    """arr translated by (+dy, +dx) with constant fill outside."""
    h, w = arr.shape
    out = np.full_like(arr, fill)
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    src_ys = slice(max(-dy, 0), h + min(-dy, 0))
    src_xs = slice(max(-dx, 0), w + min(-dx, 0))
    out[ys, xs] = arr[src_ys, src_xs]
    return out


def morphology(mask: BinaryMask, kernel: Kernel, mode: str) -> BinaryMask:
    """Set-theoretic dilation or erosion anchored at the kernel origin.

    dilate: out(p) true iff some kernel offset o has in(p - o) true
    erode:  out(p) true iff every kernel offset o has in(p + o) true
    Out-of-bounds pixels count as background.
    """
    if mode not in (DILATE, ERODE):
        raise InvalidArgumentError(f"mode must be '{DILATE}' or '{ERODE}', got {mode!r}")
    src = mask.pixels
    offsets = kernel.offsets()
    if mode == DILATE:
        out = np.zeros_like(src)
        for dy, dx in offsets:
            out |= _shifted(src, int(dy), int(dx), False)
    else:
        out = np.ones_like(src)
        for dy, dx in offsets:
            out &= _shifted(src, -int(dy), -int(dx), False)
    return BinaryMask(out)


def morphological_gradient(img: GrayImage, kernel: Kernel) -> GrayImage:
    """Grayscale max minus min over the kernel window, both taken over the
    same (unreflected) window so the result is nonzero exactly where the
    window spans an intensity transition. An even kernel therefore still
    yields a closed transition band around every region. Borders are
    edge-replicated."""
    offsets = kernel.offsets()
    pad = int(np.abs(offsets).max()) if len(offsets) else 0
    padded = np.pad(img.pixels, pad, mode="edge")
    h, w = img.pixels.shape
    dil = np.zeros((h, w), dtype=np.uint8)
    ero = np.full((h, w), 255, dtype=np.uint8)
    for dy, dx in offsets:
        window = padded[pad + dy : pad + dy + h, pad + dx : pad + dx + w]
        dil = np.maximum(dil, window)
        ero = np.minimum(ero, window)
    return GrayImage((dil.astype(np.int16) - ero.astype(np.int16)).astype(np.uint8))


def _binomial(n: int) -> np.ndarray:
    """Row n of Pascal's triangle (length n+1)."""
    row = np.array([1.0])
    for _ in range(n):
        row = np.convolve(row, [1.0, 1.0])
    return row


def derivative_kernels(aperture: int):
    """Separable smoothing/derivative pair for the edge detector.

    smoothing = binomial row of length ``aperture``, normalized to sum 1;
    derivative = binomial row of length ``aperture - 2`` convolved with
    [-1, 0, 1], normalized so its positive coefficients sum to 1. With
    this scaling a full-range step edge responds with magnitude ~255
    regardless of aperture:

        aperture 3: smooth [1 2 1]/4,        deriv [-1 0 1]
        aperture 5: smooth [1 4 6 4 1]/16,   deriv [-1 -2 0 2 1]/3
        aperture 7: smooth [1 ... 1]/64,     deriv [-1 -4 -5 0 5 4 1]/10
    """
    smooth = _binomial(aperture - 1)
    smooth = smooth / smooth.sum()
    deriv = np.convolve(_binomial(aperture - 3), [-1.0, 0.0, 1.0])
    deriv = deriv / deriv[deriv > 0].sum()
    return smooth, deriv


def _sep_filter(arr: np.ndarray, col_kernel: np.ndarray, row_kernel: np.ndarray) -> np.ndarray:
    """Separable filter with edge replication: col_kernel runs down
    columns (y), row_kernel across rows (x)."""
    ry = len(col_kernel) // 2
    rx = len(row_kernel) // 2
    padded = np.pad(arr, ((ry, ry), (rx, rx)), mode="edge").astype(np.float64)
    h, w = arr.shape
    tmp = np.zeros((h, w + 2 * rx), dtype=np.float64)
    for i, c in enumerate(col_kernel):
        tmp += c * padded[i : i + h, :]
    out = np.zeros((h, w), dtype=np.float64)
    for j, c in enumerate(row_kernel):
        out += c * tmp[:, j : j + w]
    return out


def canny_edges(img: GrayImage, aperture: int = 5, low: float = 40.0, high: float = 120.0) -> BinaryMask:
    """Four-stage edge detection: smoothed derivatives at the given
    aperture, L2 gradient magnitude, non-maximum suppression along the
    quantized gradient direction, then double-threshold hysteresis.

    Thresholds apply to the normalized magnitude (a full-range step edge
    measures ~255). Every returned edge pixel has magnitude >= low.
    """
    if aperture not in (3, 5, 7):
        raise InvalidArgumentError(f"aperture must be 3, 5 or 7, got {aperture}")
    if low > high:
        raise InvalidArgumentError(f"low threshold {low} exceeds high threshold {high}")
    if low < 0:
        raise InvalidArgumentError("thresholds must be nonnegative")

    smooth, deriv = derivative_kernels(aperture)
    f = img.pixels.astype(np.float64)
    gx = _sep_filter(f, smooth, deriv)
    gy = _sep_filter(f, deriv, smooth)
    mag = np.hypot(gx, gy)

    # quantize gradient direction into 4 sectors; compare against the two
    # neighbors along the gradient, strict > on the "before" side so a
    # two-pixel plateau keeps exactly one pixel
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    sector = np.zeros(mag.shape, dtype=np.uint8)
    sector[(angle >= np.pi / 8) & (angle < 3 * np.pi / 8)] = 1
    sector[(angle >= 3 * np.pi / 8) & (angle < 5 * np.pi / 8)] = 2
    sector[(angle >= 5 * np.pi / 8) & (angle < 7 * np.pi / 8)] = 3

    neighbor_steps = {
        0: ((0, -1), (0, 1)),    # horizontal gradient: left/right
        1: ((-1, -1), (1, 1)),   # diagonal
        2: ((-1, 0), (1, 0)),    # vertical gradient: up/down
        3: ((-1, 1), (1, -1)),   # anti-diagonal
    }
    keep = np.zeros(mag.shape, dtype=bool)
    for s, ((by, bx), (ay, ax)) in neighbor_steps.items():
        sel = sector == s
        before = _shifted(mag, -by, -bx, 0.0)
        after = _shifted(mag, -ay, -ax, 0.0)
        keep |= sel & (mag > before) & (mag >= after)

    weak = keep & (mag >= low)
    strong = keep & (mag >= high)
    if not strong.any():
        return BinaryMask(np.zeros_like(weak))

    # hysteresis: weak pixels 8-connected to a strong pixel survive
    edges = strong.copy()
    frontier = deque(zip(*np.nonzero(strong)))
    h, w = mag.shape
    while frontier:
        y, x = frontier.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and weak[ny, nx] and not edges[ny, nx]:
                    edges[ny, nx] = True
                    frontier.append((ny, nx))
    return BinaryMask(edges)
