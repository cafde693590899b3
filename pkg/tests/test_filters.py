from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import ndimage

from karyoseg import (
    BinaryMask,
    DegenerateHistogramError,
    GrayImage,
    InvalidArgumentError,
    Kernel,
    canny_edges,
    median_blur,
    morphological_gradient,
    morphology,
    otsu_threshold,
)
from karyoseg.filters import DILATE, ERODE

small_gray = hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=12))
small_mask = hnp.arrays(bool, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=12))


# -- otsu --------------------------------------------------------------


def otsu_oracle(pixels: np.ndarray) -> int:
    """Exhaustive between-class variance maximization in exact rational
    arithmetic; first maximizer wins."""
    hist = np.bincount(pixels.ravel(), minlength=256)
    total = int(hist.sum())
    levels = np.arange(256)
    best_t, best_v = None, Fraction(-1)
    for t in range(256):
        w0 = int(hist[: t + 1].sum())
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        mu0 = Fraction(int((levels[: t + 1] * hist[: t + 1]).sum()), w0)
        mu1 = Fraction(int((levels[t + 1 :] * hist[t + 1 :]).sum()), w1)
        v = Fraction(w0, total) * Fraction(w1, total) * (mu0 - mu1) ** 2
        if v > best_v:
            best_t, best_v = t, v
    return best_t


def test_otsu_two_level_example():
    px = np.array([[10] * 10, [200] * 10], dtype=np.uint8)
    t, mask = otsu_threshold(GrayImage(px))
    assert t == 10
    assert np.array_equal(mask.pixels, px == 10)


def test_otsu_extreme_split_tie_break():
    px = np.array([[0, 255], [255, 0]], dtype=np.uint8)
    t, _ = otsu_threshold(GrayImage(px))
    assert t == 0  # every t in [0, 254] ties; smallest wins


def test_otsu_constant_image_degenerate():
    with pytest.raises(DegenerateHistogramError):
        otsu_threshold(GrayImage.constant(4, 4, 0))


def test_otsu_light_foreground_convention():
    px = np.array([[10] * 10, [200] * 10], dtype=np.uint8)
    t, mask = otsu_threshold(GrayImage(px), dark_foreground=False)
    assert t == 10
    assert np.array_equal(mask.pixels, px > 10)


@settings(max_examples=150, deadline=None)
@given(small_gray)
def test_otsu_matches_exhaustive_oracle(px):
    if len(np.unique(px)) < 2:
        return
    t, mask = otsu_threshold(GrayImage(px))
    assert t == otsu_oracle(px)
    assert np.array_equal(mask.pixels, px <= t)


# -- median blur -------------------------------------------------------


def test_median_blur_flat_is_identity():
    img = GrayImage.constant(6, 6, 42)
    assert np.array_equal(median_blur(img, 3).pixels, img.pixels)


def test_median_blur_kills_salt_noise():
    px = np.full((5, 5), 100, dtype=np.uint8)
    px[2, 2] = 255
    out = median_blur(GrayImage(px), 3)
    assert out.pixels[2, 2] == 100


def test_median_blur_window_validation():
    img = GrayImage.constant(4, 4, 0)
    with pytest.raises(InvalidArgumentError):
        median_blur(img, 2)
    with pytest.raises(InvalidArgumentError):
        median_blur(img, -3)


@settings(max_examples=80, deadline=None)
@given(small_gray, st.sampled_from([3, 5]))
def test_median_blur_matches_scipy(px, window):
    if window > min(px.shape):
        return
    out = median_blur(GrayImage(px), window)
    # scipy's 'nearest' mode is the same edge replication
    expected = ndimage.median_filter(px, size=window, mode="nearest")
    assert np.array_equal(out.pixels, expected)


# -- binary morphology -------------------------------------------------


@settings(max_examples=80, deadline=None)
@given(small_mask, st.sampled_from([1, 3]))
def test_dilate_matches_scipy(mask, size):
    out = morphology(BinaryMask(mask), Kernel.square(size), DILATE)
    expected = ndimage.binary_dilation(mask, structure=np.ones((size, size), bool))
    assert np.array_equal(out.pixels, expected)


@settings(max_examples=80, deadline=None)
@given(small_mask, st.sampled_from([1, 3]))
def test_erode_matches_scipy(mask, size):
    out = morphology(BinaryMask(mask), Kernel.square(size), ERODE)
    expected = ndimage.binary_erosion(
        mask, structure=np.ones((size, size), bool), border_value=0
    )
    assert np.array_equal(out.pixels, expected)


def test_dilate_then_erode_fills_pinhole():
    arr = np.ones((5, 5), dtype=bool)
    arr[2, 2] = False
    closed = morphology(morphology(BinaryMask(arr), Kernel.cross(3), DILATE), Kernel.cross(3), ERODE)
    assert bool(closed.pixels[2, 2])


# -- morphological gradient --------------------------------------------


def test_gradient_zero_on_flat():
    img = GrayImage.constant(8, 8, 77)
    out = morphological_gradient(img, Kernel.square(2, origin=(0, 0)))
    assert not out.pixels.any()


def test_gradient_marks_every_edge_direction():
    # a blob in the middle: the 2x2 gradient must outline all four sides
    px = np.full((7, 7), 255, dtype=np.uint8)
    px[2:5, 2:5] = 0
    out = morphological_gradient(GrayImage(px), Kernel.square(2, origin=(0, 0)))
    ring = out.pixels > 0
    labeled, n = ndimage.label(ring, structure=np.ones((3, 3), int))
    assert n == 1  # one closed band, not disconnected arcs
    assert ring[1, 1] and ring[1, 4] and ring[4, 1] and ring[4, 4]


def test_gradient_band_encloses_each_object():
    px = np.full((16, 16), 255, dtype=np.uint8)
    px[2:6, 2:6] = 10
    px[9:14, 8:15] = 10
    out = morphological_gradient(GrayImage(px), Kernel.square(2, origin=(0, 0)))
    _, n = ndimage.label(out.pixels > 0, structure=np.ones((3, 3), int))
    assert n == 2


# -- canny -------------------------------------------------------------


def test_canny_flat_image_has_no_edges():
    img = GrayImage.constant(16, 16, 90)
    edges = canny_edges(img, aperture=5, low=40.0, high=120.0)
    assert edges.area == 0


def test_canny_finds_step_edge():
    px = np.zeros((16, 16), dtype=np.uint8)
    px[:, 8:] = 255
    edges = canny_edges(GrayImage(px), aperture=5, low=40.0, high=120.0)
    ys, xs = np.nonzero(edges.pixels)
    assert len(xs) > 0
    assert set(np.unique(xs)) <= {6, 7, 8, 9}  # localized at the step


def test_canny_aperture_validation():
    img = GrayImage.constant(8, 8, 0)
    with pytest.raises(InvalidArgumentError):
        canny_edges(img, aperture=4)
    with pytest.raises(InvalidArgumentError):
        canny_edges(img, aperture=9)


def test_canny_threshold_order_validation():
    img = GrayImage.constant(8, 8, 0)
    with pytest.raises(InvalidArgumentError):
        canny_edges(img, aperture=5, low=100.0, high=50.0)
