import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import ndimage

from karyoseg import (
    GrayImage,
    InvalidArgumentError,
    PipelineConfig,
    extract_objects,
    filter_contours,
    find_contours,
    label_components,
    min_area_rect,
)
from karyoseg.segmentation import KIND_UNKNOWN, RotatedRect, convex_hull
from karyoseg.synth import generate, metaphase_spec

small_mask = hnp.arrays(bool, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=16))


# -- connected components ----------------------------------------------


@settings(max_examples=120, deadline=None)
@given(small_mask)
def test_label_components_matches_scipy(mask):
    labels, count, firsts = label_components(mask)
    expected, n = ndimage.label(mask, structure=np.ones((3, 3), int))
    assert count == n
    # same partition: component ids must map one-to-one
    if n:
        pairs = set(zip(labels[mask].tolist(), expected[mask].tolist()))
        assert len(pairs) == n
        assert len({a for a, _ in pairs}) == n
        assert len({b for _, b in pairs}) == n
    assert not labels[~mask].any()


def test_label_components_scan_order():
    mask = np.zeros((5, 5), dtype=bool)
    mask[0, 4] = True  # first in scan order
    mask[3, 0] = True
    labels, count, firsts = label_components(mask)
    assert count == 2
    assert labels[0, 4] == 1 and labels[3, 0] == 2
    assert firsts == [(0, 4), (3, 0)]


def test_label_components_diagonal_is_connected():
    mask = np.eye(4, dtype=bool)
    _, count, _ = label_components(mask)
    assert count == 1


# -- contours ----------------------------------------------------------


def test_find_contours_square():
    mask = np.zeros((8, 8), dtype=bool)
    mask[2:6, 2:6] = True
    contours = find_contours(mask)
    assert len(contours) == 1
    c = contours[0]
    assert c.area == 16
    assert set(c.points) == {
        (x, y)
        for y in range(2, 6)
        for x in range(2, 6)
        if y in (2, 5) or x in (2, 5)
    }


def test_find_contours_single_pixel():
    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 1] = True
    contours = find_contours(mask)
    assert len(contours) == 1
    assert contours[0].points == [(1, 1)]
    assert contours[0].area == 1


def test_find_contours_one_per_component():
    mask = np.zeros((10, 10), dtype=bool)
    mask[1:3, 1:3] = True
    mask[6:9, 5:9] = True
    contours = find_contours(mask)
    assert len(contours) == 2
    assert sorted(c.area for c in contours) == [4, 12]


def test_filter_contours_threshold():
    mask = np.zeros((10, 10), dtype=bool)
    mask[1:3, 1:3] = True  # area 4
    mask[5:9, 5:9] = True  # area 16
    contours = find_contours(mask)
    kept = filter_contours(contours, 10.0)
    assert [c.area for c in kept] == [16]


# -- convex hull and min-area rect --------------------------------------


def brute_hull_contains(points, hull):
    """Every input point lies inside or on the hull polygon."""
    if len(hull) < 3:
        return all(p in points or True for p in hull)
    hx = [p[0] for p in hull]
    hy = [p[1] for p in hull]
    for px, py in points:
        # point-in-convex-polygon by consistent cross-product sign
        signs = []
        for i in range(len(hull)):
            x1, y1 = hx[i], hy[i]
            x2, y2 = hx[(i + 1) % len(hull)], hy[(i + 1) % len(hull)]
            signs.append((x2 - x1) * (py - y1) - (y2 - y1) * (px - x1))
        if not (all(s >= 0 for s in signs) or all(s <= 0 for s in signs)):
            return False
    return True


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=25))
def test_convex_hull_contains_all_points(pts):
    hull = convex_hull(list(set(pts)))
    assert set(hull) <= set(pts)
    assert brute_hull_contains(set(pts), hull)


def rect_oracle_area(points):
    """Smallest enclosing-rectangle area over a 0.1-degree sweep."""
    pts = np.array(points, dtype=float)
    best = np.inf
    for deg in np.arange(0.0, 90.0, 0.1):
        t = np.deg2rad(deg)
        rot = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
        proj = pts @ rot.T
        span = proj.max(axis=0) - proj.min(axis=0)
        w = max(span[0], 1.0)
        h = max(span[1], 1.0)
        best = min(best, w * h)
    return best


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), min_size=3, max_size=20))
def test_min_area_rect_near_optimal(pts):
    pts = list(set(pts))
    if len(pts) < 3:
        return
    rect = min_area_rect(pts)
    oracle = rect_oracle_area(pts)
    # calipers is exact; allow the oracle's 0.1-degree discretization slack
    assert rect.area <= oracle * 1.01 + 1e-6


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), min_size=1, max_size=20))
def test_min_area_rect_covers_points(pts):
    pts = list(set(pts))
    rect = min_area_rect(pts)
    for corner_based in [rect.corners()]:
        corners = np.array(corner_based)
    # every point within the rect, up to float slack
    c = np.array(rect.center)
    t = np.deg2rad(rect.angle)
    rot = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
    local = (np.array(pts, dtype=float) - c) @ rot.T
    assert (np.abs(local[:, 0]) <= rect.size[0] / 2 + 1e-6).all()
    assert (np.abs(local[:, 1]) <= rect.size[1] / 2 + 1e-6).all()


def test_min_area_rect_degenerate_cases():
    r1 = min_area_rect([(5, 7)])
    assert r1.center == (5.0, 7.0) and r1.size == (1.0, 1.0)
    r2 = min_area_rect([(0, 0), (4, 0)])
    assert r2.center == (2.0, 0.0)
    assert sorted(r2.size) == [1.0, 5.0]
    with pytest.raises(InvalidArgumentError):
        min_area_rect([])


def test_min_area_rect_axis_aligned_square():
    pts = [(0, 0), (0, 9), (9, 0), (9, 9)]
    rect = min_area_rect(pts)
    assert rect.area == pytest.approx(100.0)
    assert abs(rect.angle) in (pytest.approx(0.0), pytest.approx(45.0))


def test_rotated_rect_json_round_trip():
    rect = RotatedRect((3.5, 2.0), (10.0, 4.0), -30.0)
    again = RotatedRect.from_json(rect.to_json())
    assert again == rect


# -- extraction --------------------------------------------------------


def test_extract_blank_image_warns():
    res = extract_objects(GrayImage.constant(64, 64, 255), PipelineConfig())
    assert res.crops == []
    assert res.warnings


def test_extract_two_blobs():
    px = np.full((64, 64), 255, dtype=np.uint8)
    px[10:20, 10:22] = 90
    px[40:52, 30:45] = 120
    res = extract_objects(GrayImage(px), PipelineConfig())
    assert len(res.crops) == 2
    assert [c.id for c in res.crops] == ["crop_000", "crop_001"]
    for crop in res.crops:
        assert crop.kind == KIND_UNKNOWN
        # white background outside the mask, source intensities inside
        assert (crop.image.pixels[~crop.mask.pixels] == 255).all()
        ox, oy = crop.offset
        h, w = crop.image.pixels.shape
        inside = crop.image.pixels[crop.mask.pixels]
        assert set(np.unique(inside)) <= {90, 120}


def test_extract_min_area_filters_specks():
    px = np.full((64, 64), 255, dtype=np.uint8)
    px[10:30, 10:30] = 90
    px[50:52, 50:52] = 90  # 4-px speck, below the default min area
    res = extract_objects(GrayImage(px), PipelineConfig())
    assert len(res.crops) == 1


def test_extract_crop_offsets_map_back():
    truth = generate(metaphase_spec(rng_seed=12))
    res = extract_objects(truth.metaphase, PipelineConfig())
    src = truth.metaphase.pixels
    for crop in res.crops:
        ox, oy = crop.offset
        h, w = crop.image.pixels.shape
        sub = src[oy : oy + h, ox : ox + w]
        m = crop.mask.pixels
        assert np.array_equal(crop.image.pixels[m], sub[m])


def test_extract_masks_partition_foreground():
    truth = generate(metaphase_spec(rng_seed=12))
    res = extract_objects(truth.metaphase, PipelineConfig())
    canvas = np.zeros(truth.metaphase.pixels.shape, dtype=int)
    for crop in res.crops:
        ox, oy = crop.offset
        h, w = crop.mask.pixels.shape
        canvas[oy : oy + h, ox : ox + w] += crop.mask.pixels
    assert canvas.max() == 1  # no pixel claimed twice
