"""Object extraction: connected components, boundary tracing, minimum-area
rotated boxes, and the full metaphase-to-crops pipeline (blur, threshold,
outline, contours, white-background crops)."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .errors import DegenerateHistogramError, InvalidArgumentError
from .filters import median_blur, morphological_gradient, otsu_threshold
from .raster import BinaryMask, GrayImage, Kernel

KIND_SINGLE = "single"
KIND_SUSPECT = "suspect-multi"
KIND_UNKNOWN = "unknown"

# 8-neighborhood in clockwise screen order starting west, as (dy, dx)
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_MOORE_INDEX = {off: i for i, off in enumerate(_MOORE)}


@dataclass
class Contour:
    """Ordered outer-boundary walk of one 8-connected component.

    ``points`` are (x, y) pixel coordinates; ``area`` is the component's
    pixel count. Components smaller than 3 boundary pixels yield fewer
    than 3 points.
    """

    points: list
    area: int


@dataclass(frozen=True)
class RotatedRect:
    """Minimum-area rectangle: subpixel center, (w, h) extents along/across
    the angle direction, angle in degrees within [-90, 90)."""

    center: tuple
    size: tuple
    angle: float

    def corners(self) -> np.ndarray:
        cx, cy = self.center
        w, h = self.size
        a = math.radians(self.angle)
        ux, uy = math.cos(a), math.sin(a)
        vx, vy = -uy, ux
        half = [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]
        return np.array([(cx + du * ux + dv * vx, cy + du * uy + dv * vy) for du, dv in half])

    @property
    def area(self) -> float:
        return self.size[0] * self.size[1]

    def to_json(self) -> dict:
        return {"center": list(self.center), "size": list(self.size), "angle": self.angle}

    @classmethod
    def from_json(cls, obj: dict) -> "RotatedRect":
        return cls(tuple(obj["center"]), tuple(obj["size"]), float(obj["angle"]))


@dataclass
class CropRecord:
    """One candidate object: grayscale crop on a white background, its
    foreground mask, and where it came from in the metaphase."""

    id: str
    image: GrayImage
    mask: BinaryMask
    offset: tuple  # (x, y) of the crop origin in metaphase coordinates
    bbox: RotatedRect
    kind: str = KIND_UNKNOWN


@dataclass
class ExtractionResult:
    crops: list
    warnings: list = field(default_factory=list)
    threshold: int | None = None
    foreground: BinaryMask | None = None


def _row_runs(row: np.ndarray):
    padded = np.empty(len(row) + 2, dtype=np.int8)
    padded[0] = padded[-1] = 0
    padded[1:-1] = row
    d = np.diff(padded)
    return np.nonzero(d == 1)[0], np.nonzero(d == -1)[0]


def label_components(mask: np.ndarray):
    """8-connected component labeling via run merging.

    Returns (labels, count, firsts): labels is int32 with 0 background and
    components numbered 1..count in scan order of their first pixel, so
    component 1 starts at the topmost-leftmost foreground pixel; firsts[i]
    is that (y, x) start for component i+1.
    """
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent: list = []

    def find(a: int) -> int:
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    prev: list = []  # (start, end, provisional label) runs of the row above
    all_runs: list = []  # (y, start, end, provisional label)
    for y in range(h):
        starts, ends = _row_runs(mask[y])
        cur = []
        for s, e in zip(starts, ends):
            label = -1
            for ps, pe, pl in prev:
                if ps < e + 1 and pe > s - 1:  # 8-connectivity overlap
                    root = find(pl)
                    if label == -1:
                        label = root
                    elif root != label:
                        parent[root] = label
                elif ps >= e + 1:
                    break
            if label == -1:
                label = len(parent)
                parent.append(label)
            cur.append((int(s), int(e), label))
            all_runs.append((y, int(s), int(e), label))
        prev = cur

    remap: dict = {}
    firsts: list = []
    for y, s, e, pl in all_runs:
        root = find(pl)
        if root not in remap:
            remap[root] = len(remap) + 1
            firsts.append((y, s))
        labels[y, s:e] = remap[root]
    return labels, len(remap), firsts


def _trace_boundary(fg: np.ndarray, start_y: int, start_x: int) -> list:
    """Moore-neighbor boundary walk from the component's scan-order start
    (whose west and north neighbors are guaranteed background). Stops when
    the walk state (pixel, backtrack direction) repeats."""
    h, w = fg.shape
    start = (start_y, start_x)
    cur = start
    b = 0  # backtrack direction index (west)
    points = [start]
    seen = {(start, 0)}
    while True:
        nxt = None
        for k in range(1, 9):
            idx = (b + k) % 8
            dy, dx = _MOORE[idx]
            ny, nx = cur[0] + dy, cur[1] + dx
            if 0 <= ny < h and 0 <= nx < w and fg[ny, nx]:
                nxt = (ny, nx, idx)
                break
        if nxt is None:
            return points  # isolated pixel
        ny, nx, idx = nxt
        prev_idx = (idx - 1) % 8
        back = (cur[0] + _MOORE[prev_idx][0], cur[1] + _MOORE[prev_idx][1])
        cur = (ny, nx)
        b = _MOORE_INDEX[(back[0] - ny, back[1] - nx)]
        state = (cur, b)
        if state in seen:
            return points
        seen.add(state)
        points.append(cur)


def find_contours(mask: BinaryMask) -> list:
    """One outer contour per 8-connected foreground component, ordered by
    the topmost-leftmost pixel of each component."""
    arr = mask.pixels
    labels, count, firsts = label_components(arr)
    if count == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    contours = []
    for i in range(1, count + 1):
        sy, sx = firsts[i - 1]
        component = labels == i
        walk = _trace_boundary(component, sy, sx)
        points = [(x, y) for (y, x) in walk]
        contours.append(Contour(points=points, area=int(areas[i])))
    return contours


def filter_contours(contours: list, min_area: float) -> list:
    """Keep contours whose component area is at least ``min_area``."""
    if min_area < 0:
        raise InvalidArgumentError(f"min_area must be >= 0, got {min_area}")
    return [c for c in contours if c.area >= min_area]


def convex_hull(points: list) -> list:
    """Monotone-chain convex hull, counterclockwise, no duplicates.
    Collinear input collapses to its two extreme points."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:  # all collinear
        return [pts[0], pts[-1]]
    return hull


def _normalize_angle(deg: float) -> float:
    a = math.fmod(deg, 180.0)
    if a >= 90.0:
        a -= 180.0
    elif a < -90.0:
        a += 180.0
    return a


def min_area_rect(contour) -> RotatedRect:
    """Minimum-area enclosing rectangle by rotating calipers over the
    convex hull. Degenerate (collinear or single-point) inputs produce a
    rectangle of length = point span with height snapped to 1."""
    points = contour.points if isinstance(contour, Contour) else list(contour)
    if not points:
        raise InvalidArgumentError("min_area_rect needs at least one point")
    hull = convex_hull([(float(x), float(y)) for x, y in points])

    if len(hull) == 1:
        (x, y) = hull[0]
        return RotatedRect((x, y), (1.0, 1.0), 0.0)
    if len(hull) == 2:
        (x0, y0), (x1, y1) = hull
        span = math.hypot(x1 - x0, y1 - y0)
        angle = _normalize_angle(math.degrees(math.atan2(y1 - y0, x1 - x0)))
        return RotatedRect(((x0 + x1) / 2, (y0 + y1) / 2), (max(span, 1.0), 1.0), angle)

    pts = np.asarray(hull, dtype=np.float64)
    best = None
    n = len(hull)
    for i in range(n):
        ex, ey = pts[(i + 1) % n] - pts[i]
        norm = math.hypot(ex, ey)
        if norm == 0:
            continue
        ux, uy = ex / norm, ey / norm
        u = pts[:, 0] * ux + pts[:, 1] * uy
        v = -pts[:, 0] * uy + pts[:, 1] * ux
        w = u.max() - u.min()
        h = v.max() - v.min()
        area = w * h
        if best is None or area < best[0]:
            cu = (u.max() + u.min()) / 2
            cv = (v.max() + v.min()) / 2
            center = (cu * ux - cv * uy, cu * uy + cv * ux)
            best = (area, center, (w, h), math.degrees(math.atan2(uy, ux)))
    _, center, (w, h), angle = best
    w = max(w, 1.0) if w < 1e-9 else w
    h = max(h, 1.0) if h < 1e-9 else h
    return RotatedRect(center, (w, h), _normalize_angle(angle))


def _fill_contour(points: list, shape: tuple) -> np.ndarray:
    """Pixels enclosed by a closed 8-connected boundary walk (boundary
    included), computed by flooding the complement from outside."""
    ys = [p[1] for p in points]
    xs = [p[0] for p in points]
    y0, y1 = max(min(ys) - 1, 0), min(max(ys) + 2, shape[0])
    x0, x1 = max(min(xs) - 1, 0), min(max(xs) + 2, shape[1])
    bh, bw = y1 - y0, x1 - x0
    barrier = np.zeros((bh, bw), dtype=bool)
    for x, y in points:
        barrier[y - y0, x - x0] = True
    outside = np.zeros((bh, bw), dtype=bool)
    frontier = deque()
    for y in range(bh):
        for x in (0, bw - 1):
            if not barrier[y, x] and not outside[y, x]:
                outside[y, x] = True
                frontier.append((y, x))
    for x in range(bw):
        for y in (0, bh - 1):
            if not barrier[y, x] and not outside[y, x]:
                outside[y, x] = True
                frontier.append((y, x))
    while frontier:
        y, x = frontier.popleft()
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < bh and 0 <= nx < bw and not barrier[ny, nx] and not outside[ny, nx]:
                outside[ny, nx] = True
                frontier.append((ny, nx))
    filled = np.zeros(shape, dtype=bool)
    filled[y0:y1, x0:x1] = ~outside
    return filled


def extract_objects(metaphase: GrayImage, config: PipelineConfig | None = None) -> ExtractionResult:
    """Full object-extraction pipeline.

    median blur -> Otsu threshold -> morphological outline of the binary
    mask (2x2 kernel by default) -> outer contours -> area filter -> one
    white-background crop per contour, keeping source intensities inside
    the mask. Foreground pixels are claimed in contour order so crop masks
    are pairwise disjoint in metaphase coordinates.
    """
    config = config or PipelineConfig()
    config.validate()
    blurred = median_blur(metaphase, config.median_window)
    try:
        threshold, fg = otsu_threshold(blurred, dark_foreground=config.dark_foreground)
    except DegenerateHistogramError as exc:
        return ExtractionResult([], warnings=[f"no objects: {exc.message}"])

    kernel = Kernel.square(config.gradient_kernel_size, origin=(0, 0))
    outline = morphological_gradient(fg.to_gray(), kernel)
    ring = BinaryMask(outline.pixels > 0)
    contours = filter_contours(find_contours(ring), config.min_contour_area)

    fg_arr = fg.pixels
    claimed = np.zeros_like(fg_arr)
    src = metaphase.pixels
    crops = []
    for contour in contours:
        obj = _fill_contour(contour.points, fg_arr.shape) & fg_arr & ~claimed
        if not obj.any():
            continue
        claimed |= obj
        ys, xs = np.nonzero(obj)
        pad = config.crop_pad
        y0 = max(int(ys.min()) - pad, 0)
        y1 = min(int(ys.max()) + 1 + pad, fg_arr.shape[0])
        x0 = max(int(xs.min()) - pad, 0)
        x1 = min(int(xs.max()) + 1 + pad, fg_arr.shape[1])
        mask_w = obj[y0:y1, x0:x1]
        image_w = np.where(mask_w, src[y0:y1, x0:x1], np.uint8(255))
        crops.append(
            CropRecord(
                id=f"crop_{len(crops):03d}",
                image=GrayImage(image_w.astype(np.uint8)),
                mask=BinaryMask(mask_w),
                offset=(x0, y0),
                bbox=min_area_rect(contour),
            )
        )
    return ExtractionResult(crops, threshold=threshold, foreground=fg)
