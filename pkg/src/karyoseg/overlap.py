"""Suspect-crop detection: thin each object to a skeleton and look for
branch points where multiple chromosome axes meet."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .filters import DILATE, ERODE, morphology
from .raster import BinaryMask, Kernel
from .segmentation import KIND_SINGLE, KIND_SUSPECT, label_components

# 8-neighbor ring in clockwise order starting north, as (dy, dx)
_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


@dataclass(frozen=True)
class Skeleton:
    """One-pixel-wide thinning of a mask, tagged with its source crop."""

    mask: BinaryMask
    source_id: str = ""


@dataclass(frozen=True)
class BranchPoint:
    position: tuple  # (x, y)
    crossing_number: int


def _ring_stack(arr: np.ndarray) -> list:
    """The 8 neighbor planes of a bool array in _RING order, with
    out-of-bounds neighbors reading as background."""
    padded = np.pad(arr, 1, constant_values=False)
    h, w = arr.shape
    return [padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] for dy, dx in _RING]


def _transitions(neighbors: list) -> np.ndarray:
    """Per-pixel count of 0->1 steps around the closed neighbor ring."""
    counts = np.zeros(neighbors[0].shape, dtype=np.uint8)
    for i in range(8):
        counts += (~neighbors[i] & neighbors[(i + 1) % 8]).astype(np.uint8)
    return counts


def _neighbor_count(neighbors: list) -> np.ndarray:
    counts = np.zeros(neighbors[0].shape, dtype=np.uint8)
    for plane in neighbors:
        counts += plane.astype(np.uint8)
    return counts


def _thinning_candidates(img: np.ndarray, step: int) -> np.ndarray:
    n = _ring_stack(img)
    north, east, south, west = n[0], n[2], n[4], n[6]
    b = _neighbor_count(n)
    a = _transitions(n)
    keep_shape = (b >= 2) & (b <= 6) & (a == 1)
    if step == 0:
        direction = ~(north & east & south) & ~(east & south & west)
    else:
        direction = ~(north & east & west) & ~(north & south & west)
    return img & keep_shape & direction


def skeletonize(mask: BinaryMask, source_id: str = "") -> Skeleton:
    """Iterative two-phase thinning to a one-pixel-wide skeleton.

    Runs the classic two sub-iterations (south/east then north/west
    boundary deletion) in parallel until a fixpoint. Components that
    would be deleted entirely in one parallel step are thinned
    sequentially instead so every component survives as at least one
    pixel.
    """
    img = mask.pixels.copy()
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            candidates = _thinning_candidates(img, step)
            if not candidates.any():
                continue
            labels, count, _ = label_components(img)
            sizes = np.bincount(labels.ravel(), minlength=count + 1)
            doomed = np.bincount(labels[candidates].ravel(), minlength=count + 1)
            vanishing = np.nonzero((sizes > 0) & (sizes == doomed))[0]
            vanishing = vanishing[vanishing > 0]
            if len(vanishing):
                spare = np.isin(labels, vanishing)
                parallel = candidates & ~spare
                img[parallel] = False
                changed = changed or parallel.any()
                for y, x in np.argwhere(candidates & spare):
                    if _thinning_candidates(img, step)[y, x]:
                        img[y, x] = False
                        changed = True
            else:
                img[candidates] = False
                changed = True
    return Skeleton(BinaryMask(img), source_id)


def crossing_number(skel: Skeleton, p: tuple) -> int:
    """0->1 transitions around the 8-neighbor ring of p = (x, y).

    2 for a pixel interior to a line, 1 for an endpoint, >= 3 where
    skeleton arcs meet.
    """
    x, y = p
    arr = skel.mask.pixels
    h, w = arr.shape
    if not (0 <= x < w and 0 <= y < h):
        raise InvalidArgumentError(f"point ({x}, {y}) outside {w}x{h} skeleton")
    ring = []
    for dy, dx in _RING:
        ny, nx = y + dy, x + dx
        ring.append(bool(arr[ny, nx]) if 0 <= ny < h and 0 <= nx < w else False)
    return sum((not ring[i]) and ring[(i + 1) % 8] for i in range(8))


def _single_linkage(coords: list, radius: float) -> list:
    """Cluster (y, x) points: any two within radius share a cluster."""
    unassigned = set(range(len(coords)))
    clusters = []
    while unassigned:
        seed = min(unassigned)
        unassigned.discard(seed)
        cluster = [seed]
        frontier = [seed]
        while frontier:
            i = frontier.pop()
            yi, xi = coords[i]
            linked = [
                j
                for j in unassigned
                if math.hypot(coords[j][0] - yi, coords[j][1] - xi) <= radius
            ]
            for j in linked:
                unassigned.discard(j)
                cluster.append(j)
                frontier.append(j)
        clusters.append(sorted(cluster))
    return clusters


def detect_intersections(skel: Skeleton, merge_radius: float = 3.0) -> list:
    """Branch points of a skeleton: pixels whose crossing number is >= 3.

    Touching branch pixels collapse to one junction at their centroid,
    then junctions within merge_radius merge to the unweighted mean of
    the junction positions. Thinning splits a shallow crossing into two
    junctions straddling it, so that mean sits back on the merged axis
    between them regardless of how many pixels each junction has; it is
    snapped to the nearest skeleton pixel. Each merged point carries the
    maximal crossing number of its pixels, and the list is ordered top
    to bottom, then left to right."""
    if merge_radius < 0:
        raise InvalidArgumentError(f"merge_radius must be >= 0, got {merge_radius}")
    arr = skel.mask.pixels
    neighbors = _ring_stack(arr)
    cn = _transitions(neighbors)
    branch_yx = np.argwhere(arr & (cn >= 3))
    if len(branch_yx) == 0:
        return []
    skeleton_yx = np.argwhere(arr)

    coords = [tuple(p) for p in branch_yx]  # (y, x), already scan-ordered
    junctions = []  # (centroid_y, centroid_x, max_cn)
    for cluster in _single_linkage(coords, 1.5):  # 8-adjacency
        members = [coords[i] for i in cluster]
        junctions.append(
            (
                sum(p[0] for p in members) / len(members),
                sum(p[1] for p in members) / len(members),
                max(int(cn[y, x]) for y, x in members),
            )
        )

    points = []
    for cluster in _single_linkage([(j[0], j[1]) for j in junctions], merge_radius):
        cy = sum(junctions[i][0] for i in cluster) / len(cluster)
        cx = sum(junctions[i][1] for i in cluster) / len(cluster)
        dist = np.hypot(skeleton_yx[:, 0] - cy, skeleton_yx[:, 1] - cx)
        snap = tuple(skeleton_yx[int(np.argmin(dist))])  # ties: scan order
        max_cn = max(junctions[i][2] for i in cluster)
        points.append(BranchPoint(position=(int(snap[1]), int(snap[0])), crossing_number=max_cn))
    points.sort(key=lambda bp: (bp.position[1], bp.position[0]))
    return points


def prune_spurs(skel: Skeleton, iterations: int = 4) -> Skeleton:
    """Peel endpoint pixels (exactly one foreground neighbor) up to
    ``iterations`` times. Removes the short stubs thinning leaves at
    corners, at the cost of shortening real arcs by the same amount."""
    if iterations < 0:
        raise InvalidArgumentError(f"iterations must be >= 0, got {iterations}")
    img = skel.mask.pixels.copy()
    for _ in range(iterations):
        ends = img & (_neighbor_count(_ring_stack(img)) == 1)
        if not ends.any():
            break
        img[ends] = False
    return Skeleton(BinaryMask(img), skel.source_id)


def analyze_crop(crop, merge_radius: float = 3.0, spur_iterations: int = 4):
    """Skeleton and branch points of a crop's cleaned mask.

    Opens then closes the mask with a 3x3 cross to drop speckle, thins,
    and prunes spurs before looking for branch points.
    """
    if crop.mask.area == 0:
        raise InvalidArgumentError(f"crop {crop.id} has an empty mask")
    cross = Kernel.cross(3)
    cleaned = morphology(morphology(crop.mask, cross, ERODE), cross, DILATE)
    cleaned = morphology(morphology(cleaned, cross, DILATE), cross, ERODE)
    skel = prune_spurs(skeletonize(cleaned, crop.id), spur_iterations)
    return skel, detect_intersections(skel, merge_radius)


def classify_crop(crop, merge_radius: float = 3.0, spur_iterations: int = 4) -> str:
    """Decide whether a crop holds a single chromosome or several: any
    branch point on the cleaned skeleton marks it suspect-multi.
    Updates crop.kind and returns it.
    """
    _, branches = analyze_crop(crop, merge_radius, spur_iterations)
    crop.kind = KIND_SUSPECT if branches else KIND_SINGLE
    return crop.kind
