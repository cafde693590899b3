"""Seeded separation of suspect crops: marker-controlled watershed over
the crop's gradient surface, then chromosome reconstruction, either
sharing the intersection between both outputs (method 2) or giving it to
the chromosome on top and filling the gap it leaves below (method 1)."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import DanglingIntersectionError, InvalidArgumentError, UnfillableGapError
from .filters import DILATE, median_blur, morphological_gradient, morphology
from .raster import BinaryMask, GrayImage, Kernel

ROLE_CHROMOSOME = "chromosome"
ROLE_INTERSECTION = "intersection"
ROLE_BACKGROUND = "background"
_ROLES = (ROLE_CHROMOSOME, ROLE_INTERSECTION, ROLE_BACKGROUND)

METHOD_ABOVE_FILL = 1
METHOD_SHARED = 2

_BACKGROUND_VALUE = 255  # crops sit on pure white


@dataclass(frozen=True)
class Seed:
    x: int
    y: int
    label: int
    role: str = ROLE_CHROMOSOME

    def __post_init__(self):
        if not isinstance(self.label, int) or isinstance(self.label, bool):
            raise InvalidArgumentError(f"seed label must be an integer, got {self.label!r}")
        if not 1 <= self.label <= 255:
            # labels double as raster pixel values in exported previews
            raise InvalidArgumentError(f"seed label must be in [1, 255], got {self.label}")
        if self.role not in _ROLES:
            raise InvalidArgumentError(f"seed role must be one of {_ROLES}, got {self.role!r}")

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "label": self.label, "role": self.role}


@dataclass(frozen=True)
class SeedSet:
    """Operator-provided markers plus the separation method they are for."""

    seeds: tuple
    method: int = METHOD_SHARED
    above_label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if not self.seeds:
            raise InvalidArgumentError("seed set is empty")
        if self.method not in (METHOD_ABOVE_FILL, METHOD_SHARED):
            raise InvalidArgumentError(f"method must be 1 or 2, got {self.method}")
        if self.above_label is not None and not 1 <= int(self.above_label) <= 255:
            raise InvalidArgumentError(f"above_label out of range: {self.above_label}")
        roles: dict = {}
        for seed in self.seeds:
            prior = roles.setdefault(seed.label, seed.role)
            if prior != seed.role:
                raise InvalidArgumentError(
                    f"label {seed.label} used with roles {prior} and {seed.role}"
                )

    @property
    def roles(self) -> dict:
        return {seed.label: seed.role for seed in self.seeds}

    def labels_for(self, role: str) -> list:
        return sorted({seed.label for seed in self.seeds if seed.role == role})

    @property
    def chromosome_labels(self) -> list:
        return self.labels_for(ROLE_CHROMOSOME)

    @property
    def intersection_labels(self) -> list:
        return self.labels_for(ROLE_INTERSECTION)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "above_label": self.above_label,
            "seeds": [seed.to_json() for seed in self.seeds],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SeedSet":
        if not isinstance(obj, dict) or "seeds" not in obj:
            raise InvalidArgumentError("seed file must be an object with a 'seeds' list")
        raw_seeds = obj["seeds"]
        if not isinstance(raw_seeds, list):
            raise InvalidArgumentError("'seeds' must be a list")
        seeds = []
        for i, raw in enumerate(raw_seeds):
            if not isinstance(raw, dict):
                raise InvalidArgumentError(f"seed {i} must be an object")
            unknown = sorted(set(raw) - {"x", "y", "label", "role"})
            if unknown:
                raise InvalidArgumentError(f"seed {i} has unknown fields: {', '.join(unknown)}")
            try:
                x, y = int(raw["x"]), int(raw["y"])
                label = int(raw["label"])
            except (KeyError, TypeError, ValueError) as exc:
                raise InvalidArgumentError(f"seed {i} needs integer x, y, label") from exc
            seeds.append(Seed(x, y, label, raw.get("role", ROLE_CHROMOSOME)))
        method = obj.get("method", METHOD_SHARED)
        if not isinstance(method, int) or isinstance(method, bool):
            raise InvalidArgumentError(f"method must be an integer, got {method!r}")
        above = obj.get("above_label")
        if above is not None:
            if not isinstance(above, int) or isinstance(above, bool):
                raise InvalidArgumentError(f"above_label must be an integer, got {above!r}")
        return cls(tuple(seeds), method=method, above_label=above)


@dataclass(frozen=True)
class SegmentMap:
    """Flooding result: per-pixel seed labels, 0 on watershed lines and
    unreached pixels, plus the line mask and each label's role."""

    labels: np.ndarray
    lines: np.ndarray
    roles: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels.setflags(write=False)
        self.lines.setflags(write=False)

    def region(self, label: int) -> np.ndarray:
        return self.labels == label

    def label_values(self) -> list:
        values = np.unique(self.labels)
        return [int(v) for v in values if v > 0]

    def to_gray(self) -> GrayImage:
        """Label raster as an 8-bit image (labels are capped at 255)."""
        return GrayImage(self.labels.astype(np.uint8))

    def stats(self) -> list:
        return [
            {
                "label": label,
                "role": self.roles.get(label, ROLE_CHROMOSOME),
                "area": int(np.count_nonzero(self.labels == label)),
            }
            for label in self.label_values()
        ]


@dataclass(frozen=True)
class SeparatedChromosome:
    """One reconstructed chromosome on a white background.

    ``provenance`` lists the intersection labels whose regions were merged
    in (shared for method 2, filled-over for method 1 below-chromosomes).
    """

    image: GrayImage
    mask: BinaryMask
    parent_crop: str
    label: int
    provenance: tuple = ()

    @property
    def unit_id(self) -> str:
        return f"{self.parent_crop}_{self.label}"


class GapFiller(Protocol):
    def __call__(self, image: GrayImage, object_mask: BinaryMask, gap_mask: BinaryMask) -> GrayImage:
        ...


def _flood_surface(gray: GrayImage) -> np.ndarray:
    blurred = gray
    if min(gray.width, gray.height) >= 3:
        blurred = median_blur(gray, 3)
    return morphological_gradient(blurred, Kernel.square(3)).pixels.astype(np.int32)


def watershed(gray: GrayImage, seeds: SeedSet) -> SegmentMap:
    """Meyer-style flooding of the crop's gradient surface from the seeds.

    Labels grow in ascending gradient order, ties resolved by linear pixel
    index, so the result is deterministic and independent of seed list
    order. Chromosome and intersection labels never claim pure-white
    (background) pixels; background-role labels may claim anything. A
    pixel reached by two labels at once becomes a watershed-line pixel
    and stays label 0.
    """
    h, w = gray.height, gray.width
    roles = seeds.roles
    for seed in seeds.seeds:
        if not (0 <= seed.x < w and 0 <= seed.y < h):
            raise InvalidArgumentError(
                f"seed ({seed.x}, {seed.y}) outside {w}x{h} crop"
            )
    if len(roles) < 2:
        raise InvalidArgumentError("watershed needs seeds with >= 2 distinct labels")

    labels = np.zeros((h, w), dtype=np.int32)
    for seed in seeds.seeds:
        prior = labels[seed.y, seed.x]
        if prior and prior != seed.label:
            raise InvalidArgumentError(
                f"seeds with labels {prior} and {seed.label} share pixel ({seed.x}, {seed.y})"
            )
        labels[seed.y, seed.x] = seed.label

    surface = _flood_surface(gray)
    pixels = gray.pixels
    lines = np.zeros((h, w), dtype=bool)
    queued = np.zeros((h, w), dtype=bool)
    heap: list = []

    def push_neighbors(y: int, x: int) -> None:
        for dy, dx in ((-1, 0), (0, -1), (0, 1), (1, 0)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and not labels[ny, nx] and not lines[ny, nx] and not queued[ny, nx]:
                queued[ny, nx] = True
                heapq.heappush(heap, (int(surface[ny, nx]), ny * w + nx))

    for y, x in np.argwhere(labels > 0):
        push_neighbors(int(y), int(x))

    while heap:
        _, idx = heapq.heappop(heap)
        y, x = divmod(idx, w)
        if labels[y, x] or lines[y, x]:
            continue
        adjacent = set()
        for dy, dx in ((-1, 0), (0, -1), (0, 1), (1, 0)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx]:
                adjacent.add(int(labels[ny, nx]))
        if pixels[y, x] == _BACKGROUND_VALUE:
            adjacent = {l for l in adjacent if roles[l] == ROLE_BACKGROUND}
        if not adjacent:
            queued[y, x] = False  # a background front may requeue it later
            continue
        if len(adjacent) == 1:
            labels[y, x] = adjacent.pop()
            push_neighbors(y, x)
        else:
            lines[y, x] = True
    return SegmentMap(labels=labels, lines=lines, roles=dict(roles))


def _seed_centroids(seeds: SeedSet) -> dict:
    sums: dict = {}
    for seed in seeds.seeds:
        sx, sy, n = sums.get(seed.label, (0.0, 0.0, 0))
        sums[seed.label] = (sx + seed.x, sy + seed.y, n + 1)
    return {label: (sx / n, sy / n) for label, (sx, sy, n) in sums.items()}


def absorb_unassigned(segmap: SegmentMap, fg: np.ndarray, seeds: SeedSet) -> np.ndarray:
    """Resolve label-0 foreground pixels (watershed lines and any pixels
    flooding never reached) so no object pixel is lost.

    Each such pixel joins the 8-adjacent non-background region whose seed
    centroid is closest; passes repeat so pixels behind a line resolve
    once their neighbors do. Returns a new labels array.
    """
    labels = segmap.labels.copy()
    roles = seeds.roles
    centroids = _seed_centroids(seeds)
    candidates = {label: c for label, c in centroids.items() if roles[label] != ROLE_BACKGROUND}
    h, w = labels.shape
    while True:
        pending = np.argwhere((labels == 0) & fg)
        if len(pending) == 0:
            return labels
        assigned_any = False
        updates = []
        for y, x in pending:
            best = None
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    ny, nx = y + dy, x + dx
                    if not (0 <= ny < h and 0 <= nx < w):
                        continue
                    label = int(labels[ny, nx])
                    if label <= 0 or label not in candidates:
                        continue
                    cx, cy = candidates[label]
                    key = (math.hypot(x - cx, y - cy), label)
                    if best is None or key < best:
                        best = key
            if best is not None:
                updates.append((int(y), int(x), best[1]))
        # batch per pass: the result must not depend on scan order
        for y, x, label in updates:
            labels[y, x] = label
            assigned_any = True
        if not assigned_any:
            return labels  # isolated foreground islands stay unlabeled


def _touching(a: np.ndarray, b: np.ndarray) -> bool:
    if not a.any() or not b.any():
        return False
    grown = morphology(BinaryMask(a), Kernel.square(3), DILATE)
    return bool((grown.pixels & b).any())


def _on_white(image: np.ndarray, mask: np.ndarray) -> GrayImage:
    return GrayImage(np.where(mask, image, np.uint8(_BACKGROUND_VALUE)).astype(np.uint8))


def _prepare(crop, seeds: SeedSet, method: int):
    if seeds.method != method:
        raise InvalidArgumentError(
            f"seed set was built for method {seeds.method}, not {method}"
        )
    chrom = seeds.chromosome_labels
    if len(chrom) < 2:
        raise InvalidArgumentError("separation needs >= 2 distinct chromosome labels")
    segmap = watershed(crop.image, seeds)
    labels = absorb_unassigned(segmap, crop.mask.pixels, seeds)
    fg = crop.mask.pixels
    regions = {}
    for label in chrom + seeds.intersection_labels:
        region = (labels == label) & fg
        if label in chrom and not region.any():
            raise InvalidArgumentError(f"chromosome label {label} claimed no object pixels")
        regions[label] = region
    return segmap, regions


def separate_method2(crop, seeds: SeedSet) -> list:
    """Shared-intersection separation: every chromosome output keeps the
    intersection regions its region touches, so overlap pixels appear in
    all the chromosomes that cross there."""
    _, regions = _prepare(crop, seeds, METHOD_SHARED)
    chrom = seeds.chromosome_labels
    inter = seeds.intersection_labels
    shared: dict = {k: [] for k in chrom}
    for i in inter:
        takers = [k for k in chrom if _touching(regions[i], regions[k])]
        if not takers:
            raise DanglingIntersectionError(
                f"intersection label {i} touches no chromosome region"
            )
        for k in takers:
            shared[k].append(i)
    outputs = []
    for k in chrom:
        mask = regions[k].copy()
        for i in shared[k]:
            mask |= regions[i]
        outputs.append(
            SeparatedChromosome(
                image=_on_white(crop.image.pixels, mask),
                mask=BinaryMask(mask),
                parent_crop=crop.id,
                label=k,
                provenance=tuple(shared[k]),
            )
        )
    return outputs


def separate_method1(crop, seeds: SeedSet, filler: GapFiller | None = None) -> list:
    """Above/below separation: the chromosome designated as lying above
    keeps every intersection region; each remaining chromosome gets the
    intersection footprint it touches repainted by ``filler`` (the
    baseline interpolating filler by default)."""
    filler = filler or baseline_gap_fill
    chrom_check = seeds.chromosome_labels
    inter = seeds.intersection_labels
    above = seeds.above_label
    if inter and above is None:
        raise InvalidArgumentError("method 1 needs above_label when intersection seeds exist")
    if above is not None and above not in chrom_check:
        raise InvalidArgumentError(
            f"above_label {above} is not among chromosome labels {chrom_check}"
        )
    _, regions = _prepare(crop, seeds, METHOD_ABOVE_FILL)
    chrom = seeds.chromosome_labels
    outputs = []
    for k in chrom:
        if k == above:
            mask = regions[k].copy()
            for i in inter:
                mask |= regions[i]
            image = _on_white(crop.image.pixels, mask)
            provenance = tuple(inter)
        else:
            gap = np.zeros_like(regions[k])
            taken = []
            for i in inter:
                if _touching(regions[i], regions[k]):
                    gap |= regions[i]
                    taken.append(i)
            if taken:
                filled = filler(crop.image, BinaryMask(regions[k]), BinaryMask(gap))
                mask = regions[k] | gap
                image = _on_white(filled.pixels, mask)
            else:
                mask = regions[k].copy()
                image = _on_white(crop.image.pixels, mask)
            provenance = tuple(taken)
        outputs.append(
            SeparatedChromosome(
                image=image,
                mask=BinaryMask(mask),
                parent_crop=crop.id,
                label=k,
                provenance=provenance,
            )
        )
    return outputs


def _principal_axis(obj: np.ndarray) -> tuple:
    ys, xs = np.nonzero(obj)
    if len(xs) < 2:
        return (1.0, 0.0)
    coords = np.stack([xs.astype(np.float64), ys.astype(np.float64)])
    coords -= coords.mean(axis=1, keepdims=True)
    cov = coords @ coords.T / len(xs)
    eigvals, eigvecs = np.linalg.eigh(cov)
    vx, vy = eigvecs[:, int(np.argmax(eigvals))]
    if vx < 0 or (vx == 0 and vy < 0):
        vx, vy = -vx, -vy
    return (float(vx), float(vy))


def baseline_gap_fill(image: GrayImage, object_mask: BinaryMask, gap_mask: BinaryMask) -> GrayImage:
    """Deterministic stand-in for a learned inpainter.

    Marches from each gap pixel both ways along the object's principal
    axis to the nearest object pixels and blends their intensities
    weighted by inverse distance; one-sided hits copy that intensity, and
    pixels whose rays miss entirely copy the nearest object pixel. Only
    gap pixels change.
    """
    gap = gap_mask.pixels & ~object_mask.pixels
    if not gap.any():
        return image
    obj = object_mask.pixels & ~gap
    if not obj.any():
        raise UnfillableGapError(
            f"cannot fill {int(gap.sum())} gap pixels with an empty object mask"
        )
    vx, vy = _principal_axis(obj)
    h, w = gap.shape
    limit = math.hypot(h, w)
    src = image.pixels
    out = src.copy()
    obj_yx = np.argwhere(obj)
    for y, x in np.argwhere(gap):
        hits = []
        for sign in (1.0, -1.0):
            t = 0.5
            while t <= limit:
                px = int(round(x + sign * vx * t))
                py = int(round(y + sign * vy * t))
                if not (0 <= px < w and 0 <= py < h):
                    break
                if obj[py, px]:
                    hits.append((t, float(src[py, px])))
                    break
                t += 0.5
        if len(hits) == 2:
            (d_fwd, i_fwd), (d_back, i_back) = hits
            value = (i_fwd * d_back + i_back * d_fwd) / (d_fwd + d_back)
        elif len(hits) == 1:
            value = hits[0][1]
        else:
            dist = np.hypot(obj_yx[:, 0] - y, obj_yx[:, 1] - x)
            ny, nx = obj_yx[int(np.argmin(dist))]
            value = float(src[ny, nx])
        out[y, x] = np.uint8(min(max(int(round(value)), 0), 255))
    return GrayImage(out)
