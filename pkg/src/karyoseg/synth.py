"""Synthetic metaphase generator: banded dark capsules on a white canvas
with exact per-object masks, known class geometry, and recorded crossing
coordinates. This is the ground truth the oracles and the acceptance
suite measure against."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

import json
from pathlib import Path

from .errors import InvalidArgumentError, LayoutFailureError
from .raster import BinaryMask, GrayImage, save_gray
from .segmentation import label_components

ISOLATED = "isolated"
TOUCHING = "touching"
OVERLAPPING = "overlapping"
CLUSTER = "cluster"
_ARRANGEMENTS = (ISOLATED, TOUCHING, OVERLAPPING, CLUSTER)

DEFAULT_CANVAS = (1152, 864)  # (width, height)
_BORDER = 3  # free pixels kept along every canvas edge
_GROUP_GAP = 2  # Chebyshev halo between groups so outlines never merge


def class_geometry(class_index: int, classes: int = 23) -> tuple:
    """Deterministic (length, width, band count) for a class: lengths
    shrink with the class index the way real karyotype pairs do."""
    if not 1 <= class_index <= classes:
        raise InvalidArgumentError(f"class_index must be in [1, {classes}], got {class_index}")
    t = (class_index - 1) / max(classes - 1, 1)
    length = 104.0 - 62.0 * t
    if t < 0.3:
        width = 7.0
    elif t < 0.65:
        width = 6.0
    else:
        width = 5.0
    bands = 3 + class_index % 4
    return length, width, bands


@dataclass(frozen=True)
class ObjectSpec:
    """One chromosome to render. Unset geometry falls back to the class
    table; unset orientation is sampled at layout time."""

    class_index: int
    length: float | None = None
    width: float | None = None
    bend_deg: float = 0.0
    orientation_deg: float | None = None
    band_seed: int | None = None

    def geometry(self, classes: int) -> tuple:
        base_length, base_width, bands = class_geometry(self.class_index, classes)
        length = base_length if self.length is None else float(self.length)
        width = base_width if self.width is None else float(self.width)
        if length <= 0 or width <= 0:
            raise InvalidArgumentError("object length and width must be > 0")
        seed = self.class_index if self.band_seed is None else int(self.band_seed)
        return length, width, bands, seed

    def to_json(self) -> dict:
        return {
            "class_index": self.class_index,
            "length": self.length,
            "width": self.width,
            "bend_deg": self.bend_deg,
            "orientation_deg": self.orientation_deg,
            "band_seed": self.band_seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ObjectSpec":
        known = {"class_index", "length", "width", "bend_deg", "orientation_deg", "band_seed"}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise InvalidArgumentError(f"unknown object fields: {', '.join(unknown)}")
        if "class_index" not in obj:
            raise InvalidArgumentError("object spec needs class_index")
        return cls(
            class_index=int(obj["class_index"]),
            length=obj.get("length"),
            width=obj.get("width"),
            bend_deg=float(obj.get("bend_deg", 0.0)),
            orientation_deg=obj.get("orientation_deg"),
            band_seed=obj.get("band_seed"),
        )


@dataclass(frozen=True)
class GroupSpec:
    """A placement unit: one isolated object, a touching or overlapping
    pair, or a cluster. Overlapping pairs list the bottom object first and
    render straight so the centerline crossing is exact."""

    arrangement: str
    members: tuple
    crossing_deg: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if self.arrangement not in _ARRANGEMENTS:
            raise InvalidArgumentError(f"arrangement must be one of {_ARRANGEMENTS}")
        n = len(self.members)
        if self.arrangement == ISOLATED and n != 1:
            raise InvalidArgumentError("isolated groups hold exactly one object")
        if self.arrangement in (TOUCHING, OVERLAPPING) and n != 2:
            raise InvalidArgumentError(f"{self.arrangement} groups hold exactly two objects")
        if self.arrangement == CLUSTER and n < 2:
            raise InvalidArgumentError("cluster groups hold at least two objects")
        if self.arrangement == OVERLAPPING:
            if any(m.bend_deg for m in self.members):
                raise InvalidArgumentError("overlapping members must be straight (bend_deg 0)")
            if self.crossing_deg is not None and not 5.0 <= self.crossing_deg <= 90.0:
                raise InvalidArgumentError("crossing_deg must lie in [5, 90]")

    def to_json(self) -> dict:
        return {
            "arrangement": self.arrangement,
            "crossing_deg": self.crossing_deg,
            "members": [m.to_json() for m in self.members],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GroupSpec":
        known = {"arrangement", "crossing_deg", "members"}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise InvalidArgumentError(f"unknown group fields: {', '.join(unknown)}")
        members = obj.get("members")
        if not isinstance(members, list):
            raise InvalidArgumentError("group needs a 'members' list")
        return cls(
            arrangement=obj.get("arrangement", ISOLATED),
            members=tuple(ObjectSpec.from_json(m) for m in members),
            crossing_deg=obj.get("crossing_deg"),
        )


@dataclass(frozen=True)
class SynthSpec:
    groups: tuple
    canvas: tuple = DEFAULT_CANVAS
    rng_seed: int = 0
    classes: int = 23

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "canvas", (int(self.canvas[0]), int(self.canvas[1])))
        if not self.groups:
            raise InvalidArgumentError("spec needs at least one group")
        if self.canvas[0] < 32 or self.canvas[1] < 32:
            raise InvalidArgumentError("canvas must be at least 32x32")

    @property
    def count(self) -> int:
        return sum(len(g.members) for g in self.groups)

    def to_json(self) -> dict:
        return {
            "canvas": list(self.canvas),
            "rng_seed": self.rng_seed,
            "classes": self.classes,
            "groups": [g.to_json() for g in self.groups],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SynthSpec":
        known = {"canvas", "rng_seed", "classes", "groups"}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise InvalidArgumentError(f"unknown spec fields: {', '.join(unknown)}")
        groups = obj.get("groups")
        if not isinstance(groups, list):
            raise InvalidArgumentError("spec needs a 'groups' list")
        canvas = obj.get("canvas", list(DEFAULT_CANVAS))
        return cls(
            groups=tuple(GroupSpec.from_json(g) for g in groups),
            canvas=(canvas[0], canvas[1]),
            rng_seed=int(obj.get("rng_seed", 0)),
            classes=int(obj.get("classes", 23)),
        )


@dataclass(frozen=True)
class SynthObject:
    """Ground truth for one rendered chromosome."""

    class_index: int
    mask: np.ndarray  # full-canvas bool
    arrangement: str
    group: int
    center: tuple
    orientation_deg: float
    length: float
    width: float

    def __post_init__(self):
        self.mask.setflags(write=False)


@dataclass(frozen=True)
class GroundTruth:
    metaphase: GrayImage
    objects: tuple
    crossings: tuple  # (x, y) centerline crossing per overlapping pair

    @property
    def masks(self) -> list:
        return [o.mask for o in self.objects]

    @property
    def class_labels(self) -> list:
        return [o.class_index for o in self.objects]


def _band_profile(arc: np.ndarray, length: float, bands: int, band_seed: int) -> np.ndarray:
    rng = np.random.default_rng(band_seed)
    base = int(rng.integers(140, 161))
    dips = rng.integers(60, 111, size=bands)
    half_band = length / (bands * 3.0)
    out = np.full(arc.shape, base, dtype=np.float64)
    for i in range(bands):
        center = (i + 0.5) * length / bands
        out[np.abs(arc - center) <= half_band] = dips[i]
    return out.astype(np.uint8)


@dataclass(frozen=True)
class _Placed:
    slices: tuple
    mask: np.ndarray
    intensity: np.ndarray
    center: tuple
    orientation_deg: float
    length: float
    width: float


def _render_capsule(canvas_wh, center, length, width, bend_deg, orientation_deg, band_seed, bands):
    """Rasterize one capsule (rounded-end bar, optionally bent at its
    middle) with its banded intensity pattern. Hard in/out test, no
    anti-aliasing, so masks and rendering agree exactly. Returns None if
    the capsule (plus border margin) does not fit the canvas."""
    cw, ch = canvas_wh
    cx, cy = center
    theta = math.radians(orientation_deg)
    beta = math.radians(bend_deg)
    half = length / 2.0
    dir_a = theta + beta / 2.0
    dir_b = theta - beta / 2.0 + math.pi
    end_a = (cx + half * math.cos(dir_a), cy + half * math.sin(dir_a))
    end_b = (cx + half * math.cos(dir_b), cy + half * math.sin(dir_b))
    elbow = (cx, cy)

    pad = width / 2.0 + 1.0
    xs = [end_a[0], end_b[0], cx]
    ys = [end_a[1], end_b[1], cy]
    x0 = math.floor(min(xs) - pad)
    x1 = math.ceil(max(xs) + pad) + 1
    y0 = math.floor(min(ys) - pad)
    y1 = math.ceil(max(ys) + pad) + 1
    if x0 < _BORDER or y0 < _BORDER or x1 > cw - _BORDER or y1 > ch - _BORDER:
        return None

    gy, gx = np.mgrid[y0:y1, x0:x1]
    gx = gx.astype(np.float64)
    gy = gy.astype(np.float64)

    def seg_field(a, b, arc_start):
        abx, aby = b[0] - a[0], b[1] - a[1]
        norm2 = abx * abx + aby * aby
        if norm2 == 0:
            dist = np.hypot(gx - a[0], gy - a[1])
            return dist, np.full(gx.shape, arc_start)
        t = np.clip(((gx - a[0]) * abx + (gy - a[1]) * aby) / norm2, 0.0, 1.0)
        dist = np.hypot(gx - (a[0] + t * abx), gy - (a[1] + t * aby))
        return dist, arc_start + t * math.sqrt(norm2)

    d1, arc1 = seg_field(end_b, elbow, 0.0)
    d2, arc2 = seg_field(elbow, end_a, half)
    use_first = d1 <= d2
    dist = np.where(use_first, d1, d2)
    arc = np.where(use_first, arc1, arc2)
    mask = dist <= width / 2.0
    if not mask.any():
        return None
    intensity = _band_profile(arc, length, bands, band_seed)
    return _Placed(
        slices=(slice(y0, y1), slice(x0, x1)),
        mask=mask,
        intensity=intensity,
        center=(cx, cy),
        orientation_deg=orientation_deg % 180.0,
        length=length,
        width=width,
    )


def _full_mask(placed: _Placed, shape: tuple) -> np.ndarray:
    out = np.zeros(shape, dtype=bool)
    out[placed.slices] = placed.mask
    return out


def _dilate_chebyshev(mask: np.ndarray, radius: int) -> np.ndarray:
    h, w = mask.shape
    out = mask.copy()
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy == 0 and dx == 0:
                continue
            ty0, ty1 = max(dy, 0), h + min(dy, 0)
            tx0, tx1 = max(dx, 0), w + min(dx, 0)
            out[ty0:ty1, tx0:tx1] |= mask[ty0 - dy : ty1 - dy, tx0 - dx : tx1 - dx]
    return out


def _touching_or_overlapping(a: np.ndarray, b: np.ndarray) -> bool:
    return bool((_dilate_chebyshev(a, 1) & b).any())


def _orientation(member: ObjectSpec, rng) -> float:
    if member.orientation_deg is not None:
        return float(member.orientation_deg) % 180.0
    return float(rng.uniform(0.0, 180.0))


def _pose_group(group: GroupSpec, rng, spec: SynthSpec):
    """One placement attempt. Returns (list of _Placed bottom-to-top,
    crossings) or None when the sampled pose does not satisfy the
    arrangement. Consumes rng draws even on failure, which is fine: the
    whole generation is deterministic for a fixed seed either way."""
    cw, ch = spec.canvas
    cx = float(rng.uniform(0, cw))
    cy = float(rng.uniform(0, ch))

    if group.arrangement == ISOLATED:
        member = group.members[0]
        length, width, bands, seed = member.geometry(spec.classes)
        placed = _render_capsule(
            spec.canvas, (cx, cy), length, width, member.bend_deg, _orientation(member, rng), seed, bands
        )
        return (None if placed is None else ([placed], []))

    if group.arrangement == OVERLAPPING:
        bottom, top = group.members
        gamma = group.crossing_deg if group.crossing_deg is not None else float(rng.uniform(25.0, 85.0))
        theta = _orientation(bottom, rng)
        placements = []
        for member, angle in ((bottom, theta), (top, theta + gamma)):
            length, width, bands, seed = member.geometry(spec.classes)
            shift = float(rng.uniform(-0.2, 0.2)) * length
            center = (cx + shift * math.cos(math.radians(angle)), cy + shift * math.sin(math.radians(angle)))
            placed = _render_capsule(spec.canvas, center, length, width, 0.0, angle, seed, bands)
            if placed is None:
                return None
            placements.append(placed)
        a = _full_mask(placements[0], (ch, cw))
        b = _full_mask(placements[1], (ch, cw))
        if not (a & b).any():
            return None
        # the crossing must not swallow either chromosome's ends
        if (a & ~b).sum() < 0.25 * a.sum() or (b & ~a).sum() < 0.25 * b.sum():
            return None
        return placements, [(cx, cy)]

    if group.arrangement == TOUCHING:
        first, second = group.members
        length1, width1, bands1, seed1 = first.geometry(spec.classes)
        length2, width2, bands2, seed2 = second.geometry(spec.classes)
        theta = _orientation(first, rng)
        placed1 = _render_capsule(spec.canvas, (cx, cy), length1, width1, first.bend_deg, theta, seed1, bands1)
        if placed1 is None:
            return None
        normal = math.radians(theta + 90.0)
        along = float(rng.uniform(-0.25, 0.25)) * (length1 + length2) / 2.0
        axis = math.radians(theta)
        base = (cx + along * math.cos(axis), cy + along * math.sin(axis))
        mask1 = _full_mask(placed1, (ch, cw))
        for gap in (1.2, 1.5, 0.9, 1.8, 0.7, 2.1):
            dist = (width1 + width2) / 2.0 + gap
            center2 = (base[0] + dist * math.cos(normal), base[1] + dist * math.sin(normal))
            placed2 = _render_capsule(
                spec.canvas, center2, length2, width2, second.bend_deg, theta, seed2, bands2
            )
            if placed2 is None:
                continue
            mask2 = _full_mask(placed2, (ch, cw))
            if not (mask1 & mask2).any() and _touching_or_overlapping(mask1, mask2):
                return [placed1, placed2], []
        return None

    # cluster: chain the members so the union stays connected
    placements = []
    masks = []
    anchor = (cx, cy)
    for i, member in enumerate(group.members):
        length, width, bands, seed = member.geometry(spec.classes)
        if i:
            prev = placements[-1]
            hop = 0.30 * (prev.length + length) / 2.0
            phi = float(rng.uniform(0.0, 360.0))
            anchor = (
                prev.center[0] + hop * math.cos(math.radians(phi)),
                prev.center[1] + hop * math.sin(math.radians(phi)),
            )
        placed = _render_capsule(
            spec.canvas, anchor, length, width, member.bend_deg, _orientation(member, rng), seed, bands
        )
        if placed is None:
            return None
        placements.append(placed)
        masks.append(_full_mask(placed, (ch, cw)))
    union = np.zeros((ch, cw), dtype=bool)
    for m in masks:
        union |= m
    _, count, _ = label_components(union)
    if count != 1:
        return None
    return placements, []


def generate(spec: SynthSpec) -> GroundTruth:
    """Render the spec; deterministic for a fixed rng_seed.

    Groups are placed by rejection sampling with a 2-pixel clear halo
    between groups (outlines of distinct groups never merge). Raises
    layout-failure when a group cannot be placed.
    """
    rng = np.random.default_rng(spec.rng_seed)
    cw, ch = spec.canvas
    canvas = np.full((ch, cw), 255, dtype=np.uint8)
    halo = np.zeros((ch, cw), dtype=bool)
    objects = []
    crossings = []

    for gi, group in enumerate(spec.groups):
        for _ in range(600):
            pose = _pose_group(group, rng, spec)
            if pose is None:
                continue
            placements, group_crossings = pose
            union = np.zeros((ch, cw), dtype=bool)
            for placed in placements:
                union[placed.slices] |= placed.mask
            if (union & halo).any():
                continue
            for member, placed in zip(group.members, placements):
                canvas[placed.slices][placed.mask] = placed.intensity[placed.mask]
                objects.append(
                    SynthObject(
                        class_index=member.class_index,
                        mask=_full_mask(placed, (ch, cw)),
                        arrangement=group.arrangement,
                        group=gi,
                        center=placed.center,
                        orientation_deg=placed.orientation_deg,
                        length=placed.length,
                        width=placed.width,
                    )
                )
            crossings.extend(group_crossings)
            halo |= _dilate_chebyshev(union, _GROUP_GAP)
            break
        else:
            raise LayoutFailureError(
                f"could not place group {gi} ({group.arrangement}) after 600 attempts"
            )

    return GroundTruth(
        metaphase=GrayImage(canvas),
        objects=tuple(objects),
        crossings=tuple(crossings),
    )


def class_template(class_index: int, classes: int = 23) -> GrayImage:
    """Reference rendering of a class: one straight capsule, centered on
    a white canvas sized to fit. The toy classifier measures these."""
    length, width, _ = class_geometry(class_index, classes)
    side = int(math.ceil(length + width + 2 * _BORDER + 4))
    spec = SynthSpec(
        groups=(GroupSpec(ISOLATED, (ObjectSpec(class_index, orientation_deg=0.0),)),),
        canvas=(side, side),
        rng_seed=class_index,
        classes=classes,
    )
    return _place_centered_template(spec)


def _place_centered_template(spec: SynthSpec) -> GrayImage:
    member = spec.groups[0].members[0]
    length, width, bands, seed = member.geometry(spec.classes)
    cw, ch = spec.canvas
    placed = _render_capsule(spec.canvas, (cw / 2.0, ch / 2.0), length, width, 0.0, 0.0, seed, bands)
    if placed is None:
        raise LayoutFailureError("template does not fit its canvas")
    canvas = np.full((ch, cw), 255, dtype=np.uint8)
    canvas[placed.slices][placed.mask] = placed.intensity[placed.mask]
    return GrayImage(canvas)


def pair_crossing_spec(
    class_bottom: int = 3,
    class_top: int = 9,
    crossing_deg: float | None = None,
    rng_seed: int = 0,
    canvas: tuple = (256, 256),
) -> SynthSpec:
    """A single overlapping pair, the standard fixture for separation and
    branch-point tests."""
    return SynthSpec(
        groups=(
            GroupSpec(
                OVERLAPPING,
                (ObjectSpec(class_bottom), ObjectSpec(class_top)),
                crossing_deg=crossing_deg,
            ),
        ),
        canvas=canvas,
        rng_seed=rng_seed,
    )


def write_ground_truth(truth: GroundTruth, out_dir) -> dict:
    """Persist a generated scene: metaphase.png, one binary PNG per object
    mask, and truth.json tying everything together. Returns the manifest."""
    out = Path(out_dir)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    save_gray(truth.metaphase, out / "metaphase.png")
    entries = []
    for i, obj in enumerate(truth.objects):
        name = f"masks/obj_{i:03d}.png"
        save_gray(BinaryMask(obj.mask).to_gray(), out / name)
        entries.append(
            {
                "class_index": obj.class_index,
                "arrangement": obj.arrangement,
                "group": obj.group,
                "center": [obj.center[0], obj.center[1]],
                "orientation_deg": obj.orientation_deg,
                "length": obj.length,
                "width": obj.width,
                "mask": name,
            }
        )
    manifest = {
        "image": "metaphase.png",
        "objects": entries,
        "crossings": [[x, y] for x, y in truth.crossings],
    }
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def metaphase_spec(rng_seed: int = 0, overlap: bool = False, classes: int = 23) -> SynthSpec:
    """A full 46-object metaphase: two of each class, all isolated, or
    with the first class pair rendered as one overlapping group."""
    groups = []
    if overlap:
        groups.append(
            GroupSpec(OVERLAPPING, (ObjectSpec(1), ObjectSpec(1)), crossing_deg=55.0)
        )
        remaining = [c for c in range(1, classes + 1) for _ in range(2)][2:]
    else:
        remaining = [c for c in range(1, classes + 1) for _ in range(2)]
    groups.extend(GroupSpec(ISOLATED, (ObjectSpec(c),)) for c in remaining)
    return SynthSpec(groups=tuple(groups), canvas=DEFAULT_CANVAS, rng_seed=rng_seed, classes=classes)
