"""Class assignment: pluggable per-crop scoring, argmax labeling, and the
count-constrained redistribution that enforces how many chromosomes each
class may hold (2 per class in a normal 46-chromosome metaphase)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, MissingScoreError
from .raster import BinaryMask, GrayImage
from .segmentation import min_area_rect

PROVENANCE_ARGMAX = "argmax"
PROVENANCE_REDISTRIBUTED = "redistributed"


@dataclass(frozen=True)
class ScoreMatrix:
    """Nonnegative score of every classification unit against every class.

    Row order is the unit order; ``scores[i, c-1]`` is unit i's score for
    class c.
    """

    row_ids: tuple
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        arr = np.asarray(self.scores, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgumentError("scores must be a non-empty 2-D matrix")
        if len(self.row_ids) != arr.shape[0]:
            raise InvalidArgumentError(
                f"{len(self.row_ids)} row ids for {arr.shape[0]} score rows"
            )
        if len(set(self.row_ids)) != len(self.row_ids):
            raise InvalidArgumentError("row ids must be unique")
        if not np.isfinite(arr).all():
            raise InvalidArgumentError("scores must be finite")
        if (arr < 0).any():
            raise InvalidArgumentError("scores must be nonnegative")
        if not (arr.max(axis=1) > 0).all():
            raise InvalidArgumentError("every row needs at least one positive score")
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)

    @property
    def classes(self) -> int:
        return self.scores.shape[1]

    @property
    def count(self) -> int:
        return self.scores.shape[0]

    def row(self, unit_id: str) -> np.ndarray:
        try:
            return self.scores[self.row_ids.index(unit_id)]
        except ValueError:
            raise MissingScoreError(f"no scores for {unit_id!r}") from None

    def to_json(self) -> dict:
        return {
            "classes": self.classes,
            "rows": [
                {"id": unit_id, "scores": [float(v) for v in row]}
                for unit_id, row in zip(self.row_ids, self.scores)
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScoreMatrix":
        if not isinstance(obj, dict) or "rows" not in obj:
            raise InvalidArgumentError("scores file must be an object with a 'rows' list")
        rows = obj["rows"]
        if not isinstance(rows, list) or not rows:
            raise InvalidArgumentError("'rows' must be a non-empty list")
        classes = obj.get("classes")
        ids, vectors = [], []
        for i, row in enumerate(rows):
            if not isinstance(row, dict) or "id" not in row or "scores" not in row:
                raise InvalidArgumentError(f"row {i} needs 'id' and 'scores'")
            values = row["scores"]
            if not isinstance(values, list):
                raise InvalidArgumentError(f"row {i} scores must be a list")
            if classes is not None and len(values) != classes:
                raise InvalidArgumentError(
                    f"row {i} has {len(values)} scores, expected {classes}"
                )
            ids.append(str(row["id"]))
            vectors.append([float(v) for v in values])
        return cls(tuple(ids), np.array(vectors, dtype=np.float64))


@dataclass
class Assignment:
    """Unit id -> class index, with how each unit got its class."""

    mapping: dict
    provenance: dict = field(default_factory=dict)

    def counts(self, classes: int) -> np.ndarray:
        out = np.zeros(classes, dtype=np.int64)
        for cls_index in self.mapping.values():
            out[cls_index - 1] += 1
        return out

    def to_json(self) -> dict:
        return {
            unit_id: {
                "class": self.mapping[unit_id],
                "provenance": self.provenance.get(unit_id, PROVENANCE_ARGMAX),
            }
            for unit_id in sorted(self.mapping)
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Assignment":
        mapping, provenance = {}, {}
        for unit_id, entry in obj.items():
            mapping[unit_id] = int(entry["class"])
            provenance[unit_id] = entry.get("provenance", PROVENANCE_ARGMAX)
        return cls(mapping, provenance)


@dataclass(frozen=True)
class ExpectedCounts:
    """Per-class target counts plus the declared residual for metaphases
    whose total cannot split evenly (45 or 47 chromosomes)."""

    counts: tuple
    residual: int = 0

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if any(c < 0 for c in self.counts):
            raise InvalidArgumentError("expected counts must be >= 0")

    @property
    def classes(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts) + self.residual


def expected_counts(total: int, classes: int) -> ExpectedCounts:
    """Two chromosomes per class, with one declared surplus or deficit
    when the total is one off (47 or 45)."""
    if classes < 1:
        raise InvalidArgumentError(f"classes must be >= 1, got {classes}")
    base = 2 * classes
    if total not in (base - 1, base, base + 1):
        raise InvalidArgumentError(
            f"total {total} is inconsistent with {classes} classes (expected {base} +/- 1)"
        )
    return ExpectedCounts((2,) * classes, residual=total - base)


def argmax_assign(scores: ScoreMatrix) -> Assignment:
    """Every unit takes its highest-scoring class; ties go to the
    smallest class index."""
    best = np.argmax(scores.scores, axis=1)  # first maximum = smallest class
    mapping = {unit_id: int(c) + 1 for unit_id, c in zip(scores.row_ids, best)}
    provenance = {unit_id: PROVENANCE_ARGMAX for unit_id in scores.row_ids}
    return Assignment(mapping, provenance)


@dataclass
class DistributionResult:
    """Redistribution outcome: the final assignment, every move made, and
    whatever deficits or surpluses could not be resolved."""

    assignment: Assignment
    moves: list
    deficits: dict
    surpluses: dict

    @property
    def balanced(self) -> bool:
        return not self.deficits and not self.surpluses

    def to_json(self) -> dict:
        return {
            "assignment": self.assignment.to_json(),
            "moves": [
                {"id": unit_id, "from": src, "to": dst} for unit_id, src, dst in self.moves
            ],
            "deficits": {str(k): v for k, v in sorted(self.deficits.items())},
            "surpluses": {str(k): v for k, v in sorted(self.surpluses.items())},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DistributionResult":
        return cls(
            assignment=Assignment.from_json(obj.get("assignment", {})),
            moves=[(m["id"], int(m["from"]), int(m["to"])) for m in obj.get("moves", [])],
            deficits={int(k): int(v) for k, v in obj.get("deficits", {}).items()},
            surpluses={int(k): int(v) for k, v in obj.get("surpluses", {}).items()},
        )


def distribute(scores: ScoreMatrix, assignment: Assignment, expected: ExpectedCounts) -> DistributionResult:
    """Move units from over-full classes to under-full ones until the
    per-class counts match the expected counts.

    Each round picks the class with the largest deficit (ties: smallest
    index), then the unit in any over-full class scoring highest for it
    (ties: larger margin over its current class, then smallest unit id).
    A move never drains a class at or below its expected count, so every
    move reduces the total deficit by one and at most N moves happen.
    With mismatched totals the loop stops when either side runs out and
    reports the leftovers.
    """
    if expected.classes != scores.classes:
        raise InvalidArgumentError(
            f"expected counts cover {expected.classes} classes, scores {scores.classes}"
        )
    unknown = sorted(set(assignment.mapping) - set(scores.row_ids))
    if unknown:
        raise InvalidArgumentError(f"assignment has units without scores: {', '.join(unknown)}")

    mapping = dict(assignment.mapping)
    provenance = dict(assignment.provenance)
    counts = np.zeros(expected.classes, dtype=np.int64)
    for cls_index in mapping.values():
        counts[cls_index - 1] += 1
    target = np.array(expected.counts, dtype=np.int64)
    index_of = {unit_id: i for i, unit_id in enumerate(scores.row_ids)}
    moves = []

    while True:
        deficits = target - counts
        lacking = np.nonzero(deficits > 0)[0]
        if len(lacking) == 0:
            break
        lack = int(lacking[np.argmax(deficits[lacking])]) + 1  # argmax keeps first tie
        crowded = {c + 1 for c in np.nonzero(counts > target)[0]}
        candidates = [uid for uid, c in mapping.items() if c in crowded]
        if not candidates:
            break
        def rank(unit_id: str):
            row = scores.scores[index_of[unit_id]]
            margin = row[lack - 1] - row[mapping[unit_id] - 1]
            return (-row[lack - 1], -margin, unit_id)
        mover = min(candidates, key=rank)
        src = mapping[mover]
        mapping[mover] = lack
        provenance[mover] = PROVENANCE_REDISTRIBUTED
        counts[src - 1] -= 1
        counts[lack - 1] += 1
        moves.append((mover, src, lack))

    deficits = {c + 1: int(d) for c, d in enumerate(target - counts) if d > 0}
    surpluses = {c + 1: int(-d) for c, d in enumerate(target - counts) if d < 0}
    return DistributionResult(Assignment(mapping, provenance), moves, deficits, surpluses)


class FileScoreProvider:
    """Replays externally computed scores by unit id."""

    def __init__(self, matrix: ScoreMatrix):
        self.matrix = matrix

    @classmethod
    def from_path(cls, path) -> "FileScoreProvider":
        with open(path, encoding="utf-8") as fh:
            return cls(ScoreMatrix.from_json(json.load(fh)))

    def score(self, unit_id: str, image: GrayImage) -> np.ndarray:
        return self.matrix.row(unit_id)


class ToyGeometricProvider:
    """Scores crops by geometry alone: projected length and mask area
    against per-class reference measurements. Only good enough to close
    the loop in tests and demos; a trained model would plug in here."""

    def __init__(self, centroids: np.ndarray):
        centroids = np.asarray(centroids, dtype=np.float64)
        if centroids.ndim != 2 or centroids.shape[1] != 2:
            raise InvalidArgumentError("centroids must be (classes, 2)")
        self.centroids = centroids

    @classmethod
    def from_templates(cls, templates: list) -> "ToyGeometricProvider":
        """Measure one reference image per class, in class order."""
        if not templates:
            raise InvalidArgumentError("from_templates needs at least one image")
        return cls(np.array([cls.features(t) for t in templates]))

    @property
    def classes(self) -> int:
        return len(self.centroids)

    @staticmethod
    def features(image: GrayImage) -> np.ndarray:
        fg = image.pixels < 255
        if not fg.any():
            raise InvalidArgumentError("image has no foreground to measure")
        points = [(int(x), int(y)) for y, x in np.argwhere(fg)]
        rect = min_area_rect(points)
        length = max(rect.size)
        area = float(BinaryMask(fg).area)
        return np.array([length, area], dtype=np.float64)

    def score(self, unit_id: str, image: GrayImage) -> np.ndarray:
        feats = self.features(image)
        scale = np.maximum(np.abs(self.centroids), 1.0)
        dist = np.sqrt((((self.centroids - feats) / scale) ** 2).sum(axis=1))
        return 1.0 / (1.0 + dist)


def score_units(units: list, provider, classes: int) -> ScoreMatrix:
    """Build a ScoreMatrix by scoring (unit_id, image) pairs in order."""
    ids, rows = [], []
    for unit_id, image in units:
        vector = np.asarray(provider.score(unit_id, image), dtype=np.float64)
        if vector.shape != (classes,):
            raise InvalidArgumentError(
                f"provider returned {vector.shape} for {unit_id}, expected ({classes},)"
            )
        ids.append(unit_id)
        rows.append(vector)
    return ScoreMatrix(tuple(ids), np.array(rows, dtype=np.float64))
