"""Session orchestration: run the pipeline on an uploaded metaphase,
persist every artifact under one directory, and replay that directory
back into memory. The directory is the single source of truth; the same
input bytes and config always produce the same session id and the same
artifact bytes."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .classify import (
    Assignment,
    DistributionResult,
    ScoreMatrix,
    ToyGeometricProvider,
    argmax_assign,
    distribute,
    expected_counts,
    score_units,
)
from .config import PipelineConfig
from .errors import ConflictError, InvalidArgumentError, NotFoundError
from .overlap import classify_crop
from .raster import BinaryMask, GrayImage, decode_gray, encode_png, load_gray, save_gray
from .segmentation import KIND_SUSPECT, CropRecord, RotatedRect, extract_objects
from .synth import class_template
from .watershed import (
    METHOD_ABOVE_FILL,
    SeedSet,
    SegmentMap,
    SeparatedChromosome,
    separate_method1,
    separate_method2,
    watershed,
)

STATUS_PENDING = "pending"
STATUS_SEEDED = "seeded"
STATUS_SEPARATED = "separated"
STATUS_CLASSIFIED = "classified"
_STATUS_RANK = {
    STATUS_PENDING: 0,
    STATUS_SEEDED: 1,
    STATUS_SEPARATED: 2,
    STATUS_CLASSIFIED: 3,
}


def session_id_for(data: bytes, config: PipelineConfig) -> str:
    digest = hashlib.sha256(data + b"\n" + config.canonical_json().encode("ascii"))
    return digest.hexdigest()[:12]


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


class Session:
    """One metaphase under analysis, mirrored to a directory."""

    def __init__(self, session_id: str, root: Path, config: PipelineConfig):
        self.id = session_id
        self.root = Path(root)
        self.config = config
        self.crops: list = []
        self.statuses: dict = {}
        self.warnings: list = []
        self.threshold: int | None = None
        self.seeds: dict = {}
        self.separated: dict = {}
        self.scores: ScoreMatrix | None = None
        self.distribution: DistributionResult | None = None

    # -- lookups ---------------------------------------------------------

    def crop(self, crop_id: str) -> CropRecord:
        for crop in self.crops:
            if crop.id == crop_id:
                return crop
        raise NotFoundError(f"no crop {crop_id!r} in session {self.id}")

    def suspect_ids(self) -> list:
        return [c.id for c in self.crops if c.kind == KIND_SUSPECT]

    def pending_suspects(self) -> list:
        return [cid for cid in self.suspect_ids() if cid not in self.separated]

    def units(self) -> list:
        """Classification units in deterministic order: single crops as
        themselves, suspect crops through their separated chromosomes."""
        out = []
        for crop in self.crops:
            if crop.kind == KIND_SUSPECT and crop.id in self.separated:
                out.extend((sep.unit_id, sep.image) for sep in self.separated[crop.id])
            elif crop.kind != KIND_SUSPECT:
                out.append((crop.id, crop.image))
        return out

    def summary(self) -> dict:
        return {
            "id": self.id,
            "threshold": self.threshold,
            "warnings": list(self.warnings),
            "config": self.config.to_json(),
            "crops": [
                {
                    "id": crop.id,
                    "kind": crop.kind,
                    "status": self.statuses.get(crop.id, STATUS_PENDING),
                    "offset": list(crop.offset),
                    "width": crop.image.width,
                    "height": crop.image.height,
                    "bbox": crop.bbox.to_json(),
                    "separated": [sep.unit_id for sep in self.separated.get(crop.id, [])],
                }
                for crop in self.crops
            ],
            "has_scores": self.scores is not None,
            "has_assignment": self.distribution is not None,
        }

    # -- persistence -----------------------------------------------------

    def _crop_dir(self) -> Path:
        return self.root / "crops"

    def _persist_crop(self, crop: CropRecord) -> None:
        crops = self._crop_dir()
        crops.mkdir(parents=True, exist_ok=True)
        save_gray(crop.image, crops / f"{crop.id}.png")
        save_gray(crop.mask.to_gray(), crops / f"{crop.id}_mask.png")
        _write_json(
            crops / f"{crop.id}.json",
            {
                "id": crop.id,
                "offset": list(crop.offset),
                "bbox": crop.bbox.to_json(),
                "kind": crop.kind,
            },
        )

    def _persist_summary(self) -> None:
        _write_json(self.root / "session.json", self.summary())

    def _bump(self, crop_id: str, status: str) -> None:
        current = self.statuses.get(crop_id, STATUS_PENDING)
        if _STATUS_RANK[status] > _STATUS_RANK[current]:
            self.statuses[crop_id] = status

    # -- pipeline steps --------------------------------------------------

    def apply_seeds(self, crop_id: str, seeds: SeedSet) -> SegmentMap:
        crop = self.crop(crop_id)
        segmap = watershed(crop.image, seeds)
        self.seeds[crop_id] = seeds
        _write_json(self.root / "seeds" / f"{crop_id}.json", seeds.to_json())
        (self.root / "segmaps").mkdir(parents=True, exist_ok=True)
        save_gray(segmap.to_gray(), self.root / "segmaps" / f"{crop_id}.png")
        _write_json(
            self.root / "segmaps" / f"{crop_id}.json",
            {"regions": segmap.stats(), "lines": int(segmap.lines.sum())},
        )
        self._bump(crop_id, STATUS_SEEDED)
        self._persist_summary()
        return segmap

    def separate(self, crop_id: str, method: int) -> list:
        crop = self.crop(crop_id)
        seeds = self.seeds.get(crop_id)
        if seeds is None:
            raise ConflictError(f"crop {crop_id} has no seeds yet")
        if method == METHOD_ABOVE_FILL:
            outputs = separate_method1(crop, seeds)
        else:
            outputs = separate_method2(crop, seeds)
        sep_dir = self.root / "separated"
        sep_dir.mkdir(parents=True, exist_ok=True)
        for stale in sep_dir.glob(f"{crop_id}_*"):
            stale.unlink()
        for sep in outputs:
            save_gray(sep.image, sep_dir / f"{sep.unit_id}.png")
            save_gray(sep.mask.to_gray(), sep_dir / f"{sep.unit_id}_mask.png")
            _write_json(
                sep_dir / f"{sep.unit_id}.json",
                {
                    "parent_crop": sep.parent_crop,
                    "label": sep.label,
                    "provenance": list(sep.provenance),
                    "method": method,
                },
            )
        self.separated[crop_id] = outputs
        self._bump(crop_id, STATUS_SEPARATED)
        self._persist_summary()
        return outputs

    def set_scores(self, matrix: ScoreMatrix) -> ScoreMatrix:
        pending = self.pending_suspects()
        if pending:
            raise ConflictError(
                f"suspect crops not separated yet: {', '.join(pending)}"
            )
        expected_ids = [unit_id for unit_id, _ in self.units()]
        missing = sorted(set(expected_ids) - set(matrix.row_ids))
        extra = sorted(set(matrix.row_ids) - set(expected_ids))
        if missing or extra:
            parts = []
            if missing:
                parts.append(f"missing rows for {', '.join(missing)}")
            if extra:
                parts.append(f"unknown rows {', '.join(extra)}")
            raise InvalidArgumentError("; ".join(parts))
        self.scores = matrix
        _write_json(self.root / "scores.json", matrix.to_json())
        self._persist_summary()
        return matrix

    def set_scores_toy(self) -> ScoreMatrix:
        pending = self.pending_suspects()
        if pending:
            raise ConflictError(
                f"suspect crops not separated yet: {', '.join(pending)}"
            )
        templates = [class_template(c, self.config.classes) for c in range(1, self.config.classes + 1)]
        provider = ToyGeometricProvider.from_templates(templates)
        matrix = score_units(self.units(), provider, self.config.classes)
        return self.set_scores(matrix)

    def run_distribution(self) -> DistributionResult:
        if self.scores is None:
            raise ConflictError("no scores uploaded yet")
        expected = expected_counts(self.config.expected_total, self.config.classes)
        initial = argmax_assign(self.scores)
        result = distribute(self.scores, initial, expected)
        self.distribution = result
        _write_json(self.root / "assignment.json", result.assignment.to_json())
        _write_json(self.root / "distribution.json", result.to_json())
        for unit_id in result.assignment.mapping:
            parent = unit_id
            for crop in self.crops:
                if unit_id == crop.id or unit_id.startswith(crop.id + "_"):
                    parent = crop.id
                    break
            self._bump(parent, STATUS_CLASSIFIED)
        self._persist_summary()
        return result

    def karyogram(self) -> tuple:
        """Layout JSON plus a rendered PNG grid (one row per class)."""
        if self.distribution is None:
            raise ConflictError("run distribute before requesting the karyogram")
        mapping = self.distribution.assignment.mapping
        provenance = self.distribution.assignment.provenance
        rows = []
        for class_index in range(1, self.config.classes + 1):
            unit_ids = sorted(uid for uid, c in mapping.items() if c == class_index)
            rows.append({"class_index": class_index, "units": unit_ids})
        layout = {
            "classes": self.config.classes,
            "rows": rows,
            "provenance": {uid: provenance.get(uid, "argmax") for uid in sorted(mapping)},
            "deficits": {str(k): v for k, v in sorted(self.distribution.deficits.items())},
            "surpluses": {str(k): v for k, v in sorted(self.distribution.surpluses.items())},
        }
        png = _render_karyogram(self, rows)
        _write_json(self.root / "karyogram.json", layout)
        with open(self.root / "karyogram.png", "wb") as fh:
            fh.write(png)
        return layout, png


def _render_karyogram(session: Session, rows: list) -> bytes:
    images = dict(session.units())
    cell_w = max((img.width for img in images.values()), default=32) + 8
    cell_h = max((img.height for img in images.values()), default=32) + 8
    columns = max((len(r["units"]) for r in rows), default=1)
    columns = max(columns, 1)
    gutter = 12  # row-number tick marks live here
    width = gutter + columns * cell_w
    height = len(rows) * cell_h
    canvas = np.full((height, width), 255, dtype=np.uint8)
    for r, row in enumerate(rows):
        top = r * cell_h
        canvas[top, :] = 220
        # tick marks: class index as a tally in the gutter
        ticks = min(row["class_index"], gutter // 2)
        for t in range(ticks):
            canvas[top + 3 : top + cell_h - 3, 2 * t + 1] = 0
        for c, unit_id in enumerate(row["units"]):
            img = images[unit_id]
            y0 = top + 4
            x0 = gutter + c * cell_w + 4
            canvas[y0 : y0 + img.height, x0 : x0 + img.width] = img.pixels
    return encode_png(GrayImage(canvas))


def run_pipeline(data: bytes, config: PipelineConfig | None, data_dir) -> Session:
    """Decode, extract, classify every crop, persist. The session id is a
    content hash, so identical input and config rebuild the identical
    session in place."""
    config = config or PipelineConfig()
    config.validate()
    image = decode_gray(data)  # raises before anything touches the disk
    session_id = session_id_for(data, config)
    root = Path(data_dir) / session_id
    root.mkdir(parents=True, exist_ok=True)
    session = Session(session_id, root, config)

    with open(root / "source.png", "wb") as fh:
        fh.write(data)
    _write_json(root / "config.json", config.to_json())

    result = extract_objects(image, config)
    session.warnings = list(result.warnings)
    session.threshold = result.threshold
    session.crops = result.crops
    for crop in result.crops:
        classify_crop(crop, config.merge_radius, config.spur_prune_iterations)
        session.statuses[crop.id] = STATUS_PENDING
        session._persist_crop(crop)
    session._persist_summary()
    return session


def load_session(root) -> Session:
    """Rebuild a session from its directory."""
    root = Path(root)
    summary_path = root / "session.json"
    if not summary_path.exists():
        raise NotFoundError(f"no session at {root}")
    summary = _read_json(summary_path)
    config = PipelineConfig.from_json(_read_json(root / "config.json"))
    session = Session(summary["id"], root, config)
    session.warnings = list(summary.get("warnings", []))
    session.threshold = summary.get("threshold")

    for entry in summary.get("crops", []):
        cid = entry["id"]
        sidecar = _read_json(root / "crops" / f"{cid}.json")
        image = load_gray(root / "crops" / f"{cid}.png")
        mask = BinaryMask(load_gray(root / "crops" / f"{cid}_mask.png").pixels > 127)
        crop = CropRecord(
            id=cid,
            image=image,
            mask=mask,
            offset=tuple(sidecar["offset"]),
            bbox=RotatedRect.from_json(sidecar["bbox"]),
            kind=sidecar.get("kind", "unknown"),
        )
        session.crops.append(crop)
        session.statuses[cid] = entry.get("status", STATUS_PENDING)

    seeds_dir = root / "seeds"
    if seeds_dir.is_dir():
        for path in sorted(seeds_dir.glob("*.json")):
            session.seeds[path.stem] = SeedSet.from_json(_read_json(path))

    sep_dir = root / "separated"
    if sep_dir.is_dir():
        for path in sorted(sep_dir.glob("*.json")):
            meta = _read_json(path)
            unit_id = path.stem
            image = load_gray(sep_dir / f"{unit_id}.png")
            mask = BinaryMask(load_gray(sep_dir / f"{unit_id}_mask.png").pixels > 127)
            sep = SeparatedChromosome(
                image=image,
                mask=mask,
                parent_crop=meta["parent_crop"],
                label=int(meta["label"]),
                provenance=tuple(meta.get("provenance", [])),
            )
            session.separated.setdefault(meta["parent_crop"], []).append(sep)
        for outputs in session.separated.values():
            outputs.sort(key=lambda s: s.label)

    scores_path = root / "scores.json"
    if scores_path.exists():
        session.scores = ScoreMatrix.from_json(_read_json(scores_path))
    dist_path = root / "distribution.json"
    if dist_path.exists():
        session.distribution = DistributionResult.from_json(_read_json(dist_path))
    return session
