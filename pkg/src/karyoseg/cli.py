"""Command-line entry points. Each command wraps one library operation;
results print as JSON on stdout, failures as structured JSON on stderr."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .classify import ScoreMatrix
from .config import PipelineConfig
from .errors import KaryosegError
from .overlap import analyze_crop
from .raster import BinaryMask, load_gray, save_gray, save_rgb
from .segmentation import KIND_UNKNOWN, CropRecord, RotatedRect
from .session import load_session, run_pipeline
from .synth import SynthSpec, generate, write_ground_truth
from .watershed import METHOD_ABOVE_FILL, SeedSet, separate_method1, separate_method2


def _load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    with open(path, encoding="utf-8") as fh:
        return PipelineConfig.from_json(json.load(fh))


def _crop_from_files(path) -> CropRecord:
    """Build a standalone crop from a PNG, using the sibling *_mask.png
    when present and the sub-white pixels otherwise."""
    path = Path(path)
    image = load_gray(path)
    mask_path = path.with_name(path.stem + "_mask.png")
    if mask_path.exists():
        mask = BinaryMask(load_gray(mask_path).pixels > 127)
    else:
        mask = BinaryMask(image.pixels < 250)
    h, w = image.pixels.shape
    bbox = RotatedRect((w / 2.0, h / 2.0), (float(w), float(h)), 0.0)
    return CropRecord(
        id=path.stem, image=image, mask=mask, offset=(0, 0), bbox=bbox, kind=KIND_UNKNOWN
    )


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_segment(args) -> None:
    config = _load_config(args.config)
    data = Path(args.image).read_bytes()
    session = run_pipeline(data, config, args.out)
    _emit(
        {
            "session": session.id,
            "dir": str(session.root),
            "threshold": session.threshold,
            "crops": len(session.crops),
            "suspects": session.suspect_ids(),
            "warnings": session.warnings,
        }
    )


def cmd_inspect(args) -> None:
    config = _load_config(args.config)
    crop = _crop_from_files(args.crop)
    skel, branches = analyze_crop(crop, config.merge_radius, config.spur_prune_iterations)
    overlay = np.stack([crop.image.pixels] * 3, axis=-1)
    overlay[skel.mask.pixels] = (40, 200, 40)
    for point in branches:
        x, y = point.position
        y0, y1 = max(y - 1, 0), min(y + 2, overlay.shape[0])
        x0, x1 = max(x - 1, 0), min(x + 2, overlay.shape[1])
        overlay[y0:y1, x0:x1] = (220, 30, 30)
    out = Path(args.out) if args.out else Path(args.crop).with_name(Path(args.crop).stem + "_inspect.png")
    save_rgb(overlay, out)
    _emit(
        {
            "crop": Path(args.crop).stem,
            "kind": "suspect-multi" if branches else "single",
            "branch_points": [
                {"x": p.position[0], "y": p.position[1], "crossing_number": p.crossing_number}
                for p in branches
            ],
            "overlay": str(out),
        }
    )


def cmd_separate(args) -> None:
    crop = _crop_from_files(args.crop)
    with open(args.seeds, encoding="utf-8") as fh:
        seeds = SeedSet.from_json(json.load(fh))
    if args.method == METHOD_ABOVE_FILL:
        outputs = separate_method1(crop, seeds)
    else:
        outputs = separate_method2(crop, seeds)
    out_dir = Path(args.out) if args.out else Path(args.crop).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for sep in outputs:
        target = out_dir / f"{sep.unit_id}.png"
        save_gray(sep.image, target)
        save_gray(sep.mask.to_gray(), out_dir / f"{sep.unit_id}_mask.png")
        written.append(
            {
                "unit_id": sep.unit_id,
                "label": sep.label,
                "provenance": list(sep.provenance),
                "path": str(target),
            }
        )
    _emit({"crop": crop.id, "method": args.method, "units": written})


def cmd_classify(args) -> None:
    session = load_session(args.session)
    if args.scores:
        with open(args.scores, encoding="utf-8") as fh:
            session.set_scores(ScoreMatrix.from_json(json.load(fh)))
    else:
        session.set_scores_toy()
    report = {"session": session.id, "rows": session.scores.count}
    if args.distribute:
        result = session.run_distribution()
        session.karyogram()
        report["assignment"] = result.assignment.to_json()
        report["moves"] = len(result.moves)
        report["balanced"] = result.balanced
        report["karyogram"] = str(session.root / "karyogram.png")
    _emit(report)


def cmd_synth(args) -> None:
    with open(args.spec, encoding="utf-8") as fh:
        spec = SynthSpec.from_json(json.load(fh))
    truth = generate(spec)
    manifest = write_ground_truth(truth, args.out)
    _emit(manifest)


def cmd_serve(args) -> None:
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(args.data), host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="karyoseg")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="run the pipeline on a metaphase image")
    p.add_argument("image")
    p.add_argument("--out", required=True, help="data directory for session folders")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("inspect", help="skeleton and branch-point overlay for a crop")
    p.add_argument("crop")
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("separate", help="split a seeded crop into chromosomes")
    p.add_argument("crop")
    p.add_argument("--seeds", required=True)
    p.add_argument("--method", type=int, choices=(1, 2), required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("classify", help="score session units and optionally distribute")
    p.add_argument("session", help="session directory")
    p.add_argument("--scores", default=None, help="scores JSON (omitted: toy provider)")
    p.add_argument("--distribute", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("synth", help="render a synthetic metaphase from a spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data", default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except KaryosegError as exc:
        json.dump({"code": exc.code, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except FileNotFoundError as exc:
        json.dump({"code": "not-found", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except json.JSONDecodeError as exc:
        json.dump({"code": "invalid-argument", "message": f"bad JSON: {exc}"}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
