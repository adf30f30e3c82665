"""Command-line entry point: ``branchstereo {disparity,distance,synth,eval}``.

Exit codes: 0 success, 1 input error, 2 numerical/convergence error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io as bio
from .cost import WindowSpec
from .errors import InputError, NumericalError
from .evaluation import EvalRow, bad_pixel_rate, depth_histogram, rmse, write_histogram_csv, write_report
from .fusion import BranchPolygon
from .geometry import load_rig, save_rig
from .pipeline import PipelineConfig, compute_disparity, depth_from_disparity, estimate_distance
from .synth import render, scene_from_dict, scene_to_dict

log = logging.getLogger("branchstereo")


def _window(text):
    if text.lower() in ("off", "none", "0"):
        return None
    return WindowSpec.parse(text)


def _on_off(text):
    t = text.lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _add_pipeline_flags(p):
    g = p.add_argument_group("pipeline")
    g.add_argument("--rig", type=Path, help="calibration file (fx, fy, ox, oy, baseline_m)")
    g.add_argument("--dmin", type=int, default=0)
    g.add_argument("--dmax", type=int, default=64)
    g.add_argument("--cost", choices=("ad", "sd", "ncc"), default="ad")
    g.add_argument("--window", type=WindowSpec.parse, default=WindowSpec(2, 2), metavar="WxH")
    g.add_argument("--agg", choices=("fixed", "multi", "diffusion", "sgm"), default="sgm")
    g.add_argument("--lambda", dest="lam", type=float, default=1.0)
    g.add_argument("--p1", type=float, default=None)
    g.add_argument("--p2", type=float, default=None)
    g.add_argument("--dirs", type=int, choices=(4, 8), default=8)
    g.add_argument("--lr-maxdiff", type=float, default=None)
    g.add_argument("--subpixel", type=_on_off, default=True, metavar="on|off")
    g.add_argument("--median", type=_window, default=WindowSpec(1, 1), metavar="WxH|off")
    g.add_argument("--wls-lambda", type=float, default=None)
    g.add_argument("--wls-sigma", type=float, default=0.05)
    g.add_argument("--no-post", action="store_true", help="disable every post-processing stage")
    g.add_argument("--k", type=float, default=3.0, help="MAD threshold (inf disables rejection)")
    g.add_argument("--m", type=int, default=8, help="neighbourhood expansion size")
    g.add_argument("--variant", choices=("centroid", "polygon"), default="centroid")
    g.add_argument("--read", choices=("nearest", "bilinear"), default="nearest")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", type=Path, required=True)


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig(
        d_min=args.dmin,
        d_max=args.dmax,
        cost=args.cost,
        window=args.window,
        agg=args.agg,
        lam=args.lam,
        p1=args.p1,
        p2=args.p2,
        dirs=args.dirs,
        lr_maxdiff=args.lr_maxdiff,
        subpixel=args.subpixel,
        median=args.median,
        wls_lambda=args.wls_lambda,
        wls_sigma=args.wls_sigma,
        k=args.k,
        m=args.m,
        variant=args.variant,
        read=args.read,
    )
    return cfg.without_post() if args.no_post else cfg


def _log_config(out: Path, command: str, config: dict):
    out.mkdir(parents=True, exist_ok=True)
    text = json.dumps({"command": command, **config}, indent=2, sort_keys=True)
    log.info("resolved configuration:\n%s", text)
    (out / "config.json").write_text(text + "\n")


def _dump(out: Path, name: str, arr: np.ndarray):
    if name[0] in "abcd":
        bio.write_image(out / f"stage_{name}.pgm", arr, bits=16)
    else:
        bio.write_float_map(out / f"stage_{name}.pfm", arr)


def cmd_disparity(args) -> int:
    cfg = _config(args)
    resolved = cfg.to_dict()
    resolved.update(left=str(args.left), right=str(args.right), rig=str(args.rig) if args.rig else None)
    _log_config(args.out, "disparity", resolved)
    left = bio.read_image(args.left)
    right = bio.read_image(args.right)
    stages = {} if args.dump_stages else None
    disp = compute_disparity(left, right, cfg, stages)
    bio.write_float_map(args.out / "disparity.pfm", disp)
    if args.rig:
        bio.write_float_map(args.out / "depth.pfm", depth_from_disparity(load_rig(args.rig), disp))
    if stages:
        for name, arr in stages.items():
            _dump(args.out, name, arr)
    valid = np.isfinite(disp)
    print(f"disparity: {disp.shape[1]}x{disp.shape[0]}, {valid.mean():.1%} valid -> {args.out / 'disparity.pfm'}")
    return 0


def _pick_doc(docs, image_id, path):
    if image_id is not None:
        for d in docs:
            if d.image_id == image_id:
                return d
        raise InputError(f"{path}: no annotations for image {image_id!r}")
    if len(docs) != 1:
        raise InputError(f"{path}: holds {len(docs)} images; choose one with --image-id")
    return docs[0]


def _fmt(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def cmd_distance(args) -> int:
    cfg = _config(args)
    resolved = cfg.to_dict()
    resolved.update(
        annotations=str(args.annotations),
        depth=str(args.depth) if args.depth else None,
        disparity=str(args.disparity) if args.disparity else None,
        left=str(args.left) if args.left else None,
        right=str(args.right) if args.right else None,
        distance=args.distance,
    )
    _log_config(args.out, "distance", resolved)
    if not args.annotations.exists():
        raise InputError(f"annotation file not found: {args.annotations}")
    docs = bio.read_annotations(args.annotations)
    doc = _pick_doc(docs, args.image_id, args.annotations)
    rig = load_rig(args.rig) if args.rig else None
    if args.depth:
        depth = bio.read_float_map(args.depth)
    else:
        if rig is None:
            raise InputError("--rig is required to turn disparity into depth")
        if args.disparity:
            disp = bio.read_float_map(args.disparity)
        elif args.left and args.right:
            disp = compute_disparity(bio.read_image(args.left), bio.read_image(args.right), cfg)
        else:
            raise InputError("give --depth, --disparity, or --left and --right")
        depth = depth_from_disparity(rig, disp)
    if args.distance == "range" and rig is None:
        raise InputError("--distance range needs --rig")
    header = ["image_id", "branch", "label", "distance_m", "median_m", "mad_m", "retained", "rejected", "true_distance_m", "error_m"]
    rows = []
    lines = []
    for i, br in enumerate(doc.branches):
        est = estimate_distance(BranchPolygon(br.points), depth, cfg, rig=rig, quantity=args.distance)
        err = None if br.true_distance_m is None else est.distance_m - br.true_distance_m
        rows.append([doc.image_id, i, br.label or "", _fmt(est.distance_m), _fmt(est.median_m), _fmt(est.mad_m),
                     len(est.retained), est.rejected_count, _fmt(br.true_distance_m), _fmt(err)])
        line = (f"{doc.image_id} branch {i}: {est.distance_m:.3f} m "
                f"(median {est.median_m:.3f}, MAD {est.mad_m:.4f}, kept {len(est.retained)}/{est.pool_size})")
        if err is not None:
            line += f", error {err:+.3f} m"
        lines.append(line)
    with open(args.out / "distances.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    (args.out / "distances.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _scene_list(data):
    if isinstance(data, dict) and "scenes" in data:
        scenes = data["scenes"]
        if isinstance(scenes, dict):
            return list(scenes.items())
        return [(s.get("id", f"scene{i:03d}"), s) for i, s in enumerate(scenes)]
    if isinstance(data, list):
        return [(s.get("id", f"scene{i:03d}"), s) for i, s in enumerate(data)]
    return [(data.get("id", "scene"), data)]


def cmd_synth(args) -> int:
    try:
        data = json.loads(Path(args.spec).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.spec}: invalid JSON at position {exc.pos}: {exc.msg}") from None
    scenes = []
    for i, (sid, raw) in enumerate(_scene_list(data)):
        raw = {k: v for k, v in raw.items() if k != "id"}
        if args.seed is not None:
            raw["seed"] = args.seed + i
        scenes.append((sid, scene_from_dict(raw)))
    _log_config(args.out, "synth", {"spec": str(args.spec), "seed": args.seed,
                                    "scenes": {sid: scene_to_dict(s) for sid, s in scenes}})
    for sid, spec in scenes:
        left, right, gt = render(spec)
        d = args.out / sid
        d.mkdir(parents=True, exist_ok=True)
        bio.write_image(d / "left.pgm", left, bits=16)
        bio.write_image(d / "right.pgm", right, bits=16)
        bio.write_float_map(d / "gt_disparity.pfm", gt.disparity)
        bio.write_float_map(d / "gt_depth.pfm", gt.depth)
        if gt.corrupted_depth is not None:
            bio.write_float_map(d / "gt_depth_corrupted.pfm", gt.corrupted_depth)
        save_rig(spec.rig, d / "rig.txt")
        (d / "scene.json").write_text(json.dumps(scene_to_dict(spec), indent=2, sort_keys=True) + "\n")
        branches = [bio.BranchEntry(p.points, t, lab) for p, t, lab in zip(gt.polygons, gt.true_distances, gt.labels)]
        bio.write_annotations(d / "annotations.json", [bio.AnnotationDoc(sid, spec.width, spec.height, branches)])
        print(f"{sid}: {spec.width}x{spec.height}, {len(spec.bars)} bar(s) -> {d}")
    return 0


def _parse_backend(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=DIR, got {text!r}")
    name, path = text.split("=", 1)
    return name, Path(path)


def _find_pred(root: Path, sid: str):
    for cand in (root / sid / "disparity.pfm", root / f"{sid}.pfm"):
        if cand.exists():
            return cand
    return None


def cmd_eval(args) -> int:
    cfg = _config(args)
    resolved = cfg.to_dict()
    resolved.update(gt=str(args.gt), pred={n: str(p) for n, p in args.pred}, threshold=args.threshold)
    _log_config(args.out, "eval", resolved)
    scene_dirs = sorted(p for p in Path(args.gt).iterdir() if (p / "gt_disparity.pfm").exists())
    if not scene_dirs:
        raise InputError(f"no scenes with gt_disparity.pfm under {args.gt}")
    known = {p.name for p in scene_dirs}
    rows = []
    for name, root in args.pred:
        extra = sorted(
            p.stem if p.suffix == ".pfm" else p.name
            for p in Path(root).iterdir()
            if (p.suffix == ".pfm" or (p / "disparity.pfm").exists()) and (p.stem if p.suffix == ".pfm" else p.name) not in known
        )
        for sid in extra:
            rows.append(EvalRow(sid, name, math.nan, math.nan, math.nan, math.nan, note="no ground truth for prediction"))
    for sdir in scene_dirs:
        sid = sdir.name
        gt_disp = bio.read_float_map(sdir / "gt_disparity.pfm")
        rig = load_rig(sdir / "rig.txt")
        docs = bio.read_annotations(sdir / "annotations.json") if (sdir / "annotations.json").exists() else []
        branches = docs[0].branches if docs else []
        seed = None
        if (sdir / "scene.json").exists():
            seed = json.loads((sdir / "scene.json").read_text()).get("seed")
        for name, root in args.pred:
            pred_path = _find_pred(Path(root), sid)
            if pred_path is None:
                rows.append(EvalRow(sid, name, math.nan, math.nan, math.nan, math.nan, seed=seed, note="missing prediction"))
                continue
            pred = bio.read_float_map(pred_path)
            if pred.shape != gt_disp.shape:
                rows.append(EvalRow(sid, name, math.nan, math.nan, math.nan, math.nan, seed=seed, note="size mismatch"))
                continue
            r = rmse(pred, gt_disp)
            bad = bad_pixel_rate(pred, gt_disp, args.threshold)
            depth = depth_from_disparity(rig, pred)
            if not branches:
                rows.append(EvalRow(sid, name, r, bad, math.nan, math.nan, seed=seed, note="no annotations"))
            for i, br in enumerate(branches):
                poly = BranchPolygon(br.points)
                est = estimate_distance(poly, depth, cfg)
                err = math.nan if br.true_distance_m is None else est.distance_m - br.true_distance_m
                rows.append(EvalRow(sid, name, r, bad, err, est.retained_fraction, branch=i, seed=seed))
                hist = depth_histogram(depth, poly, true_distance_m=br.true_distance_m)
                write_histogram_csv(args.out / f"hist_{sid}_{name}_{i}.csv", hist)
    write_report(args.out / "report.csv", rows)
    summary = {
        "rows": len(rows),
        "backends": [n for n, _ in args.pred],
        "scenes": sorted(known),
    }
    (args.out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for row in rows:
        print(f"{row.scene_id} {row.backend} branch {row.branch}: rmse {row.rmse_px:.3f} px, "
              f"bad {row.bad_pixel_rate:.3f}, distance error {row.distance_error_m:+.4f} m {row.note}".rstrip())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="branchstereo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("disparity", help="compute a disparity map from a rectified pair")
    p.add_argument("left", type=Path)
    p.add_argument("right", type=Path)
    p.add_argument("--dump-stages", action="store_true")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_disparity)

    p = sub.add_parser("distance", help="branch-to-camera distance per annotated polygon")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--image-id")
    p.add_argument("--depth", type=Path)
    p.add_argument("--disparity", type=Path)
    p.add_argument("--left", type=Path)
    p.add_argument("--right", type=Path)
    p.add_argument("--distance", choices=("z", "range"), default="z")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("synth", help="render synthetic scenes with ground truth")
    p.add_argument("spec", type=Path)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score disparity back-ends against synthetic ground truth")
    p.add_argument("--gt", type=Path, required=True, help="directory written by 'synth'")
    p.add_argument("--pred", type=_parse_backend, action="append", required=True, metavar="NAME=DIR")
    p.add_argument("--threshold", type=float, default=1.0, help="bad-pixel threshold (px)")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 is reserved for numerical failures.
        return 1 if exc.code == 2 else exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"branchstereo: numerical error: {exc}", file=sys.stderr)
        return 2
    except (InputError, OSError) as exc:
        print(f"branchstereo: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
