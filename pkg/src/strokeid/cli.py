"""Command-line driver: train, classify, evaluate, generate synthetic data.

Dataset layout for pre-segmented lines is root/<class_label>/*.png|jpg.
Scene ground truth and detection files hold one `x,y,w,h[,script]` row per
line.  Metrics are printed as JSON.  The STROKEID_THREADS environment
variable caps the image-level worker pool.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import encoder, evaluation, model_io, nbnn, pixelio, synth

DEFAULT_STEP = 8
DEFAULT_DICT_PATCHES = 100000


def worker_count() -> int:
    """Worker pool size: STROKEID_THREADS if set, else min(cpu, 8)."""
    env = os.environ.get("STROKEID_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"STROKEID_THREADS must be a positive integer, got {env!r}")
        if n < 1:
            raise ValueError(f"STROKEID_THREADS must be a positive integer, got {env!r}")
        return n
    return max(1, min(os.cpu_count() or 1, 8))


def _pmap(fn, items: list) -> list:
    """Order-preserving parallel map; numpy kernels release the GIL."""
    if len(items) <= 1 or worker_count() == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(fn, items))


def _image_files(root: Path) -> list[Path]:
    return sorted(p for p in root.iterdir()
                  if p.is_file() and p.suffix.lower() in pixelio.IMAGE_EXTENSIONS)


def _class_dirs(root: Path) -> list[Path]:
    if not root.is_dir():
        raise ValueError(f"not a directory: {root}")
    dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not dirs:
        raise ValueError(f"no class subdirectories under {root}")
    return dirs


def _load_line(path: Path) -> np.ndarray:
    return pixelio.resize_to_height(pixelio.load_image(path))


def _encode_file(bank: encoder.FilterBank, path: Path, step: int) -> np.ndarray:
    return encoder.encode_line(_load_line(path), bank, step)


def _index_params(args) -> nbnn.IndexParams:
    return nbnn.IndexParams(mode=args.index, seed=args.seed)


def _model_is_weighted(store: nbnn.TemplateStore) -> bool:
    return any(np.any(c.weights != 0) for c in store.classes)


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    class_dirs = _class_dirs(Path(args.train_dir))
    per_class_files = []
    for d in class_dirs:
        files = _image_files(d)
        if not files:
            raise ValueError(f"class directory {d.name!r} contains no images")
        per_class_files.append((d.name, files))

    all_files = [f for _, files in per_class_files for f in files]
    lines = _pmap(_load_line, all_files)
    t1 = time.perf_counter()
    print(f"loaded {len(lines)} lines from {len(class_dirs)} classes in {t1 - t0:.1f}s")

    patches = pixelio.sample_random_subpatches(lines, count=args.dict_patches, seed=args.seed)
    bank = encoder.learn_dictionary(patches, k=args.k, seed=args.seed)
    t2 = time.perf_counter()
    print(f"learned {args.k}-kernel dictionary from {len(patches)} patches in {t2 - t1:.1f}s")

    bags = _pmap(lambda im: encoder.encode_line(im, bank, args.step), lines)
    labeled = []
    pos = 0
    for label, files in per_class_files:
        for _ in files:
            labeled.append((label, bags[pos]))
            pos += 1
    store = nbnn.build_store(labeled)
    t3 = time.perf_counter()
    print(f"encoded {store.num_templates} stroke-part descriptors in {t3 - t2:.1f}s")
    for c in store.classes:
        print(f"  {c.label}: {c.num_templates} templates")

    if args.weighted:
        store = nbnn.compute_weights(store)
        t4 = time.perf_counter()
        print(f"computed template weights in {t4 - t3:.1f}s")

    model_io.save_model(model_io.ModelFile(bank=bank, store=store), args.out)
    print(f"wrote {args.out} ({time.perf_counter() - t0:.1f}s total)")
    return 0


def _classify_paths(model, paths, args):
    """Classify each image, skipping unreadable ones; returns (results, failures)."""
    params = _index_params(args)
    index = nbnn.prepare_index(model.store, params)
    weighted = _model_is_weighted(model.store)

    def one(path: Path):
        try:
            bag = _encode_file(model.bank, path, args.step)
        except (pixelio.ImageDecodeError, OSError) as exc:
            return path, None, str(exc)
        res = nbnn.classify(model.store, bag, weighted=weighted, idx=params, index=index)
        return path, res, None

    results, failures = [], 0
    for path, res, err in _pmap(one, paths):
        if err is not None:
            print(f"warning: skipping {path}: {err}", file=sys.stderr)
            failures += 1
        else:
            results.append((path, res))
    return results, failures


def cmd_classify(args) -> int:
    model = model_io.load_model(args.model)
    root = Path(args.path)
    paths = _image_files(root) if root.is_dir() else [root]
    if not paths:
        raise ValueError(f"no images found under {root}")
    results, failures = _classify_paths(model, paths, args)
    if args.json:
        records = [
            {"path": str(p), "predicted": r.predicted, "per_class": r.per_class}
            for p, r in results
        ]
        print(json.dumps(records, indent=2))
    else:
        for p, r in results:
            dists = " ".join(f"{lab}={d:.4f}" for lab, d in sorted(r.per_class.items()))
            print(f"{p}\t{r.predicted}\t{dists}")
    return 0 if results else 1


def cmd_eval_lines(args) -> int:
    model = model_io.load_model(args.model)
    class_dirs = _class_dirs(Path(args.test_dir))
    params = _index_params(args)
    index = nbnn.prepare_index(model.store, params)
    weighted = _model_is_weighted(model.store)

    jobs = [(d.name, f) for d in class_dirs for f in _image_files(d)]
    if not jobs:
        raise ValueError(f"no images found under {args.test_dir}")

    def one(job):
        label, path = job
        bag = _encode_file(model.bank, path, args.step)
        rep = nbnn.classify(model.store, bag, weighted=weighted, idx=params, index=index)
        rel = f"{label}/{path.name}"
        return (rel, rep.predicted), (rel, label)

    pairs = _pmap(one, jobs)
    metrics = evaluation.line_accuracy([p for p, _ in pairs], [g for _, g in pairs])
    print(json.dumps(metrics.to_dict(), indent=2))
    return 0


def _parse_boxes(path: Path, want_script: bool) -> list[tuple[evaluation.BBox, str]]:
    out = []
    for ln, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        raw = raw.strip()
        if not raw:
            continue
        parts = raw.split(",")
        if len(parts) < 4 or (want_script and len(parts) < 5):
            raise ValueError(f"{path}:{ln}: expected x,y,w,h{',script' if want_script else '[,script]'}")
        x, y, w, h = (float(v) for v in parts[:4])
        script = parts[4].strip() if len(parts) > 4 else ""
        out.append((evaluation.BBox(x=x, y=y, w=w, h=h), script))
    return out


def _crop_box(img: np.ndarray, box: evaluation.BBox) -> np.ndarray | None:
    ih, iw = img.shape
    x0 = max(0, int(round(box.x)))
    y0 = max(0, int(round(box.y)))
    x1 = min(iw, int(round(box.x + box.w)))
    y1 = min(ih, int(round(box.y + box.h)))
    if x1 <= x0 or y1 <= y0:
        return None
    return img[y0:y1, x0:x1]


def cmd_eval_joint(args) -> int:
    model = model_io.load_model(args.model)
    scenes = Path(args.scenes_dir)
    gt_dir = scenes / "gt"
    img_dir = scenes / "images"
    if not gt_dir.is_dir() or not img_dir.is_dir():
        raise ValueError(f"{scenes} must contain images/ and gt/ subdirectories")
    det_dir = Path(args.dets_dir)
    if not det_dir.is_dir():
        raise ValueError(f"not a directory: {det_dir}")

    gt_stems = {p.stem for p in gt_dir.glob("*.txt")}
    for det_file in det_dir.glob("*.txt"):
        if det_file.stem not in gt_stems:
            raise ValueError(f"detection file {det_file.name} has no ground-truth file")

    params = _index_params(args)
    index = nbnn.prepare_index(model.store, params)
    weighted = _model_is_weighted(model.store)

    gts: list[evaluation.GTLine] = []
    dets: list[evaluation.DetLine] = []
    for gt_file in sorted(gt_dir.glob("*.txt")):
        stem = gt_file.stem
        for box, script in _parse_boxes(gt_file, want_script=True):
            gts.append(evaluation.GTLine(bbox=box, script=script, source_image=stem))
        det_file = det_dir / f"{stem}.txt"
        if not det_file.is_file():
            continue
        det_boxes = [b for b, _ in _parse_boxes(det_file, want_script=False)]
        if not det_boxes:
            continue
        image = None
        if not args.loc_only:
            for ext in sorted(pixelio.IMAGE_EXTENSIONS):
                cand = img_dir / f"{stem}{ext}"
                if cand.is_file():
                    image = pixelio.load_image(cand)
                    break
            if image is None:
                raise ValueError(f"no scene image found for ground-truth file {gt_file.name}")

        def one(box):
            if args.loc_only:
                return evaluation.UNKNOWN_SCRIPT
            crop = _crop_box(image, box)
            if crop is None:
                return evaluation.UNKNOWN_SCRIPT
            bag = encoder.encode_line(pixelio.resize_to_height(crop), model.bank, args.step)
            return nbnn.classify(model.store, bag, weighted=weighted, idx=params, index=index).predicted

        for box, pred in zip(det_boxes, _pmap(one, det_boxes)):
            dets.append(evaluation.DetLine(bbox=box, predicted_script=pred, source_image=stem))

    loc = evaluation.joint_eval(dets, gts, iou_thresh=args.iou, check_script=False)
    out = {"localization": loc.to_dict()}
    if not args.loc_only:
        out["joint"] = evaluation.joint_eval(dets, gts, iou_thresh=args.iou, check_script=True).to_dict()
    print(json.dumps(out, indent=2))
    return 0


def cmd_synth(args) -> int:
    if args.width_min > args.width_max:
        raise ValueError("--width-min must not exceed --width-max")
    out = Path(args.out_dir)

    def split_spec(split_idx: int, samples: int) -> synth.SynthSpec:
        seed = int(np.random.SeedSequence([args.seed, split_idx]).generate_state(1)[0])
        return synth.SynthSpec(
            num_scripts=args.scripts,
            samples_per_script=samples,
            width_range=(args.width_min, args.width_max),
            noise_sigma=args.noise,
            seed=seed,
        )

    rows = synth.generate_corpus(split_spec(0, args.samples), out / "train")
    print(f"train: {len(rows)} lines in {out / 'train'}")
    test_samples = args.test_samples if args.test_samples is not None else max(1, args.samples // 4)
    rows = synth.generate_corpus(split_spec(1, test_samples), out / "test")
    print(f"test: {len(rows)} lines in {out / 'test'}")
    if args.scenes > 0:
        rows = synth.generate_scene_corpus(split_spec(2, args.samples), out / "scenes",
                                           num_scenes=args.scenes)
        print(f"scenes: {len(rows)} scenes in {out / 'scenes'}")
    return 0


def cmd_inspect(args) -> int:
    model = model_io.load_model(args.model)
    bank, store = model.bank, model.store
    print(f"model version: {model_io.VERSION}")
    print(f"kernels: {bank.num_kernels} ({bank.kernel_side}x{bank.kernel_side} receptive fields)")
    print(f"descriptor dim: {bank.descriptor_dim} ({bank.pool_grid}x{bank.pool_grid} pooling)")
    print(f"eps_cn: {bank.eps_cn:g}  eps_zca: {bank.zca.eps_zca:g}")
    print(f"classes: {len(store.classes)}")
    for c in store.classes:
        print(f"  {c.label}: {c.num_templates} templates")
    w = np.concatenate([c.weights for c in store.classes]) if store.classes else np.zeros(0)
    print(f"weights: min={w.min():.4f} mean={w.mean():.4f} max={w.max():.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strokeid",
                                     description="Script identification in text-line images.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--step", type=int, default=DEFAULT_STEP,
                       help="stroke-part extraction step in pixels")
        p.add_argument("--index", choices=("exact", "kdforest"), default="exact",
                       help="nearest-neighbor search mode")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="learn a dictionary and template store")
    p.add_argument("train_dir")
    p.add_argument("--k", type=int, default=encoder.DEFAULT_KERNELS, help="dictionary size")
    p.add_argument("--step", type=int, default=DEFAULT_STEP)
    p.add_argument("--dict-patches", type=int, default=DEFAULT_DICT_PATCHES,
                   help="receptive-field patches sampled for dictionary learning")
    p.add_argument("--weighted", action="store_true", help="compute template weights")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.snbn")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify one image or a directory")
    p.add_argument("model")
    p.add_argument("path")
    common(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval-lines", help="accuracy on a pre-segmented test split")
    p.add_argument("model")
    p.add_argument("test_dir")
    common(p)
    p.set_defaults(func=cmd_eval_lines)

    p = sub.add_parser("eval-joint", help="IoU-matched detection + identification metrics")
    p.add_argument("model")
    p.add_argument("scenes_dir")
    p.add_argument("dets_dir")
    common(p)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--loc-only", action="store_true", help="skip script classification")
    p.set_defaults(func=cmd_eval_joint)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("out_dir")
    p.add_argument("--scripts", type=int, default=4)
    p.add_argument("--samples", type=int, default=20, help="training lines per script")
    p.add_argument("--test-samples", type=int, default=None)
    p.add_argument("--scenes", type=int, default=0, help="number of scene images")
    p.add_argument("--width-min", type=int, default=96)
    p.add_argument("--width-max", type=int, default=288)
    p.add_argument("--noise", type=float, default=6.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="print a model summary")
    p.add_argument("model")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
