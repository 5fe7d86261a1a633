"""Command-line entry point: ``lois-vqa <subcommand> ...``."""

import argparse
import json
import sys

import numpy as np

from . import evaluation, masks, nms, synth, tensorfile, training, views
from .config import ConfigError, RunConfig, load_config
from .tensorfile import FormatError


class CliError(Exception):
    pass


def _config(args):
    return load_config(args.config) if getattr(args, "config", None) else RunConfig()


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _dump_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _maskset_tensors(ms):
    return {
        "soft": ms.soft,
        "masks": ms.masks.astype(np.float32),
        "scores": ms.scores,
        "categories": ms.categories.astype(np.float64),
        "cells": ms.cells.astype(np.float64),
    }


def _read_maskset(path):
    t, _ = tensorfile.read_archive(path)
    try:
        return masks.MaskSet(
            soft=t.get("soft", t["masks"]),
            masks=t["masks"] > 0.5,
            scores=t["scores"],
            categories=t.get("categories", np.zeros(len(t["scores"]))).astype(np.int64),
            cells=t.get("cells", np.full(len(t["scores"]), -1.0)).astype(np.int64),
        )
    except KeyError as exc:
        raise CliError(f"{path}: missing tensor {exc.args[0]!r}") from None


def cmd_decode_masks(args):
    cfg = _config(args)
    F = tensorfile.read_tensor(args.features)
    G = tensorfile.read_tensor(args.kernels)
    cat = tensorfile.read_tensor(args.categories)
    soft = masks.decode_masks(F, G)
    ms = masks.select_candidates(soft, cat, cfg.score_threshold, cfg.mask_threshold)
    tensorfile.write_archive(args.out, _maskset_tensors(ms), {"kind": "maskset"})
    print(f"decoded {soft.shape[0]} cells, kept {len(ms)} candidates")
    return 0


def cmd_nms(args):
    threshold = args.threshold if args.threshold is not None else _config(args).post_threshold
    ms = _read_maskset(args.masks)
    result = nms.suppress(ms, threshold)
    tensors = _maskset_tensors(result.kept)
    tensors.update({
        "updated_scores": result.updated_scores,
        "kept_indices": result.kept_indices.astype(np.float64),
        "penalties": result.penalties,
    })
    tensorfile.write_archive(args.out, tensors, {"kind": "suppression", "post_threshold": threshold})
    table = nms.score_table(ms, result)
    if args.table:
        _write_text(args.table, table)
    sys.stdout.write(table)
    return 0


def _write_ppm(path, image):
    img = np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise CliError(f"background image must be H x W x 3, got {img.shape}")
    with open(path, "wb") as f:
        f.write(f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def cmd_separate(args):
    cfg = _config(args)
    grid = args.grid if args.grid is not None else cfg.background_grid
    ms = _read_maskset(args.masks)
    F = tensorfile.read_tensor(args.features)
    # the input masks are taken as already retained
    result = nms.SuppressionResult(ms.scores, np.arange(len(ms)), np.ones(len(ms)), ms)
    v = views.separate(F, result, grid)
    fused = views.fuse_instances(result)
    tensorfile.write_archive(
        args.out,
        {"instance": v.instance, "background": v.background, "fused": fused.astype(np.float32)},
        {"kind": "views", "grid": grid},
    )
    if args.image:
        if not args.background_out:
            raise CliError("--image needs --background-out")
        image = tensorfile.read_tensor(args.image)
        _write_ppm(args.background_out, views.background_image(fused, image, args.fill, args.fill_value))
    print(f"instance view {v.instance.shape}, background view {v.background.shape}")
    return 0


def _load_samples(cfg, data_dir):
    samples, vocab = synth.load_dataset(
        data_dir, cfg.background_grid, cfg.question_dim, cfg.question_len,
        cfg.post_threshold, cfg.embed_seed,
    )
    return samples, vocab


def save_checkpoint(path, params, run_cfg):
    tensorfile.write_archive(path, params, {"kind": "checkpoint", "config": run_cfg.to_text()})


def load_checkpoint(path):
    params, meta = tensorfile.read_archive(path)
    if meta.get("kind") != "checkpoint":
        raise CliError(f"{path} is not a checkpoint")
    return params, meta


def cmd_train(args):
    cfg = _config(args)
    samples, vocab = _load_samples(cfg, args.data)
    mcfg = cfg.model_config()
    with open(args.log, "w", encoding="utf-8", newline="\n") as logf:
        def emit(record):
            logf.write(json.dumps(record, sort_keys=True) + "\n")
        params, log = training.train(samples, mcfg, cfg.train_config(), on_epoch=emit)
    save_checkpoint(args.out, params, cfg)
    if args.predictions:
        _, _, preds = training.evaluate(params, samples, mcfg)
        with open(args.predictions, "w", encoding="utf-8", newline="\n") as f:
            for i, p in enumerate(preds):
                answer = vocab[p] if p < len(vocab) else str(p)
                f.write(json.dumps({"answer": answer, "id": i}, sort_keys=True) + "\n")
    last = log[-1] if log else {}
    print(f"trained {len(log)} epochs; final train accuracy {last.get('train_accuracy', float('nan')):.4f}")
    return 0


def _read_jsonl(path):
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CliError(f"{path}:{lineno}: {exc.msg}") from None
    return out


def cmd_eval(args):
    preds = {r["id"]: r["answer"] for r in _read_jsonl(args.predictions)}
    results = []
    for ann in _read_jsonl(args.annotations):
        if ann["id"] not in preds:
            raise CliError(f"no prediction for question {ann['id']}")
        results.append(evaluation.AnnotatedAnswer(preds[ann["id"]], ann["counts"], ann.get("qtype", "other")))
    report = {"questions": len(results), "accuracy": evaluation.breakdown(results)}
    text = _dump_json(report)
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)
    return 0


def cmd_gradcheck(args):
    report = training.gradcheck(seed=args.seed, h=args.step, tolerance=args.tolerance, train=args.train)
    text = "\n".join(report.lines()) + "\n"
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)
    return 0 if report.passed else 1


def cmd_synth_data(args):
    cfg = _config(args)
    try:
        spec = synth.SynthSpec(
            samples=args.samples, seed=args.seed, feature_dim=cfg.feature_dim,
            grid=cfg.background_grid, size=cfg.background_grid * args.cell_size,
            answers=cfg.answers,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    synth.write_dataset(args.out, spec)
    print(f"wrote {spec.samples} samples")
    return 0


def cmd_iou_stats(args):
    sets = [_read_maskset(p) for p in args.masks]
    edges = [float(x) for x in args.edges.split(",")] if args.edges else nms.IOU_EDGES
    text = _dump_json(nms.iou_overlap_stats(sets, edges))
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="lois-vqa", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, metavar="subcommand")

    s = sub.add_parser("decode-masks", help="decode grid-cell masks and select candidates")
    s.add_argument("--features", required=True, help="H x W x E tensor file")
    s.add_argument("--kernels", required=True, help="S x S x E tensor file")
    s.add_argument("--categories", required=True, help="S x S x C tensor file")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_decode_masks)

    s = sub.add_parser("nms", help="Matrix-NMS over a mask set")
    s.add_argument("--masks", required=True)
    s.add_argument("--threshold", type=float)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--table", help="also write the score table here")
    s.set_defaults(func=cmd_nms)

    s = sub.add_parser("separate", help="instance and background views")
    s.add_argument("--masks", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--grid", type=int)
    s.add_argument("--image", help="H x W x 3 tensor file in [0, 1]")
    s.add_argument("--background-out", help="PPM path for the filled background image")
    s.add_argument("--fill", choices=("mean", "constant"), default="mean")
    s.add_argument("--fill-value", type=float, default=0.0)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_separate)

    s = sub.add_parser("train", help="train on a dataset directory")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--log", required=True, help="per-epoch metrics, one JSON object per line")
    s.add_argument("--predictions", help="write eval-mode predictions on the training set")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="consensus accuracy report")
    s.add_argument("--predictions", required=True)
    s.add_argument("--annotations", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--step", type=float, default=1e-5)
    s.add_argument("--tolerance", type=float, default=1e-4)
    s.add_argument("--train", action="store_true", help="check with a fixed dropout draw")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("synth-data", help="write a planted synthetic dataset")
    s.add_argument("--samples", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cell-size", type=int, default=4, help="pixels per grid cell side")
    s.add_argument("--config", help="feature_dim, background_grid and answers come from here")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth_data)

    s = sub.add_parser("iou-stats", help="pairwise IoU histogram by instance count")
    s.add_argument("masks", nargs="+")
    s.add_argument("--edges", help="comma-separated bucket edges from 0 to 1")
    s.add_argument("--out")
    s.set_defaults(func=cmd_iou_stats)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, CliError, masks.ShapeError, training.DataError) as exc:
        print(f"lois-vqa {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"lois-vqa {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
