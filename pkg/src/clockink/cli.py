"""Command-line entry point: corpus synthesis, training, batch runs, evaluation, rendering."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import Config, apply_overrides
from .errors import ClockInkError

log = logging.getLogger("clockink")


def _config(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config()
    return apply_overrides(cfg, args.set)


def _dump(obj, out) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True, default=float) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_synth(args) -> int:
    from .synth import generate_corpus
    files = generate_corpus(args.preset, args.n, args.out, seed=args.seed)
    log.info("wrote %d drawings to %s", len(files), args.out)
    return 0


def cmd_train_segmenter(args) -> int:
    from .model import load_corpus
    from .pipeline import train_segmenter_on
    feats = tuple(f.strip() for f in args.features.split(","))
    model = train_segmenter_on(load_corpus(args.corpus), _config(args), features=feats)
    model.save(args.out)
    log.info("segmenter: %d rounds, final loss %.4f", len(model.rounds), model.loss_curve[-1])
    return 0


def cmd_train_recognizer(args) -> int:
    from .pipeline import train_numeral_recognizer
    cfg = _config(args)
    if args.per_class is not None:
        cfg = cfg.override("recognizer.per_class", args.per_class)
    model = train_numeral_recognizer(cfg)
    model.save(args.out)
    log.info("recognizer: %d exemplars, tau %.4f", len(model.labels), model.tau)
    return 0


def cmd_train_crf(args) -> int:
    from .crf import train_crf
    from .model import load_corpus
    from .pipeline import gold_chains
    cfg = _config(args)
    cfg = cfg.override("crf.ctx", args.features == "img+ctx").override("crf.concat", args.concat == "on")
    model = train_crf(gold_chains(load_corpus(args.corpus), cfg.crf), cfg.crf)
    model.save(args.out)
    log.info("crf: dim %d, %d epochs, final loss %.4f", model.dim, len(model.loss_curve),
             model.loss_curve[-1] if model.loss_curve else float("nan"))
    return 0


def cmd_train(args) -> int:
    from .model import load_corpus
    from .pipeline import train_models
    models = train_models(load_corpus(args.corpus), _config(args))
    models.save(args.model_dir)
    log.info("models written to %s", args.model_dir)
    return 0


def cmd_run(args) -> int:
    from .model import list_drawings, load_drawing
    from .pipeline import Models, run
    cfg = _config(args)
    models = Models.load(args.model_dir)
    src = Path(getattr(args, "in"))
    paths = list_drawings(src) if src.is_dir() else [src]
    out = Path(args.report)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for p in paths:
        name = p.name[:-5] if p.name.endswith(".json") else p.stem
        try:
            res = run(load_drawing(p), models, cfg, name)
        except ClockInkError as exc:
            log.error("%s: %s", p, exc)
            failed += 1
            continue
        res.source = str(p.resolve())
        (out / f"{name}.report.json").write_text(res.to_json() + "\n", encoding="utf-8")
    log.info("%d reports written to %s", len(paths) - failed, out)
    return 1 if failed else 0


def cmd_eval(args) -> int:
    from .model import load_corpus
    from .pipeline import (Models, ablation_grid, cross_validate, evaluate, format_ablation)
    cfg = _config(args)
    corpus = load_corpus(args.corpus)
    if args.ablation == "grid":
        rows = ablation_grid(corpus, cfg, folds=args.cv or 10, seed=args.seed)
        print(format_ablation(rows))
        if args.out:
            _dump(rows, args.out)
        return 0
    models = Models.load(args.model_dir) if args.model_dir else None
    if args.cv:
        rec = models.recognizer if models else None
        rep = cross_validate(corpus, cfg, folds=args.cv, seed=args.seed,
                             gold_segmentation=args.gold_segmentation, recognizer=rec)
    else:
        if models is None:
            raise SystemExit("eval: --model-dir is required without --cv or --ablation")
        rep = evaluate(corpus, models, cfg, gold_segmentation=args.gold_segmentation, jobs=args.jobs)
    _dump(rep.summary(), args.out)
    return 0


def cmd_render(args) -> int:
    from .model import gt_path_for, load_drawing, load_ground_truth
    from .render import render_drawing, render_layers
    rep = json.loads(Path(args.report).read_text(encoding="utf-8"))
    src = args.drawing or rep.get("source")
    if not src:
        raise SystemExit("render: report has no source drawing; pass --drawing")
    d = load_drawing(src)
    if args.layers:
        render_layers(d, rep, args.out)
    else:
        gp = gt_path_for(src)
        gt = load_ground_truth(gp) if gp.exists() else None
        render_drawing(d, rep, gt, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clockink", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--config", help="JSON config file (sections as in Config.to_dict)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. crf.wrap_features=false (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a seeded synthetic corpus")
    s.add_argument("--preset", default="healthy",
                   help="healthy, impaired, overwrite, repair or mixed")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train-segmenter", help="fit the stroke-pair boundary classifier")
    s.add_argument("--corpus", required=True)
    s.add_argument("--features", default="d_angle,d_time",
                   help="comma-separated pair features (d_time alone gives the temporal baseline)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_segmenter)

    s = sub.add_parser("train-recognizer", help="fit the numeral recognizer on synthetic isolated numerals")
    s.add_argument("--per-class", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_recognizer)

    s = sub.add_parser("train-crf", help="fit the CRF on ground-truth slices")
    s.add_argument("--corpus", required=True)
    s.add_argument("--features", choices=("img", "img+ctx"), default="img+ctx")
    s.add_argument("--concat", choices=("on", "off"), default="on")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_crf)

    s = sub.add_parser("train", help="fit segmenter, recognizer and CRF into a model directory")
    s.add_argument("--corpus", required=True)
    s.add_argument("--model-dir", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("run", help="interpret drawings and write per-drawing JSON reports")
    s.add_argument("--model-dir", required=True)
    s.add_argument("--in", required=True, help="drawing file or corpus directory")
    s.add_argument("--report", required=True, help="output directory")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("eval", help="score a labelled corpus")
    s.add_argument("--corpus", required=True)
    s.add_argument("--model-dir")
    s.add_argument("--cv", type=int, default=0, help="k-fold cross validation, split by drawing")
    s.add_argument("--gold-segmentation", action="store_true",
                   help="label ground-truth slices instead of segmenting")
    s.add_argument("--ablation", choices=("grid",), help="training cohort x concat x context grid")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", help="write JSON here instead of stdout")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("render", help="SVG of a run report")
    s.add_argument("--report", required=True)
    s.add_argument("--drawing", help="override the drawing path stored in the report")
    s.add_argument("--layers", action="store_true", help="unpeeled overwrite panels")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _config(args)          # reject bad --config/--set early, whatever the command
        return args.func(args)
    except (ClockInkError, FileNotFoundError, KeyError, TypeError, ValueError) as exc:
        print(f"clockink {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
