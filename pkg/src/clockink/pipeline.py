"""End-to-end interpretation, model training and evaluation."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import Config
from .crf import CrfConfig, CrfModel, build_chain, predict, slice_base_features, train_crf
from .errors import ClusteringError, EmptyDrawingError, ModelMismatchError
from .overwrite import OverwriteEvent, detect_overwrites
from .preprocess import StrokePartition, estimate_geometry, extract_digit_cluster
from .recognizer import RecognizerModel, recognize, train_recognizer
from .repair import RepairResult, repair_loop
from .stslice import SegmenterModel, STSlice, labeled_pairs, layer_index, segment, train_segmenter
from .synth import numeral_samples, preset_config

log = logging.getLogger(__name__)

REPORT_FORMAT = 1


# -- models ------------------------------------------------------------------------

@dataclass
class Models:
    segmenter: SegmenterModel
    recognizer: RecognizerModel
    crf: CrfModel

    def save(self, model_dir) -> None:
        out = Path(model_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.segmenter.save(out / "segmenter.json")
        self.recognizer.save(out / "recognizer.npz")
        self.crf.save(out / "crf.json")

    @classmethod
    def load(cls, model_dir) -> "Models":
        p = Path(model_dir)
        return cls(SegmenterModel.load(p / "segmenter.json"),
                   RecognizerModel.load(p / "recognizer.npz"), CrfModel.load(p / "crf.json"))


def train_numeral_recognizer(cfg: Config = Config()) -> RecognizerModel:
    """Recognizer fitted to isolated, cleanly segmented healthy numerals."""
    rc = cfg.recognizer
    samples = numeral_samples(preset_config("healthy"), rc.per_class, seed=rc.seed)
    return train_recognizer(samples, tau_scale=rc.tau_scale)


def gold_slices(d, gt, g) -> tuple:
    """Ground-truth numeral slices (in chronological order) and their labels."""
    by_id = {s.id: s for s in d.strokes}
    items = sorted(gt.slices, key=lambda s: min(by_id[i].start_time for i in s.strokes))
    slices = [STSlice.from_strokes([by_id[i] for i in s.strokes], g.center, k)
              for k, s in enumerate(items)]
    return slices, [s.label for s in items]


def gold_chains(corpus, crf_cfg: CrfConfig) -> list:
    chains = []
    for _, d, gt in corpus:
        if not gt.slices:
            continue
        g = estimate_geometry(d)
        slices, labels = gold_slices(d, gt, g)
        chains.append(build_chain(slices, g, crf_cfg, labels))
    return chains


def train_segmenter_on(corpus, cfg: Config = Config(), features=("d_angle", "d_time")):
    pairs = []
    for _, d, gt in corpus:
        pairs.extend(labeled_pairs(d, gt, estimate_geometry(d)))
    return train_segmenter(pairs, rounds=cfg.segmenter.rounds, features=features)


def train_models(corpus, cfg: Config = Config(), recognizer: RecognizerModel | None = None
                 ) -> Models:
    """Fit the segmenter and CRF on ``corpus`` (``[(name, Drawing, GroundTruth)]``)."""
    corpus = list(corpus)
    seg = train_segmenter_on(corpus, cfg)
    rec = recognizer or train_numeral_recognizer(cfg)
    crf = train_crf(gold_chains(corpus, cfg.crf), cfg.crf)
    return Models(seg, rec, crf)


# -- running -------------------------------------------------------------------------

@dataclass
class PipelineResult:
    name: str
    geometry: object
    partition: StrokePartition
    initial_slices: list          # segmenter output
    slices: list                  # final slices
    labels: np.ndarray
    posteriors: np.ndarray
    overwrites: list
    augmentations: list
    repair: RepairResult | None = None
    notes: list = field(default_factory=list)
    source: str = ""              # drawing file the result was computed from

    @property
    def digit_strokes(self) -> frozenset:
        return self.partition.digit_strokes

    def removed_strokes(self) -> frozenset:
        return frozenset(i for ev in self.overwrites for i in ev.removed.ids)

    def predicted(self) -> list:
        """``[(stroke ids, label)]`` for the final slices."""
        return [(s.ids, int(l)) for s, l in zip(self.slices, self.labels)]

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "name": self.name,
            "source": self.source,
            "geometry": self.geometry.to_dict(),
            "partition": {"digit": sorted(self.partition.digit_strokes),
                          "circle": sorted(self.partition.circle_strokes),
                          "hand": sorted(self.partition.hand_strokes)},
            "initial_slices": [s.to_dict() for s in self.initial_slices],
            "slices": [dict(s.to_dict(), label=int(l),
                            posterior=[round(float(p), 9) for p in post])
                       for s, l, post in zip(self.slices, self.labels, self.posteriors)],
            "overwrites": [e.to_dict() for e in self.overwrites],
            "augmentations": [e.to_dict() for e in self.augmentations],
            "repair_log": [r.to_dict() for r in self.repair.log] if self.repair else [],
            "notes": list(self.notes) + (list(self.repair.notes) if self.repair else []),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def run(d, models: Models, cfg: Config = Config(), name: str = "") -> PipelineResult:
    """Geometry, digit clustering, slicing, unpeeling, labelling and repair."""
    if len(d.strokes) == 0:
        raise EmptyDrawingError("empty drawing")
    if models.crf.features and models.crf.dim != models.crf.config().node_dim():
        raise ModelMismatchError("CRF weights do not match the model's feature configuration")
    notes = []
    g = estimate_geometry(d, cfg.circle.circularity_min, cfg.circle.length_frac_min)
    try:
        part = extract_digit_cluster(d, g, seed=cfg.kmeans.seed, restarts=cfg.kmeans.restarts)
    except ClusteringError as exc:
        notes.append(f"clustering skipped: {exc}")
        part = StrokePartition(frozenset(s.id for s in d.strokes))
    digit = [s for s in d.strokes if s.id in part.digit_strokes]
    initial = segment(digit, models.segmenter, g)
    kept, overwrites, augments = detect_overwrites(initial, g, cfg.overwrite.theta1,
                                                   cfg.overwrite.theta2, models.recognizer)
    rep = None
    if cfg.repair.enabled:
        rep = repair_loop(kept, models.crf, models.recognizer, g, cfg.overwrite.theta1,
                          cfg.repair.ratio, cfg.repair.valley_mode, cfg.repair.eps)
        for part_, by in rep.dropped:
            overwrites.append(OverwriteEvent(part_, by, recognize(models.recognizer, part_.strokes)))
        final, labels, post = rep.slices, rep.labels, rep.posteriors
    else:
        final = kept
        labels, post = predict(models.crf, kept)
    return PipelineResult(name, g, part, initial, final, labels, post, overwrites, augments,
                          rep, notes)


def run_gold(d, gt, models: Models) -> list:
    """Label the ground-truth slices directly: ``[(stroke ids, label)]``."""
    g = estimate_geometry(d)
    slices, _ = gold_slices(d, gt, g)
    if not slices:
        return []
    labels, _ = predict(models.crf, slices)
    return [(s.ids, int(l)) for s, l in zip(slices, labels)]


# -- metrics ---------------------------------------------------------------------------

def match_counts(predicted, gt) -> tuple:
    """``(ground-truth slices, exactly matched, matched with the right label)``."""
    pred = {frozenset(ids): lab for ids, lab in predicted}
    n = len(gt.slices)
    matched = correct = 0
    for s in gt.slices:
        lab = pred.get(s.strokes)
        if lab is not None:
            matched += 1
            correct += lab == s.label
    return n, matched, correct


@dataclass
class EvalReport:
    segmentation: float
    identification: float
    combined: float
    n_slices: int
    n_drawings: int
    per_cohort: dict = field(default_factory=dict)
    folds: list = field(default_factory=list)

    def summary(self) -> dict:
        out = {"segmentation": self.segmentation, "identification": self.identification,
               "combined": self.combined, "n_slices": self.n_slices, "n_drawings": self.n_drawings,
               "per_cohort": self.per_cohort}
        if self.folds:
            for key in ("segmentation", "identification", "combined"):
                vals = np.array([f[key] for f in self.folds])
                out[f"{key}_mean"] = float(vals.mean())
                out[f"{key}_sd"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        return out


def _rates(n, m, c) -> dict:
    return {"segmentation": m / n if n else 1.0, "identification": c / m if m else 1.0,
            "combined": c / n if n else 1.0, "n_slices": int(n)}


def report_from_counts(rows) -> EvalReport:
    """``rows`` of ``(cohort, n, matched, correct)`` per drawing."""
    tot = np.zeros(3, dtype=int)
    by = {}
    for cohort, n, m, c in rows:
        tot += (n, m, c)
        by.setdefault(cohort, np.zeros(3, dtype=int))
        by[cohort] += (n, m, c)
    r = _rates(*tot)
    return EvalReport(r["segmentation"], r["identification"], r["combined"], int(tot[0]), len(rows),
                      {k: _rates(*v) for k, v in sorted(by.items())})


def _eval_one(args):
    d, gt, models, cfg, gold = args
    pred = run_gold(d, gt, models) if gold else run(d, models, cfg).predicted()
    return (d.cohort,) + match_counts(pred, gt)


def evaluate(corpus, models: Models, cfg: Config = Config(), gold_segmentation: bool = False,
             jobs: int = 1) -> EvalReport:
    """Exact-stroke-set metrics over ``[(name, Drawing, GroundTruth)]``."""
    tasks = [(d, gt, models, cfg, gold_segmentation) for _, d, gt in corpus]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_eval_one, tasks, chunksize=8))
    else:
        rows = [_eval_one(t) for t in tasks]
    return report_from_counts(rows)


def fold_indices(n: int, folds: int, seed: int = 0) -> list:
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cross_validate(corpus, cfg: Config = Config(), folds: int = 10, seed: int = 0,
                   gold_segmentation: bool = False, recognizer=None) -> EvalReport:
    """K-fold evaluation, split by drawing; models retrained per fold."""
    corpus = list(corpus)
    rec = recognizer or train_numeral_recognizer(cfg)
    rows, fold_rates = [], []
    for test_idx in fold_indices(len(corpus), folds, seed):
        test = set(test_idx.tolist())
        train = [c for i, c in enumerate(corpus) if i not in test]
        models = train_models(train, cfg, rec)
        part = [_eval_one((corpus[i][1], corpus[i][2], models, cfg, gold_segmentation))
                for i in sorted(test)]
        rows.extend(part)
        r = report_from_counts(part)
        fold_rates.append({"segmentation": r.segmentation, "identification": r.identification,
                           "combined": r.combined})
    rep = report_from_counts(rows)
    rep.folds = fold_rates
    return rep


# -- ablation grid ---------------------------------------------------------------------

TRAIN_SETS = ("healthy", "impaired", "both")


def ablation_grid(corpus, cfg: Config = Config(), folds: int = 10, seed: int = 0) -> list:
    """CRF accuracy on gold slices for training cohort x concat x context features.

    Returns one dict per configuration with per-fold accuracies overall
    and per test cohort.
    """
    corpus = list(corpus)
    prepared = []
    for _, d, gt in corpus:
        g = estimate_geometry(d)
        slices, labels = gold_slices(d, gt, g)
        prepared.append((d.cohort, slices, np.array(labels), g))
    configs = [(ts, concat, ctx) for ts in TRAIN_SETS for concat in (False, True)
               for ctx in (False, True)]
    results = {c: {"overall": [], "healthy": [], "impaired": []} for c in configs}
    split = fold_indices(len(corpus), folds, seed)
    base_cache = {}
    for ctx in (False, True):
        for k, (_, slices, _, _) in enumerate(prepared):
            if slices:
                crf_cfg = replace(cfg.crf, ctx=ctx)
                base_cache[(k, ctx)] = slice_base_features(slices, crf_cfg)
    for fi, test_idx in enumerate(split):
        test = set(test_idx.tolist())
        for ts, concat, ctx in configs:
            crf_cfg = replace(cfg.crf, concat=concat, ctx=ctx)
            chains = []
            for k, (cohort, slices, labels, g) in enumerate(prepared):
                if k in test or not slices or (ts != "both" and cohort != ts):
                    continue
                chains.append(build_chain(slices, g, crf_cfg, labels, base=base_cache[(k, ctx)]))
            if not chains:
                continue
            model = train_crf(chains, crf_cfg)
            hits = {"overall": [0, 0], "healthy": [0, 0], "impaired": [0, 0]}
            for k in sorted(test):
                cohort, slices, labels, g = prepared[k]
                if not slices:
                    continue
                pred, _ = predict(model, slices, base=base_cache[(k, ctx)])
                ok = int((pred == labels).sum())
                for key in ("overall", cohort):
                    if key in hits:
                        hits[key][0] += ok
                        hits[key][1] += len(labels)
            for key, (ok, n) in hits.items():
                if n:
                    results[(ts, concat, ctx)][key].append(ok / n)
        log.info("ablation fold %d/%d done", fi + 1, folds)
    rows = []
    for ts, concat, ctx in configs:
        r = results[(ts, concat, ctx)]
        row = {"trained_on": ts, "input": "concat" if concat else "single", "ctx": ctx}
        for key in ("overall", "healthy", "impaired"):
            vals = np.array(r[key])
            row[key] = float(vals.mean()) if len(vals) else float("nan")
            row[key + "_sd"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            row[key + "_folds"] = [float(v) for v in vals]
        rows.append(row)
    return rows


def format_ablation(rows) -> str:
    head = f"{'trained on':<10} {'input':<7} {'ang,#stk':<8} {'overall (sd)':<18} {'healthy (sd)':<18} {'impaired (sd)':<18}"
    lines = [head, "-" * len(head)]
    for r in rows:
        cells = [f"{100 * r[k]:6.2f}% ({r[k + '_sd']:.4f})" for k in ("overall", "healthy", "impaired")]
        lines.append(f"{r['trained_on']:<10} {r['input']:<7} {'Y' if r['ctx'] else '':<8} "
                     + " ".join(f"{c:<18}" for c in cells))
    return "\n".join(lines)


# -- segmentation and unpeeling diagnostics --------------------------------------------

def layer_accuracy(corpus, segmenter: SegmenterModel) -> float:
    """Fraction of ground-truth ink layers reproduced exactly by the segmenter.

    Runs on the ground-truth digit strokes so clustering errors do not
    enter the comparison.
    """
    hit = total = 0
    for _, d, gt in corpus:
        layer_of = layer_index(gt)
        strokes = [s for s in d.strokes if s.id in layer_of]
        if not strokes:
            continue
        got = {s.ids for s in segment(strokes, segmenter, estimate_geometry(d))}
        for layer in gt.layers:
            total += 1
            hit += layer.strokes in got
    return hit / total if total else 1.0


def overwrite_recovery(results_and_truth, kinds=("delayed_overwrite",)) -> tuple:
    """``(recovered, total)`` overwrite events among ``[(PipelineResult, GroundTruth)]``.

    An event counts as recovered when a removed slice has exactly the
    overwritten strokes and the recognizer's label for it is the numeral
    that was drawn there.
    """
    ok = total = 0
    for res, gt in results_and_truth:
        removed = {ev.removed.ids: ev for ev in res.overwrites}
        for ev in gt.events:
            if ev.kind not in kinds:
                continue
            total += 1
            hit = removed.get(ev.strokes)
            if hit is not None and hit.classification is not None \
                    and hit.classification.best_label == ev.drawn_label:
                ok += 1
    return ok, total


def conservation_ok(res: PipelineResult) -> bool:
    """Digit strokes are exactly the final slices plus removed ink, disjointly."""
    kept = [i for s in res.slices for i in s.ids]
    removed = [i for ev in res.overwrites for i in ev.removed.ids]
    both = kept + removed
    return len(both) == len(set(both)) and set(both) == set(res.digit_strokes)
