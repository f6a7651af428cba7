"""Pipeline stages behind the CLI: fuse, verify, search.

Each stage reads parsed inputs, writes curve CSVs, SVG figures and a JSON
report into an output directory, and returns the report.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path

import numpy as np

from . import __version__, metrics
from .errors import ConfigError, IntegrityError, NoNonMatedProbes
from .formats import EvaluationReport, link, write_curve_csv, write_report
from .fusion import fuse
from .plotting import PlotSpec, write_svg
from .protocols import (ComparisonProtocol, Pair, SearchProtocol, aggregate_curves,
                        kfold_accuracy, resample, run_comparison, run_search)
from .similarity import canonical_measure
from .types import Curve, Template, TemplateStore

log = logging.getLogger(__name__)

CMC_REPORT_RANKS = (1, 5, 10)
FPIR_TARGETS = ((1e-2, "1e-2"), (1e-3, "1e-3"))

VERIFY_CONVENTIONS = {
    "threshold_sweep": "distinct observed scores plus +inf sentinel; accept score >= t",
    "eer": "linear interpolation at the FAR = FNR crossing",
    "pr_zero_predictions": "precision = 1",
    "acc_tie_break": "lowest maximising threshold",
    "fold_averaging": "curve-level mean on a common grid",
}


def _safe_name(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


# -- fuse -------------------------------------------------------------------

def fuse_media(media, records, method="auto", normalize="none"):
    """Fuse media-level templates into one template per ``fused_template_id``.

    ``method="auto"`` means ``weighted_mean`` when the manifest carries
    weights and ``mean`` otherwise.
    """
    store = media if isinstance(media, TemplateStore) else TemplateStore.from_templates(media)
    has_weights = any(r.weight is not None for r in records)
    if method == "auto":
        method = "weighted_mean" if has_weights else "mean"
    if method == "weighted":
        method = "weighted_mean"
    if method == "weighted_mean" and not has_weights:
        raise ConfigError("weighted fusion needs a media_map with a weight column")

    groups = {}
    for r in records:
        groups.setdefault(r.fused_template_id, []).append(r)
    fused = []
    for fid, members in groups.items():
        subjects = {r.subject_id for r in members}
        if len(subjects) != 1:
            raise IntegrityError(f"group {fid!r} mixes subjects {sorted(subjects)}")
        vectors = []
        for r in members:
            if r.media_template_id not in store:
                raise IntegrityError(
                    f"group {fid!r} references missing media template {r.media_template_id!r}")
            vectors.append(store[r.media_template_id].vector)
        if len({v.shape[0] for v in vectors}) != 1:
            raise IntegrityError(f"group {fid!r} mixes feature dimensions")
        weights = None
        if has_weights and method != "mean":
            weights = [1.0 if r.weight is None else r.weight for r in members]
        vec = fuse(vectors, method, weights=weights, normalize=normalize)
        fused.append(Template(fid, members[0].subject_id, vec,
                              tuple(r.media_template_id for r in members)))
    return fused, method


# -- verify -----------------------------------------------------------------

def verify(templates, pair_records, out_dir, measure="cosine", calibration="accuracy",
           n_points=100):
    """Comparison protocol: per-fold ROC/PR, AUC, EER and ACC."""
    measure = canonical_measure(measure)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = TemplateStore.from_templates(templates)
    link(pair_records, store)
    protocol = ComparisonProtocol([Pair(r.template_a, r.template_b, r.same, r.fold)
                                   for r in pair_records])
    folds = run_comparison(protocol, store, measure)

    sources, curves = {}, {}
    rocs, prs = [], []
    for f, s in enumerate(folds):
        roc_curve, _ = metrics.roc(s)
        pr_curve = metrics.precision_recall(s)
        rocs.append(roc_curve)
        prs.append(pr_curve)
        rate, _ = metrics.eer(s)
        sources[f"fold{f}"] = {"auc": metrics.auc(roc_curve), "eer": rate}
        name_roc, name_pr = f"roc_fold{f}.csv", f"pr_fold{f}.csv"
        write_curve_csv(roc_curve, out / name_roc)
        write_curve_csv(pr_curve, out / name_pr)
        curves[f"roc_fold{f}"] = name_roc
        curves[f"pr_fold{f}"] = name_pr

    calib = {"method": calibration}
    if len(folds) >= 2:
        kf = kfold_accuracy(folds, calibration)
        for f, acc in enumerate(kf.per_fold):
            sources[f"fold{f}"]["acc"] = acc
        calib.update(kind=f"{calibration}-maximising threshold fitted on the other folds"
                     if calibration == "accuracy" else
                     f"{calibration} threshold fitted on the other folds",
                     thresholds=kf.thresholds, train_folds=kf.train_folds)
    else:
        acc, t = metrics.best_threshold(folds[0])
        sources["fold0"]["acc"] = acc
        calib.update(kind="best-threshold (single fold)", thresholds=[t], train_folds=[[0]])

    roc_agg = aggregate_curves(rocs, "logarithmic", n_points)
    pr_agg = aggregate_curves(prs, "linear", n_points)
    write_curve_csv(roc_agg.mean_curve, out / "roc_mean.csv")
    write_curve_csv(pr_agg.mean_curve, out / "pr_mean.csv")
    curves["roc_mean"] = "roc_mean.csv"
    curves["pr_mean"] = "pr_mean.csv"

    roc_series = [(f"fold {f}", Curve("ROC", roc_agg.grid, resample(c, roc_agg.grid)))
                  for f, c in enumerate(rocs)] if len(rocs) > 1 else []
    roc_series.append(("mean", roc_agg.mean_curve))
    write_svg(PlotSpec("ROC (verification)", roc_series, "log10", None), out / "roc.svg")
    pr_series = [(f"fold {f}", c) for f, c in enumerate(prs)]
    write_svg(PlotSpec("Precision-recall (verification)", pr_series, "linear", None),
              out / "pr.svg")
    curves["roc_svg"] = "roc.svg"
    curves["pr_svg"] = "pr.svg"

    summary = {k: _mean([v[k] for v in sources.values()]) for k in ("auc", "eer", "acc")}
    report = EvaluationReport(
        tool_version=__version__,
        protocol="comparison",
        config={"measure": measure, "n_folds": len(folds), "grid_points": n_points,
                "conventions": dict(VERIFY_CONVENTIONS, calibration=calib["kind"])},
        sources=sources, summary=summary, calibration=calib, curves=curves)
    write_report(report, out / "report.json")
    return report


# -- search -----------------------------------------------------------------

def build_search_protocol(gallery_records, probe_records, store, mode):
    """Turn manifest records into a :class:`SearchProtocol`, checking that
    every id resolves and manifest subjects agree with the templates."""
    link(gallery_records, store)
    link(probe_records, store)
    for n, r in enumerate(list(gallery_records) + list(probe_records)):
        t = store[r.template_id]
        if t.subject_id != r.subject_id:
            raise IntegrityError(
                f"template {r.template_id!r} has subject {t.subject_id!r} but the manifest "
                f"says {r.subject_id!r}")
    sets = {}
    for r in gallery_records:
        sets.setdefault(r.gallery_set, []).append(r.template_id)
    return SearchProtocol(sets, [r.template_id for r in probe_records], mode)


def search(templates, gallery_records, probe_records, out_dir, mode="open", measure="cosine",
           tie_policy=metrics.DEFAULT_TIE_POLICY, fnir_convention=metrics.DEFAULT_FNIR_CONVENTION,
           max_rank=100, n_points=100, workers=1, batch=64):
    """Closed- or open-set search over every gallery set, with CMC and IET."""
    measure = canonical_measure(measure)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = TemplateStore.from_templates(templates)
    protocol = build_search_protocol(gallery_records, probe_records, store, mode)
    if not protocol.gallery_sets:
        raise IntegrityError("gallery manifest lists no templates")
    results = run_search(protocol, store, measure, tie_policy, batch=batch, workers=workers)

    sources, curves, notes = {}, {}, []
    cmcs, iets = [], []
    for res in results:
        name = _safe_name(res.gallery_set)
        g_size = res.matrix.shape[1]
        cmc_curve = metrics.cmc(res.ranks, min(max_rank, g_size))
        cmcs.append((res.gallery_set, cmc_curve))
        write_curve_csv(cmc_curve, out / f"cmc_{name}.csv")
        curves[f"cmc_{name}"] = f"cmc_{name}.csv"
        entry = {f"cmc@{k}": metrics.cmc_at(res.ranks, k) for k in CMC_REPORT_RANKS}
        if mode == "open":
            n_nonmated = sum(not r.mated for r in res.ranks)
            try:
                iet_curve, points = metrics.iet(res.ranks, fnir_convention)
            except NoNonMatedProbes:
                notes.append(f"gallery set {res.gallery_set!r}: no non-mated probes; IET skipped")
            else:
                iets.append((res.gallery_set, iet_curve))
                write_curve_csv(iet_curve, out / f"iet_{name}.csv")
                curves[f"iet_{name}"] = f"iet_{name}.csv"
                for target, label in FPIR_TARGETS:
                    entry[f"fnir@fpir={label}"] = metrics.fnir_at_fpir(points, target, n_nonmated)
        sources[res.gallery_set] = entry

    cmc_agg = aggregate_curves([c for _, c in cmcs])
    write_curve_csv(cmc_agg.mean_curve, out / "cmc_mean.csv")
    curves["cmc_mean"] = "cmc_mean.csv"
    series = [(n, c) for n, c in cmcs] + ([("mean", cmc_agg.mean_curve)] if len(cmcs) > 1 else [])
    write_svg(PlotSpec(f"CMC ({mode}-set identification)", series, "linear"), out / "cmc.svg")
    curves["cmc_svg"] = "cmc.svg"

    if iets:
        iet_agg = aggregate_curves([c for _, c in iets], "logarithmic", n_points)
        write_curve_csv(iet_agg.mean_curve, out / "iet_mean.csv")
        curves["iet_mean"] = "iet_mean.csv"
        series = [(n, Curve("IET", iet_agg.grid, resample(c, iet_agg.grid))) for n, c in iets]
        if len(iets) > 1:
            series.append(("mean", iet_agg.mean_curve))
        write_svg(PlotSpec("IET (open-set identification)", series, "log10"), out / "iet.svg")
        curves["iet_svg"] = "iet.svg"

    keys = sorted({k for v in sources.values() for k in v})
    summary = {k: _mean([v.get(k) for v in sources.values()]) for k in keys}
    report = EvaluationReport(
        tool_version=__version__,
        protocol=f"{mode}-set search",
        config={"measure": measure, "mode": mode, "max_rank": max_rank, "grid_points": n_points,
                "gallery_sets": list(protocol.gallery_sets),
                "n_probes": len(protocol.probes),
                "conventions": {"tie_policy": tie_policy, "fnir": fnir_convention,
                                "gallery_averaging": "curve-level mean over gallery sets",
                                "fnir_at_fpir": "lowest FNIR with FPIR <= target; "
                                                "undefined when target < 1/n_nonmated"}},
        sources=sources, summary=summary, curves=curves, notes=notes)
    write_report(report, out / "report.json")
    return report
