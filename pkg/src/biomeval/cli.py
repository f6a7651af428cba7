"""Command line interface.

Subcommands: fuse, verify, search, aggregate, synth, plot.

Exit codes: 0 success, 1 usage/config, 2 referential integrity,
3 empty/degenerate protocol, 4 protocol violation.
"""

from __future__ import annotations

import argparse
import csv
import importlib
import logging
import sys
from pathlib import Path

from . import __version__, evaluate
from .errors import BiometricError, ConfigError
from .formats import (GalleryRecord, ProbeRecord, load_templates, parse_manifest,
                      read_curve_csv, write_curve_csv, write_manifest, write_templates,
                      write_templates_csv)
from .fusion import NORMALIZE_CHOICES
from .metrics import FNIR_CONVENTIONS, TIE_POLICIES
from .plotting import PlotSpec, write_svg
from .protocols import aggregate_curves, resample
from .similarity import default_workers
from .types import Curve
from . import synth

log = logging.getLogger("biomeval")

MEASURE_CHOICES = ("cosine", "neg-euclidean")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _non_negative(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return value


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _write_templates_any(templates, path):
    if str(path).lower().endswith(".csv"):
        write_templates_csv(templates, path)
    else:
        write_templates(templates, path)


def _workers(args):
    return args.workers if args.workers else default_workers()


# -- commands ----------------------------------------------------------------

def cmd_fuse(args):
    for module in args.plugin or []:
        importlib.import_module(module)
    media = load_templates(args.features)
    records = parse_manifest(args.media_map, "media_map")
    fused, method = evaluate.fuse_media(media, records, args.method, args.normalize)
    _write_templates_any(fused, args.out)
    log.info("fused %d media templates into %d templates (%s)", len(media), len(fused), method)
    return 0


def cmd_verify(args):
    templates = load_templates(args.templates)
    pairs = parse_manifest(args.pairs, "pairs")
    report = evaluate.verify(templates, pairs, args.out, measure=args.measure,
                             calibration=args.calibration, n_points=args.grid_points)
    s = report.summary
    print(f"AUC={s['auc']:.6f} EER={s['eer']:.6f} ACC={s['acc']:.6f} "
          f"({report.calibration['kind']})")
    return 0


def cmd_search(args):
    templates = load_templates(args.templates)
    gallery = parse_manifest(args.gallery, "gallery")
    probes = parse_manifest(args.probes, "probe")
    report = evaluate.search(templates, gallery, probes, args.out, mode=args.mode,
                             measure=args.measure, tie_policy=args.tie_policy,
                             fnir_convention=args.fnir_convention, max_rank=args.max_rank,
                             n_points=args.grid_points, workers=_workers(args),
                             batch=args.batch)
    s = report.summary
    line = " ".join(f"{k}={v:.6f}" for k, v in sorted(s.items()) if v is not None)
    print(line)
    for note in report.notes:
        print(f"note: {note}")
    return 0


def cmd_aggregate(args):
    curves = [read_curve_csv(p) for p in args.curves]
    agg = aggregate_curves(curves, args.grid, args.n_points)
    write_curve_csv(agg.mean_curve, args.out)
    if args.svg:
        series = [(Path(p).stem, c) for p, c in zip(args.curves, curves)]
        series.append(("mean", agg.mean_curve))
        scale = "log10" if args.grid in ("log", "logarithmic") and agg.mean_curve.kind != "CMC" \
            else "linear"
        if scale == "log10":
            series = [(lbl, Curve(c.kind, agg.grid, resample(c, agg.grid)))
                      for lbl, c in series[:-1]] + [series[-1]]
        write_svg(PlotSpec("mean curve", series, scale), args.svg)
    return 0


def cmd_plot(args):
    series = []
    for item in args.curves:
        label, sep, path = item.partition("=")
        if not sep:
            label, path = Path(item).stem, item
        series.append((label, path))
    spec = PlotSpec(args.title, series, args.x_scale,
                    tuple(args.y_range) if args.y_range else None, args.width, args.height)
    write_svg(spec, args.out)
    return 0


def cmd_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "scores":
        n_folds = args.folds
        model = synth.GaussianScoreModel(args.genuine_mean, args.genuine_sd, args.impostor_mean,
                                         args.impostor_sd, args.n_genuine * n_folds,
                                         args.n_impostor * n_folds, args.seed)
        folds = synth.split_folds(synth.sample_scores(model), n_folds)
        with open(out / "scores.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fold", "same", "score"])
            for f, s in enumerate(folds):
                w.writerows([f, 1, format(v, ".17g")] for v in s.genuine)
                w.writerows([f, 0, format(v, ".17g")] for v in s.impostor)
        templates, pairs = synth.scores_as_templates(folds)
        write_templates(templates, out / "templates.ftpl")
        write_manifest(out / "pairs.csv", "pairs", pairs)
        return 0

    pop = synth.SyntheticPopulation(args.subjects, args.mated, args.nonmated, args.dim,
                                    args.within_sd, args.between_sd, args.seed)
    gallery, probes = synth.sample_population(pop)
    write_templates(gallery + probes, out / "templates.ftpl")
    media, media_records = synth.expand_media(gallery + probes, args.media_per_template,
                                              args.media_sd, args.seed + 1)
    write_templates(media, out / "media.ftpl")
    write_manifest(out / "media_map.csv", "media_map", media_records)
    write_manifest(out / "gallery.csv", "gallery",
                   [GalleryRecord(f"G{1 + n % args.gallery_sets}", t.template_id, t.subject_id)
                    for n, t in enumerate(gallery)])
    write_manifest(out / "probe.csv", "probe",
                   [ProbeRecord(t.template_id, t.subject_id) for t in probes])
    write_manifest(out / "pairs.csv", "pairs", synth.make_pairs(gallery, probes, args.folds))
    return 0


# -- parser ------------------------------------------------------------------

def _common(p, workers=False):
    p.add_argument("--measure", choices=MEASURE_CHOICES, default="cosine")
    if workers:
        p.add_argument("--workers", type=_positive, default=None,
                       help="scoring threads (default: $BIOMEVAL_WORKERS or CPU count)")
        p.add_argument("--batch", type=_positive, default=64, help="probe rows per work unit")


def build_parser():
    parser = _Parser(prog="biomeval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"biomeval {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fuse", help="fuse media-level features into templates")
    p.add_argument("--features", required=True, help="media templates (.ftpl or .csv)")
    p.add_argument("--media-map", required=True, help="media_map manifest")
    p.add_argument("--method", default="auto",
                   help="auto | mean | weighted | a registered fusion name")
    p.add_argument("--normalize", choices=NORMALIZE_CHOICES, default="none",
                   help="L2-normalise media vectors before, or fused vectors after, fusing")
    p.add_argument("--plugin", action="append", help="module to import for custom fusions")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("verify", help="comparison protocol: ROC, PR, ACC, EER, AUC")
    p.add_argument("--templates", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--calibration", choices=("accuracy", "eer"), default="accuracy")
    p.add_argument("--grid-points", type=_positive, default=100)
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("search", help="closed/open-set search: CMC, FPIR/FNIR")
    p.add_argument("--templates", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--probes", required=True)
    p.add_argument("--mode", choices=("closed", "open"), default="open")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="optimistic")
    p.add_argument("--fnir-convention", choices=FNIR_CONVENTIONS, default="rank1")
    p.add_argument("--max-rank", type=_positive, default=100)
    p.add_argument("--grid-points", type=_positive, default=100)
    _common(p, workers=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("aggregate", help="average curve CSVs on a common grid")
    p.add_argument("curves", nargs="+")
    p.add_argument("--grid", choices=("logarithmic", "log", "linear"), default="logarithmic")
    p.add_argument("--n-points", type=_positive, default=100)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", help="also render the curves and their mean")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("plot", help="render curve CSVs to SVG")
    p.add_argument("curves", nargs="+", help="PATH or LABEL=PATH")
    p.add_argument("--title", default="")
    p.add_argument("--x-scale", choices=("linear", "log10"), default=None)
    p.add_argument("--y-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--width", type=_positive, default=640)
    p.add_argument("--height", type=_positive, default=480)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synth", help="generate synthetic scores or populations")
    p.add_argument("kind", choices=("scores", "population"))
    p.add_argument("--config", help="key,value CSV of flag defaults (flags override)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--folds", type=_positive, default=1)
    p.add_argument("--genuine-mean", type=float, default=0.6)
    p.add_argument("--genuine-sd", type=float, default=0.1)
    p.add_argument("--impostor-mean", type=float, default=0.4)
    p.add_argument("--impostor-sd", type=float, default=0.1)
    p.add_argument("--n-genuine", type=_positive, default=300, help="genuine scores per fold")
    p.add_argument("--n-impostor", type=_positive, default=300, help="impostor scores per fold")
    p.add_argument("--subjects", type=_positive, default=50)
    p.add_argument("--mated", type=_non_negative, default=100)
    p.add_argument("--nonmated", type=_non_negative, default=50)
    p.add_argument("--dim", type=_positive, default=16)
    p.add_argument("--within-sd", type=float, default=0.1)
    p.add_argument("--between-sd", type=float, default=1.0)
    p.add_argument("--media-per-template", type=_positive, default=1)
    p.add_argument("--media-sd", type=float, default=0.0)
    p.add_argument("--gallery-sets", type=_positive, default=1)
    p.set_defaults(func=cmd_synth)
    return parser


def _config_tokens(path, parser):
    """Turn a ``key,value`` config CSV into flag tokens placed before the
    command line so explicit flags win."""
    flags = {a.dest: a.option_strings[-1] for a in parser._actions if a.option_strings}
    tokens = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    with fh:
        rows = csv.reader(fh)
        if next(rows, None) != ["key", "value"]:
            raise ConfigError(f"config {path}: header must be 'key,value'")
        for row in rows:
            if not row:
                continue
            if len(row) != 2:
                raise ConfigError(f"config {path}: line {rows.line_num} needs key,value")
            key = row[0].strip().replace("-", "_")
            if key not in flags or key in ("config", "help"):
                raise ConfigError(f"config {path}: unknown flag {row[0]!r}")
            tokens += [flags[key], row[1].strip()]
    return tokens


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            synth_parser = parser._subparsers._group_actions[0].choices["synth"]
            extra = _config_tokens(args.config, synth_parser)
            i = argv.index("synth")
            args = parser.parse_args(argv[:i + 2] + extra + argv[i + 2:])
    except BiometricError as exc:
        print(f"biomeval: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BiometricError as exc:
        print(f"biomeval: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError, OSError) as exc:
        print(f"biomeval: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
