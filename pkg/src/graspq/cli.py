"""Command-line pipeline: synth -> compute-metrics -> label -> train -> report.

Every option can also come from a TOML file given with ``--config``; keys
use the long option names (dashes or underscores), either at top level or in
a table named after the subcommand.  Command-line flags win.
"""
import argparse
import json
import logging
import os
import sys
from collections import Counter
from dataclasses import replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import datapipe, learn, metrics, report, synth
from .errors import GraspqError, InvalidInput, StratificationError

log = logging.getLogger("graspq")

DEFAULTS = {
    "seed": 0,
    "strict": False,
    "split_mode": "cluster",
    "label_scheme": "ternary",
    "metrics": "all",
    "model": "tree",
    "folds": 5,
    "test_fraction": 0.3,
    "stratified": True,
    "cone_edges": metrics.graspmodel.DEFAULT_CONE_EDGES,
    "torque_scale": None,
    "hull_dims": 6,
    "preset": "separable",
    "n": 600,
    "sigma": None,
    "grid": None,
    "thresholds": None,
    "thresholds_out": None,
    "objects": None,
    "objects_out": None,
    "report_out": None,
    "csv_out": None,
    "latex_out": None,
}


class Config(argparse.Namespace):
    def __getattr__(self, name):
        if name.startswith("__"):
            raise AttributeError(name)
        return DEFAULTS.get(name)


def _global_options():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int)
    g.add_argument("--config", help="TOML file with default option values")
    g.add_argument("--strict", action="store_const", const=True,
                   help="exit nonzero when any record fails")
    g.add_argument("--split-mode", choices=("record", "cluster"))
    g.add_argument("--label-scheme", choices=datapipe.LABEL_SCHEMES)
    g.add_argument("--metrics", help="comma separated metric names or 'all'")
    g.add_argument("--model", choices=("knn", "tree"))
    g.add_argument("--folds", type=int)
    g.add_argument("--test-fraction", type=float)
    return p


def build_parser():
    common = _global_options()
    parser = argparse.ArgumentParser(prog="graspq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic grasp dataset")
    p.add_argument("--preset", help="ideal | separable | noisy | noisy(SIGMA)")
    p.add_argument("--sigma", type=float)
    p.add_argument("-n", "--n", type=int, help="number of records")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--objects-out", help="object catalog path (default: <out>.objects.json)")

    p = sub.add_parser("compute-metrics", parents=[common], help="fill in quality vectors")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--objects", help="object catalog JSON (default: <input>.objects.json)")
    p.add_argument("--thresholds", help="'metric lo hi' file for q_a1/q_c2 normalisation")
    p.add_argument("--thresholds-out", help="where calibrated thresholds go (default: <out>.thresholds)")
    p.add_argument("--cone-edges", type=int)
    p.add_argument("--torque-scale", type=float)
    p.add_argument("--hull-dims", type=int, choices=(3, 6))

    p = sub.add_parser("label", parents=[common], help="attach binary and 3-category labels")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("train", parents=[common], help="split, grid search, fit and evaluate")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--out", required=True, help="model file")
    p.add_argument("--report-out", help="report JSON (default: <out stem>.report.json)")
    p.add_argument("--grid", help='JSON hyperparameter grid, e.g. \'{"k": [1, 3]}\'')
    p.add_argument("--no-stratify", dest="stratified", action="store_const", const=False)
    p.add_argument("--thresholds", help="thresholds file recorded as model provenance")

    p = sub.add_parser("evaluate", parents=[common], help="score a saved model on a dataset")
    p.add_argument("-m", "--model-file", required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--report-out")

    p = sub.add_parser("report", parents=[common], help="render result tables from reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--csv-out")
    p.add_argument("--latex-out")
    p.add_argument("--text-out")
    return parser


def load_config(args):
    """Merge command-line args over the TOML config over built-in defaults."""
    values = {}
    if args.config:
        if not os.path.isfile(args.config):
            raise InvalidInput(f"config file {args.config!r} does not exist")
        with open(args.config, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise InvalidInput(f"{args.config}: {exc}") from None
        section = raw.get(args.command, {})
        for src in (raw, section if isinstance(section, dict) else {}):
            values.update({k.replace("-", "_"): v for k, v in src.items() if not isinstance(v, dict)})
    cfg = Config()
    for key, value in values.items():
        setattr(cfg, key, value)
    for key, value in vars(args).items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _require_file(path, what):
    if not path or not os.path.isfile(path):
        raise InvalidInput(f"{what} {path!r} does not exist")


def _require_outdir(path):
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise InvalidInput(f"output directory {directory!r} does not exist")


def _stem(path):
    return os.path.splitext(path)[0]


def parse_metrics(text):
    if text in (None, "all"):
        return list(metrics.METRIC_NAMES)
    names = [m.strip().lower() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in metrics.METRIC_NAMES]
    if bad or not names:
        raise InvalidInput(f"unknown metric(s) {bad}; choose from {', '.join(metrics.METRIC_NAMES)} or 'all'")
    return [m for m in metrics.METRIC_NAMES if m in names]


# -- subcommands -------------------------------------------------------------------------------

def cmd_synth(cfg, out=None):
    out = out or sys.stdout
    _require_outdir(cfg.out)
    objects_out = cfg.objects_out or _stem(cfg.out) + ".objects.json"
    ds, objects = synth.synth_dataset(cfg.n, cfg.preset, cfg.seed, cfg.sigma)
    datapipe.save_objects(objects, objects_out)
    datapipe.save_dataset(ds, cfg.out)
    prov = ds.provenance
    print(f"synth: {len(ds)} records, preset={prov['preset']}, sigma={prov['sigma']}, seed={cfg.seed}", file=out)
    print(f"wrote {cfg.out} and {objects_out}", file=out)
    return 0


def cmd_compute_metrics(cfg, out=None):
    out = out or sys.stdout
    _require_file(cfg.input, "input dataset")
    _require_outdir(cfg.out)
    objects_path = cfg.objects or _stem(cfg.input) + ".objects.json"
    ds = datapipe.load_dataset(cfg.input)
    needs_geometry = any(r.quality is None for r in ds)
    objects = {}
    if needs_geometry:
        _require_file(objects_path, "object catalog")
        objects = datapipe.load_objects(objects_path)
        objects = {name: (o.with_derived_constants() if o.surface_points is not None else o)
                   for name, o in objects.items()}
    thresholds = None
    if cfg.thresholds:
        _require_file(cfg.thresholds, "thresholds file")
        thresholds = datapipe.read_thresholds(cfg.thresholds)

    counter = Counter()
    computed, passed, failures = {}, [], []
    for r in ds:
        if r.quality is not None:
            passed.append(r.grasp_id)
            continue
        try:
            g = r.grasp_instance(objects)
            computed[r.grasp_id] = metrics.quality_vector(
                g, cfg.cone_edges, cfg.torque_scale, None, counter, cfg.hull_dims)
        except GraspqError as exc:
            failures.append((r.grasp_id, str(exc)))

    if failures and cfg.strict:
        for gid, msg in failures:
            print(f"FAILED {gid}: {msg}", file=out)
        print(f"compute-metrics: {len(failures)} record(s) failed; nothing written (--strict)", file=out)
        return 1

    calibrated = False
    if thresholds is None and computed:
        thresholds = metrics.calibrate_thresholds(list(computed.values()))
        calibrated = True
    records = []
    for r in ds:
        qv = computed.get(r.grasp_id)
        if qv is not None:
            qv = metrics.apply_thresholds(qv, thresholds, counter)
            r = replace(r, quality=qv.as_dict())
        records.append(r)

    if calibrated:
        thr_out = cfg.thresholds_out or _stem(cfg.out) + ".thresholds"
        datapipe.write_thresholds(thresholds, thr_out, "dataset min/max calibration of " + os.path.basename(cfg.input))
        print(f"calibrated thresholds written to {thr_out}", file=out)
    datapipe.save_dataset(ds.subset(records), cfg.out)

    missing_d2 = sum(1 for qv in computed.values() if qv.q_d2 is None)
    print(f"compute-metrics: {len(computed)} computed, {len(passed)} passed through, {len(failures)} failed",
          file=out)
    if passed:
        log.warning("%d record(s) already had quality vectors and were passed through", len(passed))
    if missing_d2:
        print(f"q_d2 missing (no hand Jacobian) for {missing_d2} record(s)", file=out)
    clamps = ", ".join(f"{k}={counter[k]}" for k in metrics.METRIC_NAMES if counter[k]) or "none"
    print(f"clamped values: {clamps}", file=out)
    for gid, msg in failures:
        print(f"FAILED {gid}: {msg}", file=out)
    return 0


def cmd_label(cfg, out=None):
    out = out or sys.stdout
    _require_file(cfg.input, "input dataset")
    _require_outdir(cfg.out)
    ds = datapipe.load_dataset(cfg.input)
    labelled, skipped = datapipe.label_dataset(ds)
    for gid in skipped:
        print(f"EXCLUDED {gid}: no executions", file=out)
    if skipped and cfg.strict:
        print(f"label: {len(skipped)} record(s) without executions; nothing written (--strict)", file=out)
        return 1
    datapipe.save_dataset(labelled, cfg.out)
    ternary = Counter(r.ternary_label for r in labelled)
    binary = Counter(r.binary_label for r in labelled)
    print(f"label: {len(labelled)} labelled, {len(skipped)} without executions", file=out)
    print("  ".join(f"{k}={ternary[k]}" for k in (datapipe.ROBUST, datapipe.FRAGILE, datapipe.FUTILE)), file=out)
    print("  ".join(f"{k}={binary[k]}" for k in (datapipe.STABLE, datapipe.UNSTABLE)), file=out)
    return 0


def _grid(cfg):
    override = None
    if cfg.grid:
        override = cfg.grid if isinstance(cfg.grid, dict) else json.loads(cfg.grid)
        if not isinstance(override, dict) or not all(isinstance(v, list) for v in override.values()):
            raise InvalidInput("--grid must be a JSON object of lists")
    return learn.expand_grid(cfg.model, override)


def cmd_train(cfg, out=None):
    out = out or sys.stdout
    _require_file(cfg.input, "input dataset")
    _require_outdir(cfg.out)
    if cfg.thresholds:
        _require_file(cfg.thresholds, "thresholds file")
    selected = parse_metrics(cfg.metrics)
    scheme = cfg.label_scheme
    encoding = datapipe.LABEL_ENCODINGS[scheme]
    grid = _grid(cfg)

    ds = datapipe.subset_for_scheme(datapipe.load_dataset(cfg.input), scheme)
    if len(ds) == 0:
        raise InvalidInput(f"no records carry a {scheme} label; run 'graspq label' first")
    train, test = datapipe.split(ds, cfg.test_fraction, cfg.seed, cfg.stratified, cfg.split_mode, scheme)
    X_train, y_train = datapipe.feature_matrix(train, selected, scheme)
    X_test, y_test = datapipe.feature_matrix(test, selected, scheme)
    present = set(datapipe.encoded_labels(ds, scheme).tolist())
    absent = sorted(present - set(y_train.tolist()))
    if absent or len(y_test) == 0:
        names = [k for k, v in encoding.items() if v in absent]
        raise StratificationError(
            f"classes {names} missing from the training split; use stratified splitting, "
            "a smaller --test-fraction or --split-mode record")

    n_classes = len(encoding)
    best, model, rep = learn.grid_search(X_train, y_train, grid, cfg.folds, cfg.seed, n_classes)
    learn.evaluate(model, X_test, y_test, rep)
    rep.label_scheme = scheme
    rep.class_names = list(encoding)
    rep.metrics = selected
    rep.split_mode = cfg.split_mode

    model.meta = {
        "feature_order": selected,
        "label_encoding": encoding,
        "label_scheme": scheme,
        "thresholds": ({"path": os.path.basename(cfg.thresholds), "values":
                        {k: list(v) for k, v in sorted(datapipe.read_thresholds(cfg.thresholds).items())}}
                       if cfg.thresholds else None),
        "provenance": {"dataset": os.path.basename(cfg.input), "seed": cfg.seed, "split_mode": cfg.split_mode,
                       "test_fraction": cfg.test_fraction, "folds": cfg.folds},
    }
    learn.save_model(model, cfg.out)
    report_out = cfg.report_out or _stem(cfg.out) + ".report.json"
    datapipe.atomic_write_text(report_out, json.dumps(report.report_to_dict(rep), indent=1) + "\n")

    print(f"train: {cfg.model} on {', '.join(selected)} ({scheme}); "
          f"{len(y_train)} train / {len(y_test)} test, seed={cfg.seed}", file=out)
    print(f"best hyperparameters: {json.dumps(rep.hyperparameters)}", file=out)
    print(report.render_text([rep]), end="", file=out)
    return 0


def cmd_evaluate(cfg, out=None):
    out = out or sys.stdout
    _require_file(cfg.model_file, "model file")
    _require_file(cfg.input, "input dataset")
    model = learn.load_model(cfg.model_file)
    meta = model.meta
    scheme = meta.get("label_scheme") or cfg.label_scheme
    selected = meta.get("feature_order") or parse_metrics(cfg.metrics)
    ds = datapipe.subset_for_scheme(datapipe.load_dataset(cfg.input), scheme)
    if len(ds) == 0:
        raise InvalidInput(f"no records carry a {scheme} label")
    X, y = datapipe.feature_matrix(ds, selected, scheme)
    rep = learn.evaluate(model, X, y)
    rep.label_scheme = scheme
    rep.metrics = list(selected)
    rep.class_names = list(datapipe.LABEL_ENCODINGS[scheme])
    print(f"evaluate: {len(y)} records, accuracy {rep.test_accuracy:.4f}", file=out)
    names = rep.class_names
    width = max(len(n) for n in names)
    print(" " * width + "  " + "  ".join(n.rjust(width) for n in names), file=out)
    for name, row in zip(names, rep.confusion):
        print(name.rjust(width) + "  " + "  ".join(str(v).rjust(width) for v in row), file=out)
    if cfg.report_out:
        _require_outdir(cfg.report_out)
        datapipe.atomic_write_text(cfg.report_out, json.dumps(report.report_to_dict(rep), indent=1) + "\n")
    return 0


def cmd_report(cfg, out=None):
    out = out or sys.stdout
    for path in cfg.reports:
        _require_file(path, "report file")
    reports = [report.load_report(p) for p in cfg.reports]
    text = report.render_text(reports)
    csv_text = report.render_csv(reports)
    latex = report.render_latex(reports)
    for path, body in ((cfg.csv_out, csv_text), (cfg.latex_out, latex), (cfg.text_out, text)):
        if path:
            _require_outdir(path)
            datapipe.atomic_write_text(path, body)
    print(text, end="", file=out)
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "compute-metrics": cmd_compute_metrics,
    "label": cmd_label,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    # per-value clamp warnings are summarised by the commands; silence them for this run only
    metrics_log = logging.getLogger("graspq.metrics")
    saved_level = metrics_log.level
    metrics_log.setLevel(logging.INFO if args.verbose else logging.ERROR)
    try:
        cfg = load_config(args)
        with np.errstate(all="ignore"):
            return COMMANDS[args.command](cfg)
    except (GraspqError, ValueError, OSError) as exc:
        print(f"graspq {args.command}: error: {exc}", file=sys.stderr)
        return 1
    finally:
        metrics_log.setLevel(saved_level)


if __name__ == "__main__":
    sys.exit(main())
