"""Result tables in the layout of the published comparison tables.

Rows are metrics (single-metric runs) or classifiers (runs on all seven
metrics); each label scheme contributes a ``Train ± Std | Test`` column
group.  Tables render as aligned text, CSV and LaTeX.
"""
import csv
import io
import json

from .errors import SchemaError
from .learn import STD_NOTE, EvalReport
from .metrics import METRIC_NAMES

REPORT_FORMAT = "graspq-report"
REPORT_VERSION = 1

SCHEME_ORDER = ("binary", "ternary", "robust-fragile")
SCHEME_TITLES = {
    "binary": "Binary Classification",
    "ternary": "3-categories scale",
    "robust-fragile": "Robust vs. Fragile",
}
CLASSIFIER_TITLES = {"knn": "K-Nearest Neighbors", "tree": "Classification Trees"}
_REQUIRED = ("model_kind", "label_scheme", "metrics", "train_accuracy_mean",
             "train_accuracy_std", "test_accuracy")


def report_to_dict(report):
    return {"format": REPORT_FORMAT, "version": REPORT_VERSION, **report.to_dict()}


def report_from_dict(d):
    if not isinstance(d, dict) or d.get("format") != REPORT_FORMAT:
        raise SchemaError("not a graspq report")
    if d.get("version") != REPORT_VERSION:
        raise SchemaError(f"report version {d.get('version')!r}, expected {REPORT_VERSION}")
    missing = [k for k in _REQUIRED if d.get(k) is None]
    if missing:
        raise SchemaError(f"report lacks {', '.join(missing)}")
    if d["label_scheme"] not in SCHEME_TITLES:
        raise SchemaError(f"unknown label scheme {d['label_scheme']!r}")
    body = {k: v for k, v in d.items() if k not in ("format", "version")}
    try:
        return EvalReport.from_dict(body)
    except TypeError as exc:
        raise SchemaError(f"unexpected report fields: {exc}") from None


def load_report(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return report_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc.msg}") from None


def metric_label(name, latex=False):
    code = name[2:].upper()
    return f"$Q_{{{code}}}$" if latex else f"Q_{code}"


def row_key(report):
    """(sort key, kind, identifier) of the table row a report belongs to."""
    metrics = list(report.metrics)
    if sorted(metrics) == sorted(METRIC_NAMES):
        kinds = list(CLASSIFIER_TITLES)
        pos = kinds.index(report.model_kind) if report.model_kind in kinds else len(kinds)
        return (1, pos, report.model_kind), "classifier", report.model_kind
    if len(metrics) == 1:
        return (0, METRIC_NAMES.index(metrics[0]), metrics[0]), "metric", metrics[0]
    ident = "+".join(metrics)
    return (0, len(METRIC_NAMES), ident), "metric", ident


def build_table(reports):
    """Arrange reports into ``(row_header, schemes, rows)``.

    ``rows`` is a list of ``(kind, identifier, {scheme: (mean, std, test)})``.
    Two reports landing in the same cell raise :class:`SchemaError`.
    """
    if not reports:
        raise SchemaError("no reports given")
    cells = {}
    keys = {}
    for rep in reports:
        sort_key, kind, ident = row_key(rep)
        keys[(kind, ident)] = sort_key
        cell = cells.setdefault((kind, ident), {})
        if rep.label_scheme in cell:
            raise SchemaError(f"two reports for row {ident!r} under scheme {rep.label_scheme!r}")
        cell[rep.label_scheme] = (rep.train_accuracy_mean, rep.train_accuracy_std, rep.test_accuracy)
    schemes = [s for s in SCHEME_ORDER if any(s in c for c in cells.values())]
    kinds = {k for k, _ in cells}
    header = {"metric": "Metric", "classifier": "Classifier"}[kinds.pop()] if len(kinds) == 1 else "Model"
    rows = [(kind, ident, cells[(kind, ident)]) for kind, ident in sorted(cells, key=keys.get)]
    return header, schemes, rows


def _label(kind, ident, latex):
    if kind == "classifier":
        return CLASSIFIER_TITLES.get(ident, ident)
    if ident in METRIC_NAMES:
        return metric_label(ident, latex)
    return "+".join(metric_label(m, latex) for m in ident.split("+"))


def render_text(reports):
    header, schemes, rows = build_table(reports)
    table = [["", *[v for s in schemes for v in (SCHEME_TITLES[s], "")]],
             [header, *["Train ± Std", "Test"] * len(schemes)]]
    for kind, ident, cell in rows:
        line = [_label(kind, ident, False)]
        for s in schemes:
            if s in cell:
                mean, std, test = cell[s]
                line += [f"{mean:.2f} ± {std:.2f}", f"{test:.2f}"]
            else:
                line += ["--", "--"]
        table.append(line)
    widths = [max(len(r[i]) for r in table[1:]) for i in range(len(table[1]))]
    for g in range(len(schemes)):
        # group title spans the two columns of its scheme
        i = 1 + 2 * g
        need = len(table[0][i]) - (widths[i] + 3 + widths[i + 1])
        if need > 0:
            widths[i] += need
    out = [f"# {STD_NOTE}"]
    title = [" " * widths[0]]
    for g, s in enumerate(schemes):
        i = 1 + 2 * g
        title.append(SCHEME_TITLES[s].ljust(widths[i] + 3 + widths[i + 1]))
    out.append(" | ".join(title).rstrip())
    for r in table[1:]:
        parts = [r[0].ljust(widths[0])]
        for g in range(len(schemes)):
            i = 1 + 2 * g
            parts.append(f"{r[i].ljust(widths[i])}   {r[i + 1].ljust(widths[i + 1])}")
        out.append(" | ".join(parts).rstrip())
        if r is table[1]:
            out.append("-" * len(out[-1]))
    return "\n".join(out) + "\n"


def render_latex(reports):
    header, schemes, rows = build_table(reports)
    spec = "l|" + "|".join("ll" for _ in schemes)
    lines = [f"% {STD_NOTE}", f"\\begin{{tabular}}{{{spec}}}", "\\hline"]
    groups = []
    for g, s in enumerate(schemes):
        align = "c|" if g < len(schemes) - 1 else "c"
        groups.append(f"\\multicolumn{{2}}{{{align}}}{{{SCHEME_TITLES[s]}}}")
    lines.append(" & " + " & ".join(groups) + "\\\\")
    lines.append(f"{header} & " + " & ".join(["Train $\\pm$ Std & Test"] * len(schemes)) + " \\\\ \\hline")
    for kind, ident, cell in rows:
        parts = [_label(kind, ident, True)]
        for s in schemes:
            if s in cell:
                mean, std, test = cell[s]
                parts.append(f"{mean:.2f} $\\pm$ {std:.2f} & {test:.2f}")
            else:
                parts.append("-- & --")
        lines.append(" & ".join(parts) + " \\\\")
    lines += ["\\hline", "\\end{tabular}"]
    return "\n".join(lines) + "\n"


CSV_COLUMNS = ("row", "label_scheme", "train_mean", "train_std", "test")


def render_csv(reports):
    _, schemes, rows = build_table(reports)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for kind, ident, cell in rows:
        for s in schemes:
            if s in cell:
                mean, std, test = cell[s]
                w.writerow([_label(kind, ident, False), s, repr(mean), repr(std), repr(test)])
    return buf.getvalue()


def parse_csv(text):
    """Inverse of :func:`render_csv`: ``{(row, scheme): (mean, std, test)}``."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise SchemaError("unexpected CSV columns")
    return {(r["row"], r["label_scheme"]): (float(r["train_mean"]), float(r["train_std"]), float(r["test"]))
            for r in reader}
