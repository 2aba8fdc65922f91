import json
from pathlib import Path

import pytest

from graspq.errors import SchemaError
from graspq.learn import EvalReport
from graspq.metrics import METRIC_NAMES
from graspq.report import (build_table, load_report, parse_csv, render_csv, render_latex, render_text,
                           report_from_dict, report_to_dict)
from published_tables import PER_CLASSIFIER, PER_METRIC, classifier_reports, per_metric_reports

GOLDEN = Path(__file__).parent / "golden"


@pytest.mark.parametrize("name,reports", [("per_metric", per_metric_reports),
                                          ("classifiers", classifier_reports)])
@pytest.mark.parametrize("ext,render", [("tex", render_latex), ("txt", render_text)])
def test_golden_tables(name, reports, ext, render):
    assert render(reports()) == (GOLDEN / f"{name}.{ext}").read_text(encoding="utf-8")


def test_published_rows_appear_verbatim():
    per_metric = (GOLDEN / "per_metric.tex").read_text()
    classifiers = (GOLDEN / "classifiers.tex").read_text()
    assert "0.72 $\\pm$ 0.04 & 0.73" in per_metric
    assert "$Q_{D1}$ & 0.72 $\\pm$ 0.04 & 0.73 & 0.90 $\\pm$ 0.05 & 0.85 \\\\" in per_metric
    assert "0.76 $\\pm$ 0.04 & 0.76" in classifiers
    assert "Classification Trees & 0.72 $\\pm$ 0.05 & 0.69 & 0.76 $\\pm$ 0.04 & 0.76 \\\\" in classifiers


def test_table_structure():
    header, schemes, rows = build_table(classifier_reports())
    assert header == "Classifier"
    assert schemes == ["binary", "ternary"]
    assert [ident for _, ident, _ in rows] == ["knn", "tree"]
    header, schemes, rows = build_table(per_metric_reports()[::-1])
    assert header == "Metric"
    assert schemes == ["ternary", "robust-fragile"]
    assert [ident for _, ident, _ in rows] == list(METRIC_NAMES)


def test_single_report_gives_one_row():
    text = render_text(per_metric_reports()[:1])
    body = [l for l in text.splitlines() if l.startswith("Q_")]
    assert body == ["Q_A1   | 0.67 ± 0.09   0.68"]


def test_missing_cells_render_as_dashes():
    reps = per_metric_reports()[:3]  # q_b1 lacks its robust-fragile cell
    assert "$Q_{B1}$ & 0.55 $\\pm$ 0.04 & 0.56 & -- & -- \\\\" in render_latex(reps)


def test_csv_round_trip():
    reps = per_metric_reports() + classifier_reports()
    parsed = parse_csv(render_csv(reps))
    assert parsed[("Q_D1", "ternary")] == PER_METRIC["q_d1"][0]
    assert parsed[("Classification Trees", "ternary")] == PER_CLASSIFIER["tree"][1]
    assert len(parsed) == 2 * 7 + 2 * 2
    odd = EvalReport("knn", {}, 0.1 + 0.2, 1 / 3, 5, 0, test_accuracy=2 / 3,
                     label_scheme="binary", metrics=["q_a1"])
    assert parse_csv(render_csv([odd]))[("Q_A1", "binary")] == (0.1 + 0.2, 1 / 3, 2 / 3)
    with pytest.raises(SchemaError):
        parse_csv("a,b\n1,2\n")


def test_report_files(tmp_path):
    rep = classifier_reports()[0]
    path = tmp_path / "r.json"
    path.write_text(json.dumps(report_to_dict(rep)))
    assert load_report(path) == rep
    d = report_to_dict(rep)
    for broken in [dict(d, version=9), dict(d, format="x"), dict(d, test_accuracy=None),
                   dict(d, label_scheme="quaternary"), dict(d, extra_field=1)]:
        with pytest.raises(SchemaError):
            report_from_dict(broken)
    path.write_text("{")
    with pytest.raises(SchemaError):
        load_report(path)


def test_duplicate_cells_and_empty_input():
    with pytest.raises(SchemaError):
        build_table(classifier_reports() + classifier_reports()[:1])
    with pytest.raises(SchemaError):
        build_table([])


def test_reports_note_the_std_definition():
    assert render_text(classifier_reports()).startswith("# Train ± Std is the mean and population std")
    assert render_latex(classifier_reports()).startswith("% Train ± Std")
