# tests/test_report.py
import pytest

from utility.report_utils import REPORT_COLUMNS, ReportRow, sort_rows
from views.report_view import read_report, render_table, write_curve, write_report


def test_from_values_uses_population_sd():
    row = ReportRow.from_values("lns", "cal", "are", [0.1, 0.3])
    assert row.mean == pytest.approx(0.2)
    assert row.sd == pytest.approx(0.1)
    assert row.seed_count == 2


@pytest.mark.parametrize(
    "kw, msg",
    [
        ({"method": ""}, "method"),
        ({"metric": ""}, "metric"),
        ({"seed_count": 0}, "seed_count"),
        ({"mean": float("nan")}, "invalid mean"),
        ({"sd": -1.0}, "invalid mean"),
    ],
)
def test_row_validation(kw, msg):
    base = {"method": "lns", "cal_set": "", "metric": "prr", "mean": 0.5}
    with pytest.raises(ValueError, match=msg):
        ReportRow(**{**base, **kw})


@pytest.mark.parametrize("suffix", [".csv", ".jsonl"])
def test_report_files(tmp_path, suffix):
    rows = [ReportRow("lns", "", "prr", 0.25), ReportRow("kle", "shift", "are", 0.1, 0.05, 5)]
    path = write_report(rows, tmp_path / f"nested/report{suffix}")
    assert read_report(path) == rows


def test_csv_header(tmp_path):
    path = write_report([ReportRow("lns", "", "prr", 0.25)], tmp_path / "r.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(REPORT_COLUMNS)


def test_read_report_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_report(tmp_path / "none.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("method,cal_set,metric,mean,sd,seed_count\nlns,,prr,,0,1\n", encoding="utf-8")
    with pytest.raises(ValueError, match="missing mean"):
        read_report(bad)


def test_sort_rows_is_stable():
    rows = [
        ReportRow("b", "x", "prr", 0.1),
        ReportRow("a", "", "prr", 0.2),
        ReportRow("c", "x", "are", 0.3),
        ReportRow("a", "x", "prr", 0.4),
    ]
    assert [(r.method, r.mean) for r in sort_rows(rows)] == [
        ("c", 0.3),
        ("a", 0.2),
        ("b", 0.1),
        ("a", 0.4),
    ]


def test_render_table():
    assert render_table([]) == "(no rows)"
    lines = render_table([ReportRow("semantic_entropy", "", "prr", 0.123456)]).splitlines()
    assert lines[0].split() == list(REPORT_COLUMNS)
    assert set(lines[1].replace(" ", "")) == {"-"}
    assert lines[2].split() == ["semantic_entropy", "prr", "0.1235", "0.0000", "1"]


def test_write_curve(tmp_path):
    path = write_curve(tmp_path / "c.csv", ("x", "y"), ([0.0, 0.5], [1.0, 0.75]))
    assert path.read_text(encoding="utf-8").splitlines() == ["x,y", "0.0,1.0", "0.5,0.75"]
    with pytest.raises(ValueError, match="differ in length"):
        write_curve(tmp_path / "d.csv", ("x", "y"), ([0.0], [1.0, 2.0]))
    with pytest.raises(ValueError, match="2 headers for 1 columns"):
        write_curve(tmp_path / "e.csv", ("x", "y"), ([0.0],))
