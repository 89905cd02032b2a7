from core.baseline import LinearConfig
from core.evaluation import CvRow, CvTable, MispeReport, fit_rate
from core.reports import format_cv_table, format_rate, format_table


def test_table_cells():
    text = format_table([MispeReport((0.02, 0.03), "fosdnn", "s1/model1/xtype1/n200", n_params=4641)])
    header, rule, row = text.splitlines()
    assert header.split() == ["setting", "method", "MISPE", "reps", "params"]
    assert set(rule.replace(" ", "")) == {"-"}
    assert "0.025 (0.007)" in row
    assert row.endswith("4641")


def test_missing_parameter_count_is_blank():
    text = format_table([MispeReport((1.0,), "linear", "x")])
    assert text.splitlines()[-1].rstrip().endswith("1")


def test_cv_table_marks_selection():
    rows = (CvRow(LinearConfig(K=6, lam=1.0), 0.5, 0.1, 18), CvRow(LinearConfig(K=6, lam=1e-4), 0.2, 0.1, 18))
    lines = format_cv_table(CvTable(rows, 3)).splitlines()
    assert "3-fold CV" in lines[0]
    assert not lines[2].startswith("*")
    assert lines[3].startswith("*")
    assert "K=6 lambda=0.0001" in lines[3]


def test_rate_lists_dropped_points():
    text = format_rate(fit_rate([100, 200, 400], [0.5, 0.3, 0.001], noise_floor=0.01))
    assert text.splitlines()[-2].split()[-1] == "no"
    assert text.rstrip().endswith("slope of log(excess) on log(n): -0.757")
