"""Tests of the comparison reports and the bench table arithmetic."""
import pytest

from cable_sim2real.errors import ReportError
from cable_sim2real.report import build_report, percent_error, read_values_csv, round_half_away, write_values_csv
from cable_sim2real.validation_tables import BENCH_TABLES


@pytest.mark.parametrize('name', sorted(BENCH_TABLES))
def test_bench_tables_reproduced(name):
    table = BENCH_TABLES[name]
    report = build_report(table.sim, table.real, table.labels)
    assert tuple(row.percent_error for row in report.rows) == table.percent_errors
    assert report.max_percent_error == max(table.percent_errors)


@pytest.mark.parametrize('name', sorted(BENCH_TABLES))
def test_printed_differences(name):
    table = BENCH_TABLES[name]
    report = build_report(table.sim, table.real, table.labels)
    assert tuple(round_half_away(row.difference, 3) for row in report.rows) == table.differences


def test_joint_differences():
    table = BENCH_TABLES['joints-no-weight']
    report = build_report(table.sim, table.real, table.labels)
    assert tuple(round_half_away(row.difference, 3) for row in report.rows) == (-0.005, 0.004, -0.003, -0.002)
    assert [row.label for row in report.rows] == ['4', '3', '2', '1']
    assert max(abs(difference) for table in BENCH_TABLES.values() for difference in table.differences) == 0.048


def test_rounding_half_away_from_zero():
    assert round_half_away(0.125) == 0.13
    assert round_half_away(-0.125) == -0.13
    assert round_half_away(2.675) == 2.68


def test_undefined_percent_error(caplog):
    assert percent_error(0.1, 0.0) is None
    assert 'undefined' in caplog.text
    report = build_report([0.1, 0.5], [0.0, 0.4])
    assert report.rows[0].undefined
    assert report.max_percent_error == 25.0
    assert 'undefined' in report.to_text()
    assert report.to_csv().splitlines()[1].endswith(',')
    assert build_report([0.1], [0.0]).max_percent_error is None


def test_text_and_csv():
    report = build_report([0.560, 0.387], [0.565, 0.383], ['4', '3'], metadata={'fixture': '5'})
    text = report.to_text().splitlines()
    assert text[0] == 'fixture: 5'
    assert text[2].split() == ['Sim', '0.560', '0.387']
    assert text[-1].split()[-2:] == ['0.88%', '1.04%']
    assert report.to_csv().splitlines() == ['label,sim,real,difference,percent_error', '4,0.56,0.565,-0.005,0.88',
                                            '3,0.387,0.383,0.004,1.04']


def test_length_mismatch():
    with pytest.raises(ReportError, match='length mismatch'):
        build_report([0.1, 0.2], [0.1])
    with pytest.raises(ReportError):
        build_report([0.1], [0.1], ['a', 'b'])


def test_values_files(tmp_path):
    path = tmp_path / 'values.csv'
    write_values_csv(['q1', 'q2'], [0.25, -0.5], path)
    assert read_values_csv(path) == (['q1', 'q2'], [0.25, -0.5])
    path.write_text('q1,0.1,0.2\n', encoding='utf-8')
    with pytest.raises(ReportError, match='row 1'):
        read_values_csv(path)
    path.write_text('q1,abc\n', encoding='utf-8')
    with pytest.raises(ReportError):
        read_values_csv(path)
    with pytest.raises(ReportError, match='cannot read'):
        read_values_csv(tmp_path / 'missing.csv')
