""" This module builds sim-to-real comparison reports"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
import csv
import io
import logging

from cable_sim2real.errors import ReportError

if TYPE_CHECKING:
    from typing import Dict, List, Optional, Sequence, Tuple
    from pathlib import Path

LOG: logging.Logger = logging.getLogger("cable_sim2real.report")

REPORT_HEADER: List[str] = ['label', 'sim', 'real', 'difference', 'percent_error']


def round_half_away(value: float, digits: int = 2) -> float:
    """Rounds the decimal representation of ``value`` half away from zero."""
    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def percent_error(sim: float, real: float) -> Optional[float]:
    """
    |sim - real| / |real| * 100 rounded to two decimals, None (undefined) when ``real`` is zero.
    """
    if real == 0:
        LOG.warning('Percent error undefined for real value 0 (sim %s)', sim)
        return None
    return round_half_away(abs(sim - real) / abs(real) * 100.0)


@dataclass(frozen=True)
class ComparisonRow:
    """
    Attributes:
        label (str): Joint, tag or fixture label.
        sim (float): Simulated value.
        real (float): Measured value.
        difference (float): sim - real.
        percent_error (float, optional): Rounded percent error, None if undefined.
    """
    label: str
    sim: float
    real: float
    difference: float
    percent_error: Optional[float]

    @property
    def undefined(self) -> bool:
        """True if the percent error is undefined."""
        return self.percent_error is None


@dataclass(frozen=True)
class ComparisonReport:
    """
    Attributes:
        rows (Tuple[ComparisonRow, ...]): One row per compared value.
        metadata (Dict[str, str]): Experiment descriptor such as fixture link and tip weight.
    """
    rows: Tuple[ComparisonRow, ...]
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def max_percent_error(self) -> Optional[float]:
        """Largest defined percent error."""
        defined = [row.percent_error for row in self.rows if row.percent_error is not None]
        return max(defined) if defined else None

    def to_text(self) -> str:
        """Aligned text table with the rows as columns, the way the bench tables are laid out."""
        header = ['', *[row.label for row in self.rows]]
        lines = [['Sim', *[f'{row.sim:.3f}' for row in self.rows]],
                 ['Real', *[f'{row.real:.3f}' for row in self.rows]],
                 ['Difference (sim to real)', *[f'{row.difference:.3f}' for row in self.rows]],
                 ['Percent error', *['undefined' if row.percent_error is None else f'{row.percent_error:.2f}%' for row in self.rows]]]
        table = [header] + lines
        widths = [max(len(line[column]) for line in table) for column in range(len(header))]
        output = [f'{key}: {value}' for key, value in self.metadata.items()]
        output += ['  '.join(cell.ljust(widths[column]) if column == 0 else cell.rjust(widths[column])
                             for column, cell in enumerate(line)).rstrip() for line in table]
        return '\n'.join(output) + '\n'

    def to_csv(self) -> str:
        """CSV with the columns ``label,sim,real,difference,percent_error``; undefined percent errors stay empty."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(REPORT_HEADER)
        for row in self.rows:
            writer.writerow([row.label, repr(row.sim), repr(row.real), f'{row.difference:.6g}',
                             '' if row.percent_error is None else f'{row.percent_error:.2f}'])
        return buffer.getvalue()


def build_report(sim_values: Sequence[float], real_values: Sequence[float], labels: Optional[Sequence[str]] = None,
                 metadata: Optional[Dict[str, str]] = None) -> ComparisonReport:
    """
    Compares simulated and measured values row by row.

    Raises:
        ReportError: if the inputs differ in length.
    """
    labels = [str(index + 1) for index in range(len(sim_values))] if labels is None else list(labels)
    if not len(sim_values) == len(real_values) == len(labels):
        raise ReportError(f'length mismatch: {len(sim_values)} sim, {len(real_values)} real, {len(labels)} labels')
    rows = tuple(ComparisonRow(label=label, sim=float(sim), real=float(real), difference=float(sim) - float(real),
                               percent_error=percent_error(float(sim), float(real)))
                 for label, sim, real in zip(labels, sim_values, real_values))
    return ComparisonReport(rows=rows, metadata=dict(metadata or {}))


def read_values_csv(path: Path) -> Tuple[List[str], List[float]]:
    """
    Reads ``label,value`` rows, an optional ``label,value`` header is skipped.

    Raises:
        ReportError: for an unreadable file or malformed rows.
    """
    try:
        with open(path, 'r', encoding='utf-8', newline='') as csv_file:
            rows = [row for row in csv.reader(csv_file) if row]
    except OSError as err:
        raise ReportError(f'{path}: cannot read values: {err.strerror}') from err
    if rows and [cell.strip() for cell in rows[0]] == ['label', 'value']:
        rows = rows[1:]
    labels: List[str] = []
    values: List[float] = []
    for number, row in enumerate(rows, start=1):
        if len(row) != 2:
            raise ReportError(f'{path}: row {number} needs exactly label and value')
        try:
            values.append(float(row[1]))
        except ValueError as err:
            raise ReportError(f'{path}: row {number}: {err}') from err
        labels.append(row[0].strip())
    return labels, values


def write_values_csv(labels: Sequence[str], values: Sequence[float], path: Path) -> None:
    """Writes ``label,value`` rows."""
    with open(path, 'w', encoding='utf-8', newline='') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(['label', 'value'])
        for label, value in zip(labels, values):
            writer.writerow([label, repr(float(value))])
