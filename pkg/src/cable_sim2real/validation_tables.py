"""Bench measurements used to check the report arithmetic: simulated and real joint positions and sagging angles in rad."""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass

if TYPE_CHECKING:
    from typing import Dict, Tuple


@dataclass(frozen=True)
class BenchTable:
    """
    One comparison table of the bench experiments.

    Attributes:
        name (str): Short identifier.
        description (str): Experiment setup.
        labels (Tuple[str, ...]): Column labels (joint/tag ids or fixed link/tag ids).
        sim (Tuple[float, ...]): Simulated values.
        real (Tuple[float, ...]): Measured values.
        percent_errors (Tuple[float, ...]): Published percent errors.
        differences (Tuple[float, ...]): Published differences sim minus real in rad, three decimals.
        fixture_link (int, optional): Link welded horizontally, None if it varies per column.
        tip_mass (float): Weight at the tip in kilograms.
    """
    name: str
    description: str
    labels: Tuple[str, ...]
    sim: Tuple[float, ...]
    real: Tuple[float, ...]
    percent_errors: Tuple[float, ...]
    differences: Tuple[float, ...]
    fixture_link: int | None
    tip_mass: float


JOINT_LABELS: Tuple[str, ...] = ('4', '3', '2', '1')
FIXTURE_LABELS: Tuple[str, ...] = ('5/5', '4/4', '3/3', '2/2')

BENCH_TABLES: Dict[str, BenchTable] = {table.name: table for table in (
    BenchTable(name='joints-no-weight', description='Joint positions, link 5 fixed, no weight', labels=JOINT_LABELS,
               sim=(0.560, 0.387, 0.168, 0.098), real=(0.565, 0.383, 0.171, 0.100),
               percent_errors=(0.88, 1.04, 1.75, 2.00), differences=(-0.005, 0.004, -0.003, -0.002),
               fixture_link=5, tip_mass=0.0),
    BenchTable(name='joints-50g', description='Joint positions, link 5 fixed, 50 g weight', labels=JOINT_LABELS,
               sim=(0.569, 0.438, 0.164, 0.115), real=(0.565, 0.437, 0.170, 0.117),
               percent_errors=(0.71, 0.23, 3.53, 1.71), differences=(0.004, 0.001, -0.006, -0.002),
               fixture_link=5, tip_mass=0.05),
    BenchTable(name='joints-100g', description='Joint positions, link 5 fixed, 100 g weight', labels=JOINT_LABELS,
               sim=(0.619, 0.423, 0.181, 0.098), real=(0.618, 0.426, 0.177, 0.095),
               percent_errors=(0.16, 0.70, 2.26, 3.16), differences=(0.001, -0.003, 0.004, 0.003),
               fixture_link=5, tip_mass=0.1),
    BenchTable(name='sagging-no-weight', description='Sagging angle per fixed link, no weight', labels=FIXTURE_LABELS,
               sim=(1.181, 1.009, 0.694, 0.478), real=(1.176, 0.976, 0.685, 0.466),
               percent_errors=(0.43, 3.38, 1.31, 2.58), differences=(0.005, 0.033, 0.009, 0.012),
               fixture_link=None, tip_mass=0.0),
    BenchTable(name='sagging-50g', description='Sagging angle per fixed link, 50 g weight', labels=FIXTURE_LABELS,
               sim=(1.301, 1.142, 0.789, 0.529), real=(1.304, 1.122, 0.775, 0.513),
               percent_errors=(0.23, 1.78, 1.81, 3.12), differences=(-0.003, 0.020, 0.014, 0.016),
               fixture_link=None, tip_mass=0.05),
    BenchTable(name='sagging-100g', description='Sagging angle per fixed link, 100 g weight', labels=FIXTURE_LABELS,
               sim=(1.328, 1.216, 0.838, 0.587), real=(1.354, 1.168, 0.822, 0.573),
               percent_errors=(1.92, 4.11, 1.95, 2.44), differences=(-0.026, 0.048, 0.016, 0.014),
               fixture_link=None, tip_mass=0.1),
)}
