""" This module contains the comparison report database model"""
from __future__ import annotations
from typing import Optional

from datetime import datetime

from sqlalchemy import ForeignKey, Table, Column
from sqlalchemy.orm import Mapped, mapped_column, relationship, backref

from sqlalchemy_utc import UtcDateTime

from cable_sim2real.database.base import Base
from cable_sim2real.database.tag import Tag


comparison_report_tag_association_table = Table('comparison_reports_tags', Base.metadata,
                                                Column('comparison_reports_id', ForeignKey('comparison_reports.id')),
                                                Column('tags_name', ForeignKey('tags.name'))
                                                )


class ComparisonRowRecord(Base):  # pylint: disable=too-few-public-methods
    """
    One stored row of a comparison report.

    Attributes:
        id (int): Primary key.
        report_id (int): Owning report.
        position (int): Row order.
        label (str): Row label.
        sim (float): Simulated value.
        real (float): Measured value.
        difference (float): sim - real.
        percent_error (float, optional): None if undefined.
    """
    __tablename__: str = 'comparison_rows'

    id: Mapped[int] = mapped_column(primary_key=True)
    report_id: Mapped[int] = mapped_column(ForeignKey('comparison_reports.id'))
    position: Mapped[int]
    label: Mapped[str]
    sim: Mapped[float]
    real: Mapped[float]
    difference: Mapped[float]
    percent_error: Mapped[Optional[float]]

    # pylint: disable-next=too-many-arguments, too-many-positional-arguments
    def __init__(self, position: int, label: str, sim: float, real: float, difference: float, percent_error: Optional[float]) -> None:
        self.position = position
        self.label = label
        self.sim = sim
        self.real = real
        self.difference = difference
        self.percent_error = percent_error


class ComparisonReportRecord(Base):  # pylint: disable=too-few-public-methods
    """
    A stored sim-to-real comparison.

    Attributes:
        id (int): Primary key.
        created (datetime): UTC time the report was stored.
        title (str): Experiment descriptor.
        rows (list[ComparisonRowRecord]): Compared values.
        tags (list[Tag]): Labels of the report.
    """
    __tablename__: str = 'comparison_reports'

    id: Mapped[int] = mapped_column(primary_key=True)
    created: Mapped[datetime] = mapped_column(UtcDateTime)
    title: Mapped[str]

    rows: Mapped[list[ComparisonRowRecord]] = relationship(ComparisonRowRecord, order_by=ComparisonRowRecord.position, cascade='all, delete-orphan')
    tags: Mapped[list[Tag]] = relationship(Tag, secondary=comparison_report_tag_association_table, backref=backref('comparison_reports'))

    def __init__(self, created: datetime, title: str) -> None:
        self.created = created
        self.title = title
