""" This module contains the identification run database model"""
from __future__ import annotations
from typing import Optional

from datetime import datetime

from sqlalchemy import ForeignKey, Table, Column
from sqlalchemy.orm import Mapped, mapped_column, relationship, backref

from sqlalchemy_utc import UtcDateTime

from cable_sim2real.database.base import Base
from cable_sim2real.database.tag import Tag


identification_run_tag_association_table = Table('identification_runs_tags', Base.metadata,
                                                 Column('identification_runs_id', ForeignKey('identification_runs.id')),
                                                 Column('tags_name', ForeignKey('tags.name'))
                                                 )


class IdentifiedJoint(Base):  # pylint: disable=too-few-public-methods
    """
    Stiffness and damping of one joint of an identification run.

    Attributes:
        id (int): Primary key.
        run_id (int): Owning run.
        position (int): Joint position in the identification chain, 0 at the base.
        stiffness (float): N*m/rad.
        damping (float): N*m*s/rad.
    """
    __tablename__: str = 'identified_joints'

    id: Mapped[int] = mapped_column(primary_key=True)
    run_id: Mapped[int] = mapped_column(ForeignKey('identification_runs.id'))
    position: Mapped[int]
    stiffness: Mapped[float]
    damping: Mapped[float]

    def __init__(self, position: int, stiffness: float, damping: float) -> None:
        self.position = position
        self.stiffness = stiffness
        self.damping = damping


class IdentificationRun(Base):  # pylint: disable=too-few-public-methods
    """
    One stiffness and damping identification.

    Attributes:
        id (int): Primary key.
        created (datetime): UTC time the run was stored.
        model_name (str): Name of the identified model.
        source (str, optional): Pose log the run was computed from.
        tip_mass (float): Weight at the tip in kilograms.
        residual (float): Combined regression residual.
        condition (float): Worst regressor condition number.
        static_samples (int): Samples of the stationary tail.
        dynamic_samples (int): Samples of the transient.
        joints (list[IdentifiedJoint]): Per-joint results.
        tags (list[Tag]): Labels of the run.
    """
    __tablename__: str = 'identification_runs'

    id: Mapped[int] = mapped_column(primary_key=True)
    created: Mapped[datetime] = mapped_column(UtcDateTime)
    model_name: Mapped[str]
    source: Mapped[Optional[str]]
    tip_mass: Mapped[float]
    residual: Mapped[float]
    condition: Mapped[float]
    static_samples: Mapped[int]
    dynamic_samples: Mapped[int]

    joints: Mapped[list[IdentifiedJoint]] = relationship(IdentifiedJoint, order_by=IdentifiedJoint.position, cascade='all, delete-orphan')
    tags: Mapped[list[Tag]] = relationship(Tag, secondary=identification_run_tag_association_table, backref=backref('identification_runs'))

    # pylint: disable-next=too-many-arguments, too-many-positional-arguments
    def __init__(self, created: datetime, model_name: str, tip_mass: float, residual: float, condition: float, static_samples: int,
                 dynamic_samples: int, source: Optional[str] = None) -> None:
        self.created = created
        self.model_name = model_name
        self.tip_mass = tip_mass
        self.residual = residual
        self.condition = condition
        self.static_samples = static_samples
        self.dynamic_samples = dynamic_samples
        self.source = source
