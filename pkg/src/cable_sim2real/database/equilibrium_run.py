""" This module contains the static equilibrium run database model"""
from __future__ import annotations

from datetime import datetime

from sqlalchemy import ForeignKey, Table, Column
from sqlalchemy.orm import Mapped, mapped_column, relationship, backref

from sqlalchemy_utc import UtcDateTime

from cable_sim2real.database.base import Base
from cable_sim2real.database.tag import Tag


equilibrium_run_tag_association_table = Table('equilibrium_runs_tags', Base.metadata,
                                              Column('equilibrium_runs_id', ForeignKey('equilibrium_runs.id')),
                                              Column('tags_name', ForeignKey('tags.name'))
                                              )


class EquilibriumJointPosition(Base):  # pylint: disable=too-few-public-methods
    """
    Resting position of one joint.

    Attributes:
        id (int): Primary key.
        run_id (int): Owning run.
        position (int): DOF index in the fixed sub-chain.
        q (float): Joint position in rad.
    """
    __tablename__: str = 'equilibrium_joint_positions'

    id: Mapped[int] = mapped_column(primary_key=True)
    run_id: Mapped[int] = mapped_column(ForeignKey('equilibrium_runs.id'))
    position: Mapped[int]
    q: Mapped[float]

    def __init__(self, position: int, q: float) -> None:
        self.position = position
        self.q = q


class EquilibriumRun(Base):  # pylint: disable=too-few-public-methods
    """
    A fixture experiment solved for its resting shape.

    Attributes:
        id (int): Primary key.
        created (datetime): UTC time the run was stored.
        model_name (str): Name of the model.
        fixture_link (int): Link welded horizontally, counted from the distal end.
        tip_mass (float): Weight at the tip in kilograms.
        sagging_angle (float): Tip pitch relative to the fixture in rad.
        residual (float): Static torque residual in N*m.
        positions (list[EquilibriumJointPosition]): Resting joint positions.
        tags (list[Tag]): Labels of the run.
    """
    __tablename__: str = 'equilibrium_runs'

    id: Mapped[int] = mapped_column(primary_key=True)
    created: Mapped[datetime] = mapped_column(UtcDateTime)
    model_name: Mapped[str]
    fixture_link: Mapped[int]
    tip_mass: Mapped[float]
    sagging_angle: Mapped[float]
    residual: Mapped[float]

    positions: Mapped[list[EquilibriumJointPosition]] = relationship(EquilibriumJointPosition, order_by=EquilibriumJointPosition.position,
                                                                     cascade='all, delete-orphan')
    tags: Mapped[list[Tag]] = relationship(Tag, secondary=equilibrium_run_tag_association_table, backref=backref('equilibrium_runs'))

    # pylint: disable-next=too-many-arguments, too-many-positional-arguments
    def __init__(self, created: datetime, model_name: str, fixture_link: int, tip_mass: float, sagging_angle: float,
                 residual: float) -> None:
        self.created = created
        self.model_name = model_name
        self.fixture_link = fixture_link
        self.tip_mass = tip_mass
        self.sagging_angle = sagging_angle
        self.residual = residual
