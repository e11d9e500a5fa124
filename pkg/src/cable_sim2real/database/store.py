""" This module contains the result store persisting identification, equilibrium and comparison runs"""
from __future__ import annotations
from typing import TYPE_CHECKING

import logging

from datetime import datetime, timezone

from sqlalchemy import Engine, create_engine, select
from sqlalchemy.orm import sessionmaker, scoped_session
from sqlalchemy.exc import DatabaseError, IntegrityError
from sqlalchemy.orm.session import Session

from cable_sim2real.errors import StoreError
from cable_sim2real.database.base import Base
from cable_sim2real.database.tag import Tag
from cable_sim2real.database.identification_run import IdentificationRun, IdentifiedJoint
from cable_sim2real.database.equilibrium_run import EquilibriumRun, EquilibriumJointPosition
from cable_sim2real.database.comparison_report import ComparisonReportRecord, ComparisonRowRecord

if TYPE_CHECKING:
    from typing import List, Optional, Sequence, Union

    from cable_sim2real.identification.estimator import IdentifiedParams
    from cable_sim2real.simulation import EquilibriumResult
    from cable_sim2real.report import ComparisonReport

    RunRecord = Union[IdentificationRun, EquilibriumRun, ComparisonReportRecord]

LOG: logging.Logger = logging.getLogger("cable_sim2real.database")

RUN_KINDS = ('identification', 'equilibrium', 'report')


class ResultStore:
    """
    Persists results in any database SQLAlchemy can connect to.

    Args:
        db_url (str): SQLAlchemy database URL, e.g. ``sqlite:///results.db``.
        create (bool): Create missing tables on construction.
    """
    def __init__(self, db_url: str, create: bool = True) -> None:
        self.db_url: str = db_url
        connect_args = {}
        if 'postgresql' in db_url:
            connect_args['options'] = '-c timezone=utc'
        try:
            self.engine: Engine = create_engine(db_url, pool_pre_ping=True, connect_args=connect_args)
        except Exception as err:  # pylint: disable=broad-exception-caught
            raise StoreError(f'Invalid database url {db_url}: {err}') from err
        session_factory: sessionmaker[Session] = sessionmaker(bind=self.engine, autoflush=True, expire_on_commit=False)
        self.scoped_session_factory: scoped_session[Session] = scoped_session(session_factory)
        if create:
            self.create_tables()

    def create_tables(self) -> None:
        """Creates all tables that do not exist yet."""
        try:
            Base.metadata.create_all(self.engine)
        except DatabaseError as err:
            LOG.error('DatabaseError while creating tables: %s', err)
            raise StoreError(f'Could not create tables: {err}') from err

    def close(self) -> None:
        """Releases the session and the connection pool."""
        self.scoped_session_factory.remove()
        self.engine.dispose()

    def __enter__(self) -> ResultStore:
        return self

    def __exit__(self, *args) -> None:
        self.close()

    def _tags(self, session: Session, names: Sequence[str]) -> List[Tag]:
        tags: List[Tag] = []
        for name in dict.fromkeys(names):
            tag: Optional[Tag] = session.get(Tag, name)
            if tag is None:
                tag = Tag(name=name)
                session.add(tag)
                LOG.debug('Added new tag %s', name)
            tags.append(tag)
        return tags

    def _commit(self, session: Session, record: RunRecord, what: str) -> int:
        try:
            session.add(record)
            session.commit()
        except IntegrityError as err:
            session.rollback()
            LOG.error('IntegrityError while adding %s to database: %s', what, err)
            raise StoreError(f'Could not store {what}: {err}') from err
        except DatabaseError as err:
            session.rollback()
            LOG.error('DatabaseError while adding %s to database: %s', what, err)
            raise StoreError(f'Could not store {what}: {err}') from err
        LOG.info('Stored %s with id %d', what, record.id)
        return record.id

    # pylint: disable-next=too-many-arguments, too-many-positional-arguments
    def add_identification(self, params: IdentifiedParams, model_name: str, tip_mass: float = 0.0, source: Optional[str] = None,
                           tags: Sequence[str] = ()) -> int:
        """
        Stores an identification result.

        Returns:
            int: Id of the new run.
        """
        run = IdentificationRun(created=datetime.now(tz=timezone.utc), model_name=model_name, tip_mass=float(tip_mass),
                                residual=float(params.residual), condition=float(params.condition), static_samples=int(params.static_samples),
                                dynamic_samples=int(params.dynamic_samples), source=source)
        for position, (stiffness, damping) in enumerate(zip(params.stiffness, params.damping)):
            run.joints.append(IdentifiedJoint(position=position, stiffness=float(stiffness), damping=float(damping)))
        with self.scoped_session_factory() as session:
            run.tags = self._tags(session, tags)
            return self._commit(session, run, 'identification run')

    # pylint: disable-next=too-many-arguments, too-many-positional-arguments
    def add_equilibrium(self, result: EquilibriumResult, model_name: str, fixture_link: int, tip_mass: float = 0.0,
                        tags: Sequence[str] = ()) -> int:
        """
        Stores a static equilibrium result.

        Returns:
            int: Id of the new run.
        """
        run = EquilibriumRun(created=datetime.now(tz=timezone.utc), model_name=model_name, fixture_link=int(fixture_link), tip_mass=float(tip_mass),
                             sagging_angle=float(result.sagging_angle), residual=float(result.residual))
        for position, value in enumerate(result.q):
            run.positions.append(EquilibriumJointPosition(position=position, q=float(value)))
        with self.scoped_session_factory() as session:
            run.tags = self._tags(session, tags)
            return self._commit(session, run, 'equilibrium run')

    def add_report(self, report: ComparisonReport, title: Optional[str] = None, tags: Sequence[str] = ()) -> int:
        """
        Stores a comparison report. The title defaults to the ``title`` metadata entry.

        Returns:
            int: Id of the new report.
        """
        record = ComparisonReportRecord(created=datetime.now(tz=timezone.utc), title=title or report.metadata.get('title', 'comparison'))
        for position, row in enumerate(report.rows):
            record.rows.append(ComparisonRowRecord(position=position, label=row.label, sim=row.sim, real=row.real, difference=row.difference,
                                                   percent_error=row.percent_error))
        with self.scoped_session_factory() as session:
            record.tags = self._tags(session, tags)
            return self._commit(session, record, 'comparison report')

    def list_runs(self, kind: str = 'identification', tag: Optional[str] = None) -> List[RunRecord]:
        """
        Lists stored runs of one kind, oldest first, optionally only those carrying a tag.

        Args:
            kind (str): One of ``identification``, ``equilibrium`` or ``report``.
            tag (str, optional): Tag name to filter by.

        Raises:
            StoreError: If the kind is unknown or the query fails.
        """
        record_type = {'identification': IdentificationRun, 'equilibrium': EquilibriumRun, 'report': ComparisonReportRecord}.get(kind)
        if record_type is None:
            raise StoreError(f'Unknown run kind {kind}, expected one of {", ".join(RUN_KINDS)}')
        statement = select(record_type).order_by(record_type.id)
        if tag is not None:
            statement = statement.where(record_type.tags.any(Tag.name == tag))
        with self.scoped_session_factory() as session:
            try:
                runs = list(session.scalars(statement).unique().all())
                for run in runs:
                    # load children before the session closes
                    _ = list(run.tags)
                    _ = list(getattr(run, 'joints', None) or getattr(run, 'positions', None) or getattr(run, 'rows', None) or [])
            except DatabaseError as err:
                LOG.error('DatabaseError while listing %s runs: %s', kind, err)
                raise StoreError(f'Could not list {kind} runs: {err}') from err
        return runs
