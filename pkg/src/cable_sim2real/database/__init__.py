""" Persistence of identification, equilibrium and comparison results """
from cable_sim2real.database.store import ResultStore, RUN_KINDS  # noqa: F401
from cable_sim2real.database.tag import Tag  # noqa: F401
from cable_sim2real.database.identification_run import IdentificationRun, IdentifiedJoint  # noqa: F401
from cable_sim2real.database.equilibrium_run import EquilibriumRun, EquilibriumJointPosition  # noqa: F401
from cable_sim2real.database.comparison_report import ComparisonReportRecord, ComparisonRowRecord  # noqa: F401

__all__ = ['ResultStore', 'RUN_KINDS', 'Tag', 'IdentificationRun', 'IdentifiedJoint', 'EquilibriumRun', 'EquilibriumJointPosition',
           'ComparisonReportRecord', 'ComparisonRowRecord']
