""" This module contains the synthetic acceptance scenarios run by ``cable-sim2real validate``"""
from __future__ import annotations
from typing import TYPE_CHECKING

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
import logging
import time

import numpy as np

from cable_sim2real.errors import CableSim2RealError, ConfigurationError
from cable_sim2real.model import CableModel, ChainState, JointAxis, JointSpec, LinkSpec, default_bench_model, identification_subchain, \
    with_pitch_parameters
from cable_sim2real.kinematics import forward_kinematics, point_on_chain
from cable_sim2real.dynamics import gravity_torque, mass_matrix_and_bias, rne_batch
from cable_sim2real.simulation import chain_energy, fix_link, fixture_equilibrium, simulate, static_equilibrium
from cable_sim2real.identification import IdentificationSettings, noise_study, run_identification, synthesize_pose_log
from cable_sim2real.curve_fit import fit_curve3d, fit_quadratic_projection
from cable_sim2real.servo import KinematicPlant, ServoGains, damped_norm_bound, damped_pseudoinverse_solve, run_servo, servo_step
from cable_sim2real.report import build_report, round_half_away
from cable_sim2real.validation_tables import BENCH_TABLES

if TYPE_CHECKING:
    from typing import Callable, Dict, List, Optional, Sequence, Tuple

    Scenario = Callable[[int], Tuple[bool, str]]

LOG: logging.Logger = logging.getLogger("cable_sim2real.validation")

# Largest percent error of every bench table
EXPECTED_MAX_PERCENT_ERRORS: Dict[str, float] = {
    'joints-no-weight': 2.00,
    'joints-50g': 3.53,
    'joints-100g': 3.16,
    'sagging-no-weight': 3.38,
    'sagging-50g': 3.12,
    'sagging-100g': 4.11,
}
# (stiffness, damping) of the noise-free identification runs, corners of the supported range and two inner points
IDENTIFICATION_CASES: Tuple[Tuple[float, float], ...] = ((0.1, 0.001), (0.1, 0.1), (5.0, 0.001), (5.0, 0.1), (0.5, 0.01), (1.0, 0.05))
# Wall clock limit in seconds, scenarios without an entry have none
SCENARIO_BUDGETS: Dict[str, float] = {
    'rne-oracle': 5.0,
    'identification': 60.0,
    'noise-study': 60.0,
    'sagging-monotonic': 30.0,
    'servo': 30.0,
}


@dataclass(frozen=True)
class ScenarioResult:
    """
    Outcome of one acceptance scenario.

    Attributes:
        name (str): Scenario name.
        passed (bool): True if every check held within the budget.
        detail (str): Measured quantities or the reason of the failure.
        seconds (float): Wall clock runtime.
        budget (Optional[float]): Wall clock limit in seconds, None if unlimited.
    """
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: Optional[float] = None

    @property
    def over_budget(self) -> bool:
        return self.budget is not None and self.seconds > self.budget

    def __str__(self) -> str:
        limit: str = f' of {self.budget:.0f} s' if self.budget is not None else ''
        return f'{"PASS" if self.passed else "FAIL"} {self.name} ({self.seconds:.1f} s{limit}): {self.detail}'


def two_link_model() -> CableModel:
    """Planar two-link pendulum with pitch joints, used against the closed form equations of motion."""
    pitch = JointSpec(axes=(JointAxis.PITCH,), limits=((-np.pi, np.pi),))
    return CableModel(links=(LinkSpec.slender_rod(0.05, 0.05), LinkSpec.slender_rod(0.30, 0.70, com_offset=0.12),
                             LinkSpec.slender_rod(0.25, 0.40)),
                      joints=(pitch, pitch), name='two-link')


def two_link_torque(model: CableModel, q: np.ndarray, qd: np.ndarray, qdd: np.ndarray) -> np.ndarray:
    """
    Closed form inverse dynamics of :func:`two_link_model` for stacked states, derived from the Lagrangian.
    """
    first, second = model.links[1], model.links[2]
    m1, m2 = first.mass, second.mass
    c1, c2, l1 = first.com_offset, second.com_offset, first.length
    i1, i2 = first.inertia_matrix[1, 1], second.inertia_matrix[1, 1]
    g: float = -model.gravity[2]
    cos2, sin2 = np.cos(q[:, 1]), np.sin(q[:, 1])
    m11 = i1 + m1 * c1 ** 2 + i2 + m2 * (l1 ** 2 + c2 ** 2 + 2.0 * l1 * c2 * cos2)
    m12 = i2 + m2 * (c2 ** 2 + l1 * c2 * cos2)
    m22 = i2 + m2 * c2 ** 2
    h = m2 * l1 * c2 * sin2
    g1 = -m1 * g * c1 * np.cos(q[:, 0]) - m2 * g * (l1 * np.cos(q[:, 0]) + c2 * np.cos(q[:, 0] + q[:, 1]))
    g2 = -m2 * g * c2 * np.cos(q[:, 0] + q[:, 1])
    tau1 = m11 * qdd[:, 0] + m12 * qdd[:, 1] - h * (2.0 * qd[:, 0] * qd[:, 1] + qd[:, 1] ** 2) + g1
    tau2 = m12 * qdd[:, 0] + m22 * qdd[:, 1] + h * qd[:, 0] ** 2 + g2
    return np.stack([tau1, tau2], axis=-1)


def check_rne_oracle(seed: int, samples: int = 1000) -> Tuple[bool, str]:
    """RNE against the two-link closed form and the single-link holding torque."""
    generator = np.random.default_rng(seed)
    model = two_link_model()
    q = generator.uniform(-np.pi, np.pi, (samples, 2))
    qd = generator.uniform(-3.0, 3.0, (samples, 2))
    qdd = generator.uniform(-10.0, 10.0, (samples, 2))
    error = float(np.max(np.abs(rne_batch(model, q, qd, qdd) - two_link_torque(model, q, qd, qdd))))
    single = CableModel(links=model.links[:2], joints=model.joints[:1], name='one-link')
    angles = generator.uniform(-np.pi, np.pi, (samples, 1))
    link = single.links[1]
    expected = -link.mass * -single.gravity[2] * link.com_offset * np.cos(angles)
    static_error = float(np.max(np.abs(gravity_torque(single, angles) - expected)))
    return error < 1e-8 and static_error < 1e-12, f'two-link error {error:.2e} N*m, single-link error {static_error:.2e} N*m'


def check_dynamics_consistency(seed: int, samples: int = 500) -> Tuple[bool, str]:
    """rne(q, q', q'') = M q'' + bias, M symmetric positive definite, on the fixed bench chain."""
    generator = np.random.default_rng(seed)
    model = fix_link(default_bench_model(), 5)
    worst: float = 0.0
    asymmetry: float = 0.0
    smallest: float = np.inf
    for _ in range(samples):
        q = generator.uniform(-1.0, 1.0, model.dof)
        qd = generator.uniform(-2.0, 2.0, model.dof)
        qdd = generator.uniform(-5.0, 5.0, model.dof)
        matrix, bias = mass_matrix_and_bias(model, q, qd)
        worst = max(worst, float(np.max(np.abs(rne_batch(model, q, qd, qdd) - (matrix @ qdd + bias)))))
        asymmetry = max(asymmetry, float(np.max(np.abs(matrix - matrix.T))))
        smallest = min(smallest, float(np.min(np.linalg.eigvalsh(0.5 * (matrix + matrix.T)))))
    passed: bool = worst < 1e-10 and asymmetry < 1e-9 and smallest > 0.0
    return passed, f'consistency {worst:.2e} N*m, asymmetry {asymmetry:.2e}, smallest eigenvalue {smallest:.2e}'


def check_identification(seed: int) -> Tuple[bool, str]:
    """Noise-free weight drop on the four joint chain with a 100 g tip weight over corners and inner points of the K and D ranges."""
    del seed
    model = identification_subchain(default_bench_model())
    failures: List[str] = []
    worst_stiffness: float = 0.0
    worst_damping: float = 0.0
    for stiffness, damping in IDENTIFICATION_CASES:
        experiment = synthesize_pose_log(model, stiffness, damping, tip_mass=0.1)
        params = run_identification(model, experiment.log, experiment.loads, IdentificationSettings())
        stiffness_error = float(np.max(np.abs(params.stiffness - stiffness)) / stiffness)
        damping_error = float(np.max(np.abs(params.damping - damping)) / damping)
        worst_stiffness, worst_damping = max(worst_stiffness, stiffness_error), max(worst_damping, damping_error)
        if not (stiffness_error < 1e-6 and damping_error < 0.05):
            failures.append(f'K={stiffness} D={damping}: stiffness error {stiffness_error:.2e}, damping error {damping_error:.2%}')
    detail = f'{len(IDENTIFICATION_CASES)} cases, worst stiffness error {worst_stiffness:.2e}, worst damping error {worst_damping:.2%}'
    return not failures, detail + (f'; {failures[0]}' if failures else '')


def check_noise_study(seed: int, seeds: int = 50) -> Tuple[bool, str]:
    """Median errors of the weight drop over noisy pose logs with 1 mm and 0.5 degree tag noise."""
    model = identification_subchain(default_bench_model())
    result = noise_study(model, 0.5, 0.1, seeds=range(seed, seed + seeds), position_noise=1e-3, rotation_noise=float(np.radians(0.5)))
    passed: bool = bool(result.median_stiffness_error < 0.1 and result.median_damping_error < 0.25)
    return passed, (f'median stiffness error {result.median_stiffness_error:.2%}, median damping error '
                    f'{result.median_damping_error:.2%}, {result.failures} of {seeds} seeds failed')


def check_sagging(seed: int, settings: int = 20) -> Tuple[bool, str]:
    """Tip sagging angle with link 5 fixed grows with the tip weight 0 g, 50 g, 100 g."""
    generator = np.random.default_rng(seed)
    base = default_bench_model()
    pitch_joints: int = sum(1 for joint in base.joints if joint.has_axis(JointAxis.PITCH))
    failures: List[str] = []
    for index in range(settings):
        stiffness = generator.uniform(0.5, 5.0, pitch_joints)
        model = with_pitch_parameters(base, stiffness, np.zeros(pitch_joints))
        angles: List[float] = []
        q_init: Optional[np.ndarray] = None
        for mass in (0.0, 0.05, 0.1):
            result = fixture_equilibrium(model, 5, tip_mass=mass, q_init=q_init)
            angles.append(result.sagging_angle)
            q_init = result.q
        if not angles[0] < angles[1] < angles[2]:
            failures.append(f'setting {index}: {angles}')
    return not failures, f'{settings - len(failures)} of {settings} settings monotonic' + (f', {failures[0]}' if failures else '')


def check_tables(seed: int) -> Tuple[bool, str]:
    """Bench table differences and percent errors reproduced from their sim and real columns."""
    del seed
    mismatches: List[str] = []
    for name, table in BENCH_TABLES.items():
        report = build_report(table.sim, table.real, table.labels)
        errors = tuple(row.percent_error for row in report.rows)
        if errors != table.percent_errors:
            mismatches.append(f'{name} percent errors {errors}')
        if report.max_percent_error != EXPECTED_MAX_PERCENT_ERRORS[name]:
            mismatches.append(f'{name} max percent error {report.max_percent_error}')
        differences = tuple(round_half_away(row.difference, 3) for row in report.rows)
        if differences != table.differences:
            mismatches.append(f'{name} differences {differences}')
    return not mismatches, '; '.join(mismatches) or f'{len(BENCH_TABLES)} tables reproduced'


def check_curve_fit(seed: int) -> Tuple[bool, str]:
    """Exact quadratic recovery, least-squares optimality and the fit of a sagging chain."""
    generator = np.random.default_rng(seed)
    u = np.linspace(-1.0, 1.0, 25)
    exact = fit_quadratic_projection(np.column_stack([u, 0.3 * u ** 2 - 0.2 * u + 0.1]))
    coefficient_error = float(np.max(np.abs(np.array(exact.coeffs) - (0.3, -0.2, 0.1))))
    noisy_v = 0.5 * u ** 2 + generator.normal(0.0, 0.01, u.size)
    noisy = fit_quadratic_projection(np.column_stack([u, noisy_v]))
    vandermonde = np.vander(u, 3)
    oracle, *_ = np.linalg.lstsq(vandermonde, noisy_v, rcond=None)
    oracle_residual = float(np.linalg.norm(vandermonde @ oracle - noisy_v))
    slack = noisy.residual - oracle_residual
    model = with_pitch_parameters(identification_subchain(default_bench_model()), [5.0] * 4, [0.0] * 4)
    q = static_equilibrium(model)
    cloud = np.array([point_on_chain(model, q, link, offset) for link in range(1, len(model.links))
                      for offset in np.linspace(0.0, model.links[link].length, 10)])
    curve = fit_curve3d(cloud)
    passed: bool = coefficient_error < 1e-12 and slack <= 1e-10 and curve.rms_residual < 5e-3
    return passed, f'coefficient error {coefficient_error:.2e}, residual slack {slack:.2e}, chain rms {curve.rms_residual * 1e3:.2f} mm'


def check_servo(seed: int, targets: int = 100) -> Tuple[bool, str]:
    """
    Resolved-rate servo on the kinematic four joint chain reaches reachable targets. Every damped least-squares step of every
    run stays within the singular value bound of its Jacobian.
    """
    generator = np.random.default_rng(seed)
    model = identification_subchain(default_bench_model())
    gains = ServoGains(pos_tol=1e-3, rot_tol=0.01, max_iters=2000)
    converged: int = 0
    checked: int = 0
    bound_violations: int = 0
    for _ in range(targets):
        q0 = generator.uniform(0.2, 0.6, model.dof)
        target = forward_kinematics(model, q0 + generator.uniform(-0.2, 0.2, model.dof)).tip
        result = run_servo(KinematicPlant(model, q0), target, gains, record_steps=True)
        converged += int(result.converged)
        for step in result.steps:
            solution = damped_pseudoinverse_solve(step.jacobian, step.velocity, gains.damping_lambda)
            bound = damped_norm_bound(step.jacobian, step.velocity, gains.damping_lambda)
            checked += 1
            if np.linalg.norm(solution) > bound * (1.0 + 1e-9) + 1e-12 or np.linalg.norm(step.raw - solution) > 1e-9:
                bound_violations += 1
    command, _ = servo_step(np.zeros(6), KinematicPlant(model).jacobian(), gains)
    idempotent: bool = not np.any(command)
    passed: bool = converged == targets and bound_violations == 0 and idempotent
    return passed, (f'{converged} of {targets} targets reached, {bound_violations} of {checked} steps outside the norm bound, '
                    f'zero error idempotent {idempotent}')


def check_energy(seed: int) -> Tuple[bool, str]:
    """Damped single link energy never increases; undamped gravity-free two-link kinetic energy is kept."""
    del seed
    pendulum = CableModel(links=(LinkSpec.slender_rod(0.05, 0.05), LinkSpec.slender_rod(0.05, 0.05)),
                          joints=(JointSpec(axes=(JointAxis.PITCH,), stiffness=(0.5,), damping=(0.05,)),), name='pendulum')
    trajectory = simulate(pendulum, ChainState(q=[0.5]), duration=2.0)
    energies = np.array([chain_energy(pendulum, q, qd) for q, qd in zip(trajectory.q, trajectory.qd)])
    increase = float(np.max(np.diff(energies)))
    dissipative: bool = increase <= 1e-9 * abs(energies[0])
    free = two_link_model().with_gravity((0.0, 0.0, 0.0))
    drifting = simulate(free, ChainState(q=[0.3, -0.4], qd=[0.2, -0.1]), duration=10.0)
    checked = range(0, len(drifting), 100)
    kinetic = np.array([chain_energy(free, drifting.q[index], drifting.qd[index]) for index in checked])
    drift = float(np.max(np.abs(kinetic - kinetic[0])) / kinetic[0])
    return dissipative and drift < 1e-3, f'largest energy increase {increase:.2e} J, kinetic energy drift {drift:.3%}'


SCENARIOS: Dict[str, Scenario] = {
    'rne-oracle': check_rne_oracle,
    'dynamics-consistency': check_dynamics_consistency,
    'identification': check_identification,
    'noise-study': check_noise_study,
    'sagging-monotonic': check_sagging,
    'table-arithmetic': check_tables,
    'curve-fit': check_curve_fit,
    'servo': check_servo,
    'energy': check_energy,
}


def run_scenario(name: str, seed: int = 0) -> ScenarioResult:
    """Runs one scenario, errors of the library count as failure."""
    start: float = time.perf_counter()
    try:
        passed, detail = SCENARIOS[name](seed)
    except CableSim2RealError as err:
        LOG.error('Scenario %s raised %s', name, err)
        passed, detail = False, f'{type(err).__name__}: {err}'
    seconds: float = time.perf_counter() - start
    budget: Optional[float] = SCENARIO_BUDGETS.get(name)
    result = ScenarioResult(name=name, passed=passed, detail=detail, seconds=seconds, budget=budget)
    if result.over_budget:
        result = replace(result, passed=False, detail=f'{detail}; over the {budget:.0f} s budget')
    LOG.info('%s', result)
    return result


def run_validation(names: Optional[Sequence[str]] = None, seed: int = 0, jobs: int = 1) -> List[ScenarioResult]:
    """
    Runs the acceptance scenarios, in parallel threads if ``jobs`` is above one. Results keep the order of ``names``.

    Raises:
        ConfigurationError: for an unknown scenario name.
    """
    selected: List[str] = list(SCENARIOS) if not names else list(names)
    unknown = [name for name in selected if name not in SCENARIOS]
    if unknown:
        raise ConfigurationError(f'unknown scenario {unknown[0]}, expected one of {", ".join(SCENARIOS)}', path='validate')
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        return list(executor.map(lambda name: run_scenario(name, seed), selected))
