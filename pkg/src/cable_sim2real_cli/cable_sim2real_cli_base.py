"""Module containing the commandline interface for the cable_sim2real package."""
from __future__ import annotations
from typing import TYPE_CHECKING

import argparse
from dataclasses import replace
import logging
import sys
from pathlib import Path

import numpy as np

from cable_sim2real._version import __version__
from cable_sim2real.errors import CableSim2RealError, ConfigurationError
from cable_sim2real.model import CableModel, ChainState, default_bench_model, fix_link, identification_subchain, load_model_file, \
    save_model_file, tip_weight
from cable_sim2real.kinematics import FramePose
from cable_sim2real.simulation import LoadEvent, fixture_equilibrium, simulate, write_trajectory_csv
from cable_sim2real.identification import TagLayout, read_pose_log_csv, read_tag_layout, run_identification, synthesize_pose_log, \
    update_model, write_pose_log_csv, write_tag_layout
from cable_sim2real.curve_fit import curve_arc_length, fit_curve3d, grasp_point, read_point_cloud_csv, sample_curve, write_polyline_csv
from cable_sim2real.servo import KinematicPlant, run_servo, write_servo_report_csv
from cable_sim2real.report import build_report, read_values_csv, write_values_csv
from cable_sim2real.settings import LOG_LEVELS, Settings, load_settings_file
from cable_sim2real.validation import SCENARIOS, run_validation
from cable_sim2real.database import RUN_KINDS, ResultStore

if TYPE_CHECKING:
    from typing import List, Optional, Sequence

LOG = logging.getLogger("cable-sim2real")


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--model', type=Path, help='Cable model JSON document, the bench cable if omitted')
    common.add_argument('--out', type=Path, help='Output file')
    common.add_argument('--dt', type=float, help='Integration step in seconds')
    common.add_argument('--seed', type=int, default=0, help='Seed of every random number generator (default: %(default)s)')
    common.add_argument('--settings', type=Path, help='Settings JSON document')
    common.add_argument('--log-level', dest='log_level', choices=LOG_LEVELS, help='Log level (default: ERROR)')
    common.add_argument('--db-url', dest='db_url', help='SQLAlchemy URL of the result store, e.g. sqlite:///cable.db')
    common.add_argument('--tag', dest='tags', action='append', default=[], help='Label stored results with this tag, can be repeated')
    common.add_argument('--jobs', type=int, default=1, help='Worker threads for independent runs (default: %(default)s)')
    return common


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one sub-parser per command."""
    parser = argparse.ArgumentParser(prog='cable-sim2real', description='Simulate, identify and servo a cable modelled as a chain of rigid links')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    common = _common_arguments()
    commands = parser.add_subparsers(dest='command', required=True, metavar='command')

    simulate_parser = commands.add_parser('simulate', parents=[common], help='Simulate the chain and write the trajectory CSV')
    simulate_parser.add_argument('--q0', type=float, nargs='+', help='Initial joint positions in rad (default: straight chain)')
    simulate_parser.add_argument('--qd0', type=float, nargs='+', help='Initial joint velocities in rad/s (default: at rest)')
    simulate_parser.add_argument('--duration', type=float, default=1.0, help='Simulated time in seconds (default: %(default)s)')
    simulate_parser.add_argument('--fix-link', dest='fix_link', type=int, help='Weld this link (counted from the tip) horizontally first')
    simulate_parser.add_argument('--tip-mass', dest='tip_mass', type=float, default=0.0, help='Weight at the tip in kg (default: %(default)s)')
    simulate_parser.add_argument('--load-time', dest='load_time', type=float, default=0.0,
                                 help='Time in seconds the weight is attached (default: %(default)s)')

    static_parser = commands.add_parser('static', parents=[common], help='Resting shape with a link welded horizontally')
    static_parser.add_argument('--fix-link', dest='fix_link', type=int, required=True, help='Welded link counted from the tip')
    static_parser.add_argument('--tip-mass', dest='tip_mass', type=float, default=0.0, help='Weight at the tip in kg (default: %(default)s)')

    synthesize_parser = commands.add_parser('synthesize', parents=[common], help='Simulated weight-drop pose log for identification')
    synthesize_parser.add_argument('--stiffness', type=float, nargs='+', required=True, help='True stiffness in N*m/rad, one or per joint')
    synthesize_parser.add_argument('--damping', type=float, nargs='+', required=True, help='True damping in N*m*s/rad, one or per joint')
    synthesize_parser.add_argument('--tip-mass', dest='tip_mass', type=float, default=0.1, help='Weight in kg (default: %(default)s)')
    synthesize_parser.add_argument('--duration', type=float, default=2.0, help='Recorded transient in seconds (default: %(default)s)')
    synthesize_parser.add_argument('--rest-duration', dest='rest_duration', type=float, default=1.0,
                                   help='Recorded rest under the weight after a pause, 0 to skip (default: %(default)s)')
    synthesize_parser.add_argument('--record-every', dest='record_every', type=int, default=1, help='Record every n-th step (default: %(default)s)')
    synthesize_parser.add_argument('--position-noise', dest='position_noise', type=float, default=0.0, help='Position noise in m')
    synthesize_parser.add_argument('--rotation-noise', dest='rotation_noise', type=float, default=0.0, help='Rotation noise in rad')
    synthesize_parser.add_argument('--dof', type=int, default=4, help='Observed joints (default: %(default)s)')
    synthesize_parser.add_argument('--layout-out', dest='layout_out', type=Path, help='Write the tag layout JSON here')

    identify_parser = commands.add_parser('identify', parents=[common], help='Identify stiffness and damping from a pose log')
    identify_parser.add_argument('--pose-log', dest='pose_log', type=Path, required=True, help='Pose log CSV')
    identify_parser.add_argument('--layout', type=Path, help='Tag layout JSON (default: one tag per link, bench numbering)')
    identify_parser.add_argument('--tip-mass', dest='tip_mass', type=float, default=0.1, help='Weight during the log in kg (default: %(default)s)')
    identify_parser.add_argument('--dof', type=int, default=4, help='Observed joints (default: %(default)s)')
    identify_parser.add_argument('--fill-remaining', dest='fill_remaining', action='store_true',
                                 help='Write the mean values into all unobserved pitch joints of the updated model')

    fit_parser = commands.add_parser('fit-curve', parents=[common], help='Fit the quadratic cable curve to a point cloud')
    fit_parser.add_argument('--cloud', type=Path, required=True, help='Point cloud CSV x,y,z')
    fit_parser.add_argument('--samples', type=int, help='Points of the written polyline')
    fit_parser.add_argument('--trim', type=float, help='Share of outliers dropped before the refit')
    fit_parser.add_argument('--grasp-distance', dest='grasp_distance', type=float, help='Also print the point this far from the tip in m')

    servo_parser = commands.add_parser('servo', parents=[common], help='Servo the cable tip to a target frame')
    servo_parser.add_argument('--target', type=float, nargs=3, required=True, metavar=('X', 'Y', 'Z'), help='Target position in m')
    servo_parser.add_argument('--quaternion', type=float, nargs=4, default=[0.0, 0.0, 0.0, 1.0], metavar=('QX', 'QY', 'QZ', 'QW'),
                              help='Target orientation as unit quaternion (default: identity)')
    servo_parser.add_argument('--q0', type=float, nargs='+', help='Initial joint positions in rad')
    servo_parser.add_argument('--fix-link', dest='fix_link', type=int, help='Weld this link (counted from the tip) horizontally first')
    servo_parser.add_argument('--position-only', dest='position_only', action='store_true', help='Ignore the target orientation')

    report_parser = commands.add_parser('report', parents=[common], help='Compare simulated and measured values')
    report_parser.add_argument('--sim', type=Path, required=True, help='Simulated values CSV label,value')
    report_parser.add_argument('--real', type=Path, required=True, help='Measured values CSV label,value')
    report_parser.add_argument('--title', help='Experiment descriptor printed above the table')

    validate_parser = commands.add_parser('validate', parents=[common], help='Run the synthetic acceptance scenarios')
    validate_parser.add_argument('--scenario', dest='scenarios', action='append', choices=list(SCENARIOS), help='Only run this scenario')

    runs_parser = commands.add_parser('runs', parents=[common], help='List stored results')
    runs_parser.add_argument('--kind', choices=RUN_KINDS, default='identification', help='Kind of result (default: %(default)s)')
    return parser


def _settings(args: argparse.Namespace) -> Settings:
    settings = load_settings_file(args.settings) if args.settings is not None else Settings()
    logging.basicConfig(level=args.log_level or settings.log_level, format='%(asctime)s:%(levelname)s:%(name)s:%(message)s',
                        datefmt='%Y-%m-%dT%H:%M:%S%z')
    return settings


def _model(args: argparse.Namespace) -> CableModel:
    if args.model is None:
        return default_bench_model()
    model = load_model_file(args.model)
    LOG.info('Loaded model %s with %d links and %d DOF', model.name, len(model.links), model.dof)
    return model


def _store(args: argparse.Namespace, settings: Settings) -> Optional[ResultStore]:
    db_url: Optional[str] = args.db_url or settings.db_url
    return ResultStore(db_url) if db_url else None


def _vector(values: Optional[Sequence[float]], dof: int, name: str) -> np.ndarray:
    if values is None:
        return np.zeros(dof)
    if len(values) != dof:
        raise ConfigurationError(f'expected {dof} values, got {len(values)}', path=name)
    return np.array(values, dtype=float)


def _require_out(args: argparse.Namespace) -> Path:
    if args.out is None:
        raise ConfigurationError('this command needs an output file', path='--out')
    return args.out


def _format(values: np.ndarray) -> str:
    return ' '.join(f'{value:.6f}' for value in values)


def command_simulate(args: argparse.Namespace, settings: Settings) -> int:
    """Writes the trajectory of the chain, optionally welded at a link and loaded at the tip."""
    model = _model(args)
    if args.fix_link is not None:
        model = fix_link(model, args.fix_link)
    out = _require_out(args)
    initial = ChainState(q=_vector(args.q0, model.dof, '--q0'), qd=_vector(args.qd0, model.dof, '--qd0'))
    schedule = [LoadEvent(t=args.load_time, loads=(tip_weight(model, args.tip_mass),))] if args.tip_mass > 0 else None
    trajectory = simulate(model, initial, schedule, duration=args.duration, dt=args.dt or settings.simulation.dt)
    write_trajectory_csv(trajectory, out)
    print(f'{len(trajectory)} samples written to {out}')
    return 0


def command_static(args: argparse.Namespace, settings: Settings) -> int:
    """Prints the resting positions of the free joints and the sagging angle, locked roll axes are left out."""
    model = _model(args)
    result = fixture_equilibrium(model, args.fix_link, tip_mass=args.tip_mass)
    free = result.q[~result.model.locked]
    labels = [f'q{index}' for index in range(1, free.size + 1)] + ['sagging']
    values = list(free) + [result.sagging_angle]
    for label, value in zip(labels, values):
        print(f'{label}: {value:.6f} rad')
    if args.out is not None:
        write_values_csv(labels, values, args.out)
    store = _store(args, settings)
    if store is not None:
        with store:
            store.add_equilibrium(result, model.name, args.fix_link, args.tip_mass, args.tags)
    return 0


def command_synthesize(args: argparse.Namespace, settings: Settings) -> int:
    """Writes a simulated pose log of the weight-drop experiment."""
    chain = identification_subchain(_model(args), args.dof)
    out = _require_out(args)
    experiment = synthesize_pose_log(chain, args.stiffness, args.damping, tip_mass=args.tip_mass, duration=args.duration,
                                     dt=args.dt or settings.simulation.dt, record_every=args.record_every, position_noise=args.position_noise,
                                     rotation_noise=args.rotation_noise, seed=args.seed, rest_duration=args.rest_duration)
    write_pose_log_csv(experiment.log, out)
    if args.layout_out is not None:
        write_tag_layout(experiment.log.layout, args.layout_out)
    print(f'{len(experiment.log)} pose log entries written to {out}')
    return 0


def command_identify(args: argparse.Namespace, settings: Settings) -> int:
    """Identifies the observed joints and writes the updated model."""
    model = _model(args)
    chain = identification_subchain(model, args.dof)
    layout = read_tag_layout(args.layout) if args.layout is not None else TagLayout.for_model(chain)
    pose_log = read_pose_log_csv(args.pose_log, layout)
    loads = [tip_weight(chain, args.tip_mass)] if args.tip_mass > 0 else []
    params = run_identification(chain, pose_log, loads, settings.identification)
    print(f'stiffness N*m/rad: {_format(params.stiffness)}')
    print(f'damping N*m*s/rad: {_format(params.damping)}')
    print(f'residual {params.residual:.3e}, condition {params.condition:.3e}, {params.static_samples} static and '
          f'{params.dynamic_samples} dynamic samples')
    if args.out is not None:
        save_model_file(update_model(model, params, fill_remaining=args.fill_remaining), args.out)
    store = _store(args, settings)
    if store is not None:
        with store:
            store.add_identification(params, model.name, args.tip_mass, source=str(args.pose_log), tags=args.tags)
    return 0


def command_fit_curve(args: argparse.Namespace, settings: Settings) -> int:
    """Fits the curve and writes the sampled polyline."""
    cloud = read_point_cloud_csv(args.cloud)
    trim = settings.curve_fit.trim_fraction if args.trim is None else args.trim
    curve = fit_curve3d(cloud, trim_fraction=trim)
    print(f'axis {curve.axis} over [{curve.param_range[0]:.6f}, {curve.param_range[1]:.6f}] m')
    print(f'coefficients a: {_format(np.array(curve.coeffs_a))}')
    print(f'coefficients b: {_format(np.array(curve.coeffs_b))}')
    print(f'rms residual {curve.rms_residual:.6f} m, arc length {curve_arc_length(curve):.6f} m')
    if args.grasp_distance is not None:
        grasp = grasp_point(curve, args.grasp_distance)
        print(f'grasp point {_format(grasp.point)} tangent {_format(grasp.tangent)}')
    if args.out is not None:
        write_polyline_csv(sample_curve(curve, args.samples or settings.curve_fit.sample_count), args.out)
    return 0


def command_servo(args: argparse.Namespace, settings: Settings) -> int:
    """Servos the kinematic chain, exit status 1 if the target was not reached."""
    model = _model(args)
    if args.fix_link is not None:
        model = fix_link(model, args.fix_link)
    gains = settings.servo
    if args.position_only:
        gains = replace(gains, position_only=True)
    target = FramePose.from_quaternion(args.quaternion, args.target)
    plant = KinematicPlant(model, _vector(args.q0, model.dof, '--q0'))
    result = run_servo(plant, target, gains)
    print(f'converged {result.converged} after {result.iterations} iterations, errors {result.final_error[0]:.6f} m '
          f'{result.final_error[1]:.6f} rad')
    print(f'joint positions: {_format(result.final_state)}')
    if args.out is not None:
        write_servo_report_csv(result, args.out)
    if not result.converged:
        print(f'target not reached within {gains.max_iters} iterations', file=sys.stderr)
        return 1
    return 0


def command_report(args: argparse.Namespace, settings: Settings) -> int:
    """Prints the comparison table."""
    sim_labels, sim_values = read_values_csv(args.sim)
    real_labels, real_values = read_values_csv(args.real)
    if sim_labels != real_labels:
        LOG.warning('Labels differ between %s and %s, using the simulated ones', args.sim, args.real)
    metadata = {'title': args.title} if args.title else {}
    report = build_report(sim_values, real_values, sim_labels, metadata)
    print(report.to_text(), end='')
    if args.out is not None:
        with open(args.out, 'w', encoding='utf-8', newline='') as report_file:
            report_file.write(report.to_csv())
    store = _store(args, settings)
    if store is not None:
        with store:
            store.add_report(report, title=args.title, tags=args.tags)
    return 0


def command_validate(args: argparse.Namespace, settings: Settings) -> int:
    """Prints one PASS or FAIL line per scenario."""
    del settings
    results = run_validation(args.scenarios, seed=args.seed, jobs=args.jobs)
    for result in results:
        print(result)
    return 0 if all(result.passed for result in results) else 1


def command_runs(args: argparse.Namespace, settings: Settings) -> int:
    """Lists stored results of one kind."""
    store = _store(args, settings)
    if store is None:
        raise ConfigurationError('listing runs needs a result store', path='--db-url')
    tag: Optional[str] = args.tags[0] if args.tags else None
    with store:
        for run in store.list_runs(args.kind, tag=tag):
            tags = ','.join(sorted(item.name for item in run.tags))
            if args.kind == 'identification':
                values = ' '.join(f'{joint.stiffness:.6g}/{joint.damping:.6g}' for joint in run.joints)
                print(f'{run.id} {run.created.isoformat()} {run.model_name} tip {run.tip_mass} kg K/D {values} [{tags}]')
            elif args.kind == 'equilibrium':
                print(f'{run.id} {run.created.isoformat()} {run.model_name} link {run.fixture_link} tip {run.tip_mass} kg '
                      f'sagging {run.sagging_angle:.6f} rad [{tags}]')
            else:
                worst = max((row.percent_error for row in run.rows if row.percent_error is not None), default=None)
                print(f'{run.id} {run.created.isoformat()} {run.title} rows {len(run.rows)} max error {worst}% [{tags}]')
    return 0


COMMANDS = {
    'simulate': command_simulate,
    'static': command_static,
    'synthesize': command_synthesize,
    'identify': command_identify,
    'fit-curve': command_fit_curve,
    'servo': command_servo,
    'report': command_report,
    'validate': command_validate,
    'runs': command_runs,
}


def cli(argv: Optional[List[str]] = None) -> int:
    """
    Parses the arguments and runs the command.

    Returns:
        int: 0 on success, 1 if the command failed. Invalid arguments exit with status 2 from argparse.
    """
    args = build_parser().parse_args(argv)
    try:
        settings = _settings(args)
        return COMMANDS[args.command](args, settings)
    except CableSim2RealError as err:
        LOG.debug('Command %s failed', args.command, exc_info=True)
        print(f'cable-sim2real {args.command}: error: {err}', file=sys.stderr)
        return 1
    except OSError as err:
        print(f'cable-sim2real {args.command}: error: {err}', file=sys.stderr)
        return 1


def main() -> None:
    """
    Entry point for the cable-sim2real application.
    """
    sys.exit(cli())
