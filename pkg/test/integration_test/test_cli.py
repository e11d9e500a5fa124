"""End-to-end tests of the command line interface."""
import json

import numpy as np
import pytest

from cable_sim2real.curve_fit import read_point_cloud_csv
from cable_sim2real.kinematics import forward_kinematics
from cable_sim2real.model import JointAxis, default_bench_model, fix_link, load_model_file
from cable_sim2real.report import read_values_csv
from cable_sim2real_cli.cable_sim2real_cli_base import cli


def test_static(tmp_path, integration_dir, capsys):
    out = tmp_path / 'static.csv'
    assert cli(['static', '--fix-link', '5', '--tip-mass', '0.05', '--model', str(integration_dir / 'bench_model.json'),
                '--out', str(out)]) == 0
    assert 'sagging:' in capsys.readouterr().out
    labels, values = read_values_csv(out)
    assert labels == ['q1', 'q2', 'q3', 'q4', 'sagging']
    assert values[-1] == pytest.approx(sum(values[:4]))


def test_static_default_model(capsys):
    assert cli(['static', '--fix-link', '5']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split(':')[0] for line in lines[-5:]] == ['q1', 'q2', 'q3', 'q4', 'sagging']
    assert float(lines[-1].split()[1]) == pytest.approx(np.pi / 2, abs=1e-6)


def test_report(tmp_path, integration_dir, capsys):
    out = tmp_path / 'report.csv'
    assert cli(['report', '--sim', str(integration_dir / 'table_joints_sim.csv'), '--real', str(integration_dir / 'table_joints_real.csv'),
                '--title', 'link 5 fixed, no weight', '--out', str(out)]) == 0
    text = capsys.readouterr().out
    assert text.startswith('title: link 5 fixed, no weight')
    assert text.splitlines()[-1].split()[-4:] == ['0.88%', '1.04%', '1.75%', '2.00%']
    assert out.read_text(encoding='utf-8').splitlines()[1] == '4,0.56,0.565,-0.005,0.88'


def test_simulate_is_deterministic(tmp_path):
    arguments = ['simulate', '--fix-link', '5', '--duration', '0.05', '--tip-mass', '0.1', '--load-time', '0.01', '--seed', '3']
    first, second = tmp_path / 'first.csv', tmp_path / 'second.csv'
    assert cli(arguments + ['--out', str(first)]) == 0
    assert cli(arguments + ['--out', str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert len(first.read_text(encoding='utf-8').splitlines()) == 52


def test_simulate_needs_output(capsys):
    assert cli(['simulate', '--duration', '0.01']) == 1
    assert '--out' in capsys.readouterr().err


def test_synthesize_identify_and_list(tmp_path, capsys):
    pose_log, layout, updated = tmp_path / 'drop.csv', tmp_path / 'layout.json', tmp_path / 'identified.json'
    db_url = f'sqlite:///{tmp_path / "runs.db"}'
    assert cli(['synthesize', '--stiffness', '0.5', '--damping', '0.1', '--record-every', '5', '--out', str(pose_log),
                '--layout-out', str(layout)]) == 0
    assert json.loads(layout.read_text(encoding='utf-8'))['tag_ids'] == [5, 4, 3, 2, 1]
    assert cli(['identify', '--pose-log', str(pose_log), '--layout', str(layout), '--out', str(updated), '--db-url', db_url,
                '--tag', 'synthetic']) == 0
    assert 'stiffness N*m/rad:' in capsys.readouterr().out
    model = load_model_file(updated)
    pitch = [joint.stiffness[joint.axes.index(JointAxis.PITCH)] for joint in model.joints if joint.has_axis(JointAxis.PITCH)]
    assert pitch[-4:] == pytest.approx([0.5] * 4, rel=1e-4)
    assert pitch[0] == 0.0
    assert cli(['runs', '--db-url', db_url, '--tag', 'synthetic']) == 0
    listing = capsys.readouterr().out.splitlines()
    assert len(listing) == 1
    assert listing[0].startswith('1 ')
    assert listing[0].endswith('[synthetic]')


def test_fit_curve(tmp_path, capsys):
    cloud, polyline = tmp_path / 'cloud.csv', tmp_path / 'polyline.csv'
    x = np.linspace(0.0, 0.3, 30)
    np.savetxt(cloud, np.column_stack([x, np.zeros_like(x), -0.5 * x ** 2]), delimiter=',', header='x,y,z', comments='')
    assert cli(['fit-curve', '--cloud', str(cloud), '--samples', '11', '--grasp-distance', '0.1', '--out', str(polyline)]) == 0
    output = capsys.readouterr().out
    assert output.startswith('axis x over [0.000000, 0.300000] m')
    assert 'grasp point' in output
    points = read_point_cloud_csv(polyline)
    assert points.shape == (11, 3)
    assert points[:, 2] == pytest.approx(-0.5 * points[:, 0] ** 2, abs=1e-9)


def test_servo(tmp_path, capsys):
    model = fix_link(default_bench_model(), 5)
    target = forward_kinematics(model, [0.35, 0.0] * 4).tip.translation
    out = tmp_path / 'servo.csv'
    assert cli(['servo', '--fix-link', '5', '--q0'] + ['0.2', '0.0'] * 4 + ['--target'] + [repr(float(value)) for value in target]
               + ['--position-only', '--out', str(out)]) == 0
    assert 'converged True' in capsys.readouterr().out
    assert out.read_text(encoding='utf-8').startswith('iter,err_pos,err_rot,q1,')


def test_servo_unreachable(tmp_path, capsys):
    settings = tmp_path / 'settings.json'
    settings.write_text(json.dumps({'cableSim2Real': {'servo': {'max_iters': 20}}}), encoding='utf-8')
    assert cli(['servo', '--fix-link', '5', '--target', '10', '0', '0', '--position-only', '--settings', str(settings)]) == 1
    captured = capsys.readouterr()
    assert 'converged False after 20 iterations' in captured.out
    assert 'not reached' in captured.err


def test_validate(capsys):
    assert cli(['validate', '--scenario', 'table-arithmetic']) == 0
    assert capsys.readouterr().out.startswith('PASS table-arithmetic')


def test_errors(tmp_path, capsys):
    assert cli(['runs']) == 1
    assert 'result store' in capsys.readouterr().err
    assert cli(['static', '--fix-link', '5', '--model', str(tmp_path / 'missing.json')]) == 1
    assert 'cannot read model file' in capsys.readouterr().err
    assert cli(['static', '--fix-link', '40']) == 1
    with pytest.raises(SystemExit) as info:
        cli(['unknown'])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli(['--version'])
    assert info.value.code == 0
