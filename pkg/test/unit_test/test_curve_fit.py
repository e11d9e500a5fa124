"""Tests of the quadratic curve model."""
import numpy as np
import pytest

from cable_sim2real.curve_fit import PolyCurve3D, curve_arc_length, fit_curve3d, fit_quadratic_projection, grasp_point, \
    polyline_length, read_point_cloud_csv, sample_curve, write_polyline_csv
from cable_sim2real.errors import CurveFitError
from cable_sim2real.kinematics import point_on_chain
from cable_sim2real.model import default_bench_model, identification_subchain, with_pitch_parameters
from cable_sim2real.simulation import static_equilibrium


def _sagging_cloud(count=20):
    x = np.linspace(0.0, 0.3, count)
    return np.column_stack([x, np.zeros_like(x), -0.5 * x ** 2])


def test_exact_quadratic():
    u = np.linspace(-1.0, 1.0, 25)
    fit = fit_quadratic_projection(np.column_stack([u, 0.3 * u ** 2 - 0.2 * u + 0.1]))
    assert fit.coeffs == pytest.approx((0.3, -0.2, 0.1), abs=1e-12)
    assert fit.rms == pytest.approx(0.0, abs=1e-12)
    assert fit(2.0) == pytest.approx(1.0)


def test_least_squares_optimal():
    generator = np.random.default_rng(7)
    u = np.linspace(-1.0, 1.0, 40)
    v = np.sin(2.0 * u) + generator.normal(0.0, 0.05, u.size)
    fit = fit_quadratic_projection(np.column_stack([u, v]))
    coeffs, *_ = np.linalg.lstsq(np.vander(u, 3), v, rcond=None)
    assert fit.coeffs == pytest.approx(tuple(coeffs), abs=1e-10)
    assert fit.residual <= float(np.linalg.norm(np.vander(u, 3) @ coeffs - v)) + 1e-10


def test_rank_deficient_projection():
    with pytest.raises(CurveFitError):
        fit_quadratic_projection([(0.0, 1.0), (1.0, 2.0)])
    with pytest.raises(CurveFitError, match='distinct'):
        fit_quadratic_projection([(0.0, 1.0), (0.0, 2.0), (1.0, 2.0), (1.0, 3.0)])


def test_fit_picks_widest_axis():
    curve = fit_curve3d(_sagging_cloud())
    assert curve.axis == 'x'
    assert curve.transverse_indices == (1, 2)
    assert curve.coeffs_b == pytest.approx((-0.5, 0.0, 0.0), abs=1e-12)
    assert curve.param_range == pytest.approx((0.0, 0.3))
    assert curve.rms_residual == pytest.approx(0.0, abs=1e-12)
    assert curve.tip_at_max


def test_fit_along_vertical_axis():
    z = np.linspace(-0.4, 0.0, 15)
    curve = fit_curve3d(np.column_stack([0.1 * z ** 2, 0.02 * z, z]))
    assert curve.axis == 'z'
    assert curve.coeffs_a == pytest.approx((0.1, 0.0, 0.0), abs=1e-12)
    assert curve.coeffs_b == pytest.approx((0.0, 0.02, 0.0), abs=1e-12)


def test_degenerate_cloud():
    with pytest.raises(CurveFitError, match='degenerate'):
        fit_curve3d(np.random.default_rng(1).uniform(0.0, 0.005, (10, 3)))
    with pytest.raises(CurveFitError):
        fit_curve3d([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]])
    with pytest.raises(CurveFitError, match='non-finite'):
        fit_curve3d([[0.0, 0.0, 0.0], [0.1, 0.0, np.nan], [0.2, 0.0, 0.0]])


def test_trimming_drops_outliers():
    cloud = _sagging_cloud()
    cloud[[6, 13], 2] += 0.1
    assert fit_curve3d(cloud).rms_residual > 0.01
    trimmed = fit_curve3d(cloud, trim_fraction=0.1)
    assert trimmed.coeffs_b == pytest.approx((-0.5, 0.0, 0.0), abs=1e-10)
    with pytest.raises(CurveFitError):
        fit_curve3d(cloud, trim_fraction=1.0)


def test_sampling_and_lengths():
    curve = PolyCurve3D(axis='x', coeffs_a=(0.0, 1.0, 0.0), coeffs_b=(0.0, 0.0, 0.0), param_range=(0.0, 0.3))
    samples = sample_curve(curve, 7)
    assert samples.shape == (7, 3)
    assert np.all(np.diff(samples[:, 0]) > 0)
    assert samples[-1] == pytest.approx([0.3, 0.3, 0.0])
    assert curve_arc_length(curve) == pytest.approx(0.3 * np.sqrt(2.0), rel=1e-12)
    assert polyline_length(samples) == pytest.approx(curve_arc_length(curve), rel=1e-12)
    bent = fit_curve3d(_sagging_cloud())
    assert polyline_length(sample_curve(bent, 200)) == pytest.approx(curve_arc_length(bent), rel=1e-5)
    assert polyline_length(sample_curve(bent, 200)) <= curve_arc_length(bent)
    with pytest.raises(CurveFitError):
        sample_curve(curve, 1)


def test_grasp_point():
    curve = PolyCurve3D(axis='x', coeffs_a=(0.0, 0.0, 0.0), coeffs_b=(0.0, 0.0, 0.0), param_range=(0.0, 0.3))
    grasp = grasp_point(curve, 0.1)
    assert grasp.point == pytest.approx([0.2, 0.0, 0.0], abs=1e-10)
    assert grasp.tangent == pytest.approx([1.0, 0.0, 0.0])
    assert grasp_point(curve, 0.0).parameter == 0.3
    reversed_tip = fit_curve3d(np.column_stack([np.linspace(0.0, 0.3, 5), np.zeros(5), np.zeros(5)]), tip_hint=(0.0, 0.0, 0.0))
    assert not reversed_tip.tip_at_max
    assert grasp_point(reversed_tip, 0.1).point == pytest.approx([0.1, 0.0, 0.0], abs=1e-10)
    with pytest.raises(CurveFitError):
        grasp_point(curve, 0.31)
    with pytest.raises(CurveFitError):
        grasp_point(curve, -0.01)


def test_fit_sagging_chain():
    model = with_pitch_parameters(identification_subchain(default_bench_model()), [5.0] * 4, [0.0] * 4)
    q = static_equilibrium(model)
    cloud = np.array([point_on_chain(model, q, link, offset) for link in range(1, len(model.links))
                      for offset in np.linspace(0.0, model.links[link].length, 10)])
    curve = fit_curve3d(cloud)
    assert curve.axis == 'x'
    assert curve.rms_residual < 5e-3


def test_point_cloud_files(tmp_path):
    path = tmp_path / 'cloud.csv'
    write_polyline_csv(_sagging_cloud(5), path)
    assert path.read_text(encoding='utf-8').splitlines()[0] == 'x,y,z'
    assert read_point_cloud_csv(path) == pytest.approx(_sagging_cloud(5))
    path.write_text('0.0,0.0,0.0\n0.1,0.0\n', encoding='utf-8')
    with pytest.raises(CurveFitError, match='three coordinates'):
        read_point_cloud_csv(path)
    with pytest.raises(CurveFitError, match='cannot read'):
        read_point_cloud_csv(tmp_path / 'missing.csv')


def test_invalid_curve():
    with pytest.raises(CurveFitError):
        PolyCurve3D(axis='w', coeffs_a=(0.0, 0.0, 0.0), coeffs_b=(0.0, 0.0, 0.0), param_range=(0.0, 1.0))
    with pytest.raises(CurveFitError):
        PolyCurve3D(axis='x', coeffs_a=(0.0, 0.0, 0.0), coeffs_b=(0.0, 0.0, 0.0), param_range=(1.0, 1.0))
