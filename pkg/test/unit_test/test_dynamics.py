"""Tests of the Newton-Euler inverse dynamics."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cable_sim2real.dynamics import bias_forces, dynamics_terms, gravity_torque, inverse_dynamics_full, load_torque, mass_matrix, \
    mass_matrix_and_bias, potential_energy, rne, rne_batch, static_torque
from cable_sim2real.errors import DimensionError
from cable_sim2real.kinematics import jacobian
from cable_sim2real.model import CableModel, ChainState, ExternalLoad, JointAxis, JointSpec, default_bench_model, fix_link, tip_weight
from cable_sim2real.validation import two_link_model, two_link_torque

states = st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=6, max_size=6)


@settings(max_examples=100, deadline=None)
@given(states)
def test_two_link_matches_lagrangian(values):
    model = two_link_model()
    q, qd, qdd = (np.array(values[index:index + 2])[np.newaxis, :] for index in (0, 2, 4))
    assert rne_batch(model, q, qd, qdd) == pytest.approx(two_link_torque(model, q, qd, qdd), abs=1e-8)


def test_two_link_batch_of_thousand_states():
    generator = np.random.default_rng(3)
    model = two_link_model()
    q = generator.uniform(-np.pi, np.pi, (1000, 2))
    qd = generator.uniform(-3.0, 3.0, (1000, 2))
    qdd = generator.uniform(-10.0, 10.0, (1000, 2))
    assert np.max(np.abs(rne_batch(model, q, qd, qdd) - two_link_torque(model, q, qd, qdd))) < 1e-8


def test_single_rod_holding_torque():
    model = CableModel(links=two_link_model().links[:2], joints=two_link_model().joints[:1])
    link = model.links[1]
    for angle in (-1.0, 0.0, 0.4):
        assert gravity_torque(model, [angle])[0] == pytest.approx(-link.mass * 9.8 * link.com_offset * np.cos(angle), abs=1e-14)


def test_horizontal_bench_link_holding_torque():
    model = CableModel(links=default_bench_model().links[:2], joints=(JointSpec(axes=(JointAxis.PITCH,)),))
    # m g c of the 5 cm / 50 g link, negative because positive pitch sags down
    assert gravity_torque(model, [0.0])[0] == pytest.approx(-0.05 * 9.8 * 0.025)
    assert gravity_torque(model, [math.pi / 2])[0] == pytest.approx(0.0, abs=1e-15)
    assert gravity_torque(model, [-0.3])[0] == pytest.approx(gravity_torque(model, [0.3])[0])


@pytest.fixture
def fixed_bench():
    return fix_link(default_bench_model(), 5)


def test_mass_matrix_is_symmetric_positive_definite(fixed_bench):
    generator = np.random.default_rng(0)
    matrices = mass_matrix(fixed_bench, generator.uniform(-1.0, 1.0, (20, fixed_bench.dof)))
    assert matrices.shape == (20, 8, 8)
    assert np.max(np.abs(matrices - np.swapaxes(matrices, 1, 2))) < 1e-9
    assert np.min(np.linalg.eigvalsh(matrices)) > 0.0


def test_rne_equals_mass_matrix_and_bias(fixed_bench):
    generator = np.random.default_rng(1)
    for _ in range(50):
        q, qd, qdd = (generator.uniform(-1.0, 1.0, fixed_bench.dof) for _ in range(3))
        matrix, bias = mass_matrix_and_bias(fixed_bench, q, qd)
        assert np.max(np.abs(rne(fixed_bench, ChainState(q=q, qd=qd, qdd=qdd)) - (matrix @ qdd + bias))) < 1e-10
        assert matrix == pytest.approx(mass_matrix(fixed_bench, q), abs=1e-14)
        assert bias == pytest.approx(bias_forces(fixed_bench, q, qd), abs=1e-14)


def test_gravity_off_at_rest_is_zero(fixed_bench):
    state = ChainState(q=np.full(fixed_bench.dof, 0.3))
    assert np.all(np.abs(rne(fixed_bench, state, gravity_on=False)) < 1e-15)


def test_load_torque_is_transposed_jacobian(fixed_bench):
    q = np.linspace(-0.4, 0.6, fixed_bench.dof)
    load = ExternalLoad(link=3, offset=0.02, wrench=[0.3, -0.2, -1.0, 0.01, 0.02, -0.03])
    expected = -jacobian(fixed_bench, q, link=3, offset=0.02).T @ load.wrench
    assert load_torque(fixed_bench, q, [load]) == pytest.approx(expected, abs=1e-12)


def test_gravity_and_weight_are_the_potential_gradient(fixed_bench):
    q = np.array([0.3, 0.0, 0.2, 0.0, -0.1, 0.0, 0.4, 0.0])
    loads = [tip_weight(fixed_bench, 0.1)]
    h = 1e-6
    gradient = np.array([(potential_energy(fixed_bench, q + h * unit, loads) - potential_energy(fixed_bench, q - h * unit, loads)) / (2 * h)
                         for unit in np.eye(q.size)])
    assert gravity_torque(fixed_bench, q) + load_torque(fixed_bench, q, loads) == pytest.approx(gradient, abs=1e-7)


def test_static_and_full_torque_add_springs(chain):
    q = np.array([0.1, 0.2, 0.3, 0.4])
    qd = np.array([0.5, -0.5, 0.1, 0.0])
    assert static_torque(chain, q) == pytest.approx(gravity_torque(chain, q) + 0.5 * q)
    full = inverse_dynamics_full(chain, ChainState(q=q, qd=qd))
    assert full == pytest.approx(bias_forces(chain, q, qd) + 0.5 * q + 0.1 * qd)


def test_dynamics_terms(chain):
    state = ChainState(q=[0.1, 0.2, 0.3, 0.4], qd=[0.1, 0.0, -0.2, 0.3], qdd=[1.0, 2.0, -1.0, 0.5])
    terms = dynamics_terms(chain, state, [tip_weight(chain, 0.05)])
    assert terms.rne_torque == pytest.approx(rne(chain, state), abs=1e-12)
    assert terms.gravity_torque == pytest.approx(gravity_torque(chain, state.q))
    assert terms.load_torque == pytest.approx(load_torque(chain, state.q, [tip_weight(chain, 0.05)]))
    assert np.all(dynamics_terms(chain, state).load_torque == 0.0)


def test_dimension_errors(chain):
    with pytest.raises(DimensionError):
        rne_batch(chain, np.zeros(3))
    with pytest.raises(DimensionError):
        rne(chain, ChainState(q=np.zeros(5)))
