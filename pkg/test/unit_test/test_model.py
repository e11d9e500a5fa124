"""Tests of the cable model, its JSON document and the chain state."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cable_sim2real.errors import ConfigurationError, DimensionError, JointLimitError, ModelError
from cable_sim2real.model import CableModel, ChainState, ExternalLoad, JointAxis, JointSpec, LinkSpec, WELD, fix_link, \
    default_bench_model, identification_subchain, load_model, pitch_only, save_model, tip_weight, with_pitch_parameters
from cable_sim2real.model.config import model_to_dict
from cable_sim2real.model.state import check_state, validate_load


def test_bench_model_layout(bench_model):
    assert len(bench_model.links) == 16
    assert len(bench_model.joints) == 15
    assert bench_model.joints[-1] is WELD
    assert bench_model.dof == 28
    assert bench_model.links[-1].mass == pytest.approx(0.1)
    assert bench_model.moving_mass() == pytest.approx(14 * 0.05 + 0.1)
    # roll is locked by its limits
    roll = [index for index, (_, axis) in enumerate(bench_model.dof_axes) if axis is JointAxis.ROLL]
    assert np.all(bench_model.locked[roll])
    assert not np.any(bench_model.locked[[index for index in range(bench_model.dof) if index not in roll]])


def test_slender_rod_inertia():
    link = LinkSpec.slender_rod(length=0.05, mass=0.05)
    assert link.com_offset == pytest.approx(0.025)
    assert link.inertia_matrix[1, 1] == pytest.approx(0.05 * 0.05 ** 2 / 12.0)
    assert link.inertia_matrix[1, 1] == link.inertia_matrix[2, 2]


@pytest.mark.parametrize('kwargs, path', [
    ({'length': 0.0, 'mass': 1.0, 'com_offset': 0.0, 'inertia': ((0, 0, 0), (0, 0, 0), (0, 0, 0))}, 'length_m'),
    ({'length': 1.0, 'mass': -1.0, 'com_offset': 0.5, 'inertia': ((0, 0, 0), (0, 0, 0), (0, 0, 0))}, 'mass_kg'),
    ({'length': 1.0, 'mass': 1.0, 'com_offset': 1.5, 'inertia': ((0, 0, 0), (0, 0, 0), (0, 0, 0))}, 'com_offset_m'),
    ({'length': 1.0, 'mass': 1.0, 'com_offset': 0.5, 'inertia': ((1, 0.5, 0), (0, 1, 0), (0, 0, 1))}, 'inertia_kgm2'),
    ({'length': 1.0, 'mass': 1.0, 'com_offset': 0.5, 'inertia': ((-1, 0, 0), (0, 1, 0), (0, 0, 1))}, 'inertia_kgm2'),
])
def test_link_invariants(kwargs, path):
    with pytest.raises(ModelError) as info:
        LinkSpec(**kwargs)
    assert info.value.path == path


def test_joint_invariants():
    with pytest.raises(ModelError):
        JointSpec(axes=(JointAxis.ROLL, JointAxis.PITCH))
    with pytest.raises(ModelError):
        JointSpec(axes=(JointAxis.PITCH,), stiffness=(-1.0,))
    with pytest.raises(ModelError):
        JointSpec(axes=(JointAxis.PITCH,), limits=((1.0, -1.0),))
    joint = JointSpec(axes=(JointAxis.PITCH, JointAxis.ROLL))
    assert joint.limits == ((-math.pi / 2, math.pi / 2), (0.0, 0.0))
    assert joint.with_axis_parameters(JointAxis.PITCH, stiffness=2.0).stiffness == (2.0, 0.0)


def test_joint_count_must_match():
    link = LinkSpec.slender_rod(0.05, 0.05)
    with pytest.raises(ModelError) as info:
        CableModel(links=(link, link), joints=())
    assert info.value.path == 'joints'


def test_fix_link_reroots_from_the_tip(bench_model):
    fixed = fix_link(bench_model, 5)
    assert len(fixed.links) == 6
    assert fixed.links[0] is bench_model.links[10]
    assert fixed.dof == 8
    assert int(np.sum(~fixed.locked)) == 4
    with pytest.raises(ModelError):
        fix_link(bench_model, 0)
    with pytest.raises(ModelError):
        fix_link(bench_model, 16)


def test_identification_subchain(bench_model):
    chain = identification_subchain(bench_model)
    assert chain.dof == 4
    assert all(axis is JointAxis.PITCH for _, axis in chain.dof_axes)
    assert len(chain.links) == 6
    with pytest.raises(ModelError):
        identification_subchain(bench_model, dof=15)


def test_pitch_only_drops_roll(bench_model):
    assert pitch_only(bench_model).dof == 14


def test_with_pitch_parameters_matches_from_the_tip(bench_model):
    model = with_pitch_parameters(bench_model, [1.0, 2.0], [0.1, 0.2], fill_remaining=True)
    pitch = [index for index, (_, axis) in enumerate(model.dof_axes) if axis is JointAxis.PITCH]
    assert model.stiffness[pitch][-2:] == pytest.approx([1.0, 2.0])
    assert model.damping[pitch][-2:] == pytest.approx([0.1, 0.2])
    assert model.stiffness[pitch][:-2] == pytest.approx([1.5] * 12)
    with pytest.raises(ModelError):
        with_pitch_parameters(bench_model, [1.0], [0.1, 0.2])


def test_model_document_round_trip(bench_model):
    model = with_pitch_parameters(bench_model, [0.123456789012345] * 14, [0.001] * 14)
    loaded = load_model(save_model(model))
    assert loaded == model
    assert model_to_dict(loaded) == model_to_dict(model)


def test_model_document_defaults():
    document = {'cable': {'links': [{'length_m': 0.05, 'mass_kg': 0.05}] * 3,
                          'joints': [{'axes': ['pitch'], 'stiffness_nm_per_rad': [0.5]}, {'axes': []}]}}
    model = load_model(json.dumps(document))
    assert model.dof == 1
    assert model.name == 'cable'
    assert model.gravity == (0.0, 0.0, -9.8)
    assert model.links[1].com_offset == pytest.approx(0.025)


@pytest.mark.parametrize('mutate, path', [
    (lambda cable: cable['links'][3].update(mass_kg=-0.05), 'cable.links[3].mass_kg'),
    (lambda cable: cable['links'][2].update(colour='red'), 'cable.links[2]'),
    (lambda cable: cable['joints'][1].update(axes=['yaw']), 'cable.joints[1].axes'),
    (lambda cable: cable['joints'][0].update(stiffness_nm_per_rad=[-1.0, 0.0]), 'cable.joints[0].stiffness_nm_per_rad[0]'),
    (lambda cable: cable.update(gravity_mps2='down'), 'cable.gravity_mps2'),
])
def test_model_document_errors_name_the_key(bench_model, mutate, path):
    document = model_to_dict(bench_model)
    mutate(document['cable'])
    with pytest.raises(ConfigurationError) as info:
        load_model(json.dumps(document))
    assert info.value.path == path


def test_invalid_json():
    with pytest.raises(ConfigurationError):
        load_model('{"cable": ')


def test_chain_state_is_immutable():
    state = ChainState(q=[0.1, 0.2])
    assert np.all(state.qd == 0.0)
    with pytest.raises(ValueError):
        state.q[0] = 1.0
    assert state == ChainState(q=np.array([0.1, 0.2]))
    with pytest.raises(DimensionError):
        ChainState(q=[0.1, 0.2], qd=[0.0])


def test_check_state(chain):
    check_state(chain, ChainState(q=[0.1] * 4))
    with pytest.raises(DimensionError):
        check_state(chain, ChainState(q=[0.1] * 3))
    with pytest.raises(JointLimitError):
        check_state(chain, ChainState(q=[0.1, 0.1, 2.0, 0.1]))
    check_state(chain, ChainState(q=[0.1, 0.1, 2.0, 0.1]), check_limits=False)


def test_tip_weight(chain):
    load = tip_weight(chain, 0.1)
    assert load.link == len(chain.links) - 1
    assert load.offset == pytest.approx(0.1)
    assert load.force == pytest.approx([0.0, 0.0, -0.98])
    assert load.scaled(2.0).force == pytest.approx([0.0, 0.0, -1.96])
    with pytest.raises(ModelError):
        tip_weight(chain, -1.0)
    with pytest.raises(ModelError):
        validate_load(chain, ExternalLoad(link=1, offset=0.2, wrench=np.zeros(6)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=14, max_size=14))
def test_round_trip_keeps_every_stiffness(stiffness):
    model = with_pitch_parameters(default_bench_model(), stiffness, [0.0] * 14)
    assert np.array_equal(load_model(save_model(model)).stiffness, model.stiffness)
