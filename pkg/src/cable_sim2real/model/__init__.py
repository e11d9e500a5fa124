"""Parametric cable model: links, joints, chain state and external loads."""
from cable_sim2real.model.link import LinkSpec  # noqa: F401
from cable_sim2real.model.joint import JointAxis, JointSpec, WELD  # noqa: F401
from cable_sim2real.model.cable import CableModel, default_bench_model, fix_link, identification_subchain, pitch_only, \
    with_pitch_parameters  # noqa: F401
from cable_sim2real.model.state import ChainState, ExternalLoad, check_state, tip_weight, validate_load  # noqa: F401
from cable_sim2real.model.config import load_model, load_model_file, save_model, save_model_file  # noqa: F401
