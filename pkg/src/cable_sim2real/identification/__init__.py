"""Identification of joint stiffness and damping from recorded tag poses."""
from cable_sim2real.identification.pose_log import PoseLog, TagLayout, associate, joint_angles, poses_to_joint_angles, \
    read_pose_log_csv, read_tag_layout, write_pose_log_csv, write_tag_layout  # noqa: F401
from cable_sim2real.identification.differentiation import StateSample, differentiate_log, split_samples, \
    velocity_thresholds  # noqa: F401
from cable_sim2real.identification.estimator import IdentificationSettings, IdentifiedParams, JointEstimate, identify_damping, \
    identify_from_samples, identify_stiffness, jointwise_least_squares, run_identification, update_model  # noqa: F401
from cable_sim2real.identification.synthetic import NoiseStudyResult, SyntheticExperiment, noise_study, synthesize_pose_log  # noqa: F401
