from .model import (
    JOINT_NAMES,
    BacklashModel,
    JointLimits,
    JointState,
    actuate,
    forward_kinematics,
)
from .ik import NotReachable, inverse_kinematics
from .control import ForceUnreachable, Robot

__all__ = [
    "JOINT_NAMES",
    "BacklashModel",
    "JointLimits",
    "JointState",
    "actuate",
    "forward_kinematics",
    "NotReachable",
    "inverse_kinematics",
    "ForceUnreachable",
    "Robot",
]
