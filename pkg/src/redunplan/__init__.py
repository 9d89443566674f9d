"""Redundancy resolution for a six-axis arm on a linear rail by dynamic programming."""
from .collision import Scene, load_scene
from .errors import (FixedSlideInfeasible, InstanceTooLarge, ModelError, NoFeasiblePath,
                     RedunplanError, RepresentationSingularity, SingularConfiguration,
                     UnreachableTask)
from .ik import augmented_ik, ik_nodes
from .kinematics import (RobotModel, TaskPath, TaskPose, default_model, forward_kinematics,
                         jacobian_ee, load_robot)
from .planner import GridParams, PlanResult, brute_force_plan, plan
from .stiffness import ETA_Z, force_ellipsoid, mma
from .task import TaskSpec, fixed_slide_plan, load_task, plan_task, synthesize_path

__all__ = [
    "ETA_Z", "FixedSlideInfeasible", "GridParams", "InstanceTooLarge", "ModelError",
    "NoFeasiblePath", "PlanResult", "RedunplanError", "RepresentationSingularity",
    "RobotModel", "Scene", "SingularConfiguration", "TaskPath", "TaskPose", "TaskSpec",
    "UnreachableTask", "augmented_ik", "brute_force_plan", "default_model", "fixed_slide_plan",
    "forward_kinematics", "force_ellipsoid", "ik_nodes", "jacobian_ee", "load_robot",
    "load_scene", "load_task", "mma", "plan", "plan_task", "synthesize_path",
]
