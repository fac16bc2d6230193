from .expert import SUCCESS_TOL, ExpertPolicy, expert_action, expert_success
from .dataset import DemoDataset, DemoRecord, read_dataset, write_dataset
from .collect import collect_demos, observe, run_expert_demo, sample_start_pose
from .pairs import TrainingPair, make_training_pairs

__all__ = [
    "SUCCESS_TOL",
    "ExpertPolicy",
    "expert_action",
    "expert_success",
    "DemoDataset",
    "DemoRecord",
    "read_dataset",
    "write_dataset",
    "collect_demos",
    "observe",
    "run_expert_demo",
    "sample_start_pose",
    "TrainingPair",
    "make_training_pairs",
]
