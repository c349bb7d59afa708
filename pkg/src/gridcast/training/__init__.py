from .loop import (EpochRecord, RunRecord, TrainConfig, config_hash, ensemble_mean,
                   evaluate_mse, schedule_for, train)
from .optimizers import (KINDS, Optimizer, OptimizerConfig, STEP_FUNCTIONS, adam_step,
                         adamw_step, lamb_step, sgd_step)
from .schedules import ScheduleConfig, lr_at

__all__ = [
    "EpochRecord", "RunRecord", "TrainConfig", "config_hash", "ensemble_mean",
    "evaluate_mse", "schedule_for", "train", "KINDS", "Optimizer",
    "OptimizerConfig", "STEP_FUNCTIONS", "adam_step", "adamw_step", "lamb_step",
    "sgd_step", "ScheduleConfig", "lr_at",
]
