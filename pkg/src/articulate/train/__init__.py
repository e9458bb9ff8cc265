from .losses import DIAGNOSTICS, LossReport, loss_bce, loss_ori, loss_para, loss_pos, loss_state
from .stages import (DEFAULT_EPOCHS, Samples, Stage, StageConfig, evaluate_stage, load_split, movable_only,
                     run_stage, samples_from, score_labels)

__all__ = ["DIAGNOSTICS", "LossReport", "loss_bce", "loss_ori", "loss_para", "loss_pos", "loss_state",
           "DEFAULT_EPOCHS", "Samples", "Stage", "StageConfig", "evaluate_stage", "load_split", "movable_only",
           "run_stage", "samples_from", "score_labels"]
