from .model import (BACKBONE, ENCODER_GROUPS, FUSION, HEAD_MOV, HEAD_PARA, HEAD_SCORE, HEAD_TYPE, MLDM,
                    MLDM_WEIGHT, POINTS, PerceptConfig, PerceptionModel, Prediction)

__all__ = ["BACKBONE", "ENCODER_GROUPS", "FUSION", "HEAD_MOV", "HEAD_PARA", "HEAD_SCORE", "HEAD_TYPE", "MLDM",
           "MLDM_WEIGHT", "POINTS", "PerceptConfig", "PerceptionModel", "Prediction"]
from .io import config_from_manifest, load_model, read_manifest, save_model

__all__ += ["config_from_manifest", "load_model", "read_manifest", "save_model"]
