from .dataset import (DatasetConfig, Dataset, IndexEntry, RecordPlan, SPLITS, choose_viewpoint, from_record,
                      make_dataset, plan_split, realize, record_dtype, to_record)
from .render import (N_VIEWPOINTS, CameraPose, CameraRig, Intrinsics, Observation, back_project, camera_pose,
                     part_pixel_counts, rasterize, render)
from .scene import CATEGORIES, Category, Part, Scene, generate_scene

__all__ = ["DatasetConfig", "Dataset", "IndexEntry", "RecordPlan", "SPLITS", "choose_viewpoint", "from_record",
           "make_dataset", "plan_split", "realize", "record_dtype", "to_record",
           "N_VIEWPOINTS", "CameraPose", "CameraRig", "Intrinsics", "Observation", "back_project", "camera_pose",
           "part_pixel_counts", "rasterize", "render", "CATEGORIES", "Category", "Part", "Scene", "generate_scene"]
