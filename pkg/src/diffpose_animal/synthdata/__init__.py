from .generate import Sample, make_sample, render, sample_pose
from .skeleton import QUADRUPED_KEYPOINTS, SkeletonSpec, builtin_quadruped
from .split import Split, generate_split, load_split, ppm_bytes, read_ppm

__all__ = [
    "SkeletonSpec", "builtin_quadruped", "QUADRUPED_KEYPOINTS",
    "Sample", "sample_pose", "render", "make_sample",
    "Split", "generate_split", "load_split", "ppm_bytes", "read_ppm",
]
