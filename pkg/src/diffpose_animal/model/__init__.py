from .denoiser import (
    cross_attend,
    decode_keypoints,
    denoise,
    encode_image,
    forward,
    fuse_condition,
    timestep_embedding,
)
from .params import PARAM_ORDER, DenoiserParams, init_params, param_shapes

__all__ = [
    "DenoiserParams", "PARAM_ORDER", "init_params", "param_shapes",
    "encode_image", "fuse_condition", "cross_attend", "decode_keypoints",
    "denoise", "forward", "timestep_embedding",
]
