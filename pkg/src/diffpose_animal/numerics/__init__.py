from . import ops
from .gradcheck import GradcheckReport, gradcheck
from .rng import Rng, stable_hash64
from .serial import read_records, write_records
from .tensor import Tape, Tensor, backward

__all__ = [
    "ops", "Tensor", "Tape", "backward", "Rng", "stable_hash64",
    "read_records", "write_records", "gradcheck", "GradcheckReport",
]
