from .keying import ScrambleParams, SessionKey, dct_matrix, descramble, scramble
from .models import D_INPUT, D_SEM, KEY_LEN
from .pipeline import (
    CodecBundle,
    CodecPipeline,
    CovertBundle,
    PrivateBundle,
    accuracy,
    compose_pipeline,
    softmax_np,
)
from .registry import (
    BASE_KINDS,
    COVERT,
    NORMAL,
    PRIVATE,
    ROBUST,
    ExpertRegistry,
    TrainedExpert,
)
from .training import (
    SUPPORTED_RHOS,
    train_covert_compressor,
    train_normal,
    train_private,
    train_robust_sdm,
)

__all__ = [
    "BASE_KINDS", "COVERT", "NORMAL", "PRIVATE", "ROBUST", "D_INPUT",
    "D_SEM", "KEY_LEN", "SUPPORTED_RHOS", "CodecBundle", "CodecPipeline",
    "CovertBundle", "ExpertRegistry", "PrivateBundle", "ScrambleParams",
    "SessionKey", "TrainedExpert", "accuracy", "compose_pipeline",
    "dct_matrix", "descramble", "scramble", "softmax_np",
    "train_covert_compressor", "train_normal", "train_private",
    "train_robust_sdm",
]
