from .autograd import (
    Tape,
    Tensor,
    add,
    add_const,
    affine,
    bce_with_logits,
    concat_cols,
    matmul_const,
    mse,
    mul_const,
    permute_cols,
    power_normalize,
    relu,
    scale,
    sigmoid,
    slice_cols,
    softmax_cross_entropy,
    sq_dist,
    sum_all,
)
from .gradcheck import grad_check
from .optim import Adam, ParameterSet

__all__ = [
    "Adam", "ParameterSet", "Tape", "Tensor", "add", "add_const", "affine",
    "bce_with_logits", "concat_cols", "grad_check", "matmul_const", "mse",
    "mul_const", "permute_cols", "power_normalize", "relu", "scale",
    "sigmoid", "slice_cols", "softmax_cross_entropy", "sq_dist", "sum_all",
]
