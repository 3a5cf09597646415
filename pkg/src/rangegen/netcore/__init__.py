"""Minimal dense-network compute kernel.

Forward/backward passes for linear layers, SELU, logistic outputs, plain and
condition-modulated batch normalization; Adam with a step-decay schedule;
finite-difference gradient checking; lossless parameter serialization.
Everything runs in 64-bit floats on plain numpy arrays.
"""

from rangegen.netcore.adam import Adam, effective_learning_rate
from rangegen.netcore.checkpoint import (
    array_from_doc,
    array_to_doc,
    load_document,
    save_document,
)
from rangegen.netcore.gradcheck import grad_check
from rangegen.netcore.layers import (
    SELU_ALPHA,
    SELU_SCALE,
    BatchNorm,
    CondBatchNorm,
    Dense,
    Logistic,
    Selu,
    logistic,
    selu,
    selu_deriv,
)

__all__ = [
    "Adam",
    "BatchNorm",
    "CondBatchNorm",
    "Dense",
    "Logistic",
    "SELU_ALPHA",
    "SELU_SCALE",
    "Selu",
    "array_from_doc",
    "array_to_doc",
    "effective_learning_rate",
    "grad_check",
    "load_document",
    "logistic",
    "save_document",
    "selu",
    "selu_deriv",
]
