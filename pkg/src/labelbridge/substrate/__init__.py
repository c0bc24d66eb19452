"""Deterministic differentiable core: tensors, tape autodiff, layers, Adam."""

from labelbridge.substrate.functional import cross_entropy, softmax
from labelbridge.substrate.gradcheck import NonDifferentiableError, check_module, grad_check
from labelbridge.substrate.kernels import BACKEND
from labelbridge.substrate.layers import (
    Encoder,
    EncoderConfig,
    GruParams,
    Linear,
    Module,
    dropout,
    encoder_forward,
    gru_sequence,
    gru_step,
)
from labelbridge.substrate.optim import Adam, AdamHyper, AdamState, optimizer_step
from labelbridge.substrate.rng import Rng, sample_categorical
from labelbridge.substrate.serialize import load_arrays, save_arrays
from labelbridge.substrate.tensor import NonFiniteError, Tensor, no_grad

__all__ = [
    "BACKEND",
    "Adam",
    "AdamHyper",
    "AdamState",
    "Encoder",
    "EncoderConfig",
    "GruParams",
    "Linear",
    "Module",
    "NonDifferentiableError",
    "NonFiniteError",
    "Rng",
    "Tensor",
    "check_module",
    "cross_entropy",
    "dropout",
    "encoder_forward",
    "grad_check",
    "gru_sequence",
    "gru_step",
    "load_arrays",
    "no_grad",
    "optimizer_step",
    "sample_categorical",
    "save_arrays",
    "softmax",
]
