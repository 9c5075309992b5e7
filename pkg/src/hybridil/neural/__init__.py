from .autograd import Tensor, as_tensor, binary_cross_entropy_logits, logsumexp
from .checkpoint import load_checkpoint, save_checkpoint
from .nets import (GMMHeadConfig, GRUCell, MLP, MLPConfig, ParamStore,
                   RecurrentConfig, gmm_nll)
from .optim import Adam, AdamConfig, grad_check

__all__ = [
    "Adam", "AdamConfig", "GMMHeadConfig", "GRUCell", "MLP", "MLPConfig",
    "ParamStore", "RecurrentConfig", "Tensor", "as_tensor",
    "binary_cross_entropy_logits", "gmm_nll", "grad_check", "logsumexp",
    "load_checkpoint", "save_checkpoint",
]
