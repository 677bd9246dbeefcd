from .seeding import set_global_seed, get_rng, derived_rng
from .tensor import Tensor, concat, conv1d_same, index_select, matmul
from .layers import (
    AdditiveAttention, Conv1dSame, Dropout, LSTM, LayerNorm, Linear, Module,
    MultiheadAttention, Parameter, TransformerLayer, sinusoidal_positions,
)
from .optim import Adam
from .serialize import CheckpointError, load_checkpoint, save_checkpoint

__all__ = [
    "Adam", "AdditiveAttention", "CheckpointError", "Conv1dSame", "Dropout",
    "LSTM", "LayerNorm", "Linear", "Module", "MultiheadAttention", "Parameter",
    "Tensor", "TransformerLayer", "concat", "conv1d_same", "derived_rng",
    "get_rng", "index_select", "load_checkpoint", "matmul", "save_checkpoint",
    "set_global_seed", "sinusoidal_positions",
]
