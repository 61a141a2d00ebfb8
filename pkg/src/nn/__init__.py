"""
Flight Stack - Neural Network Package

Minimal numpy network engine: layers, flat-parameter networks, Adam and checkpoints.
"""

from .layers import Activation, Conv2D, Dense, Flatten, Layer, layer_from_spec
from .network import ForwardCache, Network, build_decoder, build_encoder, build_mlp
from .optim import AdamState, adam_step, global_norm_clip, mse_loss
from .checkpoint import (
    load_checkpoint,
    parameter_checksum,
    read_checkpoint,
    save_checkpoint,
    write_checkpoint
)

__all__ = [
    # Layers
    'Activation',
    'Conv2D',
    'Dense',
    'Flatten',
    'Layer',
    'layer_from_spec',

    # Networks
    'ForwardCache',
    'Network',
    'build_decoder',
    'build_encoder',
    'build_mlp',

    # Optimization
    'AdamState',
    'adam_step',
    'global_norm_clip',
    'mse_loss',

    # Checkpoints
    'load_checkpoint',
    'parameter_checksum',
    'read_checkpoint',
    'save_checkpoint',
    'write_checkpoint'
]
