"""
Flight Stack - Network
Ordered layer stack over one contiguous parameter vector, with forward caches and reverse-mode backward
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils import NetworkShapeError
from .layers import Activation, Conv2D, Dense, Flatten, Layer, Shape

INIT_MODES = ("lecun", "zeros")


@dataclass
class ForwardCache:
    """Per-layer caches of one forward pass; consumed by Network.backward"""
    layer_caches: List[Any]
    batched: bool


class Network:
    """
    Feed-forward network over a flat parameter vector

    Args:
        layers: Ordered layers; adjacent shapes must be compatible
        input_shape: Per-sample input shape, e.g. (24,) or (1, 48, 64)
        params: Optional flat parameter vector (defaults to zeros)
        dtype: Parameter dtype, float32 unless promoted for gradient checks
        metadata: Free-form values stored in checkpoints
    """

    def __init__(self, layers: Sequence[Layer], input_shape: Shape, params: Optional[np.ndarray] = None,
                 dtype=np.float32, metadata: Optional[Dict[str, Any]] = None):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.dtype = np.dtype(dtype)
        self.metadata = dict(metadata or {})

        self.shapes = [self.input_shape]
        for index, layer in enumerate(self.layers):
            try:
                self.shapes.append(layer.output_shape(self.shapes[-1]))
            except NetworkShapeError as e:
                raise NetworkShapeError(f"Layer {index} ({layer.type_name}): {e.message}", layer_index=index,
                                        expected=e.details.get("expected"),
                                        received=e.details.get("received")) from e

        counts = [layer.param_count for layer in self.layers]
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(int)
        if params is None:
            params = np.zeros(self.param_count)
        params = np.asarray(params)
        if params.shape != (self.param_count,):
            raise NetworkShapeError(f"Parameter vector has {params.size} entries, network needs {self.param_count}",
                                    expected=self.param_count, received=params.size)
        self.params = params.astype(self.dtype).copy()

    @property
    def param_count(self) -> int:
        return int(self.offsets[-1])

    @property
    def output_shape(self) -> Shape:
        return self.shapes[-1]

    def layer_params(self, index: int) -> np.ndarray:
        return self.params[self.offsets[index]:self.offsets[index + 1]]

    def initialize(self, seed: Union[int, np.random.Generator] = 0, mode: str = "lecun") -> "Network":
        """Fill parameters in place (uniform scaled by fan-in, or zeros)"""
        if mode not in INIT_MODES:
            raise NetworkShapeError(f"Unknown init mode '{mode}'", expected=INIT_MODES, received=mode)
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        pieces = [layer.init_params(rng, mode) for layer in self.layers]
        self.params = np.concatenate(pieces).astype(self.dtype) if pieces else np.empty(0, dtype=self.dtype)
        return self

    def copy(self) -> "Network":
        return Network(self.layers, self.input_shape, self.params, self.dtype, self.metadata)

    def to_dtype(self, dtype) -> "Network":
        """Copy with parameters cast to another dtype (float64 for gradient checks)"""
        return Network(self.layers, self.input_shape, self.params.astype(dtype), dtype, self.metadata)

    def set_params(self, params: np.ndarray) -> None:
        params = np.asarray(params)
        if params.shape != self.params.shape:
            raise NetworkShapeError("Parameter vector length mismatch", expected=self.params.shape,
                                    received=params.shape)
        self.params = params.astype(self.dtype).copy()

    def _prepare_input(self, x: np.ndarray) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x)
        if x.shape == self.input_shape:
            return x[None].astype(self.dtype), False
        if x.shape[1:] != self.input_shape:
            raise NetworkShapeError(f"Layer 0 expects input shape {self.input_shape}, got {x.shape[1:]}",
                                    layer_index=0, expected=self.input_shape, received=x.shape)
        return x.astype(self.dtype), True

    def forward_with_cache(self, x: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
        """
        Layer-by-layer evaluation keeping what backward needs

        Accepts a single sample of ``input_shape`` or a batch with a leading axis.
        """
        h, batched = self._prepare_input(x)
        caches = []
        for index, layer in enumerate(self.layers):
            h, cache = layer.forward(self.layer_params(index), h)
            caches.append(cache)
        return (h if batched else h[0]), ForwardCache(caches, batched)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_with_cache(x)[0]

    __call__ = forward

    def backward(self, cache: Optional[ForwardCache], grad_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Reverse-mode gradient of a scalar loss with the given output gradient

        Returns:
            (flat parameter gradient aligned with ``params``, input gradient)

        Raises:
            NetworkShapeError: If no forward cache is supplied or shapes disagree
        """
        if cache is None:
            raise NetworkShapeError("Backward needs the cache of a forward pass", layer_index=len(self.layers) - 1)
        grad = np.asarray(grad_out, dtype=self.dtype)
        if not cache.batched:
            grad = grad[None]
        if grad.shape[1:] != self.output_shape:
            raise NetworkShapeError(f"Output gradient shape {grad.shape[1:]} does not match {self.output_shape}",
                                    layer_index=len(self.layers) - 1, expected=self.output_shape,
                                    received=grad.shape[1:])

        param_grads = [None] * len(self.layers)
        for index in range(len(self.layers) - 1, -1, -1):
            layer_grad, grad = self.layers[index].backward(self.layer_params(index), cache.layer_caches[index], grad)
            param_grads[index] = np.asarray(layer_grad, dtype=self.dtype)
        flat = np.concatenate(param_grads) if param_grads else np.empty(0, dtype=self.dtype)
        return flat, (grad if cache.batched else grad[0])

    def spec(self) -> Dict[str, Any]:
        return {"input_shape": list(self.input_shape), "layers": [layer.spec() for layer in self.layers]}

    def describe(self) -> str:
        rows = [f"input {self.input_shape}"]
        for layer, shape in zip(self.layers, self.shapes[1:]):
            rows.append(f"{layer.type_name:<10} -> {shape} ({layer.param_count} params)")
        return "\n".join(rows)


# ---------------------------------------------------------------------------
# Architectures
# ---------------------------------------------------------------------------

def build_mlp(input_dim: int, hidden: Sequence[int], output_dim: int, activation: str = "tanh",
              squash: bool = False, seed: int = 0, init: str = "lecun") -> Network:
    """MLP with the given hidden widths; ``squash`` appends tanh on the output"""
    layers: List[Layer] = []
    width = input_dim
    for size in hidden:
        layers += [Dense(width, size), Activation(activation)]
        width = size
    layers.append(Dense(width, output_dim))
    if squash:
        layers.append(Activation("tanh"))
    return Network(layers, (input_dim,)).initialize(seed, init)


def build_encoder(height: int, width: int, embedding_dim: int = 64, seed: int = 0) -> Network:
    """Three stride-2 4x4 convolutions (1→8→16→32 channels), flatten, dense to the embedding"""
    layers: List[Layer] = [
        Conv2D(1, 8, 4, 2), Activation("relu"),
        Conv2D(8, 16, 4, 2), Activation("relu"),
        Conv2D(16, 32, 4, 2), Activation("relu"),
        Flatten(),
    ]
    shape_net = Network(layers, (1, height, width))
    layers.append(Dense(shape_net.output_shape[0], embedding_dim))
    return Network(layers, (1, height, width), metadata={"role": "encoder"}).initialize(seed)


def build_decoder(height: int, width: int, embedding_dim: int = 64, seed: int = 0) -> Network:
    """Three dense layers 256 → 1024 → H·W reconstructing the flattened normalized image"""
    layers: List[Layer] = [
        Dense(embedding_dim, 256), Activation("relu"),
        Dense(256, 1024), Activation("relu"),
        Dense(1024, height * width),
    ]
    return Network(layers, (embedding_dim,), metadata={"role": "decoder"}).initialize(seed)
