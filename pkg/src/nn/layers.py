"""
Flight Stack - Network Layers
Dense, 2-D convolution, activation and flatten layers with analytic reverse-mode gradients

Every layer reads its parameters from a flat view handed in by the Network,
so layers themselves hold no state.
"""

from typing import Any, Dict, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..utils import NetworkShapeError

Shape = Tuple[int, ...]


class Layer:
    """Base class: stateless transform over a batch (leading axis)"""

    type_name = "layer"

    @property
    def param_count(self) -> int:
        return 0

    def output_shape(self, input_shape: Shape) -> Shape:
        return input_shape

    def init_params(self, rng: np.random.Generator, mode: str) -> np.ndarray:
        return np.empty(0)

    def forward(self, params: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, params: np.ndarray, cache: Any, grad_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Returns (parameter gradient, input gradient)"""
        raise NotImplementedError

    def spec(self) -> Dict[str, Any]:
        return {"type": self.type_name}


def _wide(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


def _lecun_uniform(rng: np.random.Generator, shape: Shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(3.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Dense(Layer):
    """y = x Wᵀ + b with W stored (out, in) followed by b"""

    type_name = "dense"

    def __init__(self, in_features: int, out_features: int):
        self.in_features = int(in_features)
        self.out_features = int(out_features)

    @property
    def param_count(self) -> int:
        return self.out_features * self.in_features + self.out_features

    def output_shape(self, input_shape: Shape) -> Shape:
        if tuple(input_shape) != (self.in_features,):
            raise NetworkShapeError(f"Dense layer expects ({self.in_features},), got {tuple(input_shape)}",
                                    expected=(self.in_features,), received=tuple(input_shape))
        return (self.out_features,)

    def _split(self, params: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n_weights = self.out_features * self.in_features
        return params[:n_weights].reshape(self.out_features, self.in_features), params[n_weights:]

    def init_params(self, rng: np.random.Generator, mode: str) -> np.ndarray:
        if mode == "zeros":
            return np.zeros(self.param_count)
        weights = _lecun_uniform(rng, (self.out_features, self.in_features), self.in_features)
        return np.concatenate([weights.ravel(), np.zeros(self.out_features)])

    def forward(self, params, x):
        weights, bias = self._split(params)
        y = _wide(x) @ _wide(weights).T + bias
        return y.astype(np.result_type(x, params)), x

    def backward(self, params, cache, grad_out):
        weights, _ = self._split(params)
        x = cache
        grad_w = (_wide(grad_out).T @ _wide(x)).astype(params.dtype)
        grad_b = grad_out.sum(axis=0, dtype=np.float64).astype(params.dtype)
        grad_x = (_wide(grad_out) @ _wide(weights)).astype(np.result_type(grad_out, params))
        return np.concatenate([grad_w.ravel(), grad_b]), grad_x

    def spec(self):
        return {"type": self.type_name, "in": self.in_features, "out": self.out_features}


class Conv2D(Layer):
    """Valid (unpadded) strided convolution over (batch, channels, height, width)"""

    type_name = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, kernel: int, stride: int = 1):
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.kernel = int(kernel)
        self.stride = int(stride)

    @property
    def param_count(self) -> int:
        return self.out_channels * self.in_channels * self.kernel * self.kernel + self.out_channels

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise NetworkShapeError(f"Conv2D expects ({self.in_channels}, H, W), got {tuple(input_shape)}",
                                    expected=(self.in_channels, "H", "W"), received=tuple(input_shape))
        _, height, width = input_shape
        if height < self.kernel or width < self.kernel:
            raise NetworkShapeError(f"Conv2D kernel {self.kernel} larger than input {height}x{width}",
                                    expected=f">= {self.kernel}", received=(height, width))
        return (self.out_channels, (height - self.kernel) // self.stride + 1,
                (width - self.kernel) // self.stride + 1)

    def _split(self, params):
        n_weights = self.out_channels * self.in_channels * self.kernel * self.kernel
        weights = params[:n_weights].reshape(self.out_channels, self.in_channels, self.kernel, self.kernel)
        return weights, params[n_weights:]

    def init_params(self, rng, mode):
        if mode == "zeros":
            return np.zeros(self.param_count)
        fan_in = self.in_channels * self.kernel * self.kernel
        weights = _lecun_uniform(rng, (self.out_channels, self.in_channels, self.kernel, self.kernel), fan_in)
        return np.concatenate([weights.ravel(), np.zeros(self.out_channels)])

    def _windows(self, x: np.ndarray) -> np.ndarray:
        # (B, C, H', W', k, k) view, no copy
        windows = sliding_window_view(x, (self.kernel, self.kernel), axis=(2, 3))
        return windows[:, :, ::self.stride, ::self.stride]

    def forward(self, params, x):
        weights, bias = self._split(params)
        windows = self._windows(x)
        y = np.tensordot(_wide(windows), _wide(weights), axes=([1, 4, 5], [1, 2, 3]))   # (B, H', W', O)
        y = y.transpose(0, 3, 1, 2) + bias[None, :, None, None]
        return np.ascontiguousarray(y, dtype=np.result_type(x, params)), x

    def backward(self, params, cache, grad_out):
        weights, _ = self._split(params)
        x = cache
        windows = self._windows(x)
        grad_w = np.tensordot(_wide(grad_out), _wide(windows), axes=([0, 2, 3], [0, 2, 3]))   # (O, C, k, k)
        grad_w = grad_w.astype(params.dtype)
        grad_b = grad_out.sum(axis=(0, 2, 3), dtype=np.float64).astype(params.dtype)

        # Scatter each kernel tap back onto the strided input grid
        cols = np.tensordot(_wide(grad_out), _wide(weights), axes=([1], [0]))   # (B, H', W', C, k, k)
        grad_x = np.zeros(x.shape, dtype=np.float64)
        out_h, out_w = grad_out.shape[2], grad_out.shape[3]
        span_h = self.stride * (out_h - 1) + 1
        span_w = self.stride * (out_w - 1) + 1
        for i in range(self.kernel):
            for j in range(self.kernel):
                grad_x[:, :, i:i + span_h:self.stride, j:j + span_w:self.stride] += \
                    cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return np.concatenate([grad_w.ravel(), grad_b]), grad_x.astype(np.result_type(x, grad_out))

    def spec(self):
        return {"type": self.type_name, "in_channels": self.in_channels, "out_channels": self.out_channels,
                "kernel": self.kernel, "stride": self.stride}


class Activation(Layer):
    type_name = "activation"
    KINDS = ("tanh", "relu")

    def __init__(self, kind: str):
        if kind not in self.KINDS:
            raise NetworkShapeError(f"Unknown activation '{kind}'", expected=self.KINDS, received=kind)
        self.kind = kind

    def forward(self, params, x):
        if self.kind == "tanh":
            y = np.tanh(x)
            return y, y
        return np.maximum(x, 0.0), x

    def backward(self, params, cache, grad_out):
        if self.kind == "tanh":
            return np.empty(0, dtype=grad_out.dtype), grad_out * (1.0 - cache * cache)
        return np.empty(0, dtype=grad_out.dtype), grad_out * (cache > 0.0)

    def spec(self):
        return {"type": self.type_name, "kind": self.kind}


class Flatten(Layer):
    type_name = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, params, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, params, cache, grad_out):
        return np.empty(0, dtype=grad_out.dtype), grad_out.reshape(cache)


def layer_from_spec(spec: Dict[str, Any]) -> Layer:
    kind = spec.get("type")
    if kind == "dense":
        return Dense(spec["in"], spec["out"])
    if kind == "conv2d":
        return Conv2D(spec["in_channels"], spec["out_channels"], spec["kernel"], spec["stride"])
    if kind == "activation":
        return Activation(spec["kind"])
    if kind == "flatten":
        return Flatten()
    raise NetworkShapeError(f"Unknown layer type '{kind}'", received=kind)
