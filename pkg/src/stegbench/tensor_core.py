"""Elementary 2D grid operations: convolution, activation, pooling.

Convention: ``conv2d`` computes CROSS-CORRELATION (no kernel flip), the
convention of mainstream deep-learning toolkits.  For learned kernels the
flipped and unflipped forms differ only by a re-parameterization, so
nothing downstream depends on the distinction; it matters only when
comparing against hand-computed textbook convolutions.

All grids are 2D float64 numpy arrays.  Padding inserts exact zeros.
Every operation here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ImageGrid = np.ndarray  # 2D float64, row-major


def as_grid(values) -> ImageGrid:
    """Validate and convert to a 2D float64 grid."""
    grid = np.asarray(values, dtype=np.float64)
    if grid.ndim != 2 or grid.shape[0] < 1 or grid.shape[1] < 1:
        raise ValueError(f"grid must be 2D and non-empty, got shape {grid.shape}")
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid contains non-finite values")
    return grid


@dataclass(frozen=True)
class Kernel:
    """Square convolution kernel plus its bias (bias is applied at activation)."""

    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ValueError(f"kernel must be square 2D, got shape {w.shape}")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise ValueError("kernel weights and bias must be finite")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class ConvGeometry:
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")


@dataclass(frozen=True)
class Activation:
    """One of tanh, relu, or gaussian(sigma): exp(-x^2) / sigma^2."""

    kind: str
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("tanh", "relu", "gaussian"):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ValueError(f"gaussian sigma must be positive, got {self.sigma}")


TANH = Activation("tanh")
RELU = Activation("relu")


def gaussian(sigma: float = 1.0) -> Activation:
    return Activation("gaussian", sigma)


@dataclass(frozen=True)
class PoolSpec:
    """Pooling over region x region windows; mode 'none' is a pass-through."""

    region: int = 1
    stride: int = 1
    mode: str = "none"

    def __post_init__(self):
        if self.mode not in ("mean", "max", "none"):
            raise ValueError(f"unknown pool mode {self.mode!r}")
        if self.region < 1 or self.stride < 1:
            raise ValueError("pool region and stride must be >= 1")


NO_POOL = PoolSpec()


def conv_output_dim(input_dim: int, kernel_dim: int, geom: ConvGeometry) -> int:
    """Output side length (input - kernel + 2*padding) / stride + 1.

    Rejects geometries where the quotient is fractional or the output
    would be empty, naming all four quantities in the diagnostic.
    """
    span = input_dim - kernel_dim + 2 * geom.padding
    if span < 0 or span % geom.stride != 0:
        raise ValueError(
            f"invalid convolution geometry: input={input_dim}, "
            f"kernel={kernel_dim}, stride={geom.stride}, padding={geom.padding} "
            f"(input - kernel + 2*padding = {span} must be a non-negative "
            f"multiple of stride)"
        )
    return span // geom.stride + 1


def _pad(grid: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return grid
    return np.pad(grid, padding, mode="constant", constant_values=0.0)


def conv2d(input: ImageGrid, kernel: Kernel, geom: ConvGeometry = ConvGeometry()) -> ImageGrid:
    """Strided zero-padded cross-correlation of one grid with one kernel.

    The kernel bias is NOT added here; biases enter at activation time.
    """
    grid = np.asarray(input, dtype=np.float64)
    out_h = conv_output_dim(grid.shape[0], kernel.size, geom)
    out_w = conv_output_dim(grid.shape[1], kernel.size, geom)
    padded = _pad(grid, geom.padding)
    windows = sliding_window_view(padded, (kernel.size, kernel.size))
    windows = windows[:: geom.stride, :: geom.stride]
    assert windows.shape[:2] == (out_h, out_w)
    return np.einsum("ijuv,uv->ij", windows, kernel.weights, optimize=True)


def conv2d_batch(inputs: np.ndarray, weights: np.ndarray, geom: ConvGeometry) -> np.ndarray:
    """Batched multi-map cross-correlation.

    inputs: (B, M, H, W); weights: (K, M, k, k) -> output (B, K, oh, ow).
    Output map k sums the correlations of every input map m with its own
    weight slice weights[k, m].
    """
    batch, _, height, width = inputs.shape
    k = weights.shape[-1]
    out_h = conv_output_dim(height, k, geom)
    out_w = conv_output_dim(width, k, geom)
    if geom.padding:
        pad = geom.padding
        inputs = np.pad(inputs, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(inputs, (k, k), axis=(2, 3))
    windows = windows[:, :, :: geom.stride, :: geom.stride]
    out = np.einsum("bmijuv,kmuv->bkij", windows, weights, optimize=True)
    assert out.shape == (batch, weights.shape[0], out_h, out_w)
    return out


def activate(x, act: Activation):
    """Elementwise activation; works on scalars and arrays."""
    if act.kind == "tanh":
        return np.tanh(x)
    if act.kind == "relu":
        return np.maximum(0.0, x)
    return np.exp(-np.square(x)) / (act.sigma ** 2)


def activate_grad(x, act: Activation):
    """Derivative of ``activate`` evaluated at pre-activation x."""
    if act.kind == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if act.kind == "relu":
        return (np.asarray(x) > 0).astype(np.float64)
    return -2.0 * x * np.exp(-np.square(x)) / (act.sigma ** 2)


def conv_layer_forward(
    inputs: list[ImageGrid],
    kernels: list[Kernel],
    geom: ConvGeometry = ConvGeometry(),
    act: Activation = TANH,
) -> list[ImageGrid]:
    """One full convolutional stage: sum over input maps, add bias, activate.

    Every kernel is applied to (and summed over) ALL input maps, producing
    one output map per kernel.
    """
    if not inputs:
        raise ValueError("conv_layer_forward needs at least one input grid")
    if not kernels:
        raise ValueError("conv_layer_forward needs at least one kernel")
    shape = inputs[0].shape
    if any(grid.shape != shape for grid in inputs):
        raise ValueError(
            f"heterogeneous input dims: {[grid.shape for grid in inputs]}"
        )
    size = kernels[0].size
    if any(kern.size != size for kern in kernels):
        raise ValueError("all kernels in a layer must share one size")
    outputs = []
    for kern in kernels:
        acc = conv2d(inputs[0], kern, geom)
        for grid in inputs[1:]:
            acc += conv2d(grid, kern, geom)
        outputs.append(activate(acc + kern.bias, act))
    return outputs


def _pool_windows(grid: np.ndarray, spec: PoolSpec) -> np.ndarray:
    height, width = grid.shape
    for dim, name in ((height, "height"), (width, "width")):
        if dim < spec.region or (dim - spec.region) % spec.stride != 0:
            raise ValueError(
                f"pooling does not tile the input: {name}={dim}, "
                f"region={spec.region}, stride={spec.stride}"
            )
    windows = sliding_window_view(grid, (spec.region, spec.region))
    return windows[:: spec.stride, :: spec.stride]


def pool(input: ImageGrid, spec: PoolSpec) -> ImageGrid:
    """Mean or max pooling over region x region windows; 'none' is identity."""
    grid = np.asarray(input, dtype=np.float64)
    if spec.mode == "none":
        return grid
    windows = _pool_windows(grid, spec)
    if spec.mode == "mean":
        return windows.mean(axis=(2, 3))
    return windows.max(axis=(2, 3))


def pool_output_dim(input_dim: int, spec: PoolSpec) -> int:
    if spec.mode == "none":
        return input_dim
    if input_dim < spec.region or (input_dim - spec.region) % spec.stride != 0:
        raise ValueError(
            f"pooling does not tile the input: dim={input_dim}, "
            f"region={spec.region}, stride={spec.stride}"
        )
    return (input_dim - spec.region) // spec.stride + 1
