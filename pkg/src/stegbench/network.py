"""Two-class convolutional detector: assembly, inference, backpropagation.

The network is a chain of convolutional stages (each: multi-map strided
cross-correlation, bias, activation, optional pooling) followed by a
single affine layer into two log-softmax outputs (class 0 = cover,
class 1 = stego).

Flattening order is fixed: feature-map-major, row-major inside each map.
The output layer's weights are indexed against that order, so it is part
of the checkpoint contract.

Weight initialization: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] with
fan_in = incoming map count * kernel_size^2 (feature count for the output
layer); all biases start at zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor_core import (
    NO_POOL,
    Activation,
    ConvGeometry,
    PoolSpec,
    TANH,
    activate,
    activate_grad,
    conv2d_batch,
    conv_output_dim,
    pool_output_dim,
)


@dataclass(frozen=True)
class ConvLayerSpec:
    kernel_count: int
    kernel_size: int
    geom: ConvGeometry = ConvGeometry()
    act: Activation = TANH
    pool: PoolSpec = NO_POOL

    def __post_init__(self):
        if self.kernel_count < 1 or self.kernel_size < 1:
            raise ValueError("kernel_count and kernel_size must be >= 1")


@dataclass(frozen=True)
class NetworkSpec:
    input_size: int
    conv_layers: tuple[ConvLayerSpec, ...]
    output_classes: int = 2

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(self.conv_layers))
        if self.input_size < 1:
            raise ValueError("input_size must be >= 1")
        if self.output_classes != 2:
            raise ValueError("this detector is strictly two-class")
        if not self.conv_layers:
            raise ValueError("at least one convolutional layer is required")


def desk_network_spec(input_size: int, second_layer_kernels: int = 16) -> NetworkSpec:
    """Scaled-down variant of the reference architecture.

    First stage: a single 3x3 kernel (a learned global filter).  Second
    stage: kernels as large as possible, side input_size - 3, so the final
    feature maps are always 2x2 regardless of scale.  tanh throughout,
    no pooling.
    """
    if input_size < 6:
        raise ValueError(f"input_size must be >= 6 for the desk layout, got {input_size}")
    return NetworkSpec(
        input_size=input_size,
        conv_layers=(
            ConvLayerSpec(kernel_count=1, kernel_size=3),
            ConvLayerSpec(kernel_count=second_layer_kernels, kernel_size=input_size - 3),
        ),
    )


def paper_network_spec() -> NetworkSpec:
    """Full-scale layout: 512 -> 3x3 -> 510 -> 64 x 509x509 -> 2x2."""
    return desk_network_spec(512, second_layer_kernels=64)


@dataclass(frozen=True)
class LayerDims:
    maps_in: int
    side_in: int
    side_conv: int
    side_out: int  # after pooling


def dimension_chain(spec: NetworkSpec) -> list[LayerDims]:
    """Per-layer map sizes; raises naming the first failing layer."""
    dims = []
    maps_in, side = 1, spec.input_size
    for index, layer in enumerate(spec.conv_layers):
        try:
            side_conv = conv_output_dim(side, layer.kernel_size, layer.geom)
            side_out = pool_output_dim(side_conv, layer.pool)
        except ValueError as exc:
            raise ValueError(f"invalid dimension chain at conv layer {index}: {exc}") from exc
        dims.append(LayerDims(maps_in, side, side_conv, side_out))
        maps_in, side = layer.kernel_count, side_out
    return dims


def feature_count(spec: NetworkSpec) -> int:
    dims = dimension_chain(spec)
    return spec.conv_layers[-1].kernel_count * dims[-1].side_out ** 2


def layer_parameter_counts(spec: NetworkSpec) -> tuple[list[int], int]:
    """(per-conv-layer counts, output-layer count), without allocating anything."""
    dims = dimension_chain(spec)
    conv_counts = [
        layer.kernel_count * (d.maps_in * layer.kernel_size ** 2 + 1)
        for layer, d in zip(spec.conv_layers, dims)
    ]
    return conv_counts, spec.output_classes * (feature_count(spec) + 1)


def parameter_count(spec: NetworkSpec) -> int:
    conv_counts, out_count = layer_parameter_counts(spec)
    return sum(conv_counts) + out_count


@dataclass
class ParameterStore:
    """All trainable arrays; also reused as the gradient container."""

    conv_weights: list[np.ndarray]  # each (K, M, k, k)
    conv_biases: list[np.ndarray]  # each (K,)
    out_weights: np.ndarray  # (2, F)
    out_biases: np.ndarray  # (2,)

    def arrays(self) -> list[np.ndarray]:
        """Flat list view, stable order: per layer W then b, then output W, b."""
        out = []
        for w, b in zip(self.conv_weights, self.conv_biases):
            out.extend((w, b))
        out.extend((self.out_weights, self.out_biases))
        return out

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        named = []
        for index, (w, b) in enumerate(zip(self.conv_weights, self.conv_biases)):
            named.append((f"conv{index}_weights", w))
            named.append((f"conv{index}_biases", b))
        named.append(("output_weights", self.out_weights))
        named.append(("output_biases", self.out_biases))
        return named

    def copy(self) -> "ParameterStore":
        return ParameterStore(
            [w.copy() for w in self.conv_weights],
            [b.copy() for b in self.conv_biases],
            self.out_weights.copy(),
            self.out_biases.copy(),
        )

    def zeros_like(self) -> "ParameterStore":
        return ParameterStore(
            [np.zeros_like(w) for w in self.conv_weights],
            [np.zeros_like(b) for b in self.conv_biases],
            np.zeros_like(self.out_weights),
            np.zeros_like(self.out_biases),
        )

    def entry_count(self) -> int:
        return sum(a.size for a in self.arrays())


# Uniform init bound is INIT_SCALE / sqrt(fan_in).  The plain 1/sqrt(fan_in)
# scale saturates every tanh within one epoch at the reference learning rate
# (0.5 with mean batch gradients); starting a decade lower keeps the early
# dynamics linear, where gradient steps stay proportional to the (small)
# activations instead of slamming the biases.
INIT_SCALE = 0.1


def build_network(spec: NetworkSpec, seed: int) -> ParameterStore:
    """Allocate and initialize all parameters, deterministically from seed."""
    dims = dimension_chain(spec)
    rng = np.random.default_rng(seed)
    conv_w, conv_b = [], []
    for layer, d in zip(spec.conv_layers, dims):
        fan_in = d.maps_in * layer.kernel_size ** 2
        bound = INIT_SCALE / np.sqrt(fan_in)
        shape = (layer.kernel_count, d.maps_in, layer.kernel_size, layer.kernel_size)
        conv_w.append(rng.uniform(-bound, bound, shape))
        conv_b.append(np.zeros(layer.kernel_count))
    features = feature_count(spec)
    bound = INIT_SCALE / np.sqrt(features)
    out_w = rng.uniform(-bound, bound, (spec.output_classes, features))
    out_b = np.zeros(spec.output_classes)
    return ParameterStore(conv_w, conv_b, out_w, out_b)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _pool_forward_batch(maps: np.ndarray, spec: PoolSpec):
    """maps (B,K,h,w) -> (pooled, argmax or None). Requires exact tiling."""
    if spec.mode == "none":
        return maps, None
    h, w = maps.shape[2:]
    for dim in (h, w):
        if dim < spec.region or (dim - spec.region) % spec.stride != 0:
            raise ValueError(
                f"pooling does not tile the maps: dim={dim}, "
                f"region={spec.region}, stride={spec.stride}"
            )
    windows = sliding_window_view(maps, (spec.region, spec.region), axis=(2, 3))
    windows = windows[:, :, :: spec.stride, :: spec.stride]
    if spec.mode == "mean":
        return windows.mean(axis=(4, 5)), None
    flat = windows.reshape(*windows.shape[:4], -1)
    arg = flat.argmax(axis=4)
    return np.take_along_axis(flat, arg[..., None], axis=4)[..., 0], arg


def _pool_backward_batch(delta: np.ndarray, maps_shape, spec: PoolSpec, argmax):
    if spec.mode == "none":
        return delta
    out = np.zeros(maps_shape)
    region, stride = spec.region, spec.stride
    batch_idx, map_idx = np.indices(delta.shape[:2])
    for i in range(delta.shape[2]):
        for j in range(delta.shape[3]):
            if spec.mode == "mean":
                out[:, :, i * stride : i * stride + region, j * stride : j * stride + region] += (
                    delta[:, :, i, j, None, None] / region ** 2
                )
            else:
                win = argmax[:, :, i, j]
                rows = i * stride + win // region
                cols = j * stride + win % region
                np.add.at(out, (batch_idx, map_idx, rows, cols), delta[:, :, i, j])
    return out


def _forward_trace(params: ParameterStore, spec: NetworkSpec, images: np.ndarray):
    """Run the conv chain keeping every intermediate needed by backward."""
    maps = images[:, None, :, :].astype(np.float64)
    trace = []
    for layer, w, b in zip(spec.conv_layers, params.conv_weights, params.conv_biases):
        pre = conv2d_batch(maps, w, layer.geom) + b[None, :, None, None]
        acted = activate(pre, layer.act)
        pooled, argmax = _pool_forward_batch(acted, layer.pool)
        trace.append({"inputs": maps, "pre": pre, "acted_shape": acted.shape, "argmax": argmax})
        maps = pooled
    flat = maps.reshape(maps.shape[0], -1)  # map-major, then row-major
    logits = flat @ params.out_weights.T + params.out_biases
    return trace, flat, _log_softmax(logits)


def forward_batch(params: ParameterStore, spec: NetworkSpec, images: np.ndarray) -> np.ndarray:
    """Log-probabilities, shape (B, 2), for a stack of images (B, N, N)."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3 or images.shape[1:] != (spec.input_size, spec.input_size):
        raise ValueError(
            f"expected images of shape (B, {spec.input_size}, {spec.input_size}), "
            f"got {images.shape}"
        )
    _, _, logprobs = _forward_trace(params, spec, images)
    return logprobs


def forward(params: ParameterStore, spec: NetworkSpec, image: np.ndarray) -> np.ndarray:
    """Class log-probabilities (cover, stego) for a single image."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (spec.input_size, spec.input_size):
        raise ValueError(
            f"expected a {spec.input_size}x{spec.input_size} image, got {image.shape}"
        )
    return forward_batch(params, spec, image[None])[0]


def loss(logprobs: np.ndarray, label: int) -> float:
    """Negative log-likelihood of the true class."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    return float(-logprobs[label])


def _conv_backward_batch(delta, layer: ConvLayerSpec, weights, cache, need_input_grad):
    """Gradients of one conv stage. delta is w.r.t. the pre-activation."""
    geom = layer.geom
    k = layer.kernel_size
    inputs = cache["inputs"]
    if geom.padding:
        pad = geom.padding
        padded = np.pad(inputs, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    else:
        padded = inputs
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))
    windows = windows[:, :, :: geom.stride, :: geom.stride]
    grad_w = np.einsum("bkij,bmijuv->kmuv", delta, windows, optimize=True)
    grad_b = delta.sum(axis=(0, 2, 3))
    if not need_input_grad:
        return grad_w, grad_b, None
    # Scatter per output position; outputs are tiny in this architecture.
    grad_padded = np.zeros_like(padded)
    stride = geom.stride
    for i in range(delta.shape[2]):
        for j in range(delta.shape[3]):
            contrib = np.einsum("bk,kmuv->bmuv", delta[:, :, i, j], weights, optimize=True)
            grad_padded[:, :, i * stride : i * stride + k, j * stride : j * stride + k] += contrib
    if geom.padding:
        pad = geom.padding
        grad_in = grad_padded[:, :, pad:-pad, pad:-pad]
    else:
        grad_in = grad_padded
    return grad_w, grad_b, grad_in


def backward_batch(
    params: ParameterStore, spec: NetworkSpec, images: np.ndarray, labels: np.ndarray
) -> tuple[ParameterStore, np.ndarray]:
    """Mean-over-batch gradient of the NLL loss, plus the batch log-probs."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    trace, flat, logprobs = _forward_trace(params, spec, images)
    batch = images.shape[0]
    grads = params.zeros_like()

    # d(mean loss)/d logits = (softmax - onehot) / batch
    delta_logits = np.exp(logprobs)
    delta_logits[np.arange(batch), labels] -= 1.0
    delta_logits /= batch

    grads.out_weights[:] = delta_logits.T @ flat
    grads.out_biases[:] = delta_logits.sum(axis=0)
    delta_flat = delta_logits @ params.out_weights

    dims = dimension_chain(spec)
    last = dims[-1]
    delta = delta_flat.reshape(batch, spec.conv_layers[-1].kernel_count, last.side_out, last.side_out)
    for index in range(len(spec.conv_layers) - 1, -1, -1):
        layer = spec.conv_layers[index]
        cache = trace[index]
        delta = _pool_backward_batch(delta, cache["acted_shape"], layer.pool, cache["argmax"])
        delta = delta * activate_grad(cache["pre"], layer.act)
        grad_w, grad_b, delta = _conv_backward_batch(
            delta, layer, params.conv_weights[index], cache, need_input_grad=index > 0
        )
        grads.conv_weights[index][:] = grad_w
        grads.conv_biases[index][:] = grad_b
    return grads, logprobs


def backward(
    params: ParameterStore, spec: NetworkSpec, image: np.ndarray, label: int
) -> ParameterStore:
    """Gradient of the single-sample loss w.r.t. every parameter."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    image = np.asarray(image, dtype=np.float64)
    grads, _ = backward_batch(params, spec, image[None], np.array([label]))
    return grads


# --- finite-difference verification -------------------------------------

REL_TOLERANCE = 1e-4
FD_STEP = 1e-5


@dataclass
class GradCheckClass:
    name: str
    max_rel_err: float
    passed: bool


@dataclass
class GradCheckReport:
    classes: list[GradCheckClass]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.classes)

    def lines(self) -> list[str]:
        return [
            f"{'PASS' if c.passed else 'FAIL'} {c.name}: max rel err {c.max_rel_err:.3e}"
            for c in self.classes
        ]


def _relative_error(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    if scale < 1e-12:
        return 0.0
    return abs(a - b) / scale


def finite_difference_report(
    seed: int,
    size: int,
    second_layer_kernels: int = 4,
    h: float = FD_STEP,
    tolerance: float = REL_TOLERANCE,
    perturb: tuple[str, int, float] | None = None,
    spec: NetworkSpec | None = None,
) -> GradCheckReport:
    """Compare backward against central differences, per parameter class.

    ``perturb`` (class_name, flat_index, delta) injects an error into the
    analytic gradient before comparison; it exists so the failure path of
    the verification harness is itself testable.
    """
    if spec is None:
        spec = desk_network_spec(size, second_layer_kernels)
    params = build_network(spec, seed)
    rng = np.random.default_rng(seed + 1)
    images = rng.standard_normal((2, spec.input_size, spec.input_size))
    labels = np.array([0, 1])

    grads, _ = backward_batch(params, spec, images, labels)

    def batch_loss() -> float:
        logprobs = forward_batch(params, spec, images)
        return float(np.mean([loss(lp, lab) for lp, lab in zip(logprobs, labels)]))

    classes = []
    for name, array in params.named_arrays():
        analytic = dict(grads.named_arrays())[name]
        if perturb is not None and perturb[0] == name:
            analytic = analytic.copy()
            analytic.flat[perturb[1]] += perturb[2]
        worst = 0.0
        flat = array.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + h
            up = batch_loss()
            flat[idx] = original - h
            down = batch_loss()
            flat[idx] = original
            fd = (up - down) / (2 * h)
            worst = max(worst, _relative_error(fd, analytic.reshape(-1)[idx]))
        classes.append(GradCheckClass(name, worst, worst < tolerance))
    return GradCheckReport(classes)


# --- checkpoint container ------------------------------------------------

CHECKPOINT_FORMAT = "stegbench-checkpoint-1"


def _spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "input_size": spec.input_size,
        "output_classes": spec.output_classes,
        "conv_layers": [
            {
                "kernel_count": layer.kernel_count,
                "kernel_size": layer.kernel_size,
                "stride": layer.geom.stride,
                "padding": layer.geom.padding,
                "act": layer.act.kind,
                "sigma": layer.act.sigma,
                "pool_region": layer.pool.region,
                "pool_stride": layer.pool.stride,
                "pool_mode": layer.pool.mode,
            }
            for layer in spec.conv_layers
        ],
    }


def _spec_from_dict(data: dict) -> NetworkSpec:
    layers = tuple(
        ConvLayerSpec(
            kernel_count=entry["kernel_count"],
            kernel_size=entry["kernel_size"],
            geom=ConvGeometry(entry["stride"], entry["padding"]),
            act=Activation(entry["act"], entry["sigma"]),
            pool=PoolSpec(entry["pool_region"], entry["pool_stride"], entry["pool_mode"]),
        )
        for entry in data["conv_layers"]
    )
    return NetworkSpec(data["input_size"], layers, data["output_classes"])


def save_checkpoint(
    path,
    spec: NetworkSpec,
    params: ParameterStore,
    seeds: dict | None = None,
    epoch: int = 0,
    meta: dict | None = None,
) -> None:
    """Write a value-exact .npz container: spec, parameters, seeds, epoch."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "spec": _spec_to_dict(spec),
        "seeds": seeds or {},
        "epoch": epoch,
        "meta": meta or {},
    }
    arrays = {name: arr for name, arr in params.named_arrays()}
    np.savez(path, header=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> tuple[NetworkSpec, ParameterStore, dict]:
    """Read a checkpoint; returns (spec, params, header dict)."""
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"not a stegbench checkpoint: {path}")
        spec = _spec_from_dict(header["spec"])
        conv_w, conv_b = [], []
        for index in range(len(spec.conv_layers)):
            conv_w.append(data[f"conv{index}_weights"])
            conv_b.append(data[f"conv{index}_biases"])
        params = ParameterStore(conv_w, conv_b, data["output_weights"], data["output_biases"])
    return spec, params, header
