"""
Differentiable primitives of the occlusion network.

Every function is pure: inputs are never modified and outputs are fresh
arrays. Inputs may carry a leading batch extent; a 3-D input (C, H, W) is
treated as a batch of one and returned without the batch extent. All
primitives keep the dtype of their inputs so gradient checks can run in
float64 while the network itself runs in float32.
"""

import logging
from typing import Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from models.tensor_models import ConvSpec, PoolMask
from utils.errors import DataError, NumericError, ShapeError

logger = logging.getLogger(__name__)

Label = Union[int, np.ndarray]


def check_finite(array: np.ndarray, op: str) -> np.ndarray:
    """Raise NumericError when array holds NaN or Inf."""
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NumericError(f"{op}: {bad} non-finite values produced")
    return array


def _batched(x: np.ndarray, op: str) -> Tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[np.newaxis], True
    if x.ndim == 4:
        return x, False
    raise ShapeError("tensor order", "3 (C,H,W) or 4 (N,C,H,W)", x.ndim, op=op)


def _im2col(x: np.ndarray, spec: ConvSpec) -> Tuple[np.ndarray, int, int]:
    """(N, C, H, W) -> rows of flattened receptive fields, (N*Ho*Wo, C*k*k)."""
    n, c, h, w = x.shape
    _, out_h, out_w = spec.output_shape(h, w)
    p, k, s = spec.padding, spec.kernel, spec.stride
    padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), mode="constant")
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))[:, :, ::s, ::s]
    windows = windows[:, :, :out_h, :out_w]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, c * k * k)
    return cols, out_h, out_w


def _col2im(dcols: np.ndarray, input_shape: Tuple[int, int, int, int], spec: ConvSpec,
            out_h: int, out_w: int) -> np.ndarray:
    n, c, h, w = input_shape
    p, k, s = spec.padding, spec.kernel, spec.stride
    dcols = dcols.reshape(n, out_h, out_w, c, k, k).transpose(0, 3, 4, 5, 1, 2)
    padded = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=dcols.dtype)
    for y in range(k):
        y_max = y + s * out_h
        for x in range(k):
            x_max = x + s * out_w
            padded[:, :, y:y_max:s, x:x_max:s] += dcols[:, :, y, x, :, :]
    return padded[:, :, p:p + h, p:p + w]


def _check_conv_operands(x: np.ndarray, weights: np.ndarray, spec: ConvSpec, op: str) -> None:
    if x.shape[1] != spec.in_channels:
        raise ShapeError("input channels", spec.in_channels, x.shape[1], op=op)
    if tuple(weights.shape) != spec.weight_shape:
        raise ShapeError("weights", spec.weight_shape, tuple(weights.shape), op=op)


def conv2d_forward(input: np.ndarray, weights: np.ndarray, biases: np.ndarray,
                   spec: ConvSpec) -> np.ndarray:
    """
    Cross-correlate input with every filter and add the per-filter bias.

    Args:
        input: (C, H, W) or (N, C, H, W)
        weights: (out_channels, in_channels, kernel, kernel)
        biases: (out_channels,)
        spec: Convolution geometry

    Returns:
        (out_channels, Ho, Wo), with the batch extent when the input had one
    """
    x, single = _batched(input, "conv2d_forward")
    _check_conv_operands(x, weights, spec, "conv2d_forward")
    if biases.shape != (spec.out_channels,):
        raise ShapeError("biases", (spec.out_channels,), tuple(biases.shape), op="conv2d_forward")

    cols, out_h, out_w = _im2col(x, spec)
    flat = cols @ weights.reshape(spec.out_channels, -1).T + biases
    out = flat.reshape(x.shape[0], out_h, out_w, spec.out_channels).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    check_finite(out, "conv2d_forward")
    return out[0] if single else out


def conv2d_backward(input: np.ndarray, weights: np.ndarray, grad_out: np.ndarray,
                    spec: ConvSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Exact gradients of conv2d_forward.

    Returns:
        (grad_input, grad_weights, grad_biases), shaped like their primals;
        weight and bias gradients are summed over the batch
    """
    x, single = _batched(input, "conv2d_backward")
    g, _ = _batched(grad_out, "conv2d_backward")
    _check_conv_operands(x, weights, spec, "conv2d_backward")
    expected = (x.shape[0],) + spec.output_shape(x.shape[2], x.shape[3])
    if tuple(g.shape) != expected:
        raise ShapeError("grad_out", expected, tuple(g.shape), op="conv2d_backward")

    cols, out_h, out_w = _im2col(x, spec)
    go = g.transpose(0, 2, 3, 1).reshape(-1, spec.out_channels)
    w_flat = weights.reshape(spec.out_channels, -1)

    grad_weights = (go.T @ cols).reshape(weights.shape)
    grad_biases = g.sum(axis=(0, 2, 3))
    grad_input = _col2im(go @ w_flat, x.shape, spec, out_h, out_w)

    for name, grad in (("grad_input", grad_input), ("grad_weights", grad_weights),
                       ("grad_biases", grad_biases)):
        check_finite(grad, f"conv2d_backward.{name}")
    return (grad_input[0] if single else grad_input), grad_weights, grad_biases


def maxpool2_forward(input: np.ndarray) -> Tuple[np.ndarray, PoolMask]:
    """
    Non-overlapping 2x2 max pooling.

    Ties go to the first element in row-major window order.
    """
    x, single = _batched(input, "maxpool2_forward")
    n, c, h, w = x.shape
    if h % 2:
        raise ShapeError("height", "even extent", h, op="maxpool2_forward")
    if w % 2:
        raise ShapeError("width", "even extent", w, op="maxpool2_forward")

    blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, h // 2, w // 2, 4)
    argmax = np.argmax(blocks, axis=4).astype(np.int8)
    out = np.take_along_axis(blocks, argmax[..., np.newaxis].astype(np.intp), axis=4)[..., 0]
    check_finite(out, "maxpool2_forward")

    if single:
        return out[0], PoolMask(argmax=argmax[0], input_shape=tuple(input.shape))
    return out, PoolMask(argmax=argmax, input_shape=tuple(input.shape))


def maxpool2_backward(mask: PoolMask, grad_out: np.ndarray) -> np.ndarray:
    """Route every output gradient to the input position that won its window."""
    if tuple(grad_out.shape) != tuple(mask.argmax.shape):
        raise ShapeError("grad_out", tuple(mask.argmax.shape), tuple(grad_out.shape),
                         op="maxpool2_backward")
    single = grad_out.ndim == 3
    g = grad_out[np.newaxis] if single else grad_out
    argmax = mask.argmax[np.newaxis] if single else mask.argmax
    n, c, out_h, out_w = g.shape

    blocks = np.zeros((n, c, out_h, out_w, 4), dtype=g.dtype)
    np.put_along_axis(blocks, argmax[..., np.newaxis].astype(np.intp), g[..., np.newaxis], axis=4)
    grad_input = blocks.reshape(n, c, out_h, out_w, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    grad_input = grad_input.reshape(n, c, out_h * 2, out_w * 2)
    check_finite(grad_input, "maxpool2_backward")
    return grad_input[0] if single else grad_input


def relu_forward(input: np.ndarray) -> np.ndarray:
    return check_finite(np.maximum(input, 0).astype(input.dtype, copy=False), "relu_forward")


def relu_backward(input: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Pass gradient where input > 0; the subgradient at exactly 0 is 0."""
    if input.shape != grad_out.shape:
        raise ShapeError("grad_out", tuple(input.shape), tuple(grad_out.shape), op="relu_backward")
    grad_input = np.where(input > 0, grad_out, 0).astype(grad_out.dtype, copy=False)
    check_finite(grad_input, "relu_backward")
    return grad_input


def _flatten(input: np.ndarray) -> Tuple[np.ndarray, bool]:
    if input.ndim == 1:
        return input[np.newaxis], True
    return input.reshape(input.shape[0], -1), False


def fc_forward(input: np.ndarray, weights: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """
    Affine map y = W x + b.

    A 1-D input is a single example; anything of higher order is a batch
    flattened behind its leading extent.
    """
    x, single = _flatten(input)
    if weights.ndim != 2 or x.shape[1] != weights.shape[1]:
        raise ShapeError("fc input dimension", weights.shape[-1], x.shape[1], op="fc_forward")
    if biases.shape != (weights.shape[0],):
        raise ShapeError("biases", (weights.shape[0],), tuple(biases.shape), op="fc_forward")
    out = x @ weights.T + biases
    check_finite(out, "fc_forward")
    return out[0] if single else out


def fc_backward(input: np.ndarray, weights: np.ndarray,
                grad_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (grad_input shaped like input, grad_weights, grad_biases)."""
    x, single = _flatten(input)
    g = grad_out[np.newaxis] if single else grad_out
    if g.shape != (x.shape[0], weights.shape[0]):
        raise ShapeError("grad_out", (x.shape[0], weights.shape[0]), tuple(g.shape), op="fc_backward")
    grad_input = (g @ weights).reshape(input.shape)
    grad_weights = g.T @ x
    grad_biases = g.sum(axis=0)
    for name, grad in (("grad_input", grad_input), ("grad_weights", grad_weights), ("grad_biases", grad_biases)):
        check_finite(grad, f"fc_backward.{name}")
    return grad_input, grad_weights, grad_biases


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return check_finite(exp / np.sum(exp, axis=-1, keepdims=True), "softmax")


def softmax_xent(logits: np.ndarray, label: Label,
                 num_classes: int = 2) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Softmax cross-entropy with max subtraction.

    For a 1-D logits vector returns the example loss and its gradient. For a
    (N, K) batch returns the mean loss and the gradient of that mean.

    Returns:
        (loss, probs, grad_logits)
    """
    single = logits.ndim == 1
    z = logits[np.newaxis] if single else logits
    if z.ndim != 2 or z.shape[1] != num_classes:
        raise ShapeError("logits per example", num_classes, z.shape[-1], op="softmax_xent")
    labels = np.atleast_1d(np.asarray(label))
    if labels.shape != (z.shape[0],):
        raise ShapeError("labels", (z.shape[0],), tuple(labels.shape), op="softmax_xent")
    if not np.issubdtype(labels.dtype, np.integer) or np.any((labels < 0) | (labels >= num_classes)):
        raise DataError(f"softmax_xent: invalid label index {labels.tolist()}")

    shifted = z - np.max(z, axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    log_probs = shifted - log_norm
    probs = np.exp(log_probs)
    rows = np.arange(z.shape[0])
    losses = -log_probs[rows, labels]

    grad = probs.copy()
    grad[rows, labels] -= 1
    grad /= z.shape[0]
    loss = float(np.mean(losses))
    check_finite(np.asarray(loss), "softmax_xent")

    if single:
        return loss, probs[0], grad[0]
    return loss, probs, grad
