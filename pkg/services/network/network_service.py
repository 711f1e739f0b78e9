"""
Network Service

Assembles the tensor primitives into the occlusion CNN:

    conv1 -> ReLU -> pool -> conv2 -> ReLU -> pool -> conv3 -> ReLU -> pool -> fc -> softmax

The batch is processed in fixed-size chunks. Chunk boundaries never depend on
the worker count and per-chunk gradients are summed in chunk order, so a
threaded run and a sequential run produce the same bits.
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from models.network_models import (
    CONV_LAYERS,
    OUTPUT_LAYER,
    SUPPORTED_CHANNELS,
    ChunkCache,
    CnnModel,
    ForwardCache,
    InitSchedule,
    LayerCache,
    param_names,
)
from models.tensor_models import ConvSpec
from services.tensor import ops
from utils.constants import DEFAULT_FILTERS, KERNEL_SIZE, NUM_CLASSES, PATCH_SIZE
from utils.errors import ConfigError, ShapeError
from utils.parallel import Execution, chunk_slices, resolve

logger = logging.getLogger(__name__)

CHUNK_SIZE = 16
POOL_STAGES = len(CONV_LAYERS)

Grads = Dict[str, np.ndarray]


def fc_input_size(filters: Sequence[int], input_size: int) -> int:
    spatial = input_size // (2 ** POOL_STAGES)
    return filters[-1] * spatial * spatial


def init_model(
    channels: int,
    schedule: InitSchedule = InitSchedule(),
    rng_seed: int = 0,
    filters: Sequence[int] = DEFAULT_FILTERS,
    input_size: int = PATCH_SIZE,
    dtype=np.float32,
) -> CnnModel:
    """
    Create a freshly initialized model.

    Args:
        channels: 4 for RGB-D patches, 3 for RGB
        schedule: Weight standard deviations and bias constant
        rng_seed: Seed of the Gaussian draws; equal seeds give identical models
        filters: Filter counts of the three convolutional layers
        input_size: Patch size, divisible by 8
        dtype: Parameter dtype

    Returns:
        CnnModel with zeroed momentum buffers
    """
    if channels not in SUPPORTED_CHANNELS:
        raise ConfigError(f"unsupported channel count {channels}, expected one of {SUPPORTED_CHANNELS}")
    if len(filters) != POOL_STAGES or any(f < 1 for f in filters):
        raise ConfigError(f"filters must be {POOL_STAGES} positive counts, got {tuple(filters)}")
    if input_size < 2 ** POOL_STAGES or input_size % (2 ** POOL_STAGES):
        raise ConfigError(f"input_size must be a positive multiple of {2 ** POOL_STAGES}, got {input_size}")

    rng = np.random.default_rng(rng_seed)
    params: Dict[str, np.ndarray] = {}
    in_channels = channels
    for layer, out_channels, std in zip(CONV_LAYERS, filters, schedule.conv_stds):
        shape = (out_channels, in_channels, KERNEL_SIZE, KERNEL_SIZE)
        params[f"{layer}.weight"] = (rng.standard_normal(shape) * std).astype(dtype)
        params[f"{layer}.bias"] = np.full(out_channels, schedule.bias_init, dtype=dtype)
        in_channels = out_channels

    fc_in = fc_input_size(filters, input_size)
    params[f"{OUTPUT_LAYER}.weight"] = (rng.standard_normal((NUM_CLASSES, fc_in)) * schedule.output_std).astype(dtype)
    params[f"{OUTPUT_LAYER}.bias"] = np.full(NUM_CLASSES, schedule.bias_init, dtype=dtype)

    momentum = {name: np.zeros_like(params[name]) for name in param_names()}
    model = CnnModel(channels=channels, input_size=input_size, params=params, momentum=momentum)
    logger.debug(f"Initialized model: channels={channels}, filters={tuple(filters)}, "
                 f"input_size={input_size}, parameters={model.num_parameters()}")
    return model


def _check_batch(model: CnnModel, batch: np.ndarray) -> None:
    if batch.ndim != 4:
        raise ShapeError("batch order", "4 (N,C,H,W)", batch.ndim, op="forward")
    if batch.shape[1] != model.channels:
        raise ShapeError("channels", model.channels, batch.shape[1], op="forward")
    if batch.shape[2:] != (model.input_size, model.input_size):
        raise ShapeError("spatial size", (model.input_size, model.input_size), batch.shape[2:], op="forward")


def _forward_chunk(model: CnnModel, x: np.ndarray, specs: Sequence[ConvSpec],
                   rows: slice) -> Tuple[np.ndarray, ChunkCache]:
    stages = []
    for layer, spec in zip(CONV_LAYERS, specs):
        z = ops.conv2d_forward(x, model.params[f"{layer}.weight"], model.params[f"{layer}.bias"], spec)
        pooled, mask = ops.maxpool2_forward(ops.relu_forward(z))
        stages.append(LayerCache(input=x, pre_activation=z, mask=mask))
        x = pooled
    fc_input = x.reshape(x.shape[0], -1)
    logits = ops.fc_forward(fc_input, model.params[f"{OUTPUT_LAYER}.weight"], model.params[f"{OUTPUT_LAYER}.bias"])
    return logits, ChunkCache(rows=rows, stages=stages, fc_input=fc_input)


def forward(model: CnnModel, batch: np.ndarray, execution: Optional[Execution] = None,
            retain: bool = True) -> np.ndarray:
    """
    Compute logits for a batch of patches.

    Args:
        model: Network to run
        batch: (N, C, input_size, input_size)
        execution: Worker settings; chunks run in parallel unless deterministic
        retain: Keep intermediates on the model for a following backward call;
            False drops any earlier intermediates

    Returns:
        (N, 2) logits
    """
    model.cache = None
    _check_batch(model, batch)
    batch = batch.astype(model.dtype, copy=False)
    specs = model.conv_specs
    slices = chunk_slices(batch.shape[0], CHUNK_SIZE)
    results = resolve(execution).map(lambda rows: _forward_chunk(model, batch[rows], specs, rows), slices)

    logits = np.concatenate([chunk_logits for chunk_logits, _ in results], axis=0) if results \
        else np.zeros((0, model.num_classes), dtype=model.dtype)
    model.cache = ForwardCache(logits=logits, chunks=[cache for _, cache in results]) if retain else None
    return logits


def _backward_chunk(model: CnnModel, cache: ChunkCache, grad_logits: np.ndarray,
                    specs: Sequence[ConvSpec]) -> Grads:
    grads: Grads = {}
    grad_x, grads[f"{OUTPUT_LAYER}.weight"], grads[f"{OUTPUT_LAYER}.bias"] = ops.fc_backward(
        cache.fc_input, model.params[f"{OUTPUT_LAYER}.weight"], grad_logits)

    last = cache.stages[-1]
    grad_x = grad_x.reshape(last.mask.argmax.shape)
    for layer, spec, stage in reversed(list(zip(CONV_LAYERS, specs, cache.stages))):
        grad_a = ops.maxpool2_backward(stage.mask, grad_x)
        grad_z = ops.relu_backward(stage.pre_activation, grad_a)
        grad_x, grads[f"{layer}.weight"], grads[f"{layer}.bias"] = ops.conv2d_backward(
            stage.input, model.params[f"{layer}.weight"], grad_z, spec)
    return grads


def l2_penalty(model: CnnModel, l2: float, l2_on_output: bool = True) -> Tuple[float, Grads]:
    """0.5 * l2 * sum(w^2) over decayed weights, and its gradient l2 * w."""
    penalty = 0.0
    grads: Grads = {}
    for name, value in model.params.items():
        if l2 and model.is_decayed(name, l2_on_output):
            penalty += 0.5 * l2 * float(np.sum(value.astype(np.float64) ** 2))
            grads[name] = (l2 * value).astype(value.dtype)
        else:
            grads[name] = np.zeros_like(value)
    return penalty, grads


def backward(model: CnnModel, labels: np.ndarray, l2: float = 0.0, l2_on_output: bool = True,
             execution: Optional[Execution] = None) -> Tuple[float, Grads]:
    """
    Gradients of the mean cross-entropy of the last forward batch.

    The retained intermediates are consumed, so every backward call needs its
    own forward call.

    Args:
        model: Model whose forward() was just called
        labels: (N,) class indices
        l2: Decay weight added as 0.5*l2*|w|^2 to the loss and l2*w to the
            weight gradients. The trainer passes 0 here and lets sgd_step
            apply the decay.
        l2_on_output: Whether the output-layer weights are decayed
        execution: Worker settings

    Returns:
        (mean_loss, grads keyed like model.params)
    """
    if model.cache is None:
        raise ConfigError("backward() called without a preceding forward()")
    cache, model.cache = model.cache, None
    labels = np.asarray(labels)
    loss, _, grad_logits = ops.softmax_xent(cache.logits, labels, num_classes=model.num_classes)
    grad_logits = grad_logits.astype(model.dtype, copy=False)
    specs = model.conv_specs

    chunk_grads = resolve(execution).map(
        lambda chunk: _backward_chunk(model, chunk, grad_logits[chunk.rows], specs), cache.chunks)

    penalty, grads = l2_penalty(model, l2, l2_on_output)
    for partial in chunk_grads:
        for name in grads:
            grads[name] += partial[name]
    for name, grad in grads.items():
        ops.check_finite(grad, f"backward.{name}")
    return loss + penalty, grads


def sgd_step(model: CnnModel, grads: Grads, lr: float = 0.001, momentum: float = 0.9,
             l2: float = 0.001, l2_on_output: bool = True) -> CnnModel:
    """
    Momentum SGD with gradient-additive L2 decay, applied in place.

        v <- momentum * v - lr * (grad + l2 * w)    (decayed weights)
        v <- momentum * v - lr * grad               (biases)
        w <- w + v

    Returns:
        The updated model
    """
    if set(grads) != set(model.params):
        raise ShapeError("gradient table", sorted(model.params), sorted(grads), op="sgd_step")
    for name, weight in model.params.items():
        grad = grads[name]
        if grad.shape != weight.shape:
            raise ShapeError(name, weight.shape, grad.shape, op="sgd_step")
        if model.is_decayed(name, l2_on_output):
            grad = grad + l2 * weight
        velocity = model.momentum[name]
        velocity *= momentum
        velocity -= (lr * grad).astype(velocity.dtype, copy=False)
        weight += velocity
        ops.check_finite(weight, f"sgd_step.{name}")
    return model


def predict_proba(model: CnnModel, batch: np.ndarray, execution: Optional[Execution] = None) -> np.ndarray:
    """Softmax posteriors without retaining intermediates."""
    return ops.softmax(forward(model, batch, execution=execution, retain=False))
