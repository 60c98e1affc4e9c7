"""Bayesian CNN for 3-axis inertial windows: build, train, serialize.

Topology: a shared per-axis 1-D conv stack (8 then 16 filters, kernel 2,
batchnorm, pool 2), axis outputs stacked into a 16-channel 3xL/2 map,
a 2-D conv stack (8 then 16 filters, 3x3, batchnorm, pool 3x2), then
three dropout+dense blocks (16, 8, C) ending in softmax. Dropout stays
active at stochastic-eval time, which is what makes the network Bayesian
in the MC-dropout sense.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rngmod
from . import serial
from .layers import (
    DETERMINISTIC,
    TRAIN,
    LayerSpec,
    init_params,
    init_state,
    layer_backward,
    layer_forward,
    out_shape,
)
from .optim import AdamState, adam_step, batch_cross_entropy, softmax_xent_grad

# Structural (parameter-free) pipeline markers.
SPLIT_AXES = "split-axes"
REGROUP_AXES = "regroup-axes"
FLATTEN = "flatten"


@dataclass(frozen=True)
class HarnetConfig:
    input_length: int
    num_classes: int
    num_axes: int = 3
    conv1d_filters: tuple = (8, 16)
    conv1d_kernel: int = 2
    pool1d: int = 2
    conv2d_filters: tuple = (8, 16)
    conv2d_kernel: tuple = (3, 3)
    pool2d: tuple = (3, 2)
    dense_units: tuple = (16, 8)
    dropout_p: float = 0.3
    weight_decay: float = 1e-4
    learning_rate: float = 2e-4
    shared_axis_weights: bool = True

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if not (0.0 <= self.dropout_p < 1.0):
            raise ValueError("dropout_p must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HarnetConfig":
        d = dict(d)
        for key in ("conv1d_filters", "conv2d_filters", "conv2d_kernel", "pool2d", "dense_units"):
            d[key] = tuple(d[key])
        return cls(**d)


class BuildError(ValueError):
    """Config cannot produce a valid network; message names the failing stage."""


def _pipeline(cfg: HarnetConfig) -> list:
    """Ordered steps: LayerSpec objects plus structural markers."""
    f1a, f1b = cfg.conv1d_filters
    f2a, f2b = cfg.conv2d_filters
    p = cfg.dropout_p
    wd = cfg.weight_decay
    if cfg.shared_axis_weights:
        head = [
            SPLIT_AXES,
            LayerSpec("conv1d", "conv1d_1", {"filters": f1a, "kernel": cfg.conv1d_kernel}),
            LayerSpec("conv1d", "conv1d_2", {"filters": f1b, "kernel": cfg.conv1d_kernel}),
            LayerSpec("batchnorm", "bn1"),
            LayerSpec("maxpool1d", "pool1", {"size": cfg.pool1d}),
            LayerSpec("concat-axes", "stack_axes", {"axes": cfg.num_axes}),
        ]
    else:
        # Ablation: each axis gets its own conv filters (grouped conv);
        # bn1 then normalizes per (axis, filter) channel.
        g = cfg.num_axes
        head = [
            LayerSpec(
                "conv1d", "conv1d_1", {"filters": f1a, "kernel": cfg.conv1d_kernel, "groups": g}
            ),
            LayerSpec(
                "conv1d", "conv1d_2", {"filters": f1b, "kernel": cfg.conv1d_kernel, "groups": g}
            ),
            LayerSpec("batchnorm", "bn1"),
            LayerSpec("maxpool1d", "pool1", {"size": cfg.pool1d}),
            REGROUP_AXES,
        ]
    steps = head + [
        LayerSpec("conv2d", "conv2d_1", {"filters": f2a, "kernel": tuple(cfg.conv2d_kernel)}),
        LayerSpec("conv2d", "conv2d_2", {"filters": f2b, "kernel": tuple(cfg.conv2d_kernel)}),
        LayerSpec("batchnorm", "bn2"),
        LayerSpec("maxpool2d", "pool2", {"size": tuple(cfg.pool2d)}),
        FLATTEN,
        LayerSpec("dropout", "drop1", {"p": p}),
        LayerSpec("dense", "fc1", {"units": cfg.dense_units[0], "weight_decay": wd}),
        LayerSpec("relu", "relu1"),
        LayerSpec("dropout", "drop2", {"p": p}),
        LayerSpec("dense", "fc2", {"units": cfg.dense_units[1], "weight_decay": wd}),
        LayerSpec("relu", "relu2"),
        LayerSpec("dropout", "drop3", {"p": p}),
        LayerSpec("dense", "fc_out", {"units": cfg.num_classes, "weight_decay": wd}),
        LayerSpec("softmax", "softmax"),
    ]
    return steps


@dataclass
class ModelBundle:
    config: HarnetConfig
    params: dict
    bn_state: dict
    adam: AdamState | None = None
    steps: list = field(default_factory=list)

    def __post_init__(self):
        if not self.steps:
            self.steps = _pipeline(self.config)
        self._param_map = {
            step.name: {p: f"{step.name}/{p}" for p in ("w", "b", "gamma", "beta")}
            for step in self.steps
            if not isinstance(step, str)
        }

    def layer_params(self, step) -> dict:
        names = self._param_map[step.name]
        return {p: self.params[f] for p, f in names.items() if f in self.params}


def _trace_shapes(cfg: HarnetConfig) -> dict:
    """Walk the pipeline symbolically; raise BuildError where shapes die."""
    shapes = {}
    if cfg.shared_axis_weights:
        shape = (1 * cfg.num_axes, 1, cfg.input_length)
    else:
        shape = (1, cfg.num_axes, cfg.input_length)
    for step in _pipeline(cfg):
        if step == SPLIT_AXES:
            continue
        if step == REGROUP_AXES:
            g = cfg.num_axes
            shape = (shape[0], shape[1] // g, g, shape[2])
            continue
        if step == FLATTEN:
            flat = int(np.prod(shape[1:]))
            if flat <= 0:
                raise BuildError("flatten: empty feature map; input_length too small")
            shape = (shape[0], flat)
            shapes["flatten"] = shape
            continue
        kind = step.kind
        if kind == "maxpool1d" and shape[2] < step.hp["size"]:
            raise BuildError(f"{step.name}: length {shape[2]} < pool size {step.hp['size']}")
        if kind == "maxpool2d":
            sh, sw = step.hp["size"]
            if shape[2] < sh or shape[3] < sw:
                raise BuildError(f"{step.name}: map {shape[2:]} < pool size {(sh, sw)}")
        if kind == "conv2d":
            kh, kw = step.hp["kernel"]
            if shape[2] < kh or shape[3] < kw:
                raise BuildError(f"{step.name}: map {shape[2:]} < kernel {(kh, kw)}")
        if kind == "conv1d" and shape[2] < step.hp["kernel"]:
            raise BuildError(f"{step.name}: length {shape[2]} < kernel {step.hp['kernel']}")
        shapes[step.name] = shape
        shape = out_shape(step, shape)
    shapes["output"] = shape
    return shapes


def build(config: HarnetConfig, seed: int) -> ModelBundle:
    """Deterministically initialized model; same (config, seed) -> same bits."""
    shapes = _trace_shapes(config)
    params: dict = {}
    bn_state: dict = {}
    steps = _pipeline(config)
    layer_index = 0
    for step in steps:
        if isinstance(step, str):
            continue
        in_shape = shapes[step.name]
        p = init_params(step, in_shape, rngmod.stream(seed, rngmod.INIT, layer_index))
        for pname, arr in p.items():
            params[f"{step.name}/{pname}"] = arr
        st = init_state(step, in_shape)
        if st:
            bn_state[step.name] = st
        layer_index += 1
    bundle = ModelBundle(config=config, params=params, bn_state=bn_state, steps=steps)
    bundle.adam = AdamState(learning_rate=config.learning_rate)
    return bundle


def forward(
    bundle: ModelBundle,
    x: np.ndarray,
    mode: str = DETERMINISTIC,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, list]:
    """x: (B, num_axes, L) -> (probs (B, C), caches for backward)."""
    cfg = bundle.config
    if x.ndim != 3 or x.shape[1] != cfg.num_axes or x.shape[2] != cfg.input_length:
        raise ValueError(
            f"expected input (B, {cfg.num_axes}, {cfg.input_length}), got {x.shape}"
        )
    caches = []
    h = x
    for step in bundle.steps:
        if step == SPLIT_AXES:
            b = h.shape[0]
            h = np.ascontiguousarray(h.reshape(b * cfg.num_axes, 1, h.shape[2]))
            caches.append((SPLIT_AXES, b))
            continue
        if step == REGROUP_AXES:
            b, gc, L = h.shape
            g = cfg.num_axes
            h = np.ascontiguousarray(h.reshape(b, g, gc // g, L).transpose(0, 2, 1, 3))
            caches.append((REGROUP_AXES, (b, gc, L)))
            continue
        if step == FLATTEN:
            caches.append((FLATTEN, h.shape))
            h = h.reshape(h.shape[0], -1)
            continue
        lp = bundle.layer_params(step)
        h, cache = layer_forward(step, lp, h, mode, rng=rng, state=bundle.bn_state.get(step.name))
        caches.append((step, cache))
    return h, caches


def backward(bundle: ModelBundle, caches: list, probs: np.ndarray, targets: np.ndarray) -> dict:
    """Gradients of mean cross-entropy (+L2 on dense weights) wrt all params."""
    grads: dict = {}
    # Fused softmax + cross-entropy: skip the softmax layer's own backward.
    assert caches[-1][0].kind == "softmax"
    g = softmax_xent_grad(probs, targets)
    for step, cache in reversed(caches[:-1]):
        if step == SPLIT_AXES:
            b = cache
            g = g.reshape(b, bundle.config.num_axes, g.shape[2])
            continue
        if step == REGROUP_AXES:
            b, gc, L = cache
            g = np.ascontiguousarray(g.transpose(0, 2, 1, 3).reshape(b, gc, L))
            continue
        if step == FLATTEN:
            g = g.reshape(cache)
            continue
        lp = bundle.layer_params(step)
        g, gp = layer_backward(step, lp, cache, g)
        for pname, arr in gp.items():
            grads[f"{step.name}/{pname}"] = arr
    return grads


def train(
    bundle: ModelBundle,
    x: np.ndarray,
    y: np.ndarray,
    epochs: int,
    batch_size: int,
    seed: int,
    context: int = 0,
) -> list[float]:
    """Mini-batch Adam training; returns mean loss per epoch.

    `context` domain-separates the rng streams of independent training
    phases (e.g. baseline vs incremental) under one experiment seed.
    """
    if bundle.adam is None:
        bundle.adam = AdamState(learning_rate=bundle.config.learning_rate)
    losses = []
    n = len(x)
    for epoch in range(epochs):
        order = rngmod.stream(seed, rngmod.TRAIN_SHUFFLE, context, epoch).permutation(n)
        epoch_loss = 0.0
        for bi, start in enumerate(range(0, n, batch_size)):
            idx = order[start : start + batch_size]
            drop_rng = rngmod.stream(seed, rngmod.TRAIN_DROPOUT, context, epoch, bi)
            probs, caches = forward(bundle, x[idx], TRAIN, rng=drop_rng)
            epoch_loss += batch_cross_entropy(probs, y[idx]) * len(idx)
            grads = backward(bundle, caches, probs, y[idx])
            adam_step(bundle.adam, bundle.params, grads)
        losses.append(epoch_loss / n)
    return losses


def param_count(bundle: ModelBundle) -> int:
    """Learnable parameters only; batchnorm running stats excluded."""
    return int(sum(arr.size for arr in bundle.params.values()))


def _tensor_list(bundle: ModelBundle, with_optimizer: bool) -> list[tuple[str, np.ndarray]]:
    tensors = [(name, bundle.params[name]) for name in _canonical_param_order(bundle)]
    for lname in sorted(bundle.bn_state):
        for sname in ("running_mean", "running_var"):
            tensors.append((f"{lname}#{sname}", bundle.bn_state[lname][sname]))
    if with_optimizer and bundle.adam is not None:
        for name in _canonical_param_order(bundle):
            if name in bundle.adam.m:
                tensors.append((f"adam.m/{name}", bundle.adam.m[name]))
                tensors.append((f"adam.v/{name}", bundle.adam.v[name]))
    return tensors


def _canonical_param_order(bundle: ModelBundle) -> list[str]:
    order = []
    for step in bundle.steps:
        if isinstance(step, str):
            continue
        for pname in ("w", "b", "gamma", "beta"):
            key = f"{step.name}/{pname}"
            if key in bundle.params:
                order.append(key)
    return order


def save(bundle: ModelBundle, destination, with_optimizer: bool = True) -> None:
    header = {"config": bundle.config.to_dict(), "adam": None}
    if with_optimizer and bundle.adam is not None:
        a = bundle.adam
        header["adam"] = {
            "learning_rate": a.learning_rate,
            "beta1": a.beta1,
            "beta2": a.beta2,
            "epsilon": a.epsilon,
            "step": a.step,
        }
    Path(destination).write_bytes(serial.pack(header, _tensor_list(bundle, with_optimizer)))


def load(source) -> ModelBundle:
    header, tensors = serial.unpack(Path(source).read_bytes())
    config = HarnetConfig.from_dict(header["config"])
    bundle = ModelBundle(config=config, params={}, bn_state={})
    adam = None
    if header.get("adam") is not None:
        a = header["adam"]
        adam = AdamState(
            learning_rate=a["learning_rate"],
            beta1=a["beta1"],
            beta2=a["beta2"],
            epsilon=a["epsilon"],
            step=a["step"],
        )
    for name, arr in tensors:
        if name.startswith("adam.m/"):
            adam.m[name[len("adam.m/") :]] = arr
        elif name.startswith("adam.v/"):
            adam.v[name[len("adam.v/") :]] = arr
        elif "#" in name:
            lname, sname = name.split("#", 1)
            bundle.bn_state.setdefault(lname, {})[sname] = arr
        else:
            bundle.params[name] = arr
    bundle.adam = adam
    return bundle


def clone(bundle: ModelBundle) -> ModelBundle:
    """Deep copy; training the clone never touches the original."""
    import copy

    out = ModelBundle(
        config=bundle.config,
        params={k: v.copy() for k, v in bundle.params.items()},
        bn_state={k: {s: a.copy() for s, a in st.items()} for k, st in bundle.bn_state.items()},
        steps=bundle.steps,
    )
    out.adam = copy.deepcopy(bundle.adam)
    return out
