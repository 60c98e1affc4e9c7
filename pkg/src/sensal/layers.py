"""Layer forward/backward passes for the network engine.

Each layer is a pure function of (spec, params, input, mode, rng); the
forward returns a cache that the backward consumes, so gradients are
exact for the forward as executed (dropout masks included). Convolutions
delegate their inner loops to `sensal.kernels`.
"""

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import kernels

TRAIN = "train"
STOCHASTIC = "stochastic-eval"
DETERMINISTIC = "deterministic-eval"

KINDS = (
    "conv1d",
    "conv2d",
    "batchnorm",
    "maxpool1d",
    "maxpool2d",
    "dense",
    "dropout",
    "relu",
    "softmax",
    "concat-axes",
)

BN_MOMENTUM = 0.9
BN_EPS = 1e-5


class ShapeError(ValueError):
    """Input incompatible with a layer; message names the layer and shapes."""


class CacheError(ValueError):
    """Backward called with a cache that does not match the spec."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str
    hp: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        p = self.hp.get("p")
        if p is not None and not (0.0 <= p < 1.0):
            raise ValueError(f"{self.name}: dropout probability must be in [0, 1), got {p}")


def init_params(spec: LayerSpec, in_shape: tuple, rng: np.random.Generator) -> dict:
    """Fan-based uniform init (limit sqrt(6/(fan_in+fan_out))), zero biases."""
    kind, hp = spec.kind, spec.hp
    if kind == "conv1d":
        c_out, k = hp["filters"], hp["kernel"]
        g = hp.get("groups", 1)
        c_in = in_shape[1] // g
        limit = np.sqrt(6.0 / (c_in * k + c_out * k))
        if g > 1:
            return {
                "w": rng.uniform(-limit, limit, size=(g, c_out, c_in, k)),
                "b": np.zeros((g, c_out)),
            }
        return {
            "w": rng.uniform(-limit, limit, size=(c_out, c_in, k)),
            "b": np.zeros(c_out),
        }
    if kind == "conv2d":
        c_out, (kh, kw), c_in = hp["filters"], hp["kernel"], in_shape[1]
        limit = np.sqrt(6.0 / (c_in * kh * kw + c_out * kh * kw))
        return {
            "w": rng.uniform(-limit, limit, size=(c_out, c_in, kh, kw)),
            "b": np.zeros(c_out),
        }
    if kind == "dense":
        f_in, units = in_shape[1], hp["units"]
        limit = np.sqrt(6.0 / (f_in + units))
        return {
            "w": rng.uniform(-limit, limit, size=(f_in, units)),
            "b": np.zeros(units),
        }
    if kind == "batchnorm":
        c = in_shape[1]
        return {"gamma": np.ones(c), "beta": np.zeros(c)}
    return {}


def init_state(spec: LayerSpec, in_shape: tuple) -> dict:
    """Non-learnable persistent state (batchnorm running statistics)."""
    if spec.kind == "batchnorm":
        c = in_shape[1]
        return {"running_mean": np.zeros(c), "running_var": np.ones(c)}
    return {}


def layer_forward(
    spec: LayerSpec,
    params: dict,
    x: np.ndarray,
    mode: str,
    rng: np.random.Generator | None = None,
    state: dict | None = None,
) -> tuple[np.ndarray, dict]:
    kind, hp = spec.kind, spec.hp

    if kind == "conv1d":
        w = params["w"]
        g = hp.get("groups", 1)
        c_in = w.shape[-2]
        if x.ndim != 3 or x.shape[1] != g * c_in:
            raise ShapeError(f"{spec.name}: conv1d expects (B, {g * c_in}, L), got {x.shape}")
        if w.shape[-1] > x.shape[2]:
            raise ShapeError(f"{spec.name}: kernel {w.shape[-1]} exceeds input length {x.shape[2]}")
        if g == 1:
            y = kernels.conv1d_forward(np.ascontiguousarray(x), w, params["b"])
        else:
            y = np.concatenate(
                [
                    kernels.conv1d_forward(
                        np.ascontiguousarray(x[:, i * c_in : (i + 1) * c_in]),
                        w[i],
                        params["b"][i],
                    )
                    for i in range(g)
                ],
                axis=1,
            )
        return y, {"kind": kind, "x": x}

    if kind == "conv2d":
        w = params["w"]
        if x.ndim != 4 or x.shape[1] != w.shape[1]:
            raise ShapeError(f"{spec.name}: conv2d expects (B, {w.shape[1]}, H, W), got {x.shape}")
        if w.shape[2] > x.shape[2] or w.shape[3] > x.shape[3]:
            raise ShapeError(f"{spec.name}: kernel {w.shape[2:]} exceeds input {x.shape[2:]}")
        y = kernels.conv2d_forward(np.ascontiguousarray(x), w, params["b"])
        return y, {"kind": kind, "x": x}

    if kind == "dense":
        w = params["w"]
        if x.ndim != 2 or x.shape[1] != w.shape[0]:
            raise ShapeError(f"{spec.name}: dense expects (B, {w.shape[0]}), got {x.shape}")
        y = x @ w + params["b"]
        return y, {"kind": kind, "x": x}

    if kind == "batchnorm":
        if state is None:
            raise ShapeError(f"{spec.name}: batchnorm requires running-statistics state")
        axes = (0,) + tuple(range(2, x.ndim))
        if mode == TRAIN:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            state["running_mean"] = BN_MOMENTUM * state["running_mean"] + (1 - BN_MOMENTUM) * mean
            state["running_var"] = BN_MOMENTUM * state["running_var"] + (1 - BN_MOMENTUM) * var
        else:
            mean, var = state["running_mean"], state["running_var"]
        shape = (1, -1) + (1,) * (x.ndim - 2)
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
        y = params["gamma"].reshape(shape) * xhat + params["beta"].reshape(shape)
        return y, {
            "kind": kind,
            "xhat": xhat,
            "inv_std": inv_std,
            "axes": axes,
            "train": mode == TRAIN,
        }

    if kind == "maxpool1d":
        s = hp["size"]
        if x.ndim != 3 or x.shape[2] < s:
            raise ShapeError(f"{spec.name}: maxpool1d(size={s}) on {x.shape}")
        n = x.shape[2] // s
        xr = x[:, :, : n * s].reshape(x.shape[0], x.shape[1], n, s)
        idx = xr.argmax(axis=3)
        y = np.take_along_axis(xr, idx[..., None], axis=3)[..., 0]
        return y, {"kind": kind, "idx": idx, "in_shape": x.shape, "size": s}

    if kind == "maxpool2d":
        sh, sw = hp["size"]
        if x.ndim != 4 or x.shape[2] < sh or x.shape[3] < sw:
            raise ShapeError(f"{spec.name}: maxpool2d(size={(sh, sw)}) on {x.shape}")
        b, c = x.shape[0], x.shape[1]
        nh, nw = x.shape[2] // sh, x.shape[3] // sw
        blocks = (
            x[:, :, : nh * sh, : nw * sw]
            .reshape(b, c, nh, sh, nw, sw)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, nh, nw, sh * sw)
        )
        idx = blocks.argmax(axis=4)
        y = np.take_along_axis(blocks, idx[..., None], axis=4)[..., 0]
        return y, {"kind": kind, "idx": idx, "in_shape": x.shape, "size": (sh, sw)}

    if kind == "dropout":
        p = hp["p"]
        if mode == DETERMINISTIC or p == 0.0:
            return x, {"kind": kind, "mask": None}
        if rng is None:
            raise ShapeError(f"{spec.name}: dropout with p={p} needs an rng in mode {mode}")
        mask = (rng.random(x.shape) >= p) / (1.0 - p)
        return x * mask, {"kind": kind, "mask": mask}

    if kind == "relu":
        y = np.maximum(x, 0.0)
        return y, {"kind": kind, "gate": x > 0}

    if kind == "softmax":
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=-1, keepdims=True)
        return y, {"kind": kind, "y": y}

    if kind == "concat-axes":
        # (B*A, C, L) per-axis feature maps -> one (B, C, A, L) spatial map.
        a = hp["axes"]
        if x.ndim != 3 or x.shape[0] % a != 0:
            raise ShapeError(f"{spec.name}: cannot stack {a} axes from batch {x.shape}")
        b = x.shape[0] // a
        y = x.reshape(b, a, x.shape[1], x.shape[2]).transpose(0, 2, 1, 3)
        return np.ascontiguousarray(y), {"kind": kind, "in_shape": x.shape, "axes": a}

    raise ValueError(f"unknown layer kind {kind!r}")


def layer_backward(
    spec: LayerSpec, params: dict, cache: dict, gy: np.ndarray
) -> tuple[np.ndarray, dict]:
    kind = spec.kind
    if cache.get("kind") != kind:
        raise CacheError(f"{spec.name}: cache from {cache.get('kind')!r} passed to {kind!r}")

    if kind == "conv1d":
        g = spec.hp.get("groups", 1)
        if g == 1:
            gx, gw, gb = kernels.conv1d_backward(
                np.ascontiguousarray(cache["x"]), params["w"], np.ascontiguousarray(gy)
            )
            return gx, {"w": gw, "b": gb}
        x, w = cache["x"], params["w"]
        c_in, c_out = w.shape[2], w.shape[1]
        gxs, gws, gbs = [], [], []
        for i in range(g):
            gxi, gwi, gbi = kernels.conv1d_backward(
                np.ascontiguousarray(x[:, i * c_in : (i + 1) * c_in]),
                np.ascontiguousarray(w[i]),
                np.ascontiguousarray(gy[:, i * c_out : (i + 1) * c_out]),
            )
            gxs.append(gxi)
            gws.append(gwi)
            gbs.append(gbi)
        return np.concatenate(gxs, axis=1), {"w": np.stack(gws), "b": np.stack(gbs)}

    if kind == "conv2d":
        gx, gw, gb = kernels.conv2d_backward(
            np.ascontiguousarray(cache["x"]), params["w"], np.ascontiguousarray(gy)
        )
        return gx, {"w": gw, "b": gb}

    if kind == "dense":
        x = cache["x"]
        gw = x.T @ gy
        decay = spec.hp.get("weight_decay", 0.0)
        if decay:
            gw = gw + decay * params["w"]
        return gy @ params["w"].T, {"w": gw, "b": gy.sum(axis=0)}

    if kind == "batchnorm":
        xhat, inv_std, axes = cache["xhat"], cache["inv_std"], cache["axes"]
        shape = (1, -1) + (1,) * (gy.ndim - 2)
        ggamma = (gy * xhat).sum(axis=axes)
        gbeta = gy.sum(axis=axes)
        gxhat = gy * params["gamma"].reshape(shape)
        if cache["train"]:
            n = gy.size // gy.shape[1]
            gx = (
                inv_std.reshape(shape)
                / n
                * (
                    n * gxhat
                    - gxhat.sum(axis=axes, keepdims=True)
                    - xhat * (gxhat * xhat).sum(axis=axes, keepdims=True)
                )
            )
        else:
            gx = gxhat * inv_std.reshape(shape)
        return gx, {"gamma": ggamma, "beta": gbeta}

    if kind == "maxpool1d":
        idx, in_shape, s = cache["idx"], cache["in_shape"], cache["size"]
        b, c, L = in_shape
        n = L // s
        gxr = np.zeros((b, c, n, s))
        np.put_along_axis(gxr, idx[..., None], gy[..., None], axis=3)
        gx = np.zeros(in_shape)
        gx[:, :, : n * s] = gxr.reshape(b, c, n * s)
        return gx, {}

    if kind == "maxpool2d":
        idx, in_shape, (sh, sw) = cache["idx"], cache["in_shape"], cache["size"]
        b, c, H, W = in_shape
        nh, nw = H // sh, W // sw
        gblocks = np.zeros((b, c, nh, nw, sh * sw))
        np.put_along_axis(gblocks, idx[..., None], gy[..., None], axis=4)
        gx = np.zeros(in_shape)
        gx[:, :, : nh * sh, : nw * sw] = (
            gblocks.reshape(b, c, nh, nw, sh, sw)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, nh * sh, nw * sw)
        )
        return gx, {}

    if kind == "dropout":
        mask = cache["mask"]
        return (gy if mask is None else gy * mask), {}

    if kind == "relu":
        return gy * cache["gate"], {}

    if kind == "softmax":
        y = cache["y"]
        return (gy - (gy * y).sum(axis=-1, keepdims=True)) * y, {}

    if kind == "concat-axes":
        a = cache["axes"]
        b, c, _, L = gy.shape[0], gy.shape[1], gy.shape[2], gy.shape[3]
        gx = gy.transpose(0, 2, 1, 3).reshape(b * a, c, L)
        return np.ascontiguousarray(gx), {}

    raise ValueError(f"unknown layer kind {kind!r}")


def out_shape(spec: LayerSpec, in_shape: tuple) -> tuple:
    """Shape bookkeeping used when assembling a network."""
    kind, hp = spec.kind, spec.hp
    if kind == "conv1d":
        return (in_shape[0], hp["filters"] * hp.get("groups", 1), in_shape[2])
    if kind == "conv2d":
        return (in_shape[0], hp["filters"], in_shape[2], in_shape[3])
    if kind == "dense":
        return (in_shape[0], hp["units"])
    if kind == "maxpool1d":
        return (in_shape[0], in_shape[1], in_shape[2] // hp["size"])
    if kind == "maxpool2d":
        sh, sw = hp["size"]
        return (in_shape[0], in_shape[1], in_shape[2] // sh, in_shape[3] // sw)
    if kind == "concat-axes":
        a = hp["axes"]
        return (in_shape[0] // a, in_shape[1], a, in_shape[2])
    return in_shape
