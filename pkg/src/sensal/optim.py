"""Adam optimizer and cross-entropy loss."""

from dataclasses import dataclass, field

import numpy as np

PROB_FLOOR = 1e-12


class GradientError(ValueError):
    """Non-finite gradient; message names the offending parameter."""


@dataclass
class AdamState:
    learning_rate: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> None:
    """One Adam update with bias correction, in place over a flat param dict."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient for parameter {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / (1 - b1**t)
        v_hat = state.v[name] / (1 - b2**t)
        params[name] = params[name] - state.learning_rate * m_hat / (
            np.sqrt(v_hat) + state.epsilon
        )


def cross_entropy(probs: np.ndarray, target: int) -> float:
    """-log p[target] with the probability floor clamp."""
    probs = np.asarray(probs, dtype=float)
    if not (0 <= target < probs.shape[-1]):
        raise IndexError(f"target {target} out of range for {probs.shape[-1]} classes")
    if probs.min() < -1e-9 or abs(probs.sum() - 1.0) > 1e-6:
        raise ValueError("cross_entropy expects a probability vector")
    return float(-np.log(max(probs[target], PROB_FLOOR)))


def batch_cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean -log p[target] over a (B, C) batch."""
    picked = probs[np.arange(len(targets)), targets]
    return float(-np.log(np.clip(picked, PROB_FLOOR, None)).mean())


def softmax_xent_grad(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Fused gradient of mean CE wrt softmax logits: (p - onehot) / B."""
    g = probs.copy()
    g[np.arange(len(targets)), targets] -= 1.0
    return g / len(targets)
