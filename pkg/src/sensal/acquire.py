"""MC-dropout predictive distributions and acquisition scoring.

T stochastic forward passes with dropout active approximate the posterior
predictive; the acquisition functions rank pool windows by how much an
oracle label for them would teach the model.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .layers import DETERMINISTIC, STOCHASTIC
from .model import ModelBundle, forward
from .optim import PROB_FLOOR

FUNCTIONS = ("maxentropy", "bald", "varratio", "random")


@dataclass
class PredictiveSample:
    per_pass: np.ndarray  # (T, C) class probabilities, one row per pass
    mean: np.ndarray  # (C,) arithmetic mean over passes

    @classmethod
    def from_passes(cls, per_pass: np.ndarray) -> "PredictiveSample":
        per_pass = np.asarray(per_pass, dtype=np.float64)
        if per_pass.ndim != 2 or per_pass.shape[0] < 1:
            raise ValueError(f"expected (T, C) with T >= 1, got {per_pass.shape}")
        return cls(per_pass=per_pass, mean=per_pass.mean(axis=0))


@dataclass
class AcquisitionBatch:
    scores: np.ndarray
    ranking: np.ndarray  # pool indices, score-descending, ties by index
    selected: np.ndarray  # first ceil(eta * |pool|) of the ranking
    eta: float
    function_name: str


def predict_mc(
    bundle: ModelBundle, x: np.ndarray, t_passes: int, seed: int, window_id: int = 0
) -> PredictiveSample:
    """T stochastic-eval passes on one (num_axes, L) input.

    Each pass draws its dropout masks from a stream keyed by
    (seed, window_id, pass); results do not depend on evaluation order.
    """
    if t_passes < 1:
        raise ValueError("need at least one stochastic pass")
    xb = x[None, :, :]
    rows = np.empty((t_passes, bundle.config.num_classes))
    for t in range(t_passes):
        pass_rng = rngmod.stream(seed, rngmod.MC_PASS, window_id, t)
        probs, _ = forward(bundle, xb, STOCHASTIC, rng=pass_rng)
        rows[t] = probs[0]
    return PredictiveSample.from_passes(rows)


def predict_deterministic(bundle: ModelBundle, x: np.ndarray) -> np.ndarray:
    probs, _ = forward(bundle, x[None, :, :], DETERMINISTIC)
    return probs[0]


def _entropy(p: np.ndarray) -> np.ndarray:
    q = np.clip(p, PROB_FLOOR, None)
    return -(p * np.log(q)).sum(axis=-1)


def max_entropy(sample: PredictiveSample) -> float:
    """Shannon entropy (nats) of the mean predictive distribution."""
    return float(_entropy(sample.mean))


def bald(sample: PredictiveSample) -> float:
    """Mutual information: H(mean) minus average per-pass entropy."""
    return float(_entropy(sample.mean) - _entropy(sample.per_pass).mean())


def variation_ratio(sample: PredictiveSample) -> float:
    """1 - max mean class probability (least-confidence score)."""
    return float(1.0 - sample.mean.max())


def random_scores(n: int, seed: int) -> np.ndarray:
    """Uniform [0, 1) score per pool index from the seeded stream."""
    return rngmod.stream(seed, rngmod.RANDOM_SCORE).random(n)


def select(
    pool: np.ndarray,
    bundle: ModelBundle,
    function: str,
    eta: float,
    t_passes: int,
    seed: int,
) -> AcquisitionBatch:
    """Score every pool window, rank descending, keep the top ceil(eta*n).

    pool: (n, num_axes, L) feature array. Ties rank by ascending pool
    index so replays are deterministic.
    """
    if function not in FUNCTIONS:
        raise ValueError(f"unknown acquisition function {function!r}; choose from {FUNCTIONS}")
    if not (0.0 <= eta <= 1.0):
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    n = len(pool)
    if n == 0 and eta > 0:
        raise ValueError("empty pool")
    if function == "random":
        scores = random_scores(n, seed)
    else:
        fn = {"maxentropy": max_entropy, "bald": bald, "varratio": variation_ratio}[function]
        scores = np.array(
            [fn(predict_mc(bundle, pool[i], t_passes, seed, window_id=i)) for i in range(n)]
        )
    ranking = np.lexsort((np.arange(n), -scores))
    k = math.ceil(eta * n)
    return AcquisitionBatch(
        scores=scores,
        ranking=ranking,
        selected=ranking[:k].copy(),
        eta=eta,
        function_name=function,
    )
