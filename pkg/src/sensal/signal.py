"""Windowing, decimation and Haar feature extraction for 3-axis streams."""

from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)


@dataclass
class SensorWindow:
    axes: np.ndarray  # (3, n) float64
    rate_hz: float
    user_id: str = ""
    device_id: str = ""
    label: int | None = None

    def __post_init__(self):
        self.axes = np.asarray(self.axes, dtype=np.float64)
        if self.axes.ndim != 2 or self.axes.shape[0] != 3:
            raise ValueError(f"expected (3, n) axes, got {self.axes.shape}")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")


@dataclass
class FeatureWindow:
    coefficients: np.ndarray  # (3, n/2) Haar approximation coefficients
    rate_hz: float
    user_id: str = ""
    device_id: str = ""
    label: int | None = None
    meta: dict = field(default_factory=dict)


def segment(
    samples: np.ndarray,
    labels: np.ndarray | None,
    rate_hz: float,
    window_seconds: float = 2.0,
    user_id: str = "",
    device_id: str = "",
) -> list[SensorWindow]:
    """Cut a sorted (n, 3) stream into non-overlapping fixed-size windows.

    The trailing partial window is discarded. A window keeps a label only
    when every constituent sample agrees; mixed-label windows are dropped.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        return []
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValueError(f"expected (n, 3) samples, got {samples.shape}")
    wlen = round(window_seconds * rate_hz)
    windows = []
    for start in range(0, len(samples) - wlen + 1, wlen):
        chunk = samples[start : start + wlen]
        label = None
        if labels is not None:
            seen = set(labels[start : start + wlen].tolist())
            if len(seen) != 1:
                continue
            label = int(seen.pop())
        windows.append(
            SensorWindow(
                axes=chunk.T.copy(),
                rate_hz=rate_hz,
                user_id=user_id,
                device_id=device_id,
                label=label,
            )
        )
    return windows


def decimate(window: SensorWindow, target_hz: float = 100.0) -> SensorWindow:
    """Down-sample to target_hz; integer ratios use a width-k moving
    average as anti-alias filter, non-integer ratios linear interpolation."""
    rate = window.rate_hz
    if rate < target_hz:
        raise ValueError(f"cannot upsample {rate} Hz to {target_hz} Hz")
    if rate == target_hz:
        return window
    n = window.axes.shape[1]
    out_len = int(np.floor(n * target_hz / rate))
    ratio = rate / target_hz
    if abs(ratio - round(ratio)) < 1e-9:
        k = int(round(ratio))
        usable = out_len * k
        blocks = window.axes[:, :usable].reshape(3, out_len, k)
        data = blocks.mean(axis=2)
    else:
        t_src = np.arange(n) / rate
        t_dst = np.arange(out_len) / target_hz
        data = np.vstack([np.interp(t_dst, t_src, ax) for ax in window.axes])
    return SensorWindow(
        axes=data,
        rate_hz=target_hz,
        user_id=window.user_id,
        device_id=window.device_id,
        label=window.label,
    )


def dwt_approx(window: SensorWindow) -> FeatureWindow:
    """Single-level orthonormal Haar approximation: a_k = (x_2k + x_2k+1)/sqrt(2).

    Odd-length windows drop their final sample first.
    """
    n = window.axes.shape[1]
    if n < 2:
        raise ValueError(f"window of {n} samples is too short for the transform")
    m = n - (n % 2)
    pairs = window.axes[:, :m].reshape(3, m // 2, 2)
    coeffs = pairs.sum(axis=2) / SQRT2
    return FeatureWindow(
        coefficients=coeffs,
        rate_hz=window.rate_hz,
        user_id=window.user_id,
        device_id=window.device_id,
        label=window.label,
    )


def preprocess(window: SensorWindow, target_hz: float | None) -> FeatureWindow:
    """Decimate (when a target is given and differs) then transform."""
    if target_hz is not None and window.rate_hz != target_hz:
        window = decimate(window, target_hz)
    return dwt_approx(window)
