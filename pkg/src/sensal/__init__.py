"""Deep Bayesian active learning for wearable accelerometer time series."""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
