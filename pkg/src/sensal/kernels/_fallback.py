"""Pure-numpy convolution kernels (im2col via strided window views).

Same-padding, stride-1 cross-correlation. The compiled `_native` module
implements the identical contract; `sensal.kernels` picks one at import.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv1d_forward(x, w, b):
    """x: (B, Cin, L), w: (Cout, Cin, K), b: (Cout,) -> (B, Cout, L)."""
    k = w.shape[2]
    pl = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pl, k - 1 - pl)))
    win = sliding_window_view(xp, k, axis=2)
    return np.einsum("bclk,ock->bol", win, w, optimize=True) + b[None, :, None]


def conv1d_backward(x, w, gy):
    """Gradients of conv1d_forward; returns (gx, gw, gb)."""
    k = w.shape[2]
    pl = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pl, k - 1 - pl)))
    win = sliding_window_view(xp, k, axis=2)
    gw = np.einsum("bclk,bol->ock", win, gy, optimize=True)
    gb = gy.sum(axis=(0, 2))
    gyp = np.pad(gy, ((0, 0), (0, 0), (k - 1, k - 1)))
    gwin = sliding_window_view(gyp, k, axis=2)
    gxp = np.einsum("boik,ock->bci", gwin, w[:, :, ::-1], optimize=True)
    gx = gxp[:, :, pl : pl + x.shape[2]]
    return np.ascontiguousarray(gx), gw, gb


def conv2d_forward(x, w, b):
    """x: (B, Cin, H, W), w: (Cout, Cin, KH, KW), b: (Cout,) -> (B, Cout, H, W)."""
    kh, kw = w.shape[2], w.shape[3]
    pt, pl = (kh - 1) // 2, (kw - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pt, kh - 1 - pt), (pl, kw - 1 - pl)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return np.einsum("bchwij,ocij->bohw", win, w, optimize=True) + b[None, :, None, None]


def conv2d_backward(x, w, gy):
    """Gradients of conv2d_forward; returns (gx, gw, gb)."""
    kh, kw = w.shape[2], w.shape[3]
    pt, pl = (kh - 1) // 2, (kw - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pt, kh - 1 - pt), (pl, kw - 1 - pl)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    gw = np.einsum("bchwij,bohw->ocij", win, gy, optimize=True)
    gb = gy.sum(axis=(0, 2, 3))
    gyp = np.pad(gy, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    gwin = sliding_window_view(gyp, (kh, kw), axis=(2, 3))
    gxp = np.einsum("bohwij,ocij->bchw", gwin, w[:, :, ::-1, ::-1], optimize=True)
    gx = gxp[:, :, pt : pt + x.shape[2], pl : pl + x.shape[3]]
    return np.ascontiguousarray(gx), gw, gb
