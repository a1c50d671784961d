"""NumPy implementations of the hot kernels.

Same call signatures as the compiled module ``msnevo._kernels``; inputs are
assumed validated (contiguous float64, shapes already checked upstream).
"""

import numpy as np


def canberra(x, y):
    num = np.abs(x - y)
    den = np.abs(x) + np.abs(y)
    # 0/0 terms contribute 0 by convention
    mask = den > 0.0
    return float(np.sum(num[mask] / den[mask]))


def _windows(x, kh, kw, stride):
    n, c, h, w = x.shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    sn, sc, sh, sw = x.strides
    return np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, ho, wo, kh, kw),
        strides=(sn, sc, sh * stride, sw * stride, sh, sw),
        writeable=False,
    )


def conv2d_forward(x, w, b, stride, padding):
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = _windows(x, w.shape[2], w.shape[3], stride)
    out = np.einsum("nchwij,ocij->nohw", win, w, optimize=True)
    out += b[None, :, None, None]
    return out


def maxpool2d_forward(x, window, stride):
    win = _windows(x, window, window, stride)
    return win.max(axis=(4, 5))
