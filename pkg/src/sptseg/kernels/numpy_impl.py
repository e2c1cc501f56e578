"""Pure-numpy kernel implementations."""

import numpy as np


def dft2_matrix(xr, xi, wr, wi):
    """Apply the complex transform matrix (wr + i*wi) along axes 1 and 2.

    x has shape (B, G, G, D); w has shape (G, G). Works for any G, used as
    the non-power-of-two path. Unnormalized: the caller owns scaling.
    """
    z = xr + 1j * xi
    w = wr + 1j * wi
    t = np.einsum("ag,bgcd->bacd", w, z)
    y = np.einsum("cg,bagd->bacd", w, t)
    return np.ascontiguousarray(y.real), np.ascontiguousarray(y.imag)


def _bit_reverse_permutation(n):
    rev = np.zeros(n, dtype=np.int64)
    bits = n.bit_length() - 1
    for i in range(n):
        v = i
        r = 0
        for _ in range(bits):
            r = (r << 1) | (v & 1)
            v >>= 1
        rev[i] = r
    return rev


def _fft1d_radix2(z, axis, sign):
    """Iterative radix-2 FFT along one axis; length must be a power of two."""
    z = np.moveaxis(z, axis, 0)
    n = z.shape[0]
    z = z[_bit_reverse_permutation(n)].copy()
    tail = (1,) * (z.ndim - 1)
    half = 1
    while half < n:
        step = half * 2
        w = np.exp(sign * 2j * np.pi * np.arange(half) / step).reshape((half,) + tail)
        blocks = z.reshape((n // step, step) + z.shape[1:])
        even = blocks[:, :half]
        odd = blocks[:, half:]
        t = w * odd
        blocks[:, half:] = even - t
        blocks[:, :half] = even + t
        half = step
    return np.moveaxis(z, 0, axis)


def fft2_radix2(xr, xi, sign):
    """Radix-2 2D FFT over axes 1 and 2 of a (B, G, G, D) array, G = 2^k.

    sign=-1 is the forward convention, +1 the inverse; unnormalized.
    """
    z = xr + 1j * xi
    z = _fft1d_radix2(z, 1, sign)
    z = _fft1d_radix2(z, 2, sign)
    return np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag)


def box_filter(x, win):
    """Uniform-window local mean over (B, H, W), zero-padded, same size.

    Divides by the full window area everywhere, borders included. The
    operator is symmetric, so it is its own adjoint.
    """
    b, h, w = x.shape
    r = win // 2
    xp = np.zeros((b, h + 2 * r, w + 2 * r), dtype=x.dtype)
    xp[:, r:r + h, r:r + w] = x
    s = np.zeros((b, h + win, w + win), dtype=x.dtype)
    s[:, 1:, 1:] = xp.cumsum(axis=1).cumsum(axis=2)
    out = (s[:, win:, win:] - s[:, :-win, win:]
           - s[:, win:, :-win] + s[:, :-win, :-win])
    return out / float(win * win)


def confusion_matrix(truth, pred, ncls):
    """Accumulate a (truth, pred) confusion matrix over flat int64 labels."""
    idx = truth.astype(np.int64) * ncls + pred.astype(np.int64)
    counts = np.bincount(idx, minlength=ncls * ncls)
    return counts.reshape(ncls, ncls).astype(np.int64)
