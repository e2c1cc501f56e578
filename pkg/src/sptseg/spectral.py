"""2D Fourier transforms and the learnable spectral prompt filter.

Patch tokens are reshaped to their G x G spatial grid and transformed per
channel. Grids whose side is a power of two take the radix-2 path; any
other side falls back to a direct transform-matrix application. Both paths
are validated against a brute-force DFT oracle in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .autodiff import Tensor
from .errors import DimensionError

_twiddle_cache = {}


def _twiddles(g, sign):
    key = (g, sign)
    if key not in _twiddle_cache:
        a = np.arange(g)
        ang = sign * 2.0 * np.pi * np.outer(a, a) / g
        _twiddle_cache[key] = (np.cos(ang), np.sin(ang))
    return _twiddle_cache[key]


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def _apply_dft(xr, xi, sign):
    """Unnormalized 2D DFT over axes 1, 2 of (B, G, G, D) arrays."""
    g = xr.shape[1]
    if _is_pow2(g):
        return kernels.fft2_radix2(xr, xi, sign)
    wr, wi = _twiddles(g, sign)
    return kernels.dft2_matrix(xr, xi, wr, wi)


@dataclass
class ComplexTensor:
    """Frequency-domain value: paired real/imaginary tensors of equal shape."""

    re: Tensor
    im: Tensor

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise DimensionError(
                f"re/im shapes differ: {self.re.shape} vs {self.im.shape}")

    @property
    def shape(self):
        return self.re.shape


@dataclass
class SpectralFilter:
    """Learnable complex frequency filter of shape (G, G, D)."""

    re: Tensor
    im: Tensor

    @classmethod
    def initialize(cls, grid, width, rng, noise=0.02):
        """Identity filter (1 + 0i) perturbed by Gaussian noise."""
        re = Tensor(1.0 + noise * rng.standard_normal((grid, grid, width)),
                    requires_grad=True)
        im = Tensor(noise * rng.standard_normal((grid, grid, width)),
                    requires_grad=True)
        return cls(re, im)

    @property
    def grid(self):
        return self.re.shape[0]


def _grid_shape(x):
    if x.ndim not in (3, 4):
        raise DimensionError(f"expected (G, G, D) or (B, G, G, D), got {x.shape}")
    g1, g2 = x.shape[-3], x.shape[-2]
    if g1 != g2:
        raise DimensionError(f"non-square grid {g1}x{g2}")
    return g1


def _dft_pair(re_t, im_t, sign, scale):
    """Differentiable transform of a ComplexTensor's components.

    The transform is linear, so each output's backward applies the adjoint
    (conjugate) transform to its incoming gradient.
    """
    g = _grid_shape(re_t)
    lead = re_t.shape[:-3]
    flat = (int(np.prod(lead)),) + re_t.shape[-3:] if lead else (1,) + re_t.shape

    def run(ar, ai, s):
        yr, yi = _apply_dft(ar.reshape(flat), ai.reshape(flat), s)
        return yr.reshape(re_t.shape), yi.reshape(re_t.shape)

    yr, yi = run(re_t.data, im_t.data, sign)
    if scale != 1.0:
        yr = yr * scale
        yi = yi * scale

    def bw_re(grad, out):
        ar, ai = run(grad, np.zeros_like(grad), -sign)
        return ar * scale, ai * scale

    def bw_im(grad, out):
        ar, ai = run(np.zeros_like(grad), grad, -sign)
        return ar * scale, ai * scale

    out_re = Tensor._from_op(yr, (re_t, im_t), bw_re)
    out_im = Tensor._from_op(yi, (re_t, im_t), bw_im)
    return out_re, out_im


def fft2(x):
    """Forward per-channel 2D DFT of a real (.., G, G, D) tensor (unnormalized)."""
    if isinstance(x, ComplexTensor):
        re, im = x.re, x.im
    else:
        re = x
        im = Tensor(np.zeros(x.shape))
    _grid_shape(re)
    yr, yi = _dft_pair(re, im, sign=-1.0, scale=1.0)
    return ComplexTensor(yr, yi)


def ifft2(f):
    """Inverse transform with 1/G^2 normalization; returns the real part.

    The discarded imaginary residue is recorded on the result as
    ``imag_residue``; gradients flow only through the real part.
    """
    g = _grid_shape(f.re)
    yr, yi = _dft_pair(f.re, f.im, sign=1.0, scale=1.0 / (g * g))
    yr.imag_residue = float(np.max(np.abs(yi.data))) if yi.data.size else 0.0
    return yr


def ifft2_complex(f):
    """Inverse transform keeping both parts (verification use)."""
    g = _grid_shape(f.re)
    yr, yi = _dft_pair(f.re, f.im, sign=1.0, scale=1.0 / (g * g))
    return ComplexTensor(yr, yi)


def spectral_prompt(h, g, filt):
    """Spectral prompt: real(IFFT(FFT(grid(h * g)) * w_f)), token-shaped.

    h: (N, D) or (B, N, D) patch tokens; g: (D,) or (B, D) cls feature;
    filt: SpectralFilter with grid side sqrt(N). Differentiable w.r.t. all
    three.
    """
    n, d = h.shape[-2], h.shape[-1]
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise DimensionError(f"token count {n} is not a perfect square")
    if filt.re.shape != (side, side, d):
        raise DimensionError(
            f"filter shape {filt.re.shape} does not match grid ({side}, {side}, {d})")

    if g.ndim == h.ndim - 1:
        g_b = g.reshape(g.shape[:-1] + (1, d))
    else:
        g_b = g
    mixed = h * g_b
    grid = mixed.reshape(h.shape[:-2] + (side, side, d))
    f = fft2(grid)
    fr = f.re * filt.re - f.im * filt.im
    fi = f.re * filt.im + f.im * filt.re
    s = ifft2(ComplexTensor(fr, fi))
    return s.reshape(h.shape)
