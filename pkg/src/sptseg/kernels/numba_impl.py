"""Numba-compiled kernel implementations (same contracts as numpy_impl)."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _dft2_matrix_core(xr, xi, wr, wi, yr, yi):
    b, g, _, d = xr.shape
    tr = np.empty((g, g, d))
    ti = np.empty((g, g, d))
    for n in range(b):
        # transform along axis 1
        for a in range(g):
            for c in range(g):
                for k in range(d):
                    sr = 0.0
                    si = 0.0
                    for q in range(g):
                        sr += wr[a, q] * xr[n, q, c, k] - wi[a, q] * xi[n, q, c, k]
                        si += wr[a, q] * xi[n, q, c, k] + wi[a, q] * xr[n, q, c, k]
                    tr[a, c, k] = sr
                    ti[a, c, k] = si
        # transform along axis 2
        for a in range(g):
            for c in range(g):
                for k in range(d):
                    sr = 0.0
                    si = 0.0
                    for q in range(g):
                        sr += wr[c, q] * tr[a, q, k] - wi[c, q] * ti[a, q, k]
                        si += wr[c, q] * ti[a, q, k] + wi[c, q] * tr[a, q, k]
                    yr[n, a, c, k] = sr
                    yi[n, a, c, k] = si


def dft2_matrix(xr, xi, wr, wi):
    yr = np.empty_like(xr)
    yi = np.empty_like(xi)
    _dft2_matrix_core(
        np.ascontiguousarray(xr), np.ascontiguousarray(xi),
        np.ascontiguousarray(wr), np.ascontiguousarray(wi), yr, yi)
    return yr, yi


@njit(cache=True)
def _fft1d_inplace(re, im, sign):
    n = re.shape[0]
    # bit-reversal permutation
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            re[i], re[j] = re[j], re[i]
            im[i], im[j] = im[j], im[i]
    half = 1
    while half < n:
        step = half * 2
        ang = sign * 2.0 * math.pi / step
        for start in range(0, n, step):
            for k in range(half):
                wr = math.cos(ang * k)
                wi = math.sin(ang * k)
                i0 = start + k
                i1 = i0 + half
                tr = wr * re[i1] - wi * im[i1]
                ti = wr * im[i1] + wi * re[i1]
                re[i1] = re[i0] - tr
                im[i1] = im[i0] - ti
                re[i0] = re[i0] + tr
                im[i0] = im[i0] + ti
        half = step


@njit(cache=True)
def _fft2_radix2_core(xr, xi, sign):
    b, g, _, d = xr.shape
    lr = np.empty(g)
    li = np.empty(g)
    for n in range(b):
        for c in range(g):
            for k in range(d):
                for q in range(g):
                    lr[q] = xr[n, q, c, k]
                    li[q] = xi[n, q, c, k]
                _fft1d_inplace(lr, li, sign)
                for q in range(g):
                    xr[n, q, c, k] = lr[q]
                    xi[n, q, c, k] = li[q]
        for a in range(g):
            for k in range(d):
                for q in range(g):
                    lr[q] = xr[n, a, q, k]
                    li[q] = xi[n, a, q, k]
                _fft1d_inplace(lr, li, sign)
                for q in range(g):
                    xr[n, a, q, k] = lr[q]
                    xi[n, a, q, k] = li[q]


def fft2_radix2(xr, xi, sign):
    yr = np.ascontiguousarray(xr).copy()
    yi = np.ascontiguousarray(xi).copy()
    _fft2_radix2_core(yr, yi, float(sign))
    return yr, yi


@njit(cache=True)
def _box_filter_core(x, win, out):
    b, h, w = x.shape
    r = win // 2
    area = float(win * win)
    for n in range(b):
        for i in range(h):
            i0 = max(0, i - r)
            i1 = min(h, i + r + 1)
            for j in range(w):
                j0 = max(0, j - r)
                j1 = min(w, j + r + 1)
                s = 0.0
                for a in range(i0, i1):
                    for c in range(j0, j1):
                        s += x[n, a, c]
                out[n, i, j] = s / area


def box_filter(x, win):
    out = np.empty_like(x)
    _box_filter_core(np.ascontiguousarray(x), win, out)
    return out


@njit(cache=True)
def _confusion_core(truth, pred, mat):
    for i in range(truth.shape[0]):
        mat[truth[i], pred[i]] += 1


def confusion_matrix(truth, pred, ncls):
    mat = np.zeros((ncls, ncls), dtype=np.int64)
    _confusion_core(truth.astype(np.int64).ravel(),
                    pred.astype(np.int64).ravel(), mat)
    return mat
