"""Pure numpy implementations of the hot kernels.

Same signatures as the compiled ``_ckernels`` module; selected by
:mod:`wavediff._backend` when the extension is missing or disabled.
"""
import numpy as np

NAME = "python"


def _tap_range(L, off):
    # output positions n whose input n + off lies inside [0, L)
    return max(0, -off), min(L, L - off)


def conv1d_forward(x, w, b, dilation=1):
    """Zero-padded 'same' dilated convolution.

    x: (B, Ci, L), w: (Co, Ci, K) with K odd, b: (Co,). Returns (B, Co, L).
    """
    B, Ci, L = x.shape
    Co, _, K = w.shape
    out = np.empty((B, Co, L))
    out[:] = b[None, :, None]
    half = K // 2
    for k in range(K):
        off = (k - half) * dilation
        lo, hi = _tap_range(L, off)
        if lo >= hi:
            continue
        out[:, :, lo:hi] += np.matmul(w[:, :, k], x[:, :, lo + off:hi + off])
    return out


def conv1d_backward(x, w, gout, dilation=1):
    """Gradients of :func:`conv1d_forward` w.r.t. input, weights and bias."""
    B, Ci, L = x.shape
    Co, _, K = w.shape
    gx = np.zeros_like(x)
    gw = np.zeros_like(w)
    half = K // 2
    for k in range(K):
        off = (k - half) * dilation
        lo, hi = _tap_range(L, off)
        if lo >= hi:
            continue
        g = gout[:, :, lo:hi]
        xs = x[:, :, lo + off:hi + off]
        gx[:, :, lo + off:hi + off] += np.matmul(w[:, :, k].T, g)
        gw[:, :, k] = np.tensordot(g, xs, axes=([0, 2], [0, 2]))
    gb = gout.sum(axis=(0, 2))
    return gx, gw, gb


def dwt_analysis(x, lo, hi):
    """Periodic two-band analysis along the last axis of a 2-D array.

    cA[r, m] = sum_k lo[k] * x[r, (2m - k) mod L], same for cD with ``hi``.
    """
    R, L = x.shape
    M = L // 2
    N = len(lo)
    cA = np.zeros((R, M))
    cD = np.zeros((R, M))
    base = 2 * np.arange(M)
    # fixed tap order keeps every row's result independent of the batch
    for k in range(N):
        tap = x[:, (base - k) % L]
        cA += lo[k] * tap
        cD += hi[k] * tap
    return cA, cD


def dwt_synthesis(cA, cD, slo, shi):
    """Inverse of :func:`dwt_analysis` given the synthesis pair."""
    R, M = cA.shape
    L = 2 * M
    N = len(slo)
    out = np.zeros((R, L))
    base = 2 * np.arange(M) - (N - 1)
    for k in range(N):
        # indices are distinct for a fixed k, so fancy-index += is safe
        out[:, (base + k) % L] += slo[k] * cA + shi[k] * cD
    return out
