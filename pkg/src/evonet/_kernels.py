"""Compiled per-sample kernels for the streaming hot loop.

Network parameters live in one flat float64 buffer ``theta`` laid out as
``W_1, b_1, ..., W_D, b_D, W_out, c_out`` (row-major matrices) and described
by ``dims = [n, R_1, ..., R_D, m]``.  The numpy implementations in
``network`` and ``significance`` are the reference; these kernels must agree
with them to rounding error.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_PROBIT = math.pi / 8.0
_SQRT_PROBIT = math.sqrt(math.pi / 8.0)
_INV_2PI = 1.0 / (2.0 * math.pi)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@njit(cache=True)
def sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def norm_cdf(h):
    return 0.5 * math.erfc(-h * _INV_SQRT2)


@njit(cache=True)
def owens_t(h, a):
    """Owen's T function for 0 <= a <= 1 by Gauss-Legendre quadrature."""
    total = 0.0
    half = 0.5 * a
    hh = 0.5 * h * h
    for k in range(_GL_NODES.size):
        x = half * (_GL_NODES[k] + 1.0)
        q = 1.0 + x * x
        total += _GL_WEIGHTS[k] * math.exp(-hh * q) / q
    return total * half * _INV_2PI


@njit(cache=True)
def _forward(theta, dims, x, classification, acts):
    """Fill ``acts`` with hidden activations; return the head output."""
    depth = dims.size - 2
    off = 0
    aoff = 0
    prev_off = -1
    width_in = dims[0]
    for d in range(depth):
        width = dims[d + 1]
        boff = off + width_in * width
        for j in range(width):
            z = theta[boff + j]
            for i in range(width_in):
                v = x[i] if prev_off < 0 else acts[prev_off + i]
                z += v * theta[off + i * width + j]
            acts[aoff + j] = sigmoid(z)
        off = boff + width
        prev_off = aoff
        aoff += width
        width_in = width
    m = dims[depth + 1]
    out = np.empty(m)
    coff = off + width_in * m
    for o in range(m):
        z = theta[coff + o]
        for i in range(width_in):
            z += acts[prev_off + i] * theta[off + i * m + o]
        out[o] = z
    if classification:
        top = out.max()
        s = 0.0
        for o in range(m):
            out[o] = math.exp(out[o] - top)
            s += out[o]
        for o in range(m):
            out[o] /= s
    return out


@njit(cache=True)
def forward_sample(theta, dims, x, classification):
    acts = np.empty(dims[1:-1].sum())
    return _forward(theta, dims, x, classification, acts)


@njit(cache=True)
def sgd_sample(theta, dims, x, y, rates, classification):
    """One SGD step on ``(x, y)``; returns the pre-update output."""
    depth = dims.size - 2
    acts = np.empty(dims[1:-1].sum())
    out = _forward(theta, dims, x, classification, acts)
    m = dims[depth + 1]

    # parameter and activation offsets per layer
    w_off = np.empty(depth + 1, np.int64)
    a_off = np.empty(depth, np.int64)
    off = 0
    aoff = 0
    for d in range(depth):
        w_off[d] = off
        a_off[d] = aoff
        off += dims[d] * dims[d + 1] + dims[d + 1]
        aoff += dims[d + 1]
    w_off[depth] = off

    delta = out - y
    width = dims[depth]
    top = a_off[depth - 1]
    # back-propagated signal, computed with pre-update head weights
    back = np.empty(width)
    for i in range(width):
        s = 0.0
        for o in range(m):
            s += theta[off + i * m + o] * delta[o]
        back[i] = s
    eta = rates[depth]
    if eta != 0.0:
        for i in range(width):
            ai = acts[top + i]
            for o in range(m):
                theta[off + i * m + o] -= eta * ai * delta[o]
        coff = off + width * m
        for o in range(m):
            theta[coff + o] -= eta * delta[o]

    for d in range(depth - 1, -1, -1):
        width = dims[d + 1]
        width_in = dims[d]
        woff = w_off[d]
        boff = woff + width_in * width
        dz = np.empty(width)
        for j in range(width):
            h = acts[a_off[d] + j]
            dz[j] = back[j] * h * (1.0 - h)
        if d > 0:
            back = np.empty(width_in)
            for i in range(width_in):
                s = 0.0
                for j in range(width):
                    s += theta[woff + i * width + j] * dz[j]
                back[i] = s
        eta = rates[d]
        if eta != 0.0:
            for i in range(width_in):
                v = x[i] if d == 0 else acts[a_off[d - 1] + i]
                for j in range(width):
                    theta[woff + i * width + j] -= eta * v * dz[j]
            for j in range(width):
                theta[boff + j] -= eta * dz[j]
    return out


@njit(cache=True)
def moment_stats(theta, dims, mu, sigma2, y, classification, top_means):
    """Squared bias and head variance under Gaussian inputs.

    Writes the top layer's expected activations into ``top_means`` and
    returns ``(bias2, variance)`` averaged over outputs.
    """
    depth = dims.size - 2
    mean = mu.copy()
    var = sigma2.copy()
    off = 0
    width_in = dims[0]
    for d in range(depth):
        width = dims[d + 1]
        boff = off + width_in * width
        new_mean = np.empty(width)
        new_var = np.empty(width)
        for j in range(width):
            mu_a = 0.0
            var_a = 0.0
            for i in range(width_in):
                w = theta[off + i * width + j]
                mu_a += mean[i] * w
                var_a += var[i] * w * w
            mu_a += theta[boff + j]
            lv = _PROBIT * var_a
            new_mean[j] = sigmoid(mu_a / math.sqrt(1.0 + lv))
            if var_a > 0.0:
                h = _SQRT_PROBIT * mu_a / math.sqrt(1.0 + lv)
                p = norm_cdf(h)
                v = p - 2.0 * owens_t(h, 1.0 / math.sqrt(1.0 + 2.0 * lv)) - p * p
                new_var[j] = v if v > 0.0 else 0.0
            else:
                new_var[j] = 0.0
        mean = new_mean
        var = new_var
        off = boff + width
        width_in = width
    m = dims[depth + 1]
    coff = off + width_in * m
    head_mean = np.empty(m)
    variance = 0.0
    for o in range(m):
        z = theta[coff + o]
        hv = 0.0
        for i in range(width_in):
            w = theta[off + i * m + o]
            z += mean[i] * w
            hv += var[i] * w * w
        head_mean[o] = z
        variance += hv
    if classification:
        top = head_mean.max()
        s = 0.0
        for o in range(m):
            head_mean[o] = math.exp(head_mean[o] - top)
            s += head_mean[o]
        for o in range(m):
            head_mean[o] /= s
    bias2 = 0.0
    for o in range(m):
        diff = head_mean[o] - y[o]
        bias2 += diff * diff
    for j in range(width_in):
        top_means[j] = mean[j]
    return bias2 / m, variance / m


@njit(cache=True)
def mahalanobis_sq(center, inv_cov, x):
    n = x.size
    total = 0.0
    for i in range(n):
        di = x[i] - center[i]
        s = 0.0
        for j in range(n):
            s += inv_cov[i, j] * (x[j] - center[j])
        total += di * s
    return total if total > 0.0 else 0.0


@njit(cache=True)
def sherman_morrison_step(center, inv_cov, x, count):
    """Absorb ``x`` as sample number ``count`` (>= 2); update in place.

    Returns the Sherman-Morrison denominator; when it is not positive the
    inverse is left untouched and the caller must re-seed.
    """
    n = x.size
    d = x - center
    for i in range(n):
        center[i] += d[i] / count
    scale = 1.0 / math.sqrt(count)
    u = d * scale
    Au = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += inv_cov[i, j] * u[j]
        Au[i] = s
    denom = 1.0
    for i in range(n):
        denom += u[i] * Au[i]
    if not denom > 1e-12:
        return denom
    factor = count / (count - 1.0)
    for i in range(n):
        for j in range(i, n):
            v = factor * (inv_cov[i, j] - Au[i] * Au[j] / denom)
            inv_cov[i, j] = v
            inv_cov[j, i] = v
    return denom
