"""Compiled inner loops for the autocorrelation and the cosine fit."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def block_lag_products(v, base, n_blk, step, n_lag, m):
    """Trapezoid-weighted ``sum v[n] v[n - l]`` over windows of ``m`` blocks plus one sample.

    Block ``b`` holds samples ``base + b * step .. base + (b + 1) * step - 1``;
    output row ``c`` covers blocks ``c .. c + m - 1`` and the head sample of
    block ``c + m``, with half weight on the two end samples.
    """
    L = n_lag + 1
    N = v.size
    vr = v[::-1].copy()  # v[n - l] == vr[N - 1 - n + l], contiguous in l
    q = np.zeros((n_blk + 1, L))
    ends = np.empty((n_blk + 1, L))
    for b in range(n_blk + 1):
        n0 = base + b * step
        r0 = N - 1 - n0
        head = v[n0]
        for l in range(L):
            ends[b, l] = head * vr[r0 + l]
        if b == n_blk:
            break
        qb = q[b]
        for l in range(L):
            qb[l] = ends[b, l]
        for i in range(1, step):
            x = v[n0 + i]
            r = r0 - i
            for l in range(L):
                qb[l] += x * vr[r + l]
    n_out = n_blk - m + 1
    out = np.empty((n_out, L))
    for c in range(n_out):
        o = out[c]
        for l in range(L):
            o[l] = 0.5 * (ends[c + m, l] - ends[c, l])
        for b in range(c, c + m):
            qb = q[b]
            for l in range(L):
                o[l] += qb[l]
    return out


_GROUP = 8  # rows whose recurrences are interleaved; hides the latency of each chain


@njit(cache=True)
def _fit_cost(rw, rows, s, w1, dt, taus, out):
    """Cosine-fit cost at period ``taus[g]`` for row ``rows[g]`` of ``rw``.

    The quadratic term is the closed-form trapezoid sum of ``cos^2``; the
    cross term ``sum_k rw_k cos(k theta)`` is summed by Clenshaw's recurrence.
    """
    n = rw.shape[1] - 1
    two_x = np.empty(_GROUP)
    b1 = np.zeros(_GROUP)
    b2 = np.zeros(_GROUP)
    for g in range(_GROUP):
        two_x[g] = 2.0 * np.cos(2.0 * np.pi * dt / taus[g])
    for k in range(n, 0, -1):
        for g in range(_GROUP):
            t = two_x[g] * b1[g] - b2[g] + rw[rows[g], k]
            b2[g] = b1[g]
            b1[g] = t
    for g in range(_GROUP):
        phi = 4.0 * np.pi * dt / taus[g]
        trap_cos = np.sin((n + 0.5) * phi) / (2.0 * np.sin(0.5 * phi)) - 0.5 * np.cos(n * phi)
        cross = rw[rows[g], 0] + 0.5 * two_x[g] * b1[g] - b2[g]
        out[g] = s[rows[g]] + 0.5 * w1 * (n + trap_cos) - 2.0 * cross


@njit(cache=True)
def golden_cosine_fit(rw, s, w1, dt, start, half_width, lo, hi, tol, inv_phi):
    """Golden-section refinement of the cosine-fit period around ``start``, per row.

    ``rw[i, k]`` is the trapezoid-weighted autocorrelation of row ``i`` at
    lag ``k`` and ``s[i]`` its weighted energy. Each bracket
    ``[start - half_width, start + half_width]`` (clipped to ``[lo, hi]``)
    is narrowed below ``tol``. Returns the lowest cost seen and its period.
    """
    R = rw.shape[0]
    cost = np.empty(R)
    tau = np.empty(R)
    rows = np.empty(_GROUP, dtype=np.int64)
    a = np.empty(_GROUP)
    b = np.empty(_GROUP)
    c = np.empty(_GROUP)
    d = np.empty(_GROUP)
    x = np.empty(_GROUP)
    fc = np.empty(_GROUP)
    fd = np.empty(_GROUP)
    fx = np.empty(_GROUP)
    best = np.empty(_GROUP)
    best_f = np.empty(_GROUP)
    left = np.empty(_GROUP, dtype=np.bool_)
    for i0 in range(0, R, _GROUP):
        width = 0.0
        for g in range(_GROUP):
            rows[g] = min(i0 + g, R - 1)  # a short last group repeats its final row
            best[g] = start[rows[g]]
            a[g] = max(best[g] - half_width, lo)
            b[g] = min(best[g] + half_width, hi)
            c[g] = b[g] - inv_phi * (b[g] - a[g])
            d[g] = a[g] + inv_phi * (b[g] - a[g])
            width = max(width, b[g] - a[g])
        _fit_cost(rw, rows, s, w1, dt, best, best_f)
        _fit_cost(rw, rows, s, w1, dt, c, fc)
        _fit_cost(rw, rows, s, w1, dt, d, fd)
        while width > tol:
            width = 0.0
            for g in range(_GROUP):
                left[g] = fc[g] < fd[g]
                if left[g]:
                    b[g] = d[g]
                    d[g] = c[g]
                    fd[g] = fc[g]
                    c[g] = b[g] - inv_phi * (b[g] - a[g])
                    x[g] = c[g]
                else:
                    a[g] = c[g]
                    c[g] = d[g]
                    fc[g] = fd[g]
                    d[g] = a[g] + inv_phi * (b[g] - a[g])
                    x[g] = d[g]
                width = max(width, b[g] - a[g])
            _fit_cost(rw, rows, s, w1, dt, x, fx)
            for g in range(_GROUP):
                if left[g]:
                    fc[g] = fx[g]
                else:
                    fd[g] = fx[g]
        for g in range(min(_GROUP, R - i0)):
            if fc[g] < best_f[g]:
                best_f[g] = fc[g]
                best[g] = c[g]
            if fd[g] < best_f[g]:
                best_f[g] = fd[g]
                best[g] = d[g]
            cost[i0 + g] = best_f[g]
            tau[i0 + g] = best[g]
    return cost, tau
