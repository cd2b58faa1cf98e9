"""Numba kernels for the hot paths: batch polynomial evaluation and RK4 sweeps.

Polynomials arrive as packed term arrays (exponent rows + coefficients).  The
integration kernels work on a "compiled field": per-beta-interval rows of
gradient terms, each row carrying a coefficient pair (c_const, c_beta) so the
row contributes (c_const + beta*c_beta) * monomial, times beta_dot when the
row belongs to the counterdiabatic group.  Rows are produced by
dynamics.compile_field; this module stays ignorant of where they came from.

All loops run in a fixed order per point, so results are bit-for-bit
reproducible regardless of thread count.
"""

import numpy as np
from numba import njit, prange

_FINITE_BOUND = 1e60  # squared-radius blow-up threshold


@njit(cache=True)
def eval_terms(exps, coefs, xs, ys, pxs, pys):
    """Evaluate a packed polynomial on point arrays."""
    n = xs.shape[0]
    m = coefs.shape[0]
    emax = 0
    for r in range(m):
        for c in range(4):
            if exps[r, c] > emax:
                emax = exps[r, c]
    out = np.zeros(n)
    pwx = np.empty(emax + 1)
    pwy = np.empty(emax + 1)
    pwp = np.empty(emax + 1)
    pwq = np.empty(emax + 1)
    pwx[0] = pwy[0] = pwp[0] = pwq[0] = 1.0
    for i in range(n):
        for e in range(1, emax + 1):
            pwx[e] = pwx[e - 1] * xs[i]
            pwy[e] = pwy[e - 1] * ys[i]
            pwp[e] = pwp[e - 1] * pxs[i]
            pwq[e] = pwq[e - 1] * pys[i]
        acc = 0.0
        for r in range(m):
            acc += (coefs[r] * pwx[exps[r, 0]] * pwy[exps[r, 1]]
                    * pwp[exps[r, 2]] * pwq[exps[r, 3]])
        out[i] = acc
    return out


@njit(inline="always")
def _field_rhs(xv, yv, pv, qv, beta, betad,
               edges, offsets, coord, group, cconst, cbeta, exps,
               pwx, pwy, pwp, pwq, emax):
    for e in range(1, emax + 1):
        pwx[e] = pwx[e - 1] * xv
        pwy[e] = pwy[e - 1] * yv
        pwp[e] = pwp[e - 1] * pv
        pwq[e] = pwq[e - 1] * qv
    ni = offsets.shape[0] - 1
    j = 0
    if ni > 1:
        j = np.searchsorted(edges, beta, side="right") - 1
        if j < 0:
            j = 0
        elif j > ni - 1:
            j = ni - 1
    fx = 0.0
    fy = 0.0
    fp = 0.0
    fq = 0.0
    for r in range(offsets[j], offsets[j + 1]):
        cval = cconst[r] + beta * cbeta[r]
        if group[r] == 1:
            cval *= betad
        v = (cval * pwx[exps[r, 0]] * pwy[exps[r, 1]]
             * pwp[exps[r, 2]] * pwq[exps[r, 3]])
        c = coord[r]
        if c == 0:
            fx += v
        elif c == 1:
            fy += v
        elif c == 2:
            fp += v
        else:
            fq += v
    return fx, fy, fp, fq


@njit(cache=True, parallel=True)
def rk4_ramp(x, y, px, py, hs, b0, bh, b1, d0, dh, d1,
             edges, offsets, coord, group, cconst, cbeta, exps, emax, ok):
    """Advance every point through the same schedule, in place.

    hs[s] is the size of step s (the last may be a partial step); b*/d* carry
    beta and beta_dot at the start, midpoint and end of each step.
    """
    n = x.shape[0]
    nsteps = hs.shape[0]
    for i in prange(n):
        pwx = np.empty(emax + 1)
        pwy = np.empty(emax + 1)
        pwp = np.empty(emax + 1)
        pwq = np.empty(emax + 1)
        pwx[0] = pwy[0] = pwp[0] = pwq[0] = 1.0
        xv = x[i]
        yv = y[i]
        pv = px[i]
        qv = py[i]
        alive = True
        for s in range(nsteps):
            h = hs[s]
            k1x, k1y, k1p, k1q = _field_rhs(
                xv, yv, pv, qv, b0[s], d0[s],
                edges, offsets, coord, group, cconst, cbeta, exps,
                pwx, pwy, pwp, pwq, emax)
            h2 = 0.5 * h
            k2x, k2y, k2p, k2q = _field_rhs(
                xv + h2 * k1x, yv + h2 * k1y, pv + h2 * k1p, qv + h2 * k1q,
                bh[s], dh[s],
                edges, offsets, coord, group, cconst, cbeta, exps,
                pwx, pwy, pwp, pwq, emax)
            k3x, k3y, k3p, k3q = _field_rhs(
                xv + h2 * k2x, yv + h2 * k2y, pv + h2 * k2p, qv + h2 * k2q,
                bh[s], dh[s],
                edges, offsets, coord, group, cconst, cbeta, exps,
                pwx, pwy, pwp, pwq, emax)
            k4x, k4y, k4p, k4q = _field_rhs(
                xv + h * k3x, yv + h * k3y, pv + h * k3p, qv + h * k3q,
                b1[s], d1[s],
                edges, offsets, coord, group, cconst, cbeta, exps,
                pwx, pwy, pwp, pwq, emax)
            h6 = h / 6.0
            xv += h6 * (k1x + 2.0 * (k2x + k3x) + k4x)
            yv += h6 * (k1y + 2.0 * (k2y + k3y) + k4y)
            pv += h6 * (k1p + 2.0 * (k2p + k3p) + k4p)
            qv += h6 * (k1q + 2.0 * (k2q + k3q) + k4q)
            if not (xv * xv + yv * yv + pv * pv + qv * qv < _FINITE_BOUND):
                alive = False
                break
        x[i] = xv
        y[i] = yv
        px[i] = pv
        py[i] = qv
        ok[i] = 1 if alive else 0


@njit(inline="always")
def _static_rhs(xv, yv, pv, qv, coord, coefs, exps, pwx, pwy, pwp, pwq, emax):
    for e in range(1, emax + 1):
        pwx[e] = pwx[e - 1] * xv
        pwy[e] = pwy[e - 1] * yv
        pwp[e] = pwp[e - 1] * pv
        pwq[e] = pwq[e - 1] * qv
    fx = 0.0
    fy = 0.0
    fp = 0.0
    fq = 0.0
    for r in range(coefs.shape[0]):
        v = (coefs[r] * pwx[exps[r, 0]] * pwy[exps[r, 1]]
             * pwp[exps[r, 2]] * pwq[exps[r, 3]])
        c = coord[r]
        if c == 0:
            fx += v
        elif c == 1:
            fy += v
        elif c == 2:
            fp += v
        else:
            fq += v
    return fx, fy, fp, fq


@njit(cache=True, parallel=True)
def rk4_hold(x, y, px, py, durations, dt, coord, coefs, exps, emax, ok):
    """Advance each point for its own duration under a fixed Hamiltonian."""
    n = x.shape[0]
    for i in prange(n):
        pwx = np.empty(emax + 1)
        pwy = np.empty(emax + 1)
        pwp = np.empty(emax + 1)
        pwq = np.empty(emax + 1)
        pwx[0] = pwy[0] = pwp[0] = pwq[0] = 1.0
        total = durations[i]
        nfull = int(total / dt)
        h_last = total - nfull * dt
        if h_last < 1e-12 * dt:
            h_last = 0.0
        xv = x[i]
        yv = y[i]
        pv = px[i]
        qv = py[i]
        alive = True
        for s in range(nfull + 1):
            h = dt if s < nfull else h_last
            if h == 0.0:
                continue
            k1x, k1y, k1p, k1q = _static_rhs(
                xv, yv, pv, qv, coord, coefs, exps, pwx, pwy, pwp, pwq, emax)
            h2 = 0.5 * h
            k2x, k2y, k2p, k2q = _static_rhs(
                xv + h2 * k1x, yv + h2 * k1y, pv + h2 * k1p, qv + h2 * k1q,
                coord, coefs, exps, pwx, pwy, pwp, pwq, emax)
            k3x, k3y, k3p, k3q = _static_rhs(
                xv + h2 * k2x, yv + h2 * k2y, pv + h2 * k2p, qv + h2 * k2q,
                coord, coefs, exps, pwx, pwy, pwp, pwq, emax)
            k4x, k4y, k4p, k4q = _static_rhs(
                xv + h * k3x, yv + h * k3y, pv + h * k3p, qv + h * k3q,
                coord, coefs, exps, pwx, pwy, pwp, pwq, emax)
            h6 = h / 6.0
            xv += h6 * (k1x + 2.0 * (k2x + k3x) + k4x)
            yv += h6 * (k1y + 2.0 * (k2y + k3y) + k4y)
            pv += h6 * (k1p + 2.0 * (k2p + k3p) + k4p)
            qv += h6 * (k1q + 2.0 * (k2q + k3q) + k4q)
            if not (xv * xv + yv * yv + pv * pv + qv * qv < _FINITE_BOUND):
                alive = False
                break
        x[i] = xv
        y[i] = yv
        px[i] = pv
        py[i] = qv
        ok[i] = 1 if alive else 0
