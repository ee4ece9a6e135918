"""Numba kernels for curve lifting and composed-orbit polishing.

These are the two inner loops of puzzle construction: predictor-corrector
continuation of preimage strands along an image curve, and Newton polishing
of lifted vertices against the full n-fold composition (which is the
well-conditioned direction: the composition expands, so its Newton steps
contract).

Branch safety: a Newton corrector can only land in a sibling branch's basin
when its predictor step is comparable to the distance between branches, so
every substep is capped at a quarter of the current minimal pairwise strand
separation.  All retained vertices are produced by continuation -- never by
chord interpolation -- which is what keeps frankencurve gluings impossible.
"""

from __future__ import annotations

import cmath

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_NEWTON_STUCK = 1
STATUS_COLLISION = 2
STATUS_OVERFLOW_OUT = 3


@njit(cache=True)
def _horner(coeffs, z):
    acc = 0.0 + 0.0j
    for i in range(len(coeffs) - 1, -1, -1):
        acc = acc * z + coeffs[i]
    return acc


@njit(cache=True)
def _newton_preimage(pn, pd, dpn, dpd, z0, w, tol_rel, scale_coeff, deg):
    """Solve P(z) - w Q(z) = 0 from z0; returns (root, converged)."""
    z = z0
    for _ in range(24):
        g = _horner(pn, z) - w * _horner(pd, z)
        scale = scale_coeff * max(1.0, abs(z)) ** deg
        if abs(g) <= tol_rel * scale:
            return z, True
        dg = _horner(dpn, z) - w * _horner(dpd, z)
        if dg == 0:
            return z, False
        z = z - g / dg
        if not (abs(z.real) < 1e300 and abs(z.imag) < 1e300):
            return z, False
    g = _horner(pn, z) - w * _horner(pd, z)
    scale = scale_coeff * max(1.0, abs(z)) ** deg
    return z, abs(g) <= tol_rel * scale


@njit(cache=True)
def walk_strands(
    pn, pd, dpn, dpd, wrn,
    wv,
    z0,
    newton_tol,
    max_halvings,
):
    """Continue all preimage strands of a closed image polyline in lockstep.

    wv : complex128[M+1] image vertices with the closing repeat wv[M]==wv[0];
    z0 : complex128[d] preimage strand starts over wv[0].

    Retention is at image-vertex arrivals only (substeps between vertices are
    pure guidance), so out_z[:, k] is exactly the strand position over wv[k].
    Returns (out_z, out_sep, closing, status, fail_k); out_sep[k] is the
    minimal pairwise strand separation at vertex k, ``closing`` the strand
    endpoints back over wv[0] for monodromy matching.
    """
    d = len(z0)
    m = len(wv) - 1
    deg = max(len(pn), len(pd)) - 1
    scale_base = 0.0
    for i in range(len(pn)):
        if abs(pn[i]) > scale_base:
            scale_base = abs(pn[i])
    scale_q = 0.0
    for i in range(len(pd)):
        if abs(pd[i]) > scale_q:
            scale_q = abs(pd[i])

    out_z = np.empty((d, m), dtype=np.complex128)
    out_sep = np.empty(m, dtype=np.float64)
    closing = np.empty(d, dtype=np.complex128)
    cur = z0.copy()
    trial = np.empty(d, dtype=np.complex128)

    sep = 1e300
    for i in range(d):
        for j in range(i + 1, d):
            gap = abs(cur[i] - cur[j])
            if gap < sep:
                sep = gap
    for j in range(d):
        out_z[j, 0] = cur[j]
    out_sep[0] = sep

    for k in range(m):
        w_a = wv[k]
        w_b = wv[k + 1]
        s = 0.0
        ds = 1.0
        cur_w = w_a
        while s < 1.0 - 1e-12:
            if s + ds > 1.0:
                ds = 1.0 - s
            at_end = s + ds >= 1.0 - 1e-12
            target = w_b if at_end else w_a + (s + ds) * (w_b - w_a)
            scale_coeff = scale_base + abs(target) * scale_q
            sep = 1e300
            for i in range(d):
                for j in range(i + 1, d):
                    gap = abs(cur[i] - cur[j])
                    if gap < sep:
                        sep = gap
            step_cap = 0.25 * sep
            ok = True
            for j in range(d):
                z_new, conv = _newton_preimage(
                    pn, pd, dpn, dpd, cur[j], target, newton_tol, scale_coeff, deg
                )
                if not conv:
                    ok = False
                    break
                # Branch-jump guard: the step must match |dw| / |f'| scale.
                qv = _horner(pd, cur[j])
                fp = abs(_horner(wrn, cur[j])) / (abs(qv) * abs(qv)) if qv != 0 else 0.0
                pred = abs(target - cur_w) / fp if fp > 1e-300 else 1e300
                move = abs(z_new - cur[j])
                floor = 1e-13 * (1.0 + abs(cur[j]))
                if move > 4.0 * pred + 1e-9 * (1.0 + abs(cur[j])):
                    ok = False
                    break
                if move > step_cap and move > floor:
                    ok = False
                    break
                trial[j] = z_new
            if ok:
                for i in range(d):
                    for j in range(i + 1, d):
                        if abs(trial[i] - trial[j]) < 1e-11 * (1.0 + abs(trial[i])):
                            ok = False
            if ok:
                s += ds
                cur_w = target
                for i in range(d):
                    cur[i] = trial[i]
                ds = ds * 2.0
                if ds > 1.0 - s and 1.0 - s > 0:
                    ds = 1.0 - s
            else:
                ds *= 0.5
                if ds < 0.5**max_halvings:
                    return out_z, out_sep, closing, STATUS_COLLISION, k
        # arrived exactly over wv[k+1]
        new_sep = 1e300
        for i in range(d):
            for j in range(i + 1, d):
                gap = abs(cur[i] - cur[j])
                if gap < new_sep:
                    new_sep = gap
        if k == m - 1:
            for j in range(d):
                closing[j] = cur[j]
        else:
            for j in range(d):
                out_z[j, k + 1] = cur[j]
            out_sep[k + 1] = new_sep
    return out_z, out_sep, closing, STATUS_OK, 0


@njit(cache=True)
def polish_composed(pn, pd, wrn, z_arr, t_arr, depth, radius, tol_abs, maxit):
    """Newton-polish points onto { z : f^depth(z) = radius * e^(i t) }.

    Returns (polished, residuals, ok).  ok goes false when an orbit hits a
    pole or the derivative degenerates (never the case on valid lifts).
    """
    n = len(z_arr)
    out = z_arr.copy()
    res = np.empty(n, dtype=np.float64)
    ok = True
    for i in range(n):
        z = out[i]
        target = radius * cmath.exp(1j * t_arr[i])
        final = 1e300
        for _ in range(maxit):
            w = z
            dtot = 1.0 + 0.0j
            bad = False
            for _step in range(depth):
                qv = _horner(pd, w)
                if qv == 0:
                    bad = True
                    break
                dv = _horner(wrn, w) / (qv * qv)
                dtot *= dv
                w = _horner(pn, w) / qv
            if bad:
                ok = False
                break
            g = w - target
            final = abs(g)
            if final <= tol_abs or dtot == 0:
                break
            z = z - g / dtot
        out[i] = z
        res[i] = final
    return out, res, ok


@njit(cache=True)
def eval_forward(pn, pd, z_arr, depth):
    """f^depth over an array; poles propagate as inf markers."""
    n = len(z_arr)
    out = np.empty(n, dtype=np.complex128)
    for i in range(n):
        w = z_arr[i]
        for _ in range(depth):
            qv = _horner(pd, w)
            if qv == 0:
                w = complex(np.inf, 0.0)
                break
            w = _horner(pn, w) / qv
        out[i] = w
    return out
