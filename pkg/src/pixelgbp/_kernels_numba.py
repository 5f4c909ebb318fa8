"""Serially-compiled numba twin of the numpy message kernels.

Same flat slot layout and signatures as ``_kernels_numpy``; loops are kept
serial (no prange) so that message order, and therefore floating-point
accumulation order, is reproducible run to run.  The small-angle series
switchovers mirror ``pixelgbp.lie`` exactly.
"""

from __future__ import annotations

import numpy as np
from numba import njit

CHOL_TOL = 1e-10
SMALL_ANGLE = 1e-6


@njit(cache=True)
def _chol3(A, L):
    a00, a11, a22 = A[0, 0], A[1, 1], A[2, 2]
    m = a00
    if a11 > m:
        m = a11
    if a22 > m:
        m = a22
    if m < 1e-300:
        m = 1e-300
    tol = CHOL_TOL * m
    if not a00 > tol:
        return False
    l00 = np.sqrt(a00)
    l10 = A[0, 1] / l00
    l20 = A[0, 2] / l00
    p1 = a11 - l10 * l10
    if not p1 > tol:
        return False
    l11 = np.sqrt(p1)
    l21 = (A[1, 2] - l20 * l10) / l11
    p2 = a22 - l20 * l20 - l21 * l21
    if not p2 > tol:
        return False
    L[0, 0] = l00
    L[0, 1] = 0.0
    L[0, 2] = 0.0
    L[1, 0] = l10
    L[1, 1] = l11
    L[1, 2] = 0.0
    L[2, 0] = l20
    L[2, 1] = l21
    L[2, 2] = np.sqrt(p2)
    return True


@njit(cache=True)
def _chol_solve3(L, b, x):
    y0 = b[0] / L[0, 0]
    y1 = (b[1] - L[1, 0] * y0) / L[1, 1]
    y2 = (b[2] - L[2, 0] * y0 - L[2, 1] * y1) / L[2, 2]
    x[2] = y2 / L[2, 2]
    x[1] = (y1 - L[2, 1] * x[2]) / L[1, 1]
    x[0] = (y0 - L[1, 0] * x[1] - L[2, 0] * x[2]) / L[0, 0]


@njit(cache=True)
def _exp3(t0, t1, t2, R):
    tsq = t0 * t0 + t1 * t1 + t2 * t2
    t = np.sqrt(tsq)
    if t < SMALL_ANGLE:
        a = 1.0 - tsq / 6.0
        b = 0.5 - tsq / 24.0
    else:
        a = np.sin(t) / t
        b = (1.0 - np.cos(t)) / tsq
    R[0, 0] = 1.0 + b * (-t1 * t1 - t2 * t2)
    R[0, 1] = -a * t2 + b * t0 * t1
    R[0, 2] = a * t1 + b * t0 * t2
    R[1, 0] = a * t2 + b * t0 * t1
    R[1, 1] = 1.0 + b * (-t0 * t0 - t2 * t2)
    R[1, 2] = -a * t0 + b * t1 * t2
    R[2, 0] = -a * t1 + b * t0 * t2
    R[2, 1] = a * t0 + b * t1 * t2
    R[2, 2] = 1.0 + b * (-t0 * t0 - t1 * t1)


@njit(cache=True)
def _log3(R, out):
    w0 = 0.5 * (R[2, 1] - R[1, 2])
    w1 = 0.5 * (R[0, 2] - R[2, 0])
    w2 = 0.5 * (R[1, 0] - R[0, 1])
    s = np.sqrt(w0 * w0 + w1 * w1 + w2 * w2)
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    t = np.arctan2(s, c)
    if t < SMALL_ANGLE:
        f = 1.0 + t * t / 6.0
        out[0] = f * w0
        out[1] = f * w1
        out[2] = f * w2
    elif t > np.pi - 1e-6:
        # near a half turn: take the axis from the dominant column of (R+I)/2
        d0 = 0.5 * (R[0, 0] + 1.0)
        d1 = 0.5 * (R[1, 1] + 1.0)
        d2 = 0.5 * (R[2, 2] + 1.0)
        k = 0
        dk = d0
        if d1 > dk:
            k = 1
            dk = d1
        if d2 > dk:
            k = 2
            dk = d2
        a0 = 0.5 * (R[0, k] + (1.0 if k == 0 else 0.0))
        a1 = 0.5 * (R[1, k] + (1.0 if k == 1 else 0.0))
        a2 = 0.5 * (R[2, k] + (1.0 if k == 2 else 0.0))
        n = np.sqrt(a0 * a0 + a1 * a1 + a2 * a2)
        a0, a1, a2 = a0 / n, a1 / n, a2 / n
        dot = a0 * w0 + a1 * w1 + a2 * w2
        if dot < 0.0:
            a0, a1, a2 = -a0, -a1, -a2
        elif dot == 0.0:
            if a0 < 0.0 or (a0 == 0.0 and (a1 < 0.0 or (a1 == 0.0 and a2 < 0.0))):
                a0, a1, a2 = -a0, -a1, -a2
        out[0] = t * a0
        out[1] = t * a1
        out[2] = t * a2
    else:
        f = t / s
        out[0] = f * w0
        out[1] = f * w1
        out[2] = f * w2


@njit(cache=True)
def _jr3(t0, t1, t2, J):
    tsq = t0 * t0 + t1 * t1 + t2 * t2
    t = np.sqrt(tsq)
    if t < SMALL_ANGLE:
        b = 0.5 - tsq / 24.0
        c = 1.0 / 6.0 - tsq / 120.0
    else:
        b = (1.0 - np.cos(t)) / tsq
        c = (t - np.sin(t)) / (tsq * t)
    J[0, 0] = 1.0 + c * (-t1 * t1 - t2 * t2)
    J[0, 1] = b * t2 + c * t0 * t1
    J[0, 2] = -b * t1 + c * t0 * t2
    J[1, 0] = -b * t2 + c * t0 * t1
    J[1, 1] = 1.0 + c * (-t0 * t0 - t2 * t2)
    J[1, 2] = b * t0 + c * t1 * t2
    J[2, 0] = b * t1 + c * t0 * t2
    J[2, 1] = -b * t0 + c * t1 * t2
    J[2, 2] = 1.0 + c * (-t0 * t0 - t1 * t1)


@njit(cache=True)
def _jr_inv3(t0, t1, t2, J):
    tsq = t0 * t0 + t1 * t1 + t2 * t2
    t = np.sqrt(tsq)
    if t < SMALL_ANGLE:
        e = 1.0 / 12.0 + tsq / 720.0
    else:
        e = 1.0 / tsq - (1.0 + np.cos(t)) / (2.0 * t * np.sin(t))
    J[0, 0] = 1.0 + e * (-t1 * t1 - t2 * t2)
    J[0, 1] = -0.5 * t2 + e * t0 * t1
    J[0, 2] = 0.5 * t1 + e * t0 * t2
    J[1, 0] = 0.5 * t2 + e * t0 * t1
    J[1, 1] = 1.0 + e * (-t0 * t0 - t2 * t2)
    J[1, 2] = -0.5 * t0 + e * t1 * t2
    J[2, 0] = -0.5 * t1 + e * t0 * t2
    J[2, 1] = 0.5 * t0 + e * t1 * t2
    J[2, 2] = 1.0 + e * (-t0 * t0 - t1 * t1)


@njit(cache=True)
def _bilinear(img, x, y):
    h, w = img.shape
    if not (x >= 0.0 and x <= w - 1.0 and y >= 0.0 and y <= h - 1.0):
        return 0.0, False
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    if x0 > w - 2:
        x0 = w - 2
    if x0 < 0:
        x0 = 0
    if y0 > h - 2:
        y0 = h - 2
    if y0 < 0:
        y0 = 0
    x1 = x0 + 1
    if x1 > w - 1:
        x1 = w - 1
    y1 = y0 + 1
    if y1 > h - 1:
        y1 = h - 1
    tx = x - x0
    ty = y - y0
    top = img[y0, x0] * (1.0 - tx) + img[y0, x1] * tx
    bot = img[y1, x0] * (1.0 - tx) + img[y1, x1] * tx
    return top * (1.0 - ty) + bot * ty, True


@njit(cache=True)
def _transport_slot(eta, lam, th0, th1, th2, J, T, out_eta, out_lam):
    _jr3(th0, th1, th2, J)
    # T = lam @ J
    for a in range(3):
        for b in range(3):
            acc = 0.0
            for c in range(3):
                acc += lam[a, c] * J[c, b]
            T[a, b] = acc
    # out_lam = J^T @ T, symmetrized
    for a in range(3):
        for b in range(3):
            acc = 0.0
            for c in range(3):
                acc += J[c, a] * T[c, b]
            out_lam[a, b] = acc
    for a in range(3):
        for b in range(a + 1, 3):
            v = 0.5 * (out_lam[a, b] + out_lam[b, a])
            out_lam[a, b] = v
            out_lam[b, a] = v
    for a in range(3):
        acc = J[0, a] * eta[0] + J[1, a] * eta[1] + J[2, a] * eta[2]
        acc += out_lam[a, 0] * th0 + out_lam[a, 1] * th1 + out_lam[a, 2] * th2
        out_eta[a] = acc


@njit(cache=True)
def csr_totals(slot_var, eta, lam, n_vars):
    tot_eta = np.zeros((n_vars, 3))
    tot_lam = np.zeros((n_vars, 3, 3))
    for s in range(slot_var.shape[0]):
        v = slot_var[s]
        for c in range(3):
            tot_eta[v, c] += eta[s, c]
            for d in range(3):
                tot_lam[v, c, d] += lam[s, c, d]
    return tot_eta, tot_lam


@njit(cache=True)
def photo_messages(frames, photo_var, q, skew_q, i_left, right, gx_img, gy_img,
                   Kmat, lam_d, out_eta, out_lam):
    P = photo_var.shape[0]
    KR = np.empty((3, 3))
    A = np.empty((3, 3))
    proj = np.empty(3)
    J = np.empty(3)
    energy = 0.0
    skipped = 0
    for k in range(P):
        R = frames[photo_var[k]]
        for a in range(3):
            for b in range(3):
                acc = 0.0
                for c in range(3):
                    acc += Kmat[a, c] * R[c, b]
                KR[a, b] = acc
        for a in range(3):
            acc = 0.0
            for c in range(3):
                acc += KR[a, c] * q[k, c]
            proj[a] = acc
        ok = proj[2] > 1e-9
        wx = 0.0
        wy = 0.0
        if ok:
            wx = proj[0] / proj[2]
            wy = proj[1] / proj[2]
            i_r, ok = _bilinear(right, wx, wy)
        if not ok:
            for a in range(3):
                out_eta[k, a] = 0.0
                for b in range(3):
                    out_lam[k, a, b] = 0.0
            skipped += 1
            continue
        gx, _ = _bilinear(gx_img, wx, wy)
        gy, _ = _bilinear(gy_img, wx, wy)
        r = i_left[k] - i_r
        z = proj[2]
        u0 = gx / z
        u1 = gy / z
        u2 = -(gx * proj[0] + gy * proj[1]) / (z * z)
        for a in range(3):
            for b in range(3):
                acc = 0.0
                for c in range(3):
                    acc += KR[a, c] * skew_q[k, c, b]
                A[a, b] = acc
        for b in range(3):
            J[b] = u0 * A[0, b] + u1 * A[1, b] + u2 * A[2, b]
        for a in range(3):
            out_eta[k, a] = -lam_d * r * J[a]
            for b in range(3):
                out_lam[k, a, b] = lam_d * J[a] * J[b]
        energy += 0.5 * lam_d * r * r
    return energy, skipped


@njit(cache=True)
def prior_messages(out_eta, out_lam, slot0, count, lam_p):
    for k in range(count):
        s = slot0 + k
        for a in range(3):
            out_eta[s, a] = 0.0
            for b in range(3):
                out_lam[s, a, b] = 0.0
            out_lam[s, a, a] = lam_p


@njit(cache=True)
def _schur_direction(lam_tt, lam_to, lam_ot, lam_oo, eta_t, eta_o,
                     v2f_eta, v2f_lam, L, A, X, sol, out_eta_row, out_lam_row):
    """Eliminate the 'other' block; returns False on a singular block."""
    for a in range(3):
        for b in range(3):
            A[a, b] = lam_oo[a, b] + v2f_lam[a, b]
    if not _chol3(A, L):
        for a in range(3):
            out_eta_row[a] = 0.0
            for b in range(3):
                out_lam_row[a, b] = 0.0
        return False
    # X[:, c] = A^-1 @ lam_ot[:, c]
    for c in range(3):
        for a in range(3):
            sol[a] = lam_ot[a, c]
        _chol_solve3(L, sol, X[:, c])
    for a in range(3):
        for b in range(3):
            acc = lam_tt[a, b]
            for c in range(3):
                acc -= lam_to[a, c] * X[c, b]
            out_lam_row[a, b] = acc
    for a in range(3):
        for b in range(a + 1, 3):
            v = 0.5 * (out_lam_row[a, b] + out_lam_row[b, a])
            out_lam_row[a, b] = v
            out_lam_row[b, a] = v
    for a in range(3):
        sol[a] = eta_o[a] + v2f_eta[a]
    _chol_solve3(L, sol, X[:, 0])
    for a in range(3):
        acc = eta_t[a]
        for c in range(3):
            acc -= lam_to[a, c] * X[c, 0]
        out_eta_row[a] = acc
    return True


@njit(cache=True)
def reg_messages(frames, reg_i, reg_j, slot_i, slot_j, prev_eta, prev_lam,
                 tot_eta, tot_lam, lam_r, out_eta, out_lam):
    n = reg_i.shape[0]
    Rrel = np.empty((3, 3))
    r = np.empty(3)
    B = np.empty((3, 3))
    lam_ii = np.empty((3, 3))
    lam_jj = np.empty((3, 3))
    lam_ij = np.empty((3, 3))
    lam_ji = np.empty((3, 3))
    eta_i = np.empty(3)
    eta_j = np.empty(3)
    v2f_eta = np.empty(3)
    v2f_lam = np.empty((3, 3))
    L = np.empty((3, 3))
    A = np.empty((3, 3))
    X = np.empty((3, 3))
    sol = np.empty(3)
    energy = 0.0
    n_singular = 0
    for k in range(n):
        vi = reg_i[k]
        vj = reg_j[k]
        Fi = frames[vi]
        Fj = frames[vj]
        for a in range(3):
            for b in range(3):
                acc = 0.0
                for c in range(3):
                    acc += Fi[c, a] * Fj[c, b]
                Rrel[a, b] = acc
        _log3(Rrel, r)
        _jr_inv3(r[0], r[1], r[2], B)
        for a in range(3):
            for b in range(3):
                bbt = 0.0
                btb = 0.0
                bb = 0.0
                for c in range(3):
                    bbt += B[a, c] * B[b, c]
                    btb += B[c, a] * B[c, b]
                    bb += B[a, c] * B[c, b]
                lam_ii[a, b] = lam_r * bbt
                lam_jj[a, b] = lam_r * btb
                lam_ij[a, b] = -lam_r * bb
        for a in range(3):
            for b in range(3):
                lam_ji[a, b] = lam_ij[b, a]
            eta_i[a] = lam_r * r[a]
            eta_j[a] = -lam_r * r[a]
        energy += 0.5 * lam_r * (r[0] * r[0] + r[1] * r[1] + r[2] * r[2])

        si = slot_i[k]
        sj = slot_j[k]
        for a in range(3):
            v2f_eta[a] = tot_eta[vi, a] - prev_eta[si, a]
            for b in range(3):
                v2f_lam[a, b] = tot_lam[vi, a, b] - prev_lam[si, a, b]
        if not _schur_direction(lam_jj, lam_ji, lam_ij, lam_ii, eta_j, eta_i,
                                v2f_eta, v2f_lam, L, A, X, sol,
                                out_eta[sj], out_lam[sj]):
            n_singular += 1
        for a in range(3):
            v2f_eta[a] = tot_eta[vj, a] - prev_eta[sj, a]
            for b in range(3):
                v2f_lam[a, b] = tot_lam[vj, a, b] - prev_lam[sj, a, b]
        if not _schur_direction(lam_ii, lam_ij, lam_ji, lam_jj, eta_i, eta_j,
                                v2f_eta, v2f_lam, L, A, X, sol,
                                out_eta[si], out_lam[si]):
            n_singular += 1
    return energy, n_singular


@njit(cache=True)
def belief_update(frames, msg_eta, msg_lam, slot_var, belief_eta, belief_lam,
                  update_frames):
    n_vars = frames.shape[0]
    fused_eta, fused_lam = csr_totals(slot_var, msg_eta, msg_lam, n_vars)
    if not update_frames:
        for v in range(n_vars):
            for a in range(3):
                belief_eta[v, a] = fused_eta[v, a]
                for b in range(3):
                    belief_lam[v, a, b] = fused_lam[v, a, b]
        return 0.0, 0

    steps = np.zeros((n_vars, 3))
    L = np.empty((3, 3))
    m = np.empty(3)
    E = np.empty((3, 3))
    Rnew = np.empty((3, 3))
    J = np.empty((3, 3))
    T = np.empty((3, 3))
    e_in = np.empty(3)
    l_in = np.empty((3, 3))
    step_sum = 0.0
    n_singular = 0
    for v in range(n_vars):
        if _chol3(fused_lam[v], L):
            _chol_solve3(L, fused_eta[v], m)
            steps[v, 0] = m[0]
            steps[v, 1] = m[1]
            steps[v, 2] = m[2]
            step_sum += np.sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2])
            _exp3(m[0], m[1], m[2], E)
            F = frames[v]
            for a in range(3):
                for b in range(3):
                    acc = 0.0
                    for c in range(3):
                        acc += F[a, c] * E[c, b]
                    Rnew[a, b] = acc
            for a in range(3):
                for b in range(3):
                    F[a, b] = Rnew[a, b]
        else:
            n_singular += 1

    for s in range(slot_var.shape[0]):
        v = slot_var[s]
        for a in range(3):
            e_in[a] = msg_eta[s, a]
            for b in range(3):
                l_in[a, b] = msg_lam[s, a, b]
        _transport_slot(e_in, l_in, -steps[v, 0], -steps[v, 1], -steps[v, 2],
                        J, T, msg_eta[s], msg_lam[s])

    for v in range(n_vars):
        for a in range(3):
            e_in[a] = fused_eta[v, a]
            for b in range(3):
                l_in[a, b] = fused_lam[v, a, b]
        _transport_slot(e_in, l_in, -steps[v, 0], -steps[v, 1], -steps[v, 2],
                        J, T, belief_eta[v], belief_lam[v])

    return step_sum, n_singular
