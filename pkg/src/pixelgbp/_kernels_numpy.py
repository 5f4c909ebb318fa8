"""Vectorized numpy implementation of the per-sweep message kernels.

The numba backend mirrors these signatures exactly; both operate on the flat
slot layout owned by :class:`pixelgbp.graph.FactorGraph`: one slot per
(factor, recipient-variable) pair, photometric slots first, then priors,
then the two directions of each smoothness factor.
"""

from __future__ import annotations

import numpy as np

from . import lie
from .gaussian import transport_canonical
from .imaging import sample_bilinear

# Relative pivot tolerance below which a 3x3 system is treated as singular.
CHOL_TOL = 1e-10


def _chol3(A):
    """Tolerant batched Cholesky of symmetric (…,3,3) matrices.

    Returns (L, ok); matrices whose pivots fall under CHOL_TOL times the
    largest diagonal entry are flagged not-ok (their L is unusable).
    The scalar recurrence is kept explicit so the numba twin can replicate
    the exact same branch decisions.
    """
    a00, a01, a02 = A[..., 0, 0], A[..., 0, 1], A[..., 0, 2]
    a11, a12, a22 = A[..., 1, 1], A[..., 1, 2], A[..., 2, 2]
    tol = CHOL_TOL * np.maximum(np.maximum(a00, a11), np.maximum(a22, 1e-300))

    ok = a00 > tol
    l00 = np.sqrt(np.where(ok, a00, 1.0))
    l10 = a01 / l00
    l20 = a02 / l00
    p1 = a11 - l10 * l10
    ok = ok & (p1 > tol)
    l11 = np.sqrt(np.where(ok, p1, 1.0))
    l21 = (a12 - l20 * l10) / l11
    p2 = a22 - l20 * l20 - l21 * l21
    ok = ok & (p2 > tol)
    l22 = np.sqrt(np.where(ok, p2, 1.0))

    L = np.zeros(A.shape)
    L[..., 0, 0] = l00
    L[..., 1, 0] = l10
    L[..., 1, 1] = l11
    L[..., 2, 0] = l20
    L[..., 2, 1] = l21
    L[..., 2, 2] = l22
    return L, ok


def _chol_solve3(L, b):
    """Solve L L^T x = b for (…,3) right-hand sides."""
    y0 = b[..., 0] / L[..., 0, 0]
    y1 = (b[..., 1] - L[..., 1, 0] * y0) / L[..., 1, 1]
    y2 = (b[..., 2] - L[..., 2, 0] * y0 - L[..., 2, 1] * y1) / L[..., 2, 2]
    x2 = y2 / L[..., 2, 2]
    x1 = (y1 - L[..., 2, 1] * x2) / L[..., 1, 1]
    x0 = (y0 - L[..., 1, 0] * x1 - L[..., 2, 0] * x2) / L[..., 0, 0]
    return np.stack([x0, x1, x2], axis=-1)


def csr_totals(slot_var, eta, lam, n_vars):
    """Per-variable sums of all stored incoming messages."""
    tot_eta = np.zeros((n_vars, 3))
    tot_lam = np.zeros((n_vars, 3, 3))
    for c in range(3):
        tot_eta[:, c] = np.bincount(slot_var, weights=eta[:, c], minlength=n_vars)
        for d in range(3):
            tot_lam[:, c, d] = np.bincount(
                slot_var, weights=lam[:, c, d], minlength=n_vars
            )
    return tot_eta, tot_lam


def photo_messages(frames, photo_var, q, skew_q, i_left, right, gx_img, gy_img,
                   Kmat, lam_d, out_eta, out_lam):
    """Relinearize all photometric factors and write their messages.

    Factor k owns slot k.  Out-of-view pixels contribute zero information.
    Returns (energy, skipped_count).
    """
    P = photo_var.shape[0]
    if P == 0:
        return 0.0, 0
    R = frames[photo_var]
    KR = np.einsum("ij,kjl->kil", Kmat, R)
    proj = np.einsum("kij,kj->ki", KR, q)
    z = proj[:, 2]
    valid = z > 1e-9
    zs = np.where(valid, z, 1.0)
    w = proj[:, :2] / zs[:, None]

    i_right, inb = sample_bilinear(right, w)
    gx, _ = sample_bilinear(gx_img, w)
    gy, _ = sample_bilinear(gy_img, w)
    valid = valid & inb

    r = i_left - i_right
    # u = image-gradient row times the projection derivative at proj
    u = np.stack(
        [gx / zs, gy / zs, -(gx * proj[:, 0] + gy * proj[:, 1]) / (zs * zs)],
        axis=-1,
    )
    A = np.einsum("kij,kjl->kil", KR, skew_q)
    J = np.einsum("ki,kij->kj", u, A)

    J = np.where(valid[:, None], J, 0.0)
    r = np.where(valid, r, 0.0)
    out_eta[:P] = -lam_d * r[:, None] * J
    out_lam[:P] = lam_d * J[:, :, None] * J[:, None, :]
    energy = 0.5 * lam_d * float(r @ r)
    return energy, int(P - valid.sum())


def prior_messages(out_eta, out_lam, slot0, count, lam_p):
    """Anchored-at-current-frame priors: zero mean, isotropic precision."""
    out_eta[slot0:slot0 + count] = 0.0
    out_lam[slot0:slot0 + count] = 0.0
    out_lam[slot0:slot0 + count, 0, 0] = lam_p
    out_lam[slot0:slot0 + count, 1, 1] = lam_p
    out_lam[slot0:slot0 + count, 2, 2] = lam_p


def reg_messages(frames, reg_i, reg_j, slot_i, slot_j, prev_eta, prev_lam,
                 tot_eta, tot_lam, lam_r, out_eta, out_lam):
    """Relinearize smoothness factors and send both directed messages.

    Uses the closed-form block structure of the linearized potential: with
    B = Jr^-1(r), the Jacobians are J_j = B and J_i = -B^T, and the
    information vector reduces to (+lam r, -lam r) because Jr^-1(r) r = r.
    The non-target side's incoming product is folded in before the Schur
    elimination; a singular elimination block degrades to a zero message.
    Returns (energy, singular_count).
    """
    Rrel = np.einsum("kji,kjl->kil", frames[reg_i], frames[reg_j])
    r = lie.log_map(Rrel)
    B = lie.right_jacobian_inv(r)

    lam_ii = lam_r * np.einsum("kij,klj->kil", B, B)   # J_i^T J_i = B B^T
    lam_jj = lam_r * np.einsum("kji,kjl->kil", B, B)   # J_j^T J_j = B^T B
    lam_ij = -lam_r * np.einsum("kij,kjl->kil", B, B)  # J_i^T J_j = -B B
    lam_ji = np.swapaxes(lam_ij, -1, -2)
    eta_i = lam_r * r
    eta_j = -lam_r * r

    v2f_eta_i = tot_eta[reg_i] - prev_eta[slot_i]
    v2f_lam_i = tot_lam[reg_i] - prev_lam[slot_i]
    v2f_eta_j = tot_eta[reg_j] - prev_eta[slot_j]
    v2f_lam_j = tot_lam[reg_j] - prev_lam[slot_j]

    n_singular = 0
    for (A_lam, A_eta, C_ij, C_ji, b_eta, target) in (
        (lam_ii + v2f_lam_i, eta_i + v2f_eta_i, lam_ij, lam_ji, eta_j, slot_j),
        (lam_jj + v2f_lam_j, eta_j + v2f_eta_j, lam_ji, lam_ij, eta_i, slot_i),
    ):
        L, ok = _chol3(A_lam)
        X_eta = _chol_solve3(L, A_eta)
        X_lam = np.stack(
            [_chol_solve3(L, C_ij[..., c]) for c in range(3)], axis=-1
        )
        m_lam = (lam_jj if target is slot_j else lam_ii) - np.einsum(
            "kij,kjl->kil", C_ji, X_lam
        )
        m_eta = b_eta - np.einsum("kij,kj->ki", C_ji, X_eta)
        m_lam = 0.5 * (m_lam + np.swapaxes(m_lam, -1, -2))
        okf = ok[:, None]
        out_eta[target] = np.where(okf, m_eta, 0.0)
        out_lam[target] = np.where(okf[..., None], m_lam, 0.0)
        n_singular += int((~ok).sum())

    energy = 0.5 * lam_r * float(np.sum(r * r))
    return energy, n_singular


def belief_update(frames, msg_eta, msg_lam, slot_var, belief_eta, belief_lam,
                  update_frames):
    """Fuse freshly written messages, advance frames, re-express storage.

    Messages (and the fused belief) are re-expressed at each variable's new
    frame with the first-order information-form transport, which maps the
    fused mean to exactly zero.  Variables with singular fused precision keep
    their frame and their canonical belief as-is.
    Returns (sum of step norms, singular_count).
    """
    n_vars = frames.shape[0]
    fused_eta, fused_lam = csr_totals(slot_var, msg_eta, msg_lam, n_vars)

    if not update_frames:
        belief_eta[:] = fused_eta
        belief_lam[:] = fused_lam
        return 0.0, 0

    L, ok = _chol3(fused_lam)
    m = _chol_solve3(L, fused_eta)
    m = np.where(ok[:, None], m, 0.0)

    frames[:] = lie.oplus(frames, m)

    theta_slots = -m[slot_var]
    new_eta, new_lam = transport_canonical(msg_eta, msg_lam, theta_slots)
    msg_eta[:] = new_eta
    msg_lam[:] = 0.5 * (new_lam + np.swapaxes(new_lam, -1, -2))

    b_eta, b_lam = transport_canonical(fused_eta, fused_lam, -m)
    belief_eta[:] = b_eta
    belief_lam[:] = 0.5 * (b_lam + np.swapaxes(b_lam, -1, -2))

    return float(np.sum(np.linalg.norm(m, axis=-1))), int((~ok).sum())
