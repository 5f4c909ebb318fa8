"""SO(3) group operations: exponential/log maps, right Jacobians, retraction pair.

All functions accept stacked inputs: tangent vectors of shape (..., 3) and
rotation matrices of shape (..., 3, 3). The perturbation convention is
right/local throughout: ``oplus(R, tau) = R @ exp_map(tau)``.
"""

from __future__ import annotations

import numpy as np

# Below this angle the sinc-style coefficients switch to their Taylor series
# to avoid cancellation in sin(t)/t and (1 - cos(t))/t^2.
SMALL_ANGLE = 1e-6

_EYE3 = np.eye(3)


def skew(tau: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix [tau]_x such that [tau]_x @ v = tau x v."""
    tau = np.asarray(tau, dtype=float)
    out = np.zeros(tau.shape[:-1] + (3, 3))
    x, y, z = tau[..., 0], tau[..., 1], tau[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def unskew(S: np.ndarray) -> np.ndarray:
    """Inverse of :func:`skew`."""
    S = np.asarray(S, dtype=float)
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def _angle(tau: np.ndarray) -> np.ndarray:
    return np.linalg.norm(tau, axis=-1)


def exp_map(tau: np.ndarray) -> np.ndarray:
    """Rodrigues formula mapping an axis-angle vector to a rotation matrix."""
    tau = np.asarray(tau, dtype=float)
    t = _angle(tau)
    t2 = t * t
    small = t < SMALL_ANGLE
    ts = np.where(small, 1.0, t)
    # a = sin(t)/t, b = (1 - cos(t))/t^2
    a = np.where(small, 1.0 - t2 / 6.0, np.sin(ts) / ts)
    b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(ts)) / (ts * ts))
    S = skew(tau)
    return _EYE3 + a[..., None, None] * S + b[..., None, None] * (S @ S)


def log_map(R: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix, with norm in [0, pi].

    The angle is recovered via atan2 of the symmetric/antisymmetric parts,
    which stays accurate near both 0 and pi. At (or extremely close to) a
    half turn the axis is taken from the largest diagonal entry of
    (R + I)/2; its sign follows the antisymmetric part when that is nonzero
    and otherwise the first nonzero axis component is made positive.
    """
    R = np.asarray(R, dtype=float)
    w = unskew(R - np.swapaxes(R, -1, -2)) * 0.5  # sin(t) * axis
    s = np.linalg.norm(w, axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    t = np.arctan2(s, np.clip(c, -1.0, 1.0))

    small = t < SMALL_ANGLE
    near_pi = t > np.pi - 1e-6
    ss = np.where(small | near_pi, 1.0, s)
    # t / sin(t) ~ 1 + t^2/6 for small t
    factor = np.where(small, 1.0 + t * t / 6.0, t / ss)
    out = factor[..., None] * w

    if np.any(near_pi):
        B = 0.5 * (R + _EYE3)  # ~ axis axis^T at a half turn
        flat_B = B.reshape(-1, 3, 3)
        flat_w = w.reshape(-1, 3)
        flat_t = t.reshape(-1)
        flat_out = out.reshape(-1, 3)
        for i in np.nonzero(near_pi.reshape(-1))[0]:
            d = np.diagonal(flat_B[i])
            k = int(np.argmax(d))
            axis = flat_B[i][:, k] / np.sqrt(d[k])
            axis /= np.linalg.norm(axis)
            dot = float(axis @ flat_w[i])
            if dot < 0.0:
                axis = -axis
            elif dot == 0.0:
                nz = np.nonzero(axis)[0]
                if axis[nz[0]] < 0.0:
                    axis = -axis
            flat_out[i] = flat_t[i] * axis
        out = flat_out.reshape(out.shape)
    return out


def right_jacobian(tau: np.ndarray) -> np.ndarray:
    """Right Jacobian J_r with Exp(tau + d) ~ Exp(tau) Exp(J_r(tau) d)."""
    tau = np.asarray(tau, dtype=float)
    t = _angle(tau)
    t2 = t * t
    small = t < SMALL_ANGLE
    ts = np.where(small, 1.0, t)
    b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(ts)) / (ts * ts))
    c = np.where(small, 1.0 / 6.0 - t2 / 120.0, (ts - np.sin(ts)) / (ts * ts * ts))
    S = skew(tau)
    return _EYE3 - b[..., None, None] * S + c[..., None, None] * (S @ S)


def right_jacobian_inv(tau: np.ndarray) -> np.ndarray:
    """Closed-form inverse of the right Jacobian (valid for ||tau|| < 2*pi)."""
    tau = np.asarray(tau, dtype=float)
    t = _angle(tau)
    t2 = t * t
    small = t < SMALL_ANGLE
    ts = np.where(small, 1.0, t)
    # e = 1/t^2 - (1 + cos(t)) / (2 t sin(t)); series 1/12 + t^2/720
    e = np.where(
        small,
        1.0 / 12.0 + t2 / 720.0,
        1.0 / (ts * ts) - (1.0 + np.cos(ts)) / (2.0 * ts * np.sin(ts)),
    )
    S = skew(tau)
    return _EYE3 + 0.5 * S + e[..., None, None] * (S @ S)


def oplus(R: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Right retraction R * Exp(tau)."""
    return np.asarray(R, dtype=float) @ exp_map(tau)


def ominus(R2: np.ndarray, R1: np.ndarray) -> np.ndarray:
    """Local difference Log(R1^-1 R2), satisfying oplus(R1, ominus(R2, R1)) = R2."""
    R1 = np.asarray(R1, dtype=float)
    return log_map(np.swapaxes(R1, -1, -2) @ R2)


def geodesic_distance(R1: np.ndarray, R2: np.ndarray) -> np.ndarray:
    """Rotation angle between R1 and R2 in radians."""
    return _angle(ominus(R2, R1))


def random_rotation(rng: np.random.Generator, shape: tuple = ()) -> np.ndarray:
    """Rotation matrices drawn uniformly from SO(3) (via normalized quaternions)."""
    q = rng.standard_normal(shape + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(shape + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def is_rotation(R: np.ndarray, tol: float = 1e-12) -> bool:
    """Check orthonormality and det = +1 entrywise to the given tolerance."""
    R = np.asarray(R, dtype=float)
    ortho = np.abs(np.swapaxes(R, -1, -2) @ R - _EYE3).max() <= tol
    det = np.abs(np.linalg.det(R) - 1.0).max() <= tol
    return bool(ortho and det)
