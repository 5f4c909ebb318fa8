"""Residuals, Jacobians, and noise parameters for the three factor kinds.

All Jacobians are taken with respect to a right-multiplied tangent
perturbation of the rotation state, R -> R @ exp_map(tau), which is the
convention used throughout the package.  The linearized potential of a
factor with residual r, Jacobian J, and residual precision L is the
canonical-form pair

    eta = -J^T L r        lam = J^T L J

expressed in the tangent space at the linearization point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lie
from .imaging import CameraIntrinsics, gradient_field, sample_bilinear, warp


@dataclass(frozen=True)
class FactorParams:
    """Noise scales for the prior, photometric, and smoothness terms.

    Residual precisions are isotropic, 1/sigma^2 per component.
    """

    sigma_p: float
    sigma_d: float
    sigma_r: float

    def __post_init__(self):
        for name in ("sigma_p", "sigma_d", "sigma_r"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def lam_p(self) -> float:
        return self.sigma_p**-2

    @property
    def lam_d(self) -> float:
        return self.sigma_d**-2

    @property
    def lam_r(self) -> float:
        return self.sigma_r**-2


def photometric_residual(pixel, rotation, left, right, K: CameraIntrinsics,
                         right_grads=None):
    """Single-pixel intensity residual and its 1x3 rotation Jacobian.

    The residual compares the pixel's own reading against the right image
    sampled where the rotated ray lands: r = I_l[p] - I_r[W(p; R)].  The
    Jacobian chains the interpolated right-image gradient through the
    projection and the rotated ray's tangent derivative.

    Returns None when the warped point falls outside the right image or
    behind the camera.  ``right_grads`` may carry a precomputed
    (dI/dx, dI/dy) pair to avoid rebuilding the gradient field per call.
    """
    pixel = np.asarray(pixel, dtype=np.float64)
    warped, valid = warp(pixel, rotation, K)
    if not valid:
        return None
    i_right, inb = sample_bilinear(right, warped)
    if not inb:
        return None
    i_left, _ = sample_bilinear(left, pixel)
    r = float(i_left - i_right)

    if right_grads is None:
        right_grads = gradient_field(right)
    gx, _ = sample_bilinear(right_grads[0], warped)
    gy, _ = sample_bilinear(right_grads[1], warped)

    q = K.inverse_matrix @ np.array([pixel[0], pixel[1], 1.0])
    P = K.matrix @ np.asarray(rotation) @ q
    # derivative of the perspective division at the projected point
    J_pi = np.array(
        [
            [1.0 / P[2], 0.0, -P[0] / P[2] ** 2],
            [0.0, 1.0 / P[2], -P[1] / P[2] ** 2],
        ]
    )
    J_point = K.matrix @ np.asarray(rotation) @ lie.skew(q)
    J = np.array([gx, gy]) @ J_pi @ J_point
    return r, J.reshape(1, 3)


def prior_residual(rotation, anchor):
    """Tangent offset of a rotation from its anchor, with Jacobian.

    r = log_map(anchor^-1 @ rotation); the Jacobian of r under a right
    perturbation of ``rotation`` is the inverse right Jacobian at r.
    """
    r = lie.ominus(rotation, anchor)
    return r, lie.right_jacobian_inv(r)


def regularization_residual(rot_i, rot_j):
    """Relative-rotation residual between two neighbouring states.

    r = log_map(rot_i^-1 @ rot_j).  Right-perturbing rot_j gives
    J_j = Jr^-1(r); right-perturbing rot_i gives J_i = -Jr^-1(-r), which
    equals -Jr^-1(r)^T.
    """
    r = lie.ominus(rot_j, rot_i)
    J_j = lie.right_jacobian_inv(r)
    J_i = -lie.right_jacobian_inv(-r)
    return r, J_i, J_j


def linearized_potential(r, J, precision):
    """Canonical-form (eta, lam) of a factor linearized at the current state.

    ``precision`` is the residual precision: a scalar for 1-D residuals or
    a matrix; isotropic vector residuals may pass the scalar too.
    """
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    J = np.asarray(J, dtype=np.float64).reshape(len(r), -1)
    if np.isscalar(precision) or np.ndim(precision) == 0:
        Lr = float(precision) * r
        lam = float(precision) * J.T @ J
    else:
        L = np.asarray(precision, dtype=np.float64)
        Lr = L @ r
        lam = J.T @ L @ J
    return -J.T @ Lr, lam
