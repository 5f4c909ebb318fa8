"""Gaussians over tangent spaces in canonical and moment form, plus the
transport operators that move them between SO(3) linearization points.

Messages and beliefs are :class:`LieGaussian`: a rotation acting as the
linearization point ("frame") together with a canonical-form Gaussian in
its tangent space. Canonical form makes products additive, and it is the
only representation that survives the rank-deficient precisions produced
by scalar photometric constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lie


class SingularPrecisionError(ValueError):
    """Raised when an inversion or elimination block is (numerically) singular."""


@dataclass
class CanonicalGaussian:
    """Information vector eta and precision matrix lam: N^-1(eta, lam)."""

    eta: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.eta.ndim != 1 or self.lam.shape != (self.dim, self.dim):
            raise ValueError(
                f"inconsistent shapes: eta {self.eta.shape}, lam {self.lam.shape}"
            )

    @property
    def dim(self) -> int:
        return self.eta.shape[0]

    def copy(self) -> "CanonicalGaussian":
        return CanonicalGaussian(self.eta.copy(), self.lam.copy())


@dataclass
class MomentGaussian:
    """Mean mu and covariance sigma: N(mu, sigma)."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.mu.ndim != 1 or self.sigma.shape != (self.dim, self.dim):
            raise ValueError(
                f"inconsistent shapes: mu {self.mu.shape}, sigma {self.sigma.shape}"
            )

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


@dataclass
class LieGaussian:
    """A rotation frame and a canonical Gaussian in its tangent space."""

    frame: np.ndarray
    gauss: CanonicalGaussian

    def __post_init__(self):
        self.frame = np.asarray(self.frame, dtype=float)
        if self.frame.shape != (3, 3):
            raise ValueError(f"frame must be 3x3, got {self.frame.shape}")
        if self.gauss.dim != 3:
            raise ValueError("LieGaussian requires a 3-dim tangent Gaussian")


def zero_information(dim: int = 3) -> CanonicalGaussian:
    """The multiplicative identity for products: eta = 0, lam = 0."""
    return CanonicalGaussian(np.zeros(dim), np.zeros((dim, dim)))


def symmetrize(lam: np.ndarray) -> np.ndarray:
    """Average away accumulated asymmetry: (lam + lam^T) / 2."""
    return 0.5 * (lam + np.swapaxes(lam, -1, -2))


def product(a: CanonicalGaussian, b: CanonicalGaussian) -> CanonicalGaussian:
    """Pointwise product of densities; pure addition in canonical form."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return CanonicalGaussian(a.eta + b.eta, a.lam + b.lam)


def marginalize(joint: CanonicalGaussian, keep) -> CanonicalGaussian:
    """Marginal over the kept indices via the Schur complement.

    eta' = eta_a - lam_ab lam_bb^-1 eta_b
    lam' = lam_aa - lam_ab lam_bb^-1 lam_ba
    """
    keep = np.asarray(sorted(keep), dtype=int)
    if keep.size and (keep.min() < 0 or keep.max() >= joint.dim):
        raise ValueError(f"keep indices out of range for dim {joint.dim}")
    drop = np.setdiff1d(np.arange(joint.dim), keep)
    if drop.size == 0:
        return joint.copy()
    lam_aa = joint.lam[np.ix_(keep, keep)]
    lam_ab = joint.lam[np.ix_(keep, drop)]
    lam_bb = joint.lam[np.ix_(drop, drop)]
    try:
        sol_lam = np.linalg.solve(lam_bb, lam_ab.T)
        sol_eta = np.linalg.solve(lam_bb, joint.eta[drop])
    except np.linalg.LinAlgError as err:
        raise SingularPrecisionError(
            "eliminated block is singular; the factor neighbourhood is "
            "under-constrained (a prior is needed to make it invertible)"
        ) from err
    lam = symmetrize(lam_aa - lam_ab @ sol_lam)
    eta = joint.eta[keep] - lam_ab @ sol_eta
    return CanonicalGaussian(eta, lam)


def to_moments(g: CanonicalGaussian) -> MomentGaussian:
    """Moments from canonical form; requires positive-definite precision."""
    sigma = _pd_inverse(g.lam)
    return MomentGaussian(sigma @ g.eta, sigma)


def from_moments(m: MomentGaussian) -> CanonicalGaussian:
    """Canonical form from moments; requires positive-definite covariance."""
    lam = _pd_inverse(m.sigma)
    return CanonicalGaussian(lam @ m.mu, lam)


def _pd_inverse(mat: np.ndarray) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as err:
        raise SingularPrecisionError("matrix is not positive definite") from err
    inv_chol = np.linalg.inv(chol)
    return symmetrize(inv_chol.T @ inv_chol)


def boxplus(frame: np.ndarray, g: MomentGaussian) -> LieGaussian:
    """Retract a tangent-space Gaussian onto the manifold around ``frame``.

    The mean is absorbed into a new frame and the covariance is carried by
    the right Jacobian: frame' = frame (+) mu, sigma' = J_r(mu) sigma J_r(mu)^T.
    """
    if g.dim != 3:
        raise ValueError("boxplus needs a 3-dim tangent Gaussian")
    J = lie.right_jacobian(g.mu)
    new_frame = lie.oplus(frame, g.mu)
    sigma = symmetrize(J @ g.sigma @ J.T)
    return LieGaussian(new_frame, from_moments(MomentGaussian(np.zeros(3), sigma)))


def boxminus(G: LieGaussian, frame: np.ndarray) -> MomentGaussian:
    """Express a manifold Gaussian in the tangent space at ``frame``.

    A nonzero canonical mean is first absorbed into G's frame; the offset
    theta = G.frame (-) frame then becomes the mean, with covariance
    J_r^-1(theta) sigma J_r^-T(theta).
    """
    m = to_moments(G.gauss)
    if np.any(m.mu):
        G = boxplus(G.frame, m)
        m = to_moments(G.gauss)
    theta = lie.ominus(G.frame, frame)
    Jinv = lie.right_jacobian_inv(theta)
    sigma = symmetrize(Jinv @ m.sigma @ Jinv.T)
    return MomentGaussian(theta, sigma)


def transport_canonical(eta: np.ndarray, lam: np.ndarray, theta: np.ndarray):
    """Linear transport of canonical parameters between nearby frames.

    For a message at frame A re-expressed at frame B with
    theta = A (-) B, tangent coordinates map affinely as
    xi_B = theta + J_r^-1(theta) xi_A, hence

        lam' = J_r(theta)^T lam J_r(theta)
        eta' = J_r(theta)^T eta + lam' theta

    No inversion of ``lam`` is involved, so rank-deficient (even zero)
    precisions transport cleanly. Supports stacked (..., 3)/(..., 3, 3) input.
    """
    J = lie.right_jacobian(theta)
    Jt = np.swapaxes(J, -1, -2)
    new_lam = symmetrize(Jt @ lam @ J)
    new_eta = (Jt @ eta[..., None])[..., 0] + (new_lam @ theta[..., None])[..., 0]
    return new_eta, new_lam


def reframe(msg: LieGaussian, new_frame: np.ndarray) -> LieGaussian:
    """Re-express a message at a different linearization point.

    Invertible precisions go through moments (boxplus to absorb the mean,
    boxminus to the new frame), which makes A->B->A round trips exact.
    Singular precisions use the information-form linear transport instead.
    """
    try:
        m = boxminus(msg, new_frame)
        return LieGaussian(np.asarray(new_frame, dtype=float), from_moments(m))
    except SingularPrecisionError:
        theta = lie.ominus(msg.frame, new_frame)
        eta, lam = transport_canonical(msg.gauss.eta, msg.gauss.lam, theta)
        return LieGaussian(np.asarray(new_frame, dtype=float), CanonicalGaussian(eta, lam))
