import numpy as np
import pytest

from pixelgbp import lie


def random_tangents(rng, n, max_norm=3.1):
    axes = rng.standard_normal((n, 3))
    axes /= np.linalg.norm(axes, axis=-1, keepdims=True)
    mags = rng.uniform(1e-8, max_norm, size=n)
    return axes * mags[:, None]


def test_exp_identity():
    assert np.allclose(lie.exp_map(np.zeros(3)), np.eye(3), atol=1e-15)


def test_exp_quarter_turn_about_x():
    R = lie.exp_map(np.array([np.pi / 2, 0.0, 0.0]))
    # 90 deg about x: y -> z, z -> -y
    assert np.allclose(R @ np.array([0, 1, 0]), [0, 0, 1], atol=1e-12)
    assert np.allclose(R @ np.array([0, 0, 1]), [0, -1, 0], atol=1e-12)


def test_exp_inverse_is_transpose():
    rng = np.random.default_rng(0)
    for tau in random_tangents(rng, 50):
        R = lie.exp_map(tau)
        assert np.allclose(R @ lie.exp_map(-tau), np.eye(3), atol=1e-12)
        assert lie.is_rotation(R, tol=1e-12)


def test_log_exp_roundtrip():
    rng = np.random.default_rng(1)
    taus = random_tangents(rng, 500)
    back = lie.log_map(lie.exp_map(taus))
    assert np.abs(back - taus).max() < 1e-9


def test_exp_log_roundtrip_on_random_rotations():
    rng = np.random.default_rng(2)
    R = lie.random_rotation(rng, (500,))
    R2 = lie.exp_map(lie.log_map(R))
    assert np.abs(R2 - R).max() < 1e-9


def test_log_identity_and_quarter_turn():
    assert np.allclose(lie.log_map(np.eye(3)), np.zeros(3), atol=1e-15)
    tau = lie.log_map(lie.exp_map(np.array([np.pi / 2, 0, 0])))
    assert np.allclose(tau, [np.pi / 2, 0, 0], atol=1e-12)


def test_log_small_angle_branch():
    e = np.array([1.0, 0.0, 0.0])
    tau = lie.log_map(lie.exp_map(1e-9 * e))
    assert np.allclose(tau, 1e-9 * e, rtol=1e-6, atol=1e-18)
    # consistency across the series/exact switchover
    for mag in (9.9e-7, 1.01e-6):
        t = mag * np.array([0.6, -0.8, 0.0])
        assert np.abs(lie.log_map(lie.exp_map(t)) - t).max() < 1e-15


def test_log_half_turn_branch():
    # exact pi rotations about each axis and a skew axis
    for axis in (np.eye(3)[0], np.eye(3)[1], np.eye(3)[2],
                 np.array([1.0, 1.0, 1.0]) / np.sqrt(3)):
        R = lie.exp_map(np.pi * axis)
        tau = lie.log_map(R)
        assert abs(np.linalg.norm(tau) - np.pi) < 1e-9
        assert np.abs(lie.exp_map(tau) - R).max() < 1e-9
    # just below the half turn
    tau0 = (np.pi - 1e-5) * np.array([0.0, 0.6, 0.8])
    assert np.abs(lie.log_map(lie.exp_map(tau0)) - tau0).max() < 1e-9


def test_right_jacobian_at_zero():
    assert np.allclose(lie.right_jacobian(np.zeros(3)), np.eye(3), atol=1e-15)
    assert np.allclose(lie.right_jacobian_inv(np.zeros(3)), np.eye(3), atol=1e-15)


def test_right_jacobian_small_angle_series():
    tau = np.array([1e-4, -2e-4, 0.5e-4])
    J = lie.right_jacobian(tau)
    approx = np.eye(3) - 0.5 * lie.skew(tau)
    assert np.abs(J - approx).max() < np.linalg.norm(tau) ** 2


def test_right_jacobian_inverse_pair():
    rng = np.random.default_rng(3)
    taus = random_tangents(rng, 200)
    prod = lie.right_jacobian(taus) @ lie.right_jacobian_inv(taus)
    assert np.abs(prod - np.eye(3)).max() < 1e-10


def test_right_jacobian_finite_differences():
    # (Exp(tau + d) ominus Exp(tau)) ~ J_r(tau) d at 100 random points
    rng = np.random.default_rng(4)
    taus = random_tangents(rng, 100, max_norm=2.8)
    h = 1e-6
    for tau in taus:
        J = lie.right_jacobian(tau)
        for k in range(3):
            d = np.zeros(3)
            d[k] = h
            num = lie.ominus(lie.exp_map(tau + d), lie.exp_map(tau)) / h
            assert np.abs(num - J[:, k]).max() < 1e-5


def test_oplus_ominus_trivial():
    rng = np.random.default_rng(5)
    R = lie.random_rotation(rng)
    assert np.allclose(lie.oplus(np.eye(3), np.zeros(3)), np.eye(3), atol=1e-15)
    assert np.allclose(lie.ominus(R, R), np.zeros(3), atol=1e-12)


def test_oplus_ominus_roundtrip():
    rng = np.random.default_rng(6)
    for _ in range(100):
        R = lie.random_rotation(rng)
        Q = lie.random_rotation(rng)
        assert np.abs(lie.oplus(R, lie.ominus(Q, R)) - Q).max() < 1e-9
        tau = random_tangents(rng, 1)[0]
        assert np.abs(lie.ominus(lie.oplus(R, tau), R) - tau).max() < 1e-9


def test_geodesic_distance():
    rng = np.random.default_rng(7)
    R = lie.random_rotation(rng)
    assert lie.geodesic_distance(R, R) < 1e-12
    d = lie.geodesic_distance(np.eye(3), lie.exp_map(np.array([0.01, 0, 0])))
    assert abs(d - 0.01) < 1e-12


def test_geodesic_symmetry_and_triangle():
    rng = np.random.default_rng(8)
    for _ in range(100):
        R1, R2, R3 = (lie.random_rotation(rng) for _ in range(3))
        d12 = lie.geodesic_distance(R1, R2)
        assert abs(d12 - lie.geodesic_distance(R2, R1)) < 1e-12
        assert lie.geodesic_distance(R1, R3) <= d12 + lie.geodesic_distance(R2, R3) + 1e-12


def test_batched_shapes():
    rng = np.random.default_rng(9)
    taus = random_tangents(rng, 10).reshape(2, 5, 3)
    R = lie.exp_map(taus)
    assert R.shape == (2, 5, 3, 3)
    assert lie.log_map(R).shape == (2, 5, 3)
    assert lie.right_jacobian(taus).shape == (2, 5, 3, 3)


def test_random_rotation_uniformity_smoke():
    rng = np.random.default_rng(10)
    R = lie.random_rotation(rng, (200,))
    assert lie.is_rotation(R, tol=1e-12)
