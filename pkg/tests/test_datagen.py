import json

import numpy as np
import pytest

from pixelgbp import lie
from pixelgbp.datagen import (
    PanoramaImage,
    ScenePair,
    add_noise,
    make_scene_pair,
    procedural_panorama,
    render_view,
    sample_rotation_pair,
)
from pixelgbp.imaging import GrayImage, intrinsics_from_fov, sample_bilinear, warp


@pytest.fixture(scope="module")
def pano():
    return procedural_panorama(seed=0)


def median_consistency(pair, rotation):
    h, w = pair.left.shape
    xs, ys = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    pix = np.stack([xs.ravel(), ys.ravel()], axis=-1)
    warped, ok = warp(pix, rotation, pair.K)
    vals, inb = sample_bilinear(pair.right, warped)
    m = ok & inb
    return np.median(np.abs(pair.left.ravel()[m] - vals[m]))


class TestPanorama:
    def test_validation(self):
        with pytest.raises(ValueError):
            PanoramaImage(np.full((4, 8), 1.5))
        with pytest.raises(ValueError):
            PanoramaImage(np.zeros((4, 8, 3)))

    def test_warns_on_nonstandard_aspect(self):
        with pytest.warns(UserWarning):
            PanoramaImage(np.full((8, 8), 0.5))

    def test_procedural_range_and_shape(self, pano):
        assert pano.data.shape == (512, 1024)
        assert pano.data.min() >= 0.05 - 1e-12
        assert pano.data.max() <= 0.95 + 1e-12

    def test_procedural_determinism(self):
        a = procedural_panorama(height=64, width=128, seed=5)
        b = procedural_panorama(height=64, width=128, seed=5)
        assert np.array_equal(a.data, b.data)
        c = procedural_panorama(height=64, width=128, seed=6)
        assert not np.array_equal(a.data, c.data)

    def test_file_roundtrip(self, pano, tmp_path):
        path = tmp_path / "pano.png"
        pano.save(path)
        back = PanoramaImage.from_file(path)
        assert np.abs(back.data - pano.data).max() <= 1.0 / 65535 + 1e-12


class TestRenderView:
    def test_constant_panorama(self):
        pano = PanoramaImage(np.full((32, 64), 0.4))
        K = intrinsics_from_fov(60.0, 16, 16)
        view = render_view(pano, lie.random_rotation(np.random.default_rng(0)), K, 16, 16)
        assert np.abs(np.asarray(view) - 0.4).max() < 1e-12

    def test_repeat_render_bit_identical(self, pano):
        K = intrinsics_from_fov(60.0, 24, 24)
        R = lie.random_rotation(np.random.default_rng(1))
        a = render_view(pano, R, K, 24, 24)
        b = render_view(pano, R, K, 24, 24)
        assert np.array_equal(np.asarray(a), np.asarray(b))

    def test_forward_axis_samples_longitude_zero(self):
        # intensity encodes longitude; the principal ray looks at lon = 0
        h, w = 64, 128
        lon = ((np.arange(w) + 0.5) / w)[None, :]
        pano = PanoramaImage(np.broadcast_to(lon, (h, w)).copy())
        K = intrinsics_from_fov(60.0, 17, 17)
        view = np.asarray(render_view(pano, np.eye(3), K, 17, 17))
        assert abs(view[8, 8] - 0.5) < 1e-6

    def test_yaw_shifts_longitude(self):
        h, w = 64, 128
        lon = ((np.arange(w) + 0.5) / w)[None, :]
        pano = PanoramaImage(np.broadcast_to(lon, (h, w)).copy())
        K = intrinsics_from_fov(60.0, 17, 17)
        yaw = lie.exp_map(np.array([0.0, np.pi / 2, 0.0]))  # rotate towards +x
        view = np.asarray(render_view(pano, yaw, K, 17, 17))
        assert abs(view[8, 8] - 0.75) < 1e-6


class TestRotationPair:
    def test_zero_angle(self):
        rl, rr = sample_rotation_pair(0, 0.0)
        assert np.array_equal(rl, rr)

    def test_seed_reproducibility(self):
        a = sample_rotation_pair(42, 1.0)
        b = sample_rotation_pair(42, 1.0)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_monte_carlo_angle_bound(self):
        rng = np.random.default_rng(0)
        bound = np.radians(1.0) + 1e-12
        for _ in range(10000):
            rl, rr = sample_rotation_pair(rng, 1.0)
            d = lie.geodesic_distance(rl, rr)
            assert 0.0 < d <= bound
            assert lie.is_rotation(rl) and lie.is_rotation(rr)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            sample_rotation_pair(0, -1.0)


class TestNoise:
    def test_zero_sigma_identity(self):
        img = np.full((8, 8), 0.3)
        out = add_noise(img, 0.0, 0)
        assert np.array_equal(out, img)
        assert out is not img

    def test_empirical_std(self):
        img = np.full((128, 128), 0.5)
        out = add_noise(img, 5e-2, np.random.default_rng(0))
        measured = np.std(out - img)
        assert abs(measured - 5e-2) / 5e-2 < 0.05

    def test_clamped(self):
        img = np.full((64, 64), 0.5)
        out = add_noise(img, 10.0, np.random.default_rng(0))
        assert out.min() >= 0.0 and out.max() <= 1.0
        assert (out == 0.0).any() and (out == 1.0).any()

    def test_preserves_wrapper_type(self):
        out = add_noise(GrayImage(np.full((4, 4), 0.5)), 1e-2, 0)
        assert isinstance(out, GrayImage)


class TestScenePair:
    def test_warp_consistency(self, pano):
        K = intrinsics_from_fov(60.0, 64, 64)
        for seed in range(5):
            pair = make_scene_pair(pano, K, 64, 64, 1.0, 0.0, seed)
            assert median_consistency(pair, pair.rotation) < 2e-2

    def test_stored_convention_beats_its_inverse(self, pano):
        K = intrinsics_from_fov(60.0, 64, 64)
        checked = 0
        for seed in range(10):
            pair = make_scene_pair(pano, K, 64, 64, 1.0, 0.0, seed)
            if pair.angle_radians < np.radians(0.3):
                continue  # too small for interpolation error to discriminate
            assert median_consistency(pair, pair.rotation) \
                < median_consistency(pair, pair.rotation.T)
            checked += 1
        assert checked >= 3

    def test_determinism(self, pano):
        K = intrinsics_from_fov(60.0, 32, 32)
        a = make_scene_pair(pano, K, 32, 32, 1.0, 5e-2, 7)
        b = make_scene_pair(pano, K, 32, 32, 1.0, 5e-2, 7)
        assert np.array_equal(a.left, b.left)
        assert np.array_equal(a.right, b.right)
        assert np.array_equal(a.rotation, b.rotation)

    def test_noise_touches_both_views(self, pano):
        K = intrinsics_from_fov(60.0, 32, 32)
        clean = make_scene_pair(pano, K, 32, 32, 1.0, 0.0, 7)
        noisy = make_scene_pair(pano, K, 32, 32, 1.0, 5e-2, 7)
        assert not np.array_equal(clean.left, noisy.left)
        assert not np.array_equal(clean.right, noisy.right)
        assert np.array_equal(clean.rotation, noisy.rotation)

    def test_validation(self, pano):
        K = intrinsics_from_fov(60.0, 8, 8)
        img = np.full((8, 8), 0.5)
        with pytest.raises(ValueError):
            ScenePair(img, np.full((8, 9), 0.5), np.eye(3), K, 0, 0.0, 1.0)
        with pytest.raises(ValueError):
            ScenePair(img, img, np.eye(3) * 2.0, K, 0, 0.0, 1.0)
        with pytest.raises(ValueError):
            ScenePair(img, img, lie.exp_map(np.array([0.1, 0, 0])), K, 0, 0.0, 1.0)

    def test_save_load_roundtrip(self, pano, tmp_path):
        K = intrinsics_from_fov(60.0, 32, 32)
        pair = make_scene_pair(pano, K, 32, 32, 1.0, 5e-2, 11)
        pair.save(tmp_path / "pairs" / "p11")
        back = ScenePair.load(tmp_path / "pairs" / "p11")
        assert np.abs(back.left - pair.left).max() <= 1.0 / 65535 + 1e-12
        assert np.abs(back.right - pair.right).max() <= 1.0 / 65535 + 1e-12
        assert np.array_equal(back.rotation, pair.rotation)
        assert back.seed == 11 and back.noise_sigma == 5e-2
        assert back.K == K

    def test_sidecar_is_json(self, pano, tmp_path):
        K = intrinsics_from_fov(60.0, 16, 16)
        make_scene_pair(pano, K, 16, 16, 1.0, 0.0, 2).save(tmp_path / "x")
        meta = json.loads((tmp_path / "x.json").read_text())
        assert set(meta) == {"rotation", "seed", "noise_sigma",
                             "max_angle_degrees", "intrinsics"}
