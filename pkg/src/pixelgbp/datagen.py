"""Synthetic ground-truthed scene pairs from equirectangular panoramas.

A pair is made by pointing a pinhole camera at a shared panorama under two
nearby random orientations.  The stored ground-truth rotation is the one that
makes the pure-rotation pixel warp photometrically consistent:

    I_left[p] ~= I_right[warp(p; R_gt)]   with   R_gt = R_right^-1 R_left,

which pins down the composition-order convention once and for all.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import lie
from .imaging import CameraIntrinsics, GrayImage, load_gray, save_gray

__all__ = [
    "PanoramaImage",
    "ScenePair",
    "procedural_panorama",
    "render_view",
    "sample_rotation_pair",
    "add_noise",
    "make_scene_pair",
]


class PanoramaImage:
    """Equirectangular grayscale sphere texture (longitude x latitude)."""

    def __init__(self, data):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("panorama must be a 2-D grayscale array")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("panorama values must lie in [0, 1]")
        h, w = data.shape
        if w != 2 * h:
            warnings.warn(
                f"panorama is {w}x{h}; expected 2:1 equirectangular coverage",
                stacklevel=2,
            )
        self.data = data

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    @classmethod
    def from_file(cls, path) -> "PanoramaImage":
        return cls(load_gray(path))

    def save(self, path) -> None:
        save_gray(path, self.data, bit_depth=16)


def procedural_panorama(height: int = 512, width: int = 1024, terms: int = 12,
                        seed: int = 0) -> PanoramaImage:
    """Band-limited sphere texture: a sum of plane waves in direction space.

    Each term is sin(omega * <u, d> + phase) for a random unit vector u, with
    angular frequencies log-spaced in [12, 64] rad/rad and amplitudes weighted
    toward the high-frequency end (cubic tilt).  The tilt makes the rendered
    views carry gradients comparable to real indoor panoramas, which is what
    gives the photometric factors enough weight to move the estimate against
    the trust-region prior; the top frequency stays low enough that bilinear
    resampling keeps warped views photometrically consistent to a few 1e-3.
    """
    rng = np.random.default_rng(seed)
    lon = (np.arange(width) + 0.5) / width * 2.0 * np.pi - np.pi
    lat = (np.arange(height) + 0.5) / height * np.pi - np.pi / 2.0
    cos_lat = np.cos(lat)[:, None]
    d = np.stack(
        [
            cos_lat * np.sin(lon)[None, :],
            np.broadcast_to(np.sin(lat)[:, None], (height, width)),
            cos_lat * np.cos(lon)[None, :],
        ],
        axis=-1,
    )
    omegas = np.geomspace(12.0, 64.0, terms)
    img = np.zeros((height, width))
    for omega in omegas:
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        amp = rng.uniform(0.5, 1.0) * (omega / omegas[-1]) ** 3
        img += amp * np.sin(omega * (d @ axis) + rng.uniform(0, 2 * np.pi))
    lo, hi = img.min(), img.max()
    img = 0.05 + 0.9 * (img - lo) / (hi - lo)
    return PanoramaImage(img)


def _sample_pano(data, u, v):
    """Bilinear lookup with longitudinal wraparound and pole clamping."""
    h, w = data.shape
    x0f = np.floor(u)
    y0f = np.floor(v)
    tx = u - x0f
    ty = v - y0f
    x0 = x0f.astype(np.int64) % w
    x1 = (x0 + 1) % w
    y0 = np.clip(y0f.astype(np.int64), 0, h - 1)
    y1 = np.clip(y0f.astype(np.int64) + 1, 0, h - 1)
    top = (1.0 - tx) * data[y0, x0] + tx * data[y0, x1]
    bot = (1.0 - tx) * data[y1, x0] + tx * data[y1, x1]
    return (1.0 - ty) * top + ty * bot


def render_view(pano: PanoramaImage, rotation, K: CameraIntrinsics,
                height: int, width: int) -> GrayImage:
    """Project the panorama through a pinhole camera at the given orientation.

    Every output pixel casts the ray d = rotation @ normalize(K^-1 [p; 1]) and
    samples the panorama at longitude atan2(d_x, d_z), latitude asin(d_y).
    """
    data = np.asarray(pano)
    rotation = np.asarray(rotation, dtype=np.float64)
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    rays = np.stack([xs.ravel(), ys.ravel(), np.ones(height * width)], axis=-1)
    rays = rays @ K.inverse_matrix.T
    rays /= np.linalg.norm(rays, axis=-1, keepdims=True)
    d = rays @ rotation.T
    lon = np.arctan2(d[:, 0], d[:, 2])
    lat = np.arcsin(np.clip(d[:, 1], -1.0, 1.0))
    ph, pw = data.shape
    u = (lon + np.pi) / (2.0 * np.pi) * pw - 0.5
    v = (lat + np.pi / 2.0) / np.pi * ph - 0.5
    out = _sample_pano(data, u, v).reshape(height, width)
    return GrayImage(out)


def sample_rotation_pair(rng, max_angle_degrees: float):
    """Two nearby random orientations: uniform base pose, uniform-axis offset.

    The offset axis is uniform on the sphere and the offset angle uniform in
    (0, max_angle]; max_angle = 0 collapses to identical poses.
    """
    if max_angle_degrees < 0:
        raise ValueError("max_angle_degrees must be >= 0")
    rng = np.random.default_rng(rng)
    r_left = lie.random_rotation(rng)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = (1.0 - rng.uniform()) * np.radians(max_angle_degrees)
    r_right = r_left @ lie.exp_map(angle * axis)
    return r_left, r_right


def add_noise(img, sigma: float, rng):
    """Per-pixel additive Gaussian noise, clamped back into [0, 1]."""
    if sigma < 0:
        raise ValueError("noise sigma must be >= 0")
    data = np.asarray(img, dtype=np.float64)
    if sigma == 0.0:
        out = data.copy()
    else:
        rng = np.random.default_rng(rng)
        out = np.clip(data + rng.normal(0.0, sigma, data.shape), 0.0, 1.0)
    return GrayImage(out) if isinstance(img, GrayImage) else out


@dataclass(frozen=True)
class ScenePair:
    """A rendered left/right view pair with its ground-truth warp rotation."""

    left: np.ndarray
    right: np.ndarray
    rotation: np.ndarray
    K: CameraIntrinsics
    seed: int
    noise_sigma: float
    max_angle_degrees: float

    def __post_init__(self):
        object.__setattr__(self, "left", np.asarray(self.left, dtype=np.float64))
        object.__setattr__(self, "right", np.asarray(self.right, dtype=np.float64))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        if self.left.shape != self.right.shape:
            raise ValueError("left/right images must share dimensions")
        if not lie.is_rotation(self.rotation):
            raise ValueError("ground-truth rotation is not in SO(3)")
        bound = np.radians(self.max_angle_degrees) + 1e-9
        if lie.geodesic_distance(self.rotation, np.eye(3)) > bound:
            raise ValueError("ground-truth rotation exceeds the configured bound")

    @property
    def angle_radians(self) -> float:
        return lie.geodesic_distance(self.rotation, np.eye(3))

    def save(self, stem) -> None:
        """Write <stem>_left.png, <stem>_right.png and <stem>.json."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        save_gray(stem.with_name(stem.name + "_left.png"), self.left, bit_depth=16)
        save_gray(stem.with_name(stem.name + "_right.png"), self.right, bit_depth=16)
        meta = {
            "rotation": self.rotation.tolist(),
            "seed": self.seed,
            "noise_sigma": self.noise_sigma,
            "max_angle_degrees": self.max_angle_degrees,
            "intrinsics": {
                "fx": self.K.fx,
                "fy": self.K.fy,
                "cx": self.K.cx,
                "cy": self.K.cy,
            },
        }
        stem.with_suffix(".json").write_text(json.dumps(meta, indent=2))

    @classmethod
    def load(cls, stem) -> "ScenePair":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        return cls(
            left=load_gray(stem.with_name(stem.name + "_left.png")),
            right=load_gray(stem.with_name(stem.name + "_right.png")),
            rotation=np.array(meta["rotation"]),
            K=CameraIntrinsics(**meta["intrinsics"]),
            seed=meta["seed"],
            noise_sigma=meta["noise_sigma"],
            max_angle_degrees=meta["max_angle_degrees"],
        )


def make_scene_pair(pano: PanoramaImage, K: CameraIntrinsics, height: int,
                    width: int, max_angle_degrees: float, noise_sigma: float,
                    seed: int) -> ScenePair:
    """Render one seeded pair; noise (when enabled) corrupts both views."""
    rng = np.random.default_rng(seed)
    r_left, r_right = sample_rotation_pair(rng, max_angle_degrees)
    left = add_noise(render_view(pano, r_left, K, height, width), noise_sigma, rng)
    right = add_noise(render_view(pano, r_right, K, height, width), noise_sigma, rng)
    return ScenePair(
        left=np.asarray(left),
        right=np.asarray(right),
        rotation=r_right.T @ r_left,
        K=K,
        seed=seed,
        noise_sigma=noise_sigma,
        max_angle_degrees=max_angle_degrees,
    )
