"""Pinhole camera model, rotational image warping, and grayscale image utilities.

Coordinates follow the pixel-center convention: integer coordinates lie at
pixel centers, x runs along the width axis, and the principal point of a
centered camera is at (w/2 - 0.5, h/2 - 0.5).  All intensities are floats
in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

# Points closer to the camera plane than this are treated as unprojectable.
MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Focal lengths and principal point of a distortion-free pinhole camera."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )


def intrinsics_from_fov(fov_degrees: float, width: int, height: int) -> CameraIntrinsics:
    """Build intrinsics for a given horizontal/vertical field of view.

    The focal length satisfies tan(fov/2) = (extent/2)/f independently per
    axis, and the principal point sits at the image center.
    """
    if not 1.0 < fov_degrees < 179.0:
        raise ValueError(f"field of view {fov_degrees} out of supported range (1, 179)")
    half = np.radians(fov_degrees) / 2.0
    return CameraIntrinsics(
        fx=(width / 2.0) / np.tan(half),
        fy=(height / 2.0) / np.tan(half),
        cx=width / 2.0 - 0.5,
        cy=height / 2.0 - 0.5,
    )


class GrayImage:
    """A grayscale raster with float intensities in [0, 1]."""

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValueError("expected a 2-D array with positive dimensions")
        if not np.all(np.isfinite(pixels)):
            raise ValueError("image contains non-finite values")
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        self.pixels = pixels

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.pixels.astype(dtype) if dtype is not None else self.pixels


def _pixels_of(img) -> np.ndarray:
    return img.pixels if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)


def warp(pixels: np.ndarray, rotation: np.ndarray, K: CameraIntrinsics):
    """Map pixel coordinates through a pure camera rotation.

    Each pixel is unprojected to a ray, rotated, and reprojected:
    p' = project(K @ R @ K^-1 @ [p; 1]).  Works on a single (2,) point or any
    (..., 2) batch.

    Returns (warped, valid) where valid marks points whose rotated ray still
    has positive depth; warped coordinates are NaN where invalid.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    rotation = np.asarray(rotation)
    if np.array_equal(rotation, np.eye(3)):
        # Identity must be exact; the matrix route would leave rounding dust.
        return pixels.copy(), np.ones(pixels.shape[:-1], dtype=bool)
    homo = np.concatenate([pixels, np.ones(pixels.shape[:-1] + (1,))], axis=-1)
    rays = homo @ K.inverse_matrix.T
    rotated = rays @ np.asarray(rotation).T
    projected = rotated @ K.matrix.T
    z = projected[..., 2]
    valid = z > MIN_DEPTH
    with np.errstate(divide="ignore", invalid="ignore"):
        warped = projected[..., :2] / z[..., None]
    warped = np.where(valid[..., None], warped, np.nan)
    return warped, valid


def sample_bilinear(img, points: np.ndarray):
    """Bilinearly interpolate image intensities at fractional pixel coordinates.

    A point is in bounds when it lies inside the closed rectangle spanned by
    the outermost pixel centers, [0, w-1] x [0, h-1]; everywhere else the
    four enclosing centers are not all available.  Returns (values, in_bounds)
    with values zeroed where out of bounds.
    """
    pix = _pixels_of(img)
    h, w = pix.shape
    points = np.asarray(points, dtype=np.float64)
    x, y = points[..., 0], points[..., 1]
    finite = np.isfinite(x) & np.isfinite(y)
    inb = finite & (x >= 0.0) & (x <= w - 1.0) & (y >= 0.0) & (y <= h - 1.0)

    xs = np.where(inb, x, 0.0)
    ys = np.where(inb, y, 0.0)
    # Clamp the base corner so points on the far border still have a full cell.
    x0 = np.minimum(np.floor(xs).astype(np.int64), w - 2) if w > 1 else np.zeros_like(xs, np.int64)
    y0 = np.minimum(np.floor(ys).astype(np.int64), h - 2) if h > 1 else np.zeros_like(ys, np.int64)
    x0 = np.maximum(x0, 0)
    y0 = np.maximum(y0, 0)
    tx = xs - x0
    ty = ys - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    v00 = pix[y0, x0]
    v01 = pix[y0, x1]
    v10 = pix[y1, x0]
    v11 = pix[y1, x1]
    top = v00 * (1.0 - tx) + v01 * tx
    bot = v10 * (1.0 - tx) + v11 * tx
    values = np.where(inb, top * (1.0 - ty) + bot * ty, 0.0)
    return values, inb


def gradient_field(img):
    """Image-space intensity derivatives (dI/dx, dI/dy).

    Central differences in the interior, one-sided on the borders, in units
    of intensity per pixel.
    """
    pix = _pixels_of(img)
    gy, gx = np.gradient(pix)
    return gx, gy


# ---------------------------------------------------------------------------
# File formats


def load_gray(path) -> GrayImage:
    """Read an 8- or 16-bit grayscale PNG (or any PIL-readable file) as floats."""
    with Image.open(path) as im:
        if im.mode == "I;16":
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        elif im.mode == "I":
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return GrayImage(np.clip(arr, 0.0, 1.0))


def save_gray(path, img, bit_depth: int = 16) -> None:
    """Write a grayscale PNG with the requested bit depth (8 or 16)."""
    pix = np.clip(_pixels_of(img), 0.0, 1.0)
    if bit_depth == 8:
        out = Image.fromarray(np.round(pix * 255.0).astype(np.uint8), mode="L")
    elif bit_depth == 16:
        out = Image.fromarray(np.round(pix * 65535.0).astype(np.uint16))
    else:
        raise ValueError("bit_depth must be 8 or 16")
    out.save(path, format="PNG")


def save_pfm(path, img) -> None:
    """Write a single-channel float32 PFM (little-endian, bottom-up rows)."""
    pix = _pixels_of(img).astype(np.float32)
    h, w = pix.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(pix[::-1].tobytes())


def load_pfm(path) -> np.ndarray:
    """Read a single-channel PFM written by :func:`save_pfm`."""
    with open(path, "rb") as f:
        if f.readline().strip() != b"Pf":
            raise ValueError("not a grayscale PFM file")
        w, h = (int(v) for v in f.readline().split())
        scale = float(f.readline())
        data = np.frombuffer(f.read(4 * w * h), dtype="<f4" if scale < 0 else ">f4")
    return data.reshape(h, w)[::-1].astype(np.float64)
