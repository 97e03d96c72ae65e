"""Image loading, plate rectification and canonicalization.

Rasters are numpy arrays shaped ``(H, W)`` or ``(H, W, C)``. Integer rasters
are scaled by their dtype maximum; float rasters are taken to be in [0, 1].
All resampling is bilinear with edge clamping and half-pixel centers.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image

from fairsplit.errors import ImagingError, RectificationError
from fairsplit.manifest import DatasetManifest, QuadAnnotation

DEFAULT_CANONICAL_H = 48
DEFAULT_CANONICAL_W = 96
MIN_RECTIFIED_SIDE = 8
MIN_QUAD_AREA = 1.0


@dataclass(frozen=True, eq=False)
class CanonicalImage:
    """Fixed-size grayscale plate, row-major, intensities in [0, 1]."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.ascontiguousarray(self.pixels, dtype=np.float32).reshape(-1)
        if px.size != self.width * self.height:
            raise ImagingError(
                f"pixel count {px.size} does not match {self.width}x{self.height}"
            )
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def as_array(self) -> np.ndarray:
        return self.pixels.reshape(self.height, self.width)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CanonicalImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None  # type: ignore[assignment]


def load_image(path: str | Path) -> np.ndarray:
    """Read a PNG/JPEG file as uint8, keeping grayscale files single-channel."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise ImagingError(f"cannot read image {path}: {exc}") from exc
    return arr


def to_unit_float(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim not in (2, 3) or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ImagingError(f"expected a non-empty 2-D or 3-D raster, got shape {arr.shape}")
    if np.issubdtype(arr.dtype, np.integer):
        return arr.astype(np.float64) / float(np.iinfo(arr.dtype).max)
    if arr.dtype == np.bool_:
        return arr.astype(np.float64)
    out = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ImagingError("raster contains NaN or Inf")
    return np.clip(out, 0.0, 1.0)


def to_gray(image: np.ndarray) -> np.ndarray:
    """Luma (0.299, 0.587, 0.114) of a unit-float raster; alpha is ignored."""
    img = to_unit_float(image)
    if img.ndim == 2:
        return img
    if img.shape[2] == 1:
        return img[:, :, 0]
    if img.shape[2] < 3:
        raise ImagingError(f"unsupported channel count {img.shape[2]}")
    r, g, b = img[:, :, 0], img[:, :, 1], img[:, :, 2]
    # Written relative to r so equal channels come out exact.
    gray = r + 0.587 * (g - r) + 0.114 * (b - r)
    return np.clip(gray, 0.0, 1.0)


def sample_bilinear(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``image`` at index-space coordinates (pixel centers at integers).

    Coordinates outside the raster are clamped to the border.
    """
    h, w = image.shape[:2]
    xs = np.clip(xs, 0.0, w - 1)
    ys = np.clip(ys, 0.0, h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if image.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    a = image[y0, x0]
    b = image[y0, x1]
    c = image[y1, x0]
    d = image[y1, x1]
    # a + f*(b-a) keeps constant regions exact.
    top = a + fx * (b - a)
    bottom = c + fx * (d - c)
    return top + fy * (bottom - top)


def resize_bilinear(image: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = image.shape[:2]
    if out_w <= 0 or out_h <= 0:
        raise ImagingError(f"target size must be positive, got {out_w}x{out_h}")
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return sample_bilinear(np.asarray(image, dtype=np.float64), gx, gy)


def homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3x3 matrix mapping the four ``src`` points onto the four ``dst`` points."""
    src = np.asarray(src, dtype=np.float64).reshape(4, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(4, 2)
    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        rhs[2 * i] = u
        rhs[2 * i + 1] = v
    try:
        h = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise RectificationError(f"degenerate point configuration: {exc}") from exc
    return np.append(h, 1.0).reshape(3, 3)


def warp_from_quad(image: np.ndarray, corners: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Resample the region bounded by ``corners`` onto an ``out_w`` x ``out_h`` grid.

    ``corners`` are continuous image-plane coordinates (TL, TR, BR, BL) and are
    mapped onto the output rectangle's outer corners.
    """
    rect = np.array([[0, 0], [out_w, 0], [out_w, out_h], [0, out_h]], dtype=np.float64)
    hmat = homography(rect, corners)
    us, vs = np.meshgrid(np.arange(out_w) + 0.5, np.arange(out_h) + 0.5)
    pts = np.stack([us.ravel(), vs.ravel(), np.ones(us.size)])
    mapped = hmat @ pts
    xs = (mapped[0] / mapped[2]).reshape(out_h, out_w) - 0.5
    ys = (mapped[1] / mapped[2]).reshape(out_h, out_w) - 0.5
    return sample_bilinear(image, xs, ys)


def rectify(image: np.ndarray, quad: QuadAnnotation, out_w: int, out_h: int) -> np.ndarray:
    """Unwarp the plate bounded by ``quad`` into an axis-aligned ``out_w`` x ``out_h`` raster.

    Returns a unit-float raster with the input's channel layout.

    Raises:
        RectificationError: if the quad encloses less than one square pixel, has
            collinear corners or crosses itself.
    """
    if out_w < MIN_RECTIFIED_SIDE or out_h < MIN_RECTIFIED_SIDE:
        raise ImagingError(f"rectified size must be at least {MIN_RECTIFIED_SIDE}px per side")
    if abs(quad.signed_area()) < MIN_QUAD_AREA or not quad.is_simple():
        raise RectificationError(f"degenerate plate quad {quad.points}")
    img = to_unit_float(image)
    return warp_from_quad(img, np.array(quad.points), out_w, out_h)


def canonicalize(image: np.ndarray, target_w: int = DEFAULT_CANONICAL_W,
                 target_h: int = DEFAULT_CANONICAL_H) -> CanonicalImage:
    gray = to_gray(image)
    if gray.shape != (target_h, target_w):
        gray = resize_bilinear(gray, target_w, target_h)
    return CanonicalImage(target_w, target_h, np.clip(gray, 0.0, 1.0))


def parse_size(text: str) -> tuple[int, int]:
    """Parse ``HxW`` into ``(height, width)``."""
    try:
        h, w = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"size must look like HxW, got {text!r}") from None
    if h <= 0 or w <= 0:
        raise ValueError(f"size must be positive, got {text!r}")
    return h, w


def canonical_for_record(path: str | Path, quad: QuadAnnotation | None,
                         width: int, height: int) -> CanonicalImage:
    gray = to_gray(load_image(path))
    if quad is not None:
        gray = rectify(gray, quad, width, height)
    return canonicalize(gray, width, height)


class ManifestImages(Mapping):
    """Lazy id -> CanonicalImage view over a manifest's image files.

    Nothing is cached, so memory stays bounded when callers visit one label
    bucket at a time. Records without a quad are canonicalized from the whole
    image and listed in ``unrectified``.
    """

    def __init__(self, manifest: DatasetManifest, width: int = DEFAULT_CANONICAL_W,
                 height: int = DEFAULT_CANONICAL_H) -> None:
        self.manifest = manifest
        self.width = width
        self.height = height

    @property
    def unrectified(self) -> list[str]:
        return [r.id for r in self.manifest if r.quad is None]

    def __getitem__(self, image_id: str) -> CanonicalImage:
        rec = self.manifest.by_id[image_id]
        try:
            return canonical_for_record(self.manifest.resolve(rec), rec.quad, self.width, self.height)
        except ImagingError as exc:
            raise ImagingError(f"{image_id}: {exc}") from exc

    def __contains__(self, image_id: object) -> bool:
        return image_id in self.manifest.by_id

    def __iter__(self) -> Iterator[str]:
        return iter(self.manifest.ids)

    def __len__(self) -> int:
        return len(self.manifest)
