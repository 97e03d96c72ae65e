"""Photometric and geometric augmentation for plate rasters.

Transforms run in a fixed order: perspective, shadow, HSV, noise. Every
parameter is drawn from the caller's generator in that order, whether or not
the drawn value turns the transform into a no-op, so a given seed always
consumes the same stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fairsplit.errors import ConfigError
from fairsplit.imaging import to_unit_float, warp_from_quad

MAX_PERSPECTIVE = 0.15
MAX_NOISE_SIGMA = 0.1
MAX_SHADOW_OPACITY = 0.6
MAX_HUE = 0.05
MAX_SATURATION = 0.3
MAX_VALUE = 0.3


@dataclass(frozen=True)
class AugmentConfig:
    """Parameter ranges.

    ``perspective`` is the maximum corner displacement as a fraction of the
    image side. ``hue``/``saturation``/``value`` are maximum absolute additive
    deltas in HSV space (hue in turns). Opacity and sigma are ``(low, high)``.
    """

    perspective: float = 0.06
    shadow_opacity: tuple[float, float] = (0.0, 0.4)
    hue: float = 0.03
    saturation: float = 0.2
    value: float = 0.2
    noise_sigma: tuple[float, float] = (0.0, 0.03)

    def __post_init__(self) -> None:
        def check(name: str, lo: float, hi: float, limit: float) -> None:
            if not (0.0 <= lo <= hi <= limit):
                raise ConfigError(f"{name} range ({lo}, {hi}) must lie within [0, {limit}]")

        check("perspective", 0.0, self.perspective, MAX_PERSPECTIVE)
        check("shadow_opacity", *self.shadow_opacity, MAX_SHADOW_OPACITY)
        check("hue", 0.0, self.hue, MAX_HUE)
        check("saturation", 0.0, self.saturation, MAX_SATURATION)
        check("value", 0.0, self.value, MAX_VALUE)
        check("noise_sigma", *self.noise_sigma, MAX_NOISE_SIGMA)

    @classmethod
    def identity(cls) -> "AugmentConfig":
        return cls(0.0, (0.0, 0.0), 0.0, 0.0, 0.0, (0.0, 0.0))

    @classmethod
    def noise_only(cls, sigma: float) -> "AugmentConfig":
        return cls(0.0, (0.0, 0.0), 0.0, 0.0, 0.0, (sigma, sigma))


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    safe = np.where(delta > 0, delta, 1.0)
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, maxc], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(int) % 6
    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    r = np.choose(i, choices_r)
    g = np.choose(i, choices_g)
    b = np.choose(i, choices_b)
    return np.stack([r, g, b], axis=-1)


def _perspective(img: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig):
    h, w = img.shape[:2]
    jitter = rng.uniform(-cfg.perspective, cfg.perspective, size=(4, 2))
    rect = np.array([[0, 0], [w, 0], [w, h], [0, h]], dtype=np.float64)
    corners = rect + jitter * np.array([w, h])
    log = {"name": "perspective", "corners": corners.round(6).tolist()}
    if not np.any(jitter):
        return img, log
    return warp_from_quad(img, corners, w, h), log


def _shadow(img: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig):
    h, w = img.shape[:2]
    angle = float(rng.uniform(0.0, 2.0 * math.pi))
    offset = float(rng.uniform(-0.5, 0.5))
    opacity = float(rng.uniform(*cfg.shadow_opacity))
    log = {"name": "shadow", "angle": round(angle, 6), "offset": round(offset, 6), "opacity": round(opacity, 6)}
    if opacity == 0.0:
        return img, log
    ys, xs = np.mgrid[0:h, 0:w]
    side = ((xs + 0.5) / w - 0.5) * math.cos(angle) + ((ys + 0.5) / h - 0.5) * math.sin(angle) > offset
    factor = np.where(side, 1.0 - opacity, 1.0)
    if img.ndim == 3:
        factor = factor[..., None]
    return img * factor, log


def _hsv(img: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig):
    dh = float(rng.uniform(-cfg.hue, cfg.hue))
    ds = float(rng.uniform(-cfg.saturation, cfg.saturation))
    dv = float(rng.uniform(-cfg.value, cfg.value))
    log = {"name": "hsv", "hue": round(dh, 6), "saturation": round(ds, 6), "value": round(dv, 6)}
    if img.ndim == 2 or img.shape[2] < 3:
        return (np.clip(img + dv, 0.0, 1.0) if dv else img), log
    if dh == 0.0 and ds == 0.0 and dv == 0.0:
        return img, log
    hsv = rgb_to_hsv(img[..., :3])
    hsv[..., 0] = (hsv[..., 0] + dh) % 1.0
    hsv[..., 1] = np.clip(hsv[..., 1] + ds, 0.0, 1.0)
    hsv[..., 2] = np.clip(hsv[..., 2] + dv, 0.0, 1.0)
    out = img.copy()
    out[..., :3] = hsv_to_rgb(hsv)
    return out, log


def _noise(img: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig):
    sigma = float(rng.uniform(*cfg.noise_sigma))
    log = {"name": "noise", "sigma": round(sigma, 6)}
    if sigma == 0.0:
        return img, log
    return img + rng.normal(0.0, sigma, size=img.shape), log


def augment(image: np.ndarray, rng: np.random.Generator,
            config: AugmentConfig | None = None) -> tuple[np.ndarray, list[dict]]:
    """Apply perspective, shadow, HSV and noise with parameters drawn from ``rng``.

    Returns a unit-float raster of the input's shape, clamped to [0, 1], and
    the list of applied transforms with their parameters.
    """
    config = config or AugmentConfig()
    img = to_unit_float(image)
    log = []
    for step in (_perspective, _shadow, _hsv, _noise):
        img, entry = step(img, rng, config)
        log.append(entry)
    return np.clip(img, 0.0, 1.0), log


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
