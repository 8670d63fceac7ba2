"""PNG image and mask I/O plus conversions between 8-bit rasters and latents.

Conventions used across the package:

* images are ``uint8`` arrays of shape ``(H, W, 3)`` (RGB) or ``(H, W, 4)``
  (RGBA, straight alpha);
* masks live on disk as single-channel PNGs with values ``{0, 255}`` where 0
  marks the foreground insertion region; in memory they are ``uint8`` arrays
  of shape ``(H, W)`` with values ``{0, 1}`` where 1 marks known background
  (so a file value of 255 maps to 1);
* latents are ``float64`` arrays of shape ``(C, H, W)`` scaled to [0, 1].
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ParseError

__all__ = [
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
    "latent_from_image",
    "image_from_latent",
]


def load_image(path) -> np.ndarray:
    """Read a PNG as uint8 RGB(A), keeping alpha only when the file has it."""
    with Image.open(path) as img:
        if img.mode in ("RGBA", "LA", "PA"):
            img = img.convert("RGBA")
        else:
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.uint8)


def save_image(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ParseError(f"image must be uint8, got {image.dtype}")
    if image.ndim != 3 or image.shape[2] not in (3, 4):
        raise ParseError(f"image must have shape (H, W, 3|4), got {image.shape}")
    Image.fromarray(image).save(path)


def load_mask(path) -> np.ndarray:
    """Read a {0, 255} mask PNG into the in-memory {0, 1} convention.

    File value 255 (known background) maps to 1; file value 0 (insertion
    region) maps to 0.
    """
    with Image.open(path) as img:
        raw = np.asarray(img.convert("L"), dtype=np.uint8)
    levels = np.unique(raw)
    bad = [int(v) for v in levels if v not in (0, 255)]
    if bad:
        raise ParseError(f"mask {path} must contain only values 0 and 255, found {bad}")
    return (raw // 255).astype(np.uint8)


def save_mask(path, mask: np.ndarray) -> None:
    """Write a {0, 1} mask as a {0, 255} single-channel PNG."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ParseError(f"mask must be 2-D, got shape {mask.shape}")
    values = np.unique(mask)
    bad = [v.item() for v in values if v not in (0, 1)]
    if bad:
        raise ParseError(f"mask values must be 0 or 1, found {bad}")
    Image.fromarray((mask.astype(np.uint8) * 255), mode="L").save(path)


def latent_from_image(image: np.ndarray) -> np.ndarray:
    """uint8 (H, W, 3) -> float64 (3, H, W) in [0, 1]."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ParseError(f"expected an (H, W, 3) image, got shape {image.shape}")
    return np.moveaxis(image, -1, 0).astype(np.float64) / 255.0


def image_from_latent(latent: np.ndarray) -> np.ndarray:
    """float (3, H, W) -> uint8 (H, W, 3), clipping to [0, 1] first."""
    latent = np.asarray(latent, dtype=np.float64)
    if latent.ndim != 3 or latent.shape[0] != 3:
        raise ParseError(f"expected a (3, H, W) latent, got shape {latent.shape}")
    clipped = np.clip(latent, 0.0, 1.0)
    return np.round(clipped * 255.0).astype(np.uint8).transpose(1, 2, 0)
