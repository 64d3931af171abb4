"""sRGB/linear conversion and 8-bit image IO helpers."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image


def srgb_to_linear(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1 / 2.4) - 0.055)


def load_image(path_or_bytes) -> np.ndarray:
    """Decode an 8-bit image to float [0,1]; keeps an alpha channel if present."""
    if isinstance(path_or_bytes, (bytes, bytearray)):
        img = Image.open(io.BytesIO(path_or_bytes))
    else:
        img = Image.open(path_or_bytes)
    if img.mode not in ("RGB", "RGBA"):
        img = img.convert("RGBA" if "A" in img.mode or "P" in img.mode else "RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def save_png(path, rgb01: np.ndarray) -> None:
    arr = np.clip(np.asarray(rgb01), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8)).save(path, format="PNG")


def encode_png(rgb01: np.ndarray) -> bytes:
    arr = np.clip(np.asarray(rgb01), 0.0, 1.0)
    buf = io.BytesIO()
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def tonemap(linear_rgb: np.ndarray) -> np.ndarray:
    """Display transform: clamp + sRGB encode."""
    return linear_to_srgb(np.clip(linear_rgb, 0.0, 1.0))
