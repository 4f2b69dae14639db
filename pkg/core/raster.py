"""Grayscale conversions, histograms, negation and pixelwise comparison."""
from __future__ import annotations

from typing import Tuple

import numpy as np

from domain.errors import ChannelCountError, DimensionMismatchError, PreconditionError
from domain.models import COMPARE_MODES, GRAY_MODES, STATISTICS, BinaryMask, Histogram, RasterImage

# Small constant shared by the rate guard and the log emphasis.
EPSILON = 1.0 / 512.0
LEVELS = 256


def quantize(values: np.ndarray) -> np.ndarray:
    """Map intensities in [0,1] to integer levels ⌊i·255 + 0.5⌋."""
    return np.floor(np.asarray(values, dtype=np.float64) * 255.0 + 0.5).astype(np.int64)


def _require_channels(img: RasterImage, expected: int, operation: str) -> None:
    if img.channels != expected:
        raise ChannelCountError(operation, expected, img.channels)


def to_gray(img: RasterImage, mode: str = "Y1") -> RasterImage:
    """Collapse an RGB image to one channel.

    Y1 weights the primaries by eye sensitivity, Y2 averages them and Y3 is
    the self-weighted mean (r²+g²+b²)/(r+g+b), defined as 0 on black pixels.
    """
    _require_channels(img, 3, "to_gray")
    r, g, b = img.plane(0), img.plane(1), img.plane(2)
    if mode == "Y1":
        gray = 0.3 * r + 0.59 * g + 0.11 * b
    elif mode == "Y2":
        gray = (r + g + b) / 3.0
    elif mode == "Y3":
        total = r + g + b
        squares = r * r + g * g + b * b
        gray = np.divide(squares, total, out=np.zeros_like(total), where=total > 0)
    else:
        raise PreconditionError(f"Mode de gris inconnu: {mode} (attendu: {', '.join(GRAY_MODES)})")
    return RasterImage.from_array(gray)


def split_channels(img: RasterImage) -> Tuple[RasterImage, RasterImage, RasterImage]:
    _require_channels(img, 3, "split_channels")
    return img.channel(0), img.channel(1), img.channel(2)


def merge_channels(first: RasterImage, second: RasterImage, third: RasterImage) -> RasterImage:
    parts = (first, second, third)
    for part in parts:
        _require_channels(part, 1, "merge_channels")
        if part.shape != first.shape:
            raise DimensionMismatchError("merge_channels", first.shape, part.shape)
    return RasterImage(np.stack([part.plane() for part in parts], axis=2))


def histogram(img: RasterImage) -> Histogram:
    _require_channels(img, 1, "histogram")
    counts = np.bincount(quantize(img.plane()).ravel(), minlength=LEVELS)
    return Histogram(bins=counts, total=img.width * img.height)


def negative(img: RasterImage) -> RasterImage:
    return RasterImage(1.0 - img.data)


def invert_mask(mask: BinaryMask) -> BinaryMask:
    return BinaryMask(~mask.bits)


def compare(
    original: RasterImage,
    filtered: RasterImage,
    filter_kind: str,
    mode: str = "rate",
) -> RasterImage:
    """Relate an image to its rank-filtered version.

    The orientation depends on the filter: a minimum filter never exceeds
    the original, a maximum filter never falls below it, and the median is
    oriented like the maximum for rates and like the minimum for differences.
    """
    if original.data.shape != filtered.data.shape:
        raise DimensionMismatchError("compare", original.data.shape, filtered.data.shape)
    if filter_kind not in STATISTICS:
        raise PreconditionError(f"Filtre inconnu: {filter_kind}")
    if mode not in COMPARE_MODES:
        raise PreconditionError(f"Mode de comparaison inconnu: {mode}")

    x, f = original.data, filtered.data
    if mode == "rate":
        numerator, denominator = (f, x) if filter_kind == "min" else (x, f)
        result = numerator / np.maximum(denominator, EPSILON)
    elif filter_kind == "max":
        result = f - x
    else:
        result = x - f
    return RasterImage(np.clip(result, 0.0, 1.0))
