"""Detail-emphasis transforms applied between filtering and thresholding."""
from __future__ import annotations

import math

import numpy as np

from core.raster import EPSILON
from domain.errors import ChannelCountError, PreconditionError
from domain.models import EMPHASES, RasterImage

LOG_SHIFT = EPSILON
# Value of the raw log curve at p = 0, its analytic maximum on [0, 1].
LOG_PEAK = math.sqrt(math.log10(1.0 / LOG_SHIFT))


def emphasize_prod(img: RasterImage) -> RasterImage:
    """Multiply the three channels into one grayscale image."""
    if img.channels != 3:
        raise ChannelCountError("emphasize_prod", 3, img.channels)
    return RasterImage(img.plane(0) * img.plane(1) * img.plane(2))


def emphasize_square(img: RasterImage) -> RasterImage:
    return RasterImage(img.data * img.data)


def log_curve(values: np.ndarray) -> np.ndarray:
    """Raw curve √|log₁₀(p + 1/512)|, before rescaling."""
    return np.sqrt(np.abs(np.log10(np.asarray(values, dtype=np.float64) + LOG_SHIFT)))


def emphasize_log(img: RasterImage) -> RasterImage:
    """Log emphasis rescaled by its value at 0 so that the output stays in [0,1].

    Dark pixels map bright. Just below 1 the log argument crosses 1 and the
    absolute value folds the curve back up slightly.
    """
    return RasterImage(np.clip(log_curve(img.data) / LOG_PEAK, 0.0, 1.0))


def emphasize(img: RasterImage, kind: str) -> RasterImage:
    if kind == "prod":
        return emphasize_prod(img)
    if kind == "square":
        return emphasize_square(img)
    if kind == "log":
        return emphasize_log(img)
    raise PreconditionError(f"Accentuation inconnue: {kind} (attendu: {', '.join(EMPHASES)})")
