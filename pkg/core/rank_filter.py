"""Circular-window order-statistic filtering with statistically sized windows."""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy import ndimage as ndi
from skimage.filters import rank

from domain.errors import PreconditionError
from domain.models import INTERVAL_RULES, STATISTICS, RasterImage, WindowPlan, disk_offsets

logger = logging.getLogger(__name__)

# Above this many distinct values the histogram-sliding path stops paying off.
MAX_CODED_VALUES = 1024

_RANK_KERNELS = {"min": rank.minimum, "max": rank.maximum, "median": rank.median}
_SCIPY_KERNELS = {"min": ndi.minimum_filter, "max": ndi.maximum_filter}


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def estimate_intervals(n: int, rule: str) -> int:
    """Number of histogram intervals for ``n`` samples under ``rule``."""
    if n < 1:
        raise PreconditionError("Le nombre de pixels doit être au moins 1.")
    if rule == "sqrt":
        value = math.sqrt(n)
    elif rule == "log5":
        value = 5.0 * math.log10(n)
    elif rule == "sturges":
        value = 1.0 + 3.3 * math.log10(n)
    else:
        raise PreconditionError(f"Règle inconnue: {rule} (attendu: {', '.join(INTERVAL_RULES)})")
    return round_half_up(value)


def plan_window(width: int, height: int, rule: str) -> WindowPlan:
    """Disk window whose area matches the interval count of the image."""
    if width < 1 or height < 1:
        raise PreconditionError(f"Dimensions invalides: {width}×{height}")
    n = width * height
    k = estimate_intervals(n, rule)
    radius = max(1, round_half_up(math.sqrt(k / math.pi)))
    return WindowPlan(n=n, k=k, radius=radius, offsets=disk_offsets(radius), rule=rule)


def extend_borders(img: RasterImage, radius: int) -> RasterImage:
    """Surround ``img`` with a frame of width ``radius`` holding the per-channel mean."""
    if radius < 0:
        raise PreconditionError(f"Rayon négatif: {radius}")
    if radius == 0:
        return img
    means = img.data.mean(axis=(0, 1))
    extended = np.empty((img.height + 2 * radius, img.width + 2 * radius, img.channels))
    extended[:, :] = means
    extended[radius:radius + img.height, radius:radius + img.width] = img.data
    return RasterImage(extended)


def _filter_plane(plane: np.ndarray, footprint: np.ndarray, statistic: str) -> np.ndarray:
    values, codes = np.unique(plane, return_inverse=True)
    if values.size <= MAX_CODED_VALUES:
        codes = codes.reshape(plane.shape).astype(np.uint16)
        return values[_RANK_KERNELS[statistic](codes, footprint=footprint)]
    if statistic == "median":
        return ndi.rank_filter(plane, rank=int(footprint.sum()) // 2, footprint=footprint, mode="nearest")
    return _SCIPY_KERNELS[statistic](plane, footprint=footprint, mode="nearest")


def rank_filter(img: RasterImage, plan: WindowPlan, statistic: str) -> RasterImage:
    """Apply a min, max or median filter over ``plan``'s disk, channel by channel.

    The image is first extended by the window radius with its mean value and
    the frame is cropped off again, so every output pixel sees a full window.
    """
    if statistic not in STATISTICS:
        raise PreconditionError(f"Statistique inconnue: {statistic}")
    radius = plan.radius
    footprint = plan.footprint
    extended = extend_borders(img, radius).data
    output = np.empty_like(img.data)
    for index in range(img.channels):
        filtered = _filter_plane(extended[:, :, index], footprint, statistic)
        output[:, :, index] = filtered[radius:radius + img.height, radius:radius + img.width]
    logger.debug("%s filter, radius %d, %d offsets", statistic, radius, len(plan.offsets))
    return RasterImage(output)
