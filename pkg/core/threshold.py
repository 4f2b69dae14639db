"""Otsu threshold selection and combination of per-channel binary masks."""
from __future__ import annotations

import logging

import numpy as np

from core.raster import LEVELS, histogram, quantize
from domain.errors import ChannelCountError, DimensionMismatchError, PreconditionError
from domain.models import COMBINE_RULES, BinaryMask, Histogram, OtsuStats, RasterImage

logger = logging.getLogger(__name__)


def otsu(hist: Histogram) -> OtsuStats:
    """Return the level k* maximizing the between-class variance σ_B².

    Candidates are compared exactly on integer counts: for a split with c1,
    c2 pixels and level sums s1, s2, σ_B² = (s1·c2 − s2·c1)² / (N²·c1·c2).
    Candidates with an empty class are skipped and ties keep the smallest k.
    """
    total = hist.total
    if total < 1:
        raise PreconditionError("Histogramme vide.")
    bins = [int(count) for count in hist.bins]
    level_sum = sum(level * count for level, count in enumerate(bins))

    best = None
    c1 = s1 = 0
    for k in range(LEVELS - 1):
        c1 += bins[k]
        s1 += k * bins[k]
        c2 = total - c1
        if c1 == 0 or c2 == 0:
            continue
        numerator = (s1 * c2 - (level_sum - s1) * c1) ** 2
        denominator = c1 * c2
        if best is None or numerator * best[2] > best[1] * denominator:
            best = (k, numerator, denominator, c1, s1)

    mu_t = level_sum / total
    if best is None:
        level = int(np.flatnonzero(hist.bins)[0])
        logger.debug("Degenerate histogram, all %d pixels at level %d", total, level)
        return OtsuStats(
            level=level, sigma_b=0.0, omega1=1.0, omega2=0.0,
            mu1=float(level), mu2=0.0, mu_t=mu_t, degenerate=True,
        )

    k, numerator, denominator, c1, s1 = best
    c2 = total - c1
    return OtsuStats(
        level=k,
        sigma_b=numerator / (total * total * denominator),
        omega1=c1 / total,
        omega2=c2 / total,
        mu1=s1 / c1,
        mu2=(level_sum - s1) / c2,
        mu_t=mu_t,
    )


def apply_threshold(img: RasterImage, level: int) -> BinaryMask:
    """Mark pixels whose quantized level is strictly above ``level``."""
    if img.channels != 1:
        raise ChannelCountError("apply_threshold", 1, img.channels)
    if not 0 <= level <= LEVELS - 1:
        raise PreconditionError(f"Seuil hors de [0, 255]: {level}")
    return BinaryMask(quantize(img.plane()) > level)


def otsu_threshold(img: RasterImage) -> int:
    return otsu(histogram(img)).level


def combine_channels(m1: BinaryMask, m2: BinaryMask, m3: BinaryMask, rule: str = "halfway") -> BinaryMask:
    """strict keeps pixels set in all masks, patient in any, halfway in at least two."""
    for other in (m2, m3):
        if other.shape != m1.shape:
            raise DimensionMismatchError("combine_channels", m1.shape, other.shape)
    votes = m1.bits.astype(np.int8) + m2.bits.astype(np.int8) + m3.bits.astype(np.int8)
    if rule == "strict":
        return BinaryMask(votes == 3)
    if rule == "patient":
        return BinaryMask(votes > 0)
    if rule == "halfway":
        return BinaryMask(votes > 1)
    raise PreconditionError(f"Règle de combinaison inconnue: {rule} (attendu: {', '.join(COMBINE_RULES)})")
