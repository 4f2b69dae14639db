"""Flat structuring-element morphology on binary masks and grayscale images.

Neighbours outside the image are left out of every min/max, which keeps
``erode(x) <= x <= dilate(x)`` at the borders. Binary masks run through the
same code path as grayscale images, on {0, 1} values.
"""
from __future__ import annotations

import logging
from typing import Callable, Optional, Tuple, TypeVar

import numpy as np
from scipy import ndimage as ndi
from skimage.morphology import reconstruction

from core.raster import negative
from domain.errors import DimensionMismatchError, PreconditionError
from domain.models import BinaryMask, RasterImage, StructuringElement, disk_offsets

logger = logging.getLogger(__name__)

Image = TypeVar("Image", RasterImage, BinaryMask)
PlaneOp = Callable[[np.ndarray, StructuringElement], np.ndarray]


def disk_se(radius: int) -> StructuringElement:
    return StructuringElement(disk_offsets(radius))


def square_se(radius: int = 1) -> StructuringElement:
    """(2r+1)×(2r+1) square; radius 1 gives 8-connectivity."""
    if radius < 0:
        raise PreconditionError(f"Rayon négatif: {radius}")
    span = range(-radius, radius + 1)
    return StructuringElement(tuple((dy, dx) for dy in span for dx in span))


def dilate_array(array: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Minkowski addition of a 2-D array: max of x(p - b) over b in ``se``."""
    return ndi.maximum_filter(
        np.asarray(array, dtype=np.float64),
        footprint=se.footprint[::-1, ::-1],
        mode="constant",
        cval=-np.inf,
    )


def erode_array(array: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Minkowski subtraction of a 2-D array: min of x(p + b) over b in ``se``."""
    return ndi.minimum_filter(
        np.asarray(array, dtype=np.float64),
        footprint=se.footprint,
        mode="constant",
        cval=np.inf,
    )


def _apply(image: Image, se: StructuringElement, op: PlaneOp) -> Image:
    if isinstance(image, BinaryMask):
        return BinaryMask(op(image.bits.astype(np.float64), se) > 0.5)
    planes = [op(image.plane(index), se) for index in range(image.channels)]
    return RasterImage(np.stack(planes, axis=2))


def dilate(image: Image, se: StructuringElement) -> Image:
    return _apply(image, se, dilate_array)


def erode(image: Image, se: StructuringElement) -> Image:
    return _apply(image, se, erode_array)


def opening(image: Image, se: StructuringElement) -> Image:
    """Erosion followed by dilation; removes objects smaller than ``se``."""
    return dilate(erode(image, se), se)


def closing(image: Image, se: StructuringElement) -> Image:
    """Dilation followed by erosion; fills holes smaller than ``se``."""
    return erode(dilate(image, se), se)


def beucher_gradient(image: Image, se: StructuringElement) -> Image:
    dilated, eroded = dilate(image, se), erode(image, se)
    if isinstance(image, BinaryMask):
        return BinaryMask(dilated.bits & ~eroded.bits)
    return RasterImage(np.clip(dilated.data - eroded.data, 0.0, 1.0))


def _check_pair(marker: Image, mask: Image) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(marker, BinaryMask) != isinstance(mask, BinaryMask):
        raise PreconditionError("Le marqueur et le masque doivent être de même type.")
    if isinstance(marker, BinaryMask):
        seed, limit = marker.bits[:, :, np.newaxis], mask.bits[:, :, np.newaxis]
    else:
        seed, limit = marker.data, mask.data
    if seed.shape != limit.shape:
        raise DimensionMismatchError("reconstruct", seed.shape, limit.shape)
    if np.any(seed > limit):
        raise PreconditionError("Le marqueur dépasse le masque.")
    return seed.astype(np.float64), limit.astype(np.float64)


def _wrap(template: Image, data: np.ndarray) -> Image:
    if isinstance(template, BinaryMask):
        return BinaryMask(data[:, :, 0] > 0.5)
    return RasterImage(data)


def reconstruct(marker: Image, mask: Image, se: Optional[StructuringElement] = None) -> Image:
    """Reconstruction by dilation of ``marker`` under ``mask``.

    Queue based; equal to iterating geodesic dilations to stability. The
    structuring element defaults to the 3×3 square.
    """
    seed, limit = _check_pair(marker, mask)
    footprint = (se or square_se(1)).footprint[::-1, ::-1]
    planes = [
        reconstruction(seed[:, :, index], limit[:, :, index], method="dilation", footprint=footprint)
        for index in range(seed.shape[2])
    ]
    return _wrap(marker, np.stack(planes, axis=2))


def reconstruct_iterative(
    marker: Image, mask: Image, se: Optional[StructuringElement] = None
) -> Tuple[Image, int]:
    """Iterate ρ ← min(dilate(ρ), mask) from the marker until ρ stops changing.

    Returns the fixed point and the number of iterations performed,
    including the final one that detected stability.
    """
    seed, limit = _check_pair(marker, mask)
    se = se or square_se(1)
    current = seed
    iterations = 0
    while True:
        iterations += 1
        grown = np.stack(
            [dilate_array(current[:, :, index], se) for index in range(current.shape[2])], axis=2
        )
        following = np.minimum(grown, limit)
        if np.array_equal(following, current):
            logger.debug("Reconstruction stable after %d iterations", iterations)
            return _wrap(marker, following), iterations
        current = following


def open_by_reconstruction(
    image: RasterImage,
    se: StructuringElement,
    connectivity: Optional[StructuringElement] = None,
) -> RasterImage:
    """Erode by ``se`` then reconstruct under the image.

    Bright features that cannot hold ``se`` disappear while surviving shapes
    keep their exact outline. ``connectivity`` drives the reconstruction and
    defaults to the 3×3 square.
    """
    return reconstruct(erode(image, se), image, connectivity)


def close_by_reconstruction(
    image: RasterImage,
    se: StructuringElement,
    connectivity: Optional[StructuringElement] = None,
) -> RasterImage:
    return negative(open_by_reconstruction(negative(image), se, connectivity))
