"""Masked watershed, small-object clearance, region adjacency and BCR merging.

Regions and connected components use 8-connectivity. Watershed lines are
then 4-connected: two different basins are never 8-adjacent.
"""
from __future__ import annotations

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage as ndi
from scipy.ndimage import gaussian_filter1d
from skimage.measure import label as label_components
from skimage.morphology import reconstruction
from skimage.segmentation import relabel_sequential
from skimage.segmentation import watershed as flood

from core.morphology import beucher_gradient, dilate, dilate_array, disk_se, erode_array
from core.raster import LEVELS, quantize
from domain.errors import (
    ChannelCountError,
    DimensionMismatchError,
    PreconditionError,
    UnknownLabelError,
)
from domain.models import BcrReport, BinaryMask, Contour, LabelMap, RasterImage, StructuringElement

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]
Window = Tuple[slice, slice]

# Moore neighbourhood, clockwise on screen (y grows downwards), starting west.
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_DIRECTION = {offset: index for index, offset in enumerate(_MOORE)}
_MIN_CURVATURE_POINTS = 5


def apply_mask(img: RasterImage, mask: BinaryMask) -> RasterImage:
    if img.shape != mask.shape:
        raise DimensionMismatchError("apply_mask", img.shape, mask.shape)
    return RasterImage(img.data * mask.bits[:, :, np.newaxis])


def connected_components(mask: BinaryMask) -> LabelMap:
    labels = label_components(mask.bits, connectivity=2)
    return LabelMap(labels, region_count=int(labels.max()) if labels.size else 0)


def _regional_minima(surface: np.ndarray) -> np.ndarray:
    # For integer levels, raising every pixel by one and reconstructing by
    # erosion lifts exactly the regional minima.
    lifted = reconstruction(surface + 1.0, surface, method="erosion", footprint=np.ones((3, 3)))
    return (lifted - surface) >= 1.0


def watershed(img: RasterImage, mask: Optional[BinaryMask] = None) -> LabelMap:
    """Flood ``img`` from its regional minima, restricted to ``mask`` when given.

    Intensities are quantized to 256 levels. Pixels reached by two basins
    become watershed lines (label 0), as do pixels outside the mask. A pixel
    claimed by two basins at the same level is therefore never handed to the
    lowest basin label; it stays on the line, which is what the BCR merge
    later absorbs.
    """
    if img.channels != 1:
        raise ChannelCountError("watershed", 1, img.channels)
    if mask is not None and mask.shape != img.shape:
        raise DimensionMismatchError("watershed", img.shape, mask.shape)
    region = np.ones(img.shape, dtype=bool) if mask is None else mask.bits
    if not region.any():
        logger.debug("Empty watershed mask")
        return LabelMap(np.zeros(img.shape, dtype=np.int32), region_count=0)

    surface = np.where(region, quantize(img.plane()), LEVELS).astype(np.float64)
    markers = label_components(_regional_minima(surface) & region, connectivity=2)
    labels = flood(surface, markers=markers, connectivity=2, mask=region, watershed_line=True)
    logger.debug("Watershed produced %d basins", int(markers.max()))
    return LabelMap(labels, region_count=int(markers.max()))


def _keep_above_mean(labels: np.ndarray) -> np.ndarray:
    sizes = np.bincount(labels.ravel())[1:]
    if sizes.size == 0:
        return np.zeros(labels.shape, dtype=bool)
    keep = np.concatenate(([False], sizes >= sizes.mean()))
    return keep[labels]


def clear_small_objects(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Drop noise from a binary mask.

    Boundary lines (Beucher gradient components) shorter than the mean line
    and dilated objects smaller than the mean area are deleted; the kept
    lines are then subtracted from the kept dilation.
    """
    if not mask.bits.any():
        return mask
    lines = _keep_above_mean(label_components(beucher_gradient(mask, se).bits, connectivity=2))
    objects = _keep_above_mean(label_components(dilate(mask, se).bits, connectivity=2))
    return BinaryMask(objects & ~lines)


def _check_labels(lmap: LabelMap, *labels: int) -> None:
    for label in labels:
        if label <= 0:
            raise PreconditionError(f"Étiquette de région invalide: {label}")
        if not np.any(lmap.labels == label):
            raise UnknownLabelError(label)


def _check_pair(lmap: LabelMap, u: int, v: int) -> None:
    if u == v:
        raise PreconditionError("Une région ne peut être comparée à elle-même.")
    _check_labels(lmap, u, v)


def adjacency(lmap: LabelMap, u: int, v: int, se: Optional[StructuringElement] = None) -> bool:
    """True when the dilations of regions ``u`` and ``v`` intersect."""
    _check_pair(lmap, u, v)
    se = se or disk_se(1)
    grown_u = dilate_array(lmap.region(u), se) > 0.5
    grown_v = dilate_array(lmap.region(v), se) > 0.5
    return bool(np.any(grown_u & grown_v))


def _adjacent_pairs(labels: np.ndarray, se: StructuringElement) -> List[Pair]:
    # Dilations of p and q meet iff q - p lies in SE ⊕ (-SE).
    height, width = labels.shape
    reach = {(ay - by, ax - bx) for ay, ax in se.offsets for by, bx in se.offsets}
    found = []
    for dy, dx in sorted(reach):
        if dy < 0 or (dy == 0 and dx <= 0):
            continue
        y0, y1 = max(0, -dy), height - max(0, dy)
        x0, x1 = max(0, -dx), width - max(0, dx)
        if y0 >= y1 or x0 >= x1:
            continue
        here = labels[y0:y1, x0:x1]
        there = labels[y0 + dy:y1 + dy, x0 + dx:x1 + dx]
        hit = (here != there) & (here > 0) & (there > 0)
        if hit.any():
            found.append(np.stack([np.minimum(here[hit], there[hit]), np.maximum(here[hit], there[hit])], axis=1))
    if not found:
        return []
    return [(int(u), int(v)) for u, v in np.unique(np.concatenate(found), axis=0)]


def region_adjacency(lmap: LabelMap, se: Optional[StructuringElement] = None) -> List[Pair]:
    """All adjacent label pairs (u < v), using the same predicate as :func:`adjacency`."""
    return _adjacent_pairs(lmap.labels, se or disk_se(1))


def label_boundaries(lmap: LabelMap, se: Optional[StructuringElement] = None) -> BinaryMask:
    """Pixels where the Beucher gradient of the label map is nonzero."""
    se = se or disk_se(1)
    return BinaryMask(dilate_array(lmap.labels, se) != erode_array(lmap.labels, se))


def _next_step(cells: List[List[bool]], current: Tuple[int, int], back: int):
    y, x = current
    for turn in range(1, 9):
        direction = (back + turn) % 8
        dy, dx = _MOORE[direction]
        if cells[y + dy][x + dx]:
            py, px = _MOORE[(direction - 1) % 8]
            return (y + dy, x + dx), _DIRECTION[(py - dy, px - dx)]
    return None


def trace_region(region: np.ndarray) -> Contour:
    """Moore-neighbour walk around the outer boundary of a boolean region.

    Tracing starts at the first pixel in raster order and stops when the
    first move is about to repeat. The component holding that pixel is traced.
    """
    ys, xs = np.nonzero(region)
    if ys.size == 0:
        raise PreconditionError("Région vide: aucun contour à suivre.")
    top, left = int(ys.min()), int(xs.min())
    bottom, right = int(ys.max()), int(xs.max())
    grid = np.zeros((bottom - top + 3, right - left + 3), dtype=bool)
    grid[1:-1, 1:-1] = region[top:bottom + 1, left:right + 1]
    cells = grid.tolist()

    start = (int(ys[0]) - top + 1, int(xs[0]) - left + 1)
    points = [start]
    current, back = start, 0
    first_move = None
    for _ in range(4 * ys.size + 8):
        step = _next_step(cells, current, back)
        if step is None:
            break
        following, next_back = step
        move = (current, following)
        if first_move is None:
            first_move = move
        elif move == first_move:
            break
        points.append(following)
        current, back = following, next_back
    else:
        logger.warning("Contour tracing stopped by its iteration guard")
    if len(points) > 1 and points[-1] == points[0]:
        points.pop()
    return Contour(np.asarray(points) + (top - 1, left - 1))


def trace_contour(lmap: LabelMap, u: int) -> Contour:
    _check_labels(lmap, u)
    return trace_region(lmap.region(u))


def curvature(contour: Contour, sigma: float = 0.0) -> np.ndarray:
    """Per-point curvature k = (x'y'' − x''y') / (x'² + y'²)^1.5 on a closed contour.

    First and second derivatives are cyclic central differences. A positive
    ``sigma`` smooths the coordinates with a circular Gaussian first. Points
    where both first derivatives vanish get 0; contours shorter than five
    points return an empty array.
    """
    count = len(contour)
    if count < _MIN_CURVATURE_POINTS:
        return np.empty(0)
    y = contour.points[:, 0].astype(np.float64)
    x = contour.points[:, 1].astype(np.float64)
    if sigma > 0:
        x = gaussian_filter1d(x, sigma, mode="wrap")
        y = gaussian_filter1d(y, sigma, mode="wrap")
    dx = (np.roll(x, -1) - np.roll(x, 1)) / 2.0
    dy = (np.roll(y, -1) - np.roll(y, 1)) / 2.0
    ddx = (np.roll(dx, -1) - np.roll(dx, 1)) / 2.0
    ddy = (np.roll(dy, -1) - np.roll(dy, 1)) / 2.0
    numerator = dx * ddy - ddx * dy
    denominator = (dx * dx + dy * dy) ** 1.5
    return np.divide(numerator, denominator, out=np.zeros(count), where=denominator > 0)


def _pair_window(boxes: Sequence, u: int, v: int, pad: int, shape: Tuple[int, int]) -> Window:
    box_u, box_v = boxes[u - 1], boxes[v - 1]
    y0 = max(min(box_u[0].start, box_v[0].start) - pad, 0)
    y1 = min(max(box_u[0].stop, box_v[0].stop) + pad, shape[0])
    x0 = max(min(box_u[1].start, box_v[1].start) - pad, 0)
    x1 = min(max(box_u[1].stop, box_v[1].stop) + pad, shape[1])
    return slice(y0, y1), slice(x0, x1)


def _merged_region(crop: np.ndarray, u: int, v: int, se: StructuringElement) -> np.ndarray:
    region_u, region_v = crop == u, crop == v
    shared = (dilate_array(region_u, se) > 0.5) & (dilate_array(region_v, se) > 0.5)
    return region_u | region_v | ((crop == 0) & shared)


def _bcr_ratio(merged: np.ndarray, first: np.ndarray, second: np.ndarray, absolute: bool) -> Tuple[float, float, float]:
    if min(merged.size, first.size, second.size) == 0:
        return math.inf, math.nan, math.nan
    if absolute:
        merged, first, second = np.abs(merged), np.abs(first), np.abs(second)
    merged_mean = float(merged.mean())
    separate_mean = float((first.sum() + second.sum()) / (first.size + second.size))
    if separate_mean <= 0:
        return math.inf, merged_mean, separate_mean
    ratio = merged_mean / separate_mean
    return (ratio if ratio >= 0 else math.inf), merged_mean, separate_mean


def _pair_report(
    labels: np.ndarray,
    u: int,
    v: int,
    window: Window,
    se: StructuringElement,
    absolute: bool,
    sigma: float,
) -> BcrReport:
    crop = labels[window]
    merged = curvature(trace_region(_merged_region(crop, u, v, se)), sigma)
    first = curvature(trace_region(crop == u), sigma)
    second = curvature(trace_region(crop == v), sigma)
    ratio, merged_mean, separate_mean = _bcr_ratio(merged, first, second, absolute)
    return BcrReport(
        region_u=u,
        region_v=v,
        bcr=ratio,
        merged_curvature_mean=merged_mean,
        separate_curvature_mean=separate_mean,
    )


def bcr(
    lmap: LabelMap,
    u: int,
    v: int,
    absolute: bool = True,
    sigma: float = 0.0,
    se: Optional[StructuringElement] = None,
) -> BcrReport:
    """Boundary curvature ratio of merging regions ``u`` and ``v``.

    The numerator is the mean curvature over the contour of u ∪ v, with the
    unlabelled pixels shared by both dilations absorbed; the denominator pools
    the curvatures of both separate contours. A contour too short for
    curvature yields an infinite ratio, which forbids the merge.
    """
    se = se or disk_se(1)
    if not adjacency(lmap, u, v, se):
        raise PreconditionError(f"Les régions {u} et {v} ne sont pas adjacentes.")
    boxes = ndi.find_objects(lmap.labels)
    window = _pair_window(boxes, u, v, se.radius + 1, lmap.shape)
    return _pair_report(lmap.labels, u, v, window, se, absolute, sigma)


def merge_by_bcr(
    lmap: LabelMap,
    threshold: float = 1.0,
    absolute: bool = True,
    sigma: float = 0.0,
    se: Optional[StructuringElement] = None,
) -> LabelMap:
    """Greedily merge adjacent regions, lowest BCR first, while BCR < ``threshold``.

    The lower label survives and absorbs the separating watershed line.
    Reports are cached and dropped only for pairs touching the merged
    regions or their neighbours. Labels are renumbered 1..n at the end.
    """
    se = se or disk_se(1)
    pad = se.radius + 1
    labels = np.array(lmap.labels, dtype=np.int32)
    cache: Dict[Pair, BcrReport] = {}
    merges = 0
    while True:
        pairs = _adjacent_pairs(labels, se)
        boxes = ndi.find_objects(labels)
        best: Optional[BcrReport] = None
        for u, v in pairs:
            report = cache.get((u, v))
            if report is None:
                window = _pair_window(boxes, u, v, pad, labels.shape)
                report = _pair_report(labels, u, v, window, se, absolute, sigma)
                cache[(u, v)] = report
            if report.bcr >= threshold:
                continue
            if best is None or (report.bcr, u, v) < (best.bcr, best.region_u, best.region_v):
                best = report
        if best is None:
            break

        u, v = best.region_u, best.region_v
        window = _pair_window(boxes, u, v, pad, labels.shape)
        crop = labels[window]
        crop[_merged_region(crop, u, v, se)] = u
        touched = {label for pair in pairs if u in pair or v in pair for label in pair}
        cache = {pair: report for pair, report in cache.items() if not touched.intersection(pair)}
        merges += 1
        logger.debug("Merged region %d into %d (bcr %.3f)", v, u, best.bcr)

    relabelled, _, _ = relabel_sequential(labels)
    result = LabelMap(relabelled)
    logger.debug("%d merges, %d regions remain", merges, result.region_count)
    return result
