"""Seeded synthetic micrographs with ground-truth labels."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from domain.errors import PlacementError
from domain.models import LabelMap, RasterImage, SyntheticSpec

logger = logging.getLogger(__name__)

# Inside a cell the darkening runs from CORE at the centre to 1 at the rim.
_CORE_SHARE = 0.55


@dataclass(frozen=True)
class _Shape:
    cy: float
    cx: float
    major: float
    minor: float
    angle: float

    @property
    def reach(self) -> float:
        return self.major


def _draw_shape(rng: np.random.Generator, spec: SyntheticSpec, elongated: bool) -> Tuple[float, float, float]:
    if elongated:
        major = rng.uniform(*spec.blob_major)
        minor = rng.uniform(*spec.blob_minor)
        return major, min(minor, major), rng.uniform(0.0, math.pi)
    radius = rng.uniform(*spec.disk_radius)
    return radius, radius, 0.0


def _place(rng: np.random.Generator, spec: SyntheticSpec, placed: List[_Shape], elongated: bool) -> _Shape:
    for _ in range(spec.max_attempts):
        major, minor, angle = _draw_shape(rng, spec, elongated)
        margin = major + 2.0 * spec.halo_width + 1.0
        if spec.height <= 2 * margin or spec.width <= 2 * margin:
            continue
        shape = _Shape(
            cy=rng.uniform(margin, spec.height - margin),
            cx=rng.uniform(margin, spec.width - margin),
            major=major,
            minor=minor,
            angle=angle,
        )
        clearance = 2.0 * spec.halo_width + spec.gap
        if all(
            math.hypot(shape.cy - other.cy, shape.cx - other.cx) >= shape.reach + other.reach + clearance
            for other in placed
        ):
            return shape
    raise PlacementError(
        f"Impossible de placer la forme {len(placed) + 1} en {spec.max_attempts} essais."
    )


def _render(shape: _Shape, spec: SyntheticSpec, factor: np.ndarray, truth: np.ndarray, label: int) -> None:
    extent = int(math.ceil(shape.major + 3.0 * spec.halo_width)) + 1
    y0, y1 = max(int(shape.cy) - extent, 0), min(int(shape.cy) + extent + 1, factor.shape[0])
    x0, x1 = max(int(shape.cx) - extent, 0), min(int(shape.cx) + extent + 1, factor.shape[1])
    yy, xx = np.mgrid[y0:y1, x0:x1].astype(np.float64)
    dy, dx = yy - shape.cy, xx - shape.cx
    cos, sin = math.cos(shape.angle), math.sin(shape.angle)
    along = (dx * cos + dy * sin) / shape.major
    across = (-dx * sin + dy * cos) / shape.minor
    distance = np.hypot(along, across)

    inside = distance <= 1.0
    truth[y0:y1, x0:x1][inside] = label
    depth = spec.cell_depth * (_CORE_SHARE + (1.0 - _CORE_SHARE) * distance ** 2)
    factor[y0:y1, x0:x1][inside] *= 1.0 - depth[inside]

    # First-order pixel distance to the ellipse outline.
    slope = np.hypot(along / shape.major, across / shape.minor) / np.maximum(distance, 1e-9)
    gap = (distance - 1.0) / np.maximum(slope, 1e-9)
    ring = (~inside) & (gap <= 3.0 * spec.halo_width)
    factor[y0:y1, x0:x1][ring] *= 1.0 + spec.halo_gain * np.exp(-((gap[ring] / spec.halo_width) ** 2))


def _sprinkle_specks(rng: np.random.Generator, spec: SyntheticSpec, factor: np.ndarray, truth: np.ndarray) -> None:
    count = int(rng.poisson(spec.speck_density * spec.width * spec.height))
    for _ in range(count):
        size = int(rng.integers(1, 3))
        y = int(rng.integers(0, spec.height - size + 1))
        x = int(rng.integers(0, spec.width - size + 1))
        if truth[max(y - 3, 0):y + size + 3, max(x - 3, 0):x + size + 3].any():
            continue
        factor[y:y + size, x:x + size] *= 1.0 - spec.speck_depth


def generate_synthetic(seed: int, spec: Optional[SyntheticSpec] = None) -> Tuple[RasterImage, LabelMap]:
    """Render dark cells with bright halos on an unevenly lit background.

    Disks come first and carry labels 1..disks, elongated blobs follow. The
    image is quantized to the 8-bit grid, so writing it to a PPM file and
    reading it back is lossless.
    """
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(seed)
    height, width = spec.height, spec.width

    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    angle = rng.uniform(0.0, 2.0 * math.pi)
    ramp = (xx / max(width - 1, 1) - 0.5) * math.cos(angle) + (yy / max(height - 1, 1) - 0.5) * math.sin(angle)
    illumination = spec.background * (1.0 + spec.gradient * ramp)

    factor = np.ones((height, width))
    truth = np.zeros((height, width), dtype=np.int32)
    placed: List[_Shape] = []
    for index in range(spec.disks + spec.blobs):
        shape = _place(rng, spec, placed, elongated=index >= spec.disks)
        placed.append(shape)
        _render(shape, spec, factor, truth, index + 1)
    _sprinkle_specks(rng, spec, factor, truth)

    gray = illumination * factor
    noise = rng.normal(0.0, spec.noise_sigma, size=(height, width, 1))
    rgb = gray[:, :, np.newaxis] * np.asarray(spec.tint)[np.newaxis, np.newaxis, :] + noise
    rgb = np.floor(np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5) / 255.0
    logger.debug("Synthetic image seed %d: %d disks, %d blobs", seed, spec.disks, spec.blobs)
    return RasterImage(rgb), LabelMap(truth, region_count=len(placed))
