"""End-to-end segmentation pipeline and cell counting."""
from __future__ import annotations

import logging
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy import ndimage as ndi

from core.enhance import emphasize
from core.measure import count_cells, region_stats
from core.morphology import beucher_gradient, close_by_reconstruction, disk_se, open_by_reconstruction
from core.rank_filter import plan_window, rank_filter
from core.raster import compare, histogram, invert_mask, negative, split_channels, to_gray
from core.segment import apply_mask, clear_small_objects, label_boundaries, merge_by_bcr, watershed
from core.threshold import apply_threshold, combine_channels, otsu
from domain.errors import ChannelCountError, SegmentationError, StageError
from domain.models import (
    BinaryMask,
    LabelMap,
    PipelineConfig,
    RasterImage,
    SegmentationResult,
    SyntheticSpec,
)

logger = logging.getLogger(__name__)

IMAGE_STAGES = (
    "filtered",
    "compared",
    "emphasized",
    "negated",
    "otsu_mask",
    "cleared_mask",
    "mask",
    "masked",
    "smoothed",
    "topography",
    "watershed",
    "merged",
    "overlay",
)


def render_overlay(img: RasterImage, labels: LabelMap) -> RasterImage:
    """Burn label boundaries into the first channel at full intensity."""
    data = np.array(img.replicate_gray().data)
    data[:, :, 0][label_boundaries(labels).bits] = 1.0
    return RasterImage(data)


def _channels(img: RasterImage) -> List[RasterImage]:
    return list(split_channels(img)) if img.channels == 3 else [img]


class SegmentationEngine:
    """Runs the pipeline stage by stage and keeps the named intermediates."""

    def __init__(self, config: Optional[PipelineConfig] = None) -> None:
        self.config = config or PipelineConfig()
        self.stages: Dict[str, Any] = {}

    # ------------------------------------------------------------------
    # Public API
    def run(self, img: RasterImage) -> SegmentationResult:
        if img.channels != 3:
            raise ChannelCountError("run_pipeline", 3, img.channels)
        cfg = self.config
        self.stages = {}

        plan = self._stage("window", plan_window, img.width, img.height, cfg.window_rule)
        filtered = self._stage("filtered", rank_filter, img, plan, cfg.filter_kind)
        compared = self._stage("compared", compare, img, filtered, cfg.filter_kind, cfg.compare_mode)
        emphasized = self._stage("emphasized", emphasize, compared, cfg.emphasis)
        negated = self._stage("negated", self._negate, emphasized)
        masks = self._stage("otsu_mask", self._binarize, negated)
        cleared = self._stage("cleared_mask", self._clear, masks)
        mask = self._stage("mask", self._combine, cleared)
        masked = self._stage("masked", self._mask_gray, img, mask)
        smoothed = self._stage("smoothed", self._smooth, masked, img)
        topography = self._stage("topography", self._topography, smoothed)
        basins = self._stage("watershed", watershed, topography, mask)
        merged = self._stage(
            "merged",
            merge_by_bcr,
            basins,
            cfg.bcr_threshold,
            cfg.bcr_abs_curvature,
            cfg.curvature_sigma,
        )
        stats = self._stage("stats", region_stats, merged, cfg.sphericity_threshold, cfg.perimeter_rule)
        counts = self._stage("counts", count_cells, stats, cfg.min_area)
        self._stage("overlay", render_overlay, img, merged)

        logger.info(
            "%d regions (%d before merging): %d spheric, %d nonspheric, %d rejected",
            merged.region_count, basins.region_count, counts.spheric, counts.nonspheric, counts.rejected,
        )
        return SegmentationResult(mask=mask, labels=merged, stats=stats, counts=counts, stages=dict(self.stages))

    def stage_image(self, name: str) -> Any:
        """Intermediate named ``name`` from the last run.

        Per-channel mask lists are combined with the configured rule so that
        every image stage comes back as a single image, mask or label map.
        """
        if name not in self.stages:
            raise SegmentationError(f"Étape inconnue ou non calculée: {name}")
        value = self.stages[name]
        if isinstance(value, list):
            return value[0] if len(value) == 1 else combine_channels(*value, self.config.combine_rule)
        return value

    # ------------------------------------------------------------------
    def _stage(self, name: str, func: Callable[..., Any], *args: Any) -> Any:
        try:
            value = func(*args)
        except StageError:
            raise
        except Exception as exc:
            logger.debug("Stage %s failed", name, exc_info=True)
            raise StageError(name, exc) from exc
        self.stages[name] = value
        return value

    def _negate(self, img: RasterImage) -> RasterImage:
        return negative(img) if self.config.applies_negative else img

    def _binarize(self, img: RasterImage) -> List[BinaryMask]:
        masks = []
        for index, channel in enumerate(_channels(img)):
            stats = otsu(histogram(channel))
            mask = apply_threshold(channel, stats.level)
            if stats.degenerate:
                logger.warning("Channel %d: degenerate histogram, Otsu level %d", index, stats.level)
            if self.config.invert_majority and mask.count() * 2 > mask.width * mask.height:
                logger.debug("Channel %d: object class is the majority, mask inverted", index)
                mask = invert_mask(mask)
            logger.debug("Channel %d: Otsu level %d, %d object pixels", index, stats.level, mask.count())
            masks.append(mask)
        return masks

    def _clear(self, masks: List[BinaryMask]) -> List[BinaryMask]:
        se = disk_se(self.config.clearance_radius)
        return [clear_small_objects(mask, se) for mask in masks]

    def _combine(self, masks: List[BinaryMask]) -> BinaryMask:
        mask = combine_channels(*masks, self.config.combine_rule) if len(masks) == 3 else masks[0]
        if self.config.fill_holes:
            filled = ndi.binary_fill_holes(mask.bits)
            logger.debug("Filled %d enclosed background pixels", int(filled.sum()) - mask.count())
            mask = BinaryMask(filled)
        if not mask.bits.any():
            logger.warning("Empty segmentation mask")
        return mask

    def _mask_gray(self, img: RasterImage, mask: BinaryMask) -> RasterImage:
        return apply_mask(to_gray(img, self.config.gray_mode), mask)

    def _smooth(self, masked: RasterImage, img: RasterImage) -> RasterImage:
        radius = plan_window(img.width, img.height, self.config.smoothing_rule).radius
        se = disk_se(radius)
        return close_by_reconstruction(open_by_reconstruction(masked, se), se)

    def _topography(self, smoothed: RasterImage) -> RasterImage:
        if self.config.topography == "gradient":
            return beucher_gradient(smoothed, disk_se(1))
        return negative(smoothed)


def run_pipeline(img: RasterImage, cfg: Optional[PipelineConfig] = None) -> SegmentationResult:
    return SegmentationEngine(cfg).run(img)


def oversegmentation_report(img: RasterImage, cfg: Optional[PipelineConfig] = None) -> Dict[str, int]:
    """Region counts of the watershed on the raw masked image, after smoothing and after merging."""
    engine = SegmentationEngine(cfg)
    result = engine.run(img)
    raw = watershed(engine._topography(engine.stage_image("masked")), result.mask)
    return {
        "raw": raw.region_count,
        "smoothed": engine.stage_image("watershed").region_count,
        "merged": result.labels.region_count,
    }


def compare_with_truth(result: SegmentationResult, spec: SyntheticSpec) -> Dict[str, int]:
    """Signed count errors against the ground truth of a synthetic image."""
    expected = spec.expected_counts
    return {
        "spheric": result.counts.spheric - expected.spheric,
        "nonspheric": result.counts.nonspheric - expected.nonspheric,
        "total": result.labels.region_count - (expected.spheric + expected.nonspheric),
    }
