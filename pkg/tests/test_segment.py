from __future__ import annotations

import math

import numpy as np
import pytest

from core.morphology import disk_se
from core.segment import (
    adjacency,
    apply_mask,
    bcr,
    clear_small_objects,
    connected_components,
    curvature,
    label_boundaries,
    merge_by_bcr,
    region_adjacency,
    trace_contour,
    trace_region,
    watershed,
)
from domain.errors import ChannelCountError, DimensionMismatchError, PreconditionError, UnknownLabelError
from domain.models import BinaryMask, Contour, LabelMap, RasterImage


def disk(shape, cy, cx, radius) -> np.ndarray:
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius


def split_disk() -> LabelMap:
    """Disk of radius 12 cut in two by a one-pixel watershed line."""
    shape = (32, 32)
    region = disk(shape, 16, 16, 12)
    labels = np.zeros(shape, dtype=np.int32)
    labels[region & (np.arange(32) < 16)] = 1
    labels[region & (np.arange(32) > 16)] = 2
    return LabelMap(labels)


def touching_disks() -> LabelMap:
    shape = (42, 52)
    labels = np.zeros(shape, dtype=np.int32)
    labels[disk(shape, 20, 15, 10)] = 1
    labels[disk(shape, 20, 36, 10)] = 2
    return LabelMap(labels)


def disk_with_spike() -> LabelMap:
    """Disk of radius 10 with a one-pixel-wide spike of length 30 on its right."""
    shape = (28, 70)
    labels = np.zeros(shape, dtype=np.int32)
    labels[disk(shape, 14, 14, 10)] = 1
    labels[14, 25:55] = 2
    return LabelMap(labels)


def test_apply_mask():
    img = RasterImage(np.full((3, 3, 3), 0.5))
    bits = np.zeros((3, 3), dtype=bool)
    bits[1, 1] = True
    masked = apply_mask(img, BinaryMask(bits))
    assert masked.plane(2)[1, 1] == 0.5
    assert masked.data.sum() == 1.5
    with pytest.raises(DimensionMismatchError):
        apply_mask(img, BinaryMask(np.ones((2, 3))))


def test_connected_components_use_eight_connectivity():
    bits = np.zeros((4, 4), dtype=bool)
    bits[0, 0] = bits[1, 1] = True
    bits[3, 3] = True
    assert connected_components(BinaryMask(bits)).region_count == 2


def test_watershed_constant_image_is_one_basin():
    lmap = watershed(RasterImage(np.full((6, 7), 0.5)))
    assert lmap.region_count == 1
    assert np.all(lmap.labels == 1)


def test_watershed_ridge_is_split_by_a_line():
    row = np.array([0, 1, 2, 3, 4, 3, 2, 1, 0]) / 255.0
    lmap = watershed(RasterImage(np.tile(row, (8, 1))))
    assert lmap.region_count == 2
    assert np.all(lmap.labels[:, 4] == 0)
    left, right = set(lmap.labels[:, :4].ravel()), set(lmap.labels[:, 5:].ravel())
    assert len(left) == len(right) == 1 and left != right and 0 not in left | right


def test_watershed_finds_every_well():
    data = np.full((20, 60), 0.6)
    wells = [(5, 8), (14, 30), (6, 50)]
    for y, x in wells:
        data[y, x] = 0.0
    lmap = watershed(RasterImage(data))
    assert lmap.region_count == len(wells)
    assert sorted(int(lmap.labels[y, x]) for y, x in wells) == [1, 2, 3]

    for k in range(1, 9):
        field = np.full((30, 130), 0.6)
        for index in range(k):
            field[8 + 12 * (index % 2), 8 + 15 * index] = 0.1
        assert watershed(RasterImage(field)).region_count == k

    # Distinct basins never touch, even diagonally.
    labels = lmap.labels
    for here, there in (
        (labels[:, :-1], labels[:, 1:]),
        (labels[:-1, :], labels[1:, :]),
        (labels[:-1, :-1], labels[1:, 1:]),
        (labels[:-1, 1:], labels[1:, :-1]),
    ):
        assert not np.any((here > 0) & (there > 0) & (here != there))


def test_watershed_respects_the_mask():
    data = np.random.default_rng(3).random((12, 12))
    bits = np.zeros((12, 12), dtype=bool)
    bits[2:8, 3:9] = True
    lmap = watershed(RasterImage(data), BinaryMask(bits))
    assert not np.any(lmap.labels[~bits])
    assert lmap.region_count >= 1

    empty = watershed(RasterImage(data), BinaryMask(np.zeros((12, 12))))
    assert empty.region_count == 0

    with pytest.raises(ChannelCountError):
        watershed(RasterImage(np.zeros((4, 4, 3))))
    with pytest.raises(DimensionMismatchError):
        watershed(RasterImage(data), BinaryMask(np.ones((4, 4))))


def test_clear_small_objects_keeps_large_cells():
    bits = np.zeros((32, 32), dtype=bool)
    bits[5:15, 5:15] = True
    bits[25:27, 25:27] = True
    cleared = clear_small_objects(BinaryMask(bits), disk_se(1))
    assert not cleared.bits[23:29, 23:29].any()
    assert cleared.bits[10, 10]
    assert cleared.count() > 0 and not np.any(cleared.bits & ~bits)

    empty = BinaryMask(np.zeros((5, 5)))
    assert clear_small_objects(empty, disk_se(1)).count() == 0


def test_adjacency_examples():
    touching = LabelMap(np.array([[1, 1, 0, 2, 2]]))
    assert adjacency(touching, 1, 2) and adjacency(touching, 2, 1)
    apart = LabelMap(np.array([[1, 0, 0, 2]]))
    assert not adjacency(apart, 1, 2)

    with pytest.raises(UnknownLabelError):
        adjacency(touching, 1, 9)
    with pytest.raises(PreconditionError):
        adjacency(touching, 1, 1)


def test_region_adjacency_matches_pairwise_predicate():
    rng = np.random.default_rng(12)
    for _ in range(5):
        labels = rng.integers(0, 6, (10, 10)) * (rng.random((10, 10)) < 0.3)
        lmap = LabelMap(labels)
        present = lmap.present_labels()
        expected = [
            (u, v) for index, u in enumerate(present) for v in present[index + 1:] if adjacency(lmap, u, v)
        ]
        assert region_adjacency(lmap) == expected


def test_label_boundaries_mark_the_interface():
    labels = np.zeros((4, 6), dtype=np.int32)
    labels[:, :3] = 1
    labels[:, 3:] = 2
    edges = label_boundaries(LabelMap(labels)).bits
    assert edges[:, 2].all() and edges[:, 3].all()
    assert not edges[:, 0].any() and not edges[:, 5].any()


def test_trace_small_shapes():
    dot = np.zeros((5, 5), dtype=bool)
    dot[2, 2] = True
    assert len(trace_region(dot)) == 1

    square = np.zeros((5, 5), dtype=bool)
    square[1:4, 1:4] = True
    contour = trace_region(square)
    assert len(contour) == 8
    assert contour.distinct_points() == 8
    assert (int(contour.points[0, 0]), int(contour.points[0, 1])) == (1, 1)
    assert not any(tuple(p) == (2, 2) for p in contour.points.tolist())

    with pytest.raises(PreconditionError):
        trace_region(np.zeros((3, 3), dtype=bool))


def test_trace_disk_and_contour_lookup():
    lmap = LabelMap(disk((30, 30), 15, 15, 10).astype(np.int32))
    contour = trace_contour(lmap, 1)
    assert contour.length == pytest.approx(2 * math.pi * 10, rel=0.12)
    assert np.all(lmap.labels[contour.points[:, 0], contour.points[:, 1]] == 1)
    with pytest.raises(UnknownLabelError):
        trace_contour(lmap, 2)


def test_curvature_of_lines_and_circles():
    line = Contour(np.stack([np.zeros(10), np.arange(10)], axis=1))
    assert np.all(curvature(line)[2:-2] == 0.0)
    assert curvature(Contour(np.zeros((4, 2)))).size == 0

    circle = trace_region(disk((50, 50), 25, 25, 20))
    smoothed = curvature(circle, sigma=3.0)
    assert np.abs(smoothed).mean() == pytest.approx(1 / 20, rel=0.3)


def test_curvature_flips_sign_with_orientation():
    contour = trace_region(disk((30, 30), 15, 15, 9))
    forward = curvature(contour)
    backward = curvature(contour.reversed())
    assert np.array_equal(backward, -forward[::-1])


def test_bcr_favours_closing_a_split_disk():
    report = bcr(split_disk(), 1, 2, sigma=2.0)
    assert report.bcr < 1.0
    assert report.mergeable


def test_bcr_rejects_merging_touching_disks():
    report = bcr(touching_disks(), 1, 2, sigma=2.0)
    assert report.bcr > 1.0


def test_bcr_rejects_attaching_a_thin_spike():
    spiked = disk_with_spike()
    assert bcr(spiked, 1, 2).bcr > 1.0
    assert bcr(spiked, 1, 2, sigma=2.0).bcr > 1.0
    assert bcr(spiked, 1, 2, sigma=2.0).mergeable

    kept = merge_by_bcr(spiked, sigma=2.0)
    assert kept.region_count == 2
    assert kept.equals(spiked)


def test_bcr_favours_stacked_strips():
    labels = np.zeros((24, 44), dtype=np.int32)
    labels[2:12, 2:42] = 1
    labels[12:22, 2:42] = 2
    assert bcr(LabelMap(labels), 1, 2, sigma=2.0).bcr < 1.0


def test_bcr_preconditions():
    with pytest.raises(PreconditionError):
        bcr(LabelMap(np.array([[1, 0, 0, 2]])), 1, 2)
    tiny = LabelMap(np.array([[1, 2, 0]]))
    assert math.isinf(bcr(tiny, 1, 2).bcr)


def test_merge_by_bcr_joins_halves_and_keeps_separate_cells():
    halves = split_disk()
    merged = merge_by_bcr(halves, sigma=2.0)
    assert merged.region_count == 1
    assert np.all(merged.labels[halves.labels > 0] == 1)
    assert merged.labels[16, 16] == 1

    pair = merge_by_bcr(touching_disks(), sigma=2.0)
    assert pair.region_count == 2
    assert pair.equals(touching_disks())

    single = LabelMap(disk((20, 20), 10, 10, 6).astype(np.int32))
    assert merge_by_bcr(single).equals(single)


def test_merge_by_bcr_tiny_threshold_never_merges():
    halves = split_disk()
    assert merge_by_bcr(halves, threshold=1e-9, sigma=2.0).region_count == 2
