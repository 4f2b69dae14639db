from __future__ import annotations

import numpy as np
import pytest

from core.rank_filter import estimate_intervals, extend_borders, plan_window, rank_filter
from core.raster import negative
from domain.errors import PreconditionError
from domain.models import RasterImage, WindowPlan, disk_offsets


def brute_force(img: RasterImage, offsets, statistic: str) -> np.ndarray:
    """Sort-based oracle over the mean-extended image."""
    radius = max(abs(dy) for dy, _ in offsets)
    plane = img.plane()
    padded = extend_borders(img, radius).plane()
    out = np.empty_like(plane)
    for y in range(plane.shape[0]):
        for x in range(plane.shape[1]):
            values = sorted(padded[y + radius + dy, x + radius + dx] for dy, dx in offsets)
            if statistic == "min":
                out[y, x] = values[0]
            elif statistic == "max":
                out[y, x] = values[-1]
            else:
                out[y, x] = values[len(values) // 2]
    return out


def test_interval_rules_for_a_full_frame():
    n = 720 * 576
    # √414720 = 643.99…, which rounds half up to 644.
    assert estimate_intervals(n, "sqrt") == 644
    assert estimate_intervals(n, "log5") == 28
    assert estimate_intervals(n, "sturges") == 20


def test_interval_rules_reject_empty_images_and_unknown_rules():
    with pytest.raises(PreconditionError):
        estimate_intervals(0, "sqrt")
    with pytest.raises(PreconditionError):
        estimate_intervals(10, "scott")


def test_window_plans():
    full = plan_window(720, 576, "sqrt")
    assert full.radius == 14
    assert (0, 0) in full.offsets
    assert all(dy * dy + dx * dx <= 14 * 14 for dy, dx in full.offsets)

    sturges = plan_window(720, 576, "sturges")
    assert sturges.k == 20 and sturges.radius == 3

    for rule in ("sqrt", "log5", "sturges"):
        assert plan_window(1, 1, rule).radius == 1


def test_extend_borders():
    img = RasterImage(np.array([[0.0, 1.0]]))
    assert extend_borders(img, 0) is img

    extended = extend_borders(img, 1)
    assert (extended.width, extended.height) == (4, 3)
    assert extended.plane()[0, 0] == 0.5
    assert extended.plane()[1, 1] == 0.0 and extended.plane()[1, 2] == 1.0

    constant = extend_borders(RasterImage(np.full((3, 4, 3), 0.25)), 5)
    assert constant.shape == (13, 14)
    assert np.all(constant.data == 0.25)

    with pytest.raises(PreconditionError):
        extend_borders(img, -1)


def test_constant_images_are_fixed_points():
    img = RasterImage(np.full((9, 11, 3), 0.4))
    plan = plan_window(11, 9, "sqrt")
    for statistic in ("min", "max", "median"):
        out = rank_filter(img, plan, statistic)
        assert out.data.shape == img.data.shape
        assert np.array_equal(out.data, img.data)


def test_min_filter_removes_a_bright_pixel():
    data = np.zeros((9, 9))
    data[4, 4] = 1.0
    out = rank_filter(RasterImage(data), plan_window(9, 9, "sturges"), "min")
    assert out.plane()[4, 4] == 0.0


def test_filters_match_the_sort_oracle():
    rng = np.random.default_rng(21)
    for radius in (1, 2):
        window = WindowPlan(n=256, k=0, radius=radius, offsets=disk_offsets(radius), rule="test")
        for _ in range(5):
            plane = rng.random((16, 16))
            img = RasterImage(plane)
            for statistic in ("min", "max", "median"):
                expected = brute_force(img, window.offsets, statistic)
                assert np.array_equal(rank_filter(img, window, statistic).plane(), expected)


def test_order_and_duality():
    rng = np.random.default_rng(4)
    img = RasterImage(rng.random((20, 20, 3)))
    plan = plan_window(20, 20, "sturges")
    low = rank_filter(img, plan, "min").data
    high = rank_filter(img, plan, "max").data
    assert np.all(low <= img.data) and np.all(img.data <= high)

    # The mean frame of the negated image may differ by one rounding step,
    # so duality is checked where the window never reaches the frame.
    dual = negative(rank_filter(negative(img), plan, "max")).data
    r = plan.radius
    assert np.array_equal(low[r:-r, r:-r], dual[r:-r, r:-r])


def test_median_uses_the_fallback_path_for_many_distinct_values():
    rng = np.random.default_rng(9)
    img = RasterImage(rng.random((40, 40)))
    window = WindowPlan(n=1600, k=0, radius=1, offsets=disk_offsets(1), rule="test")
    expected = brute_force(img, window.offsets, "median")
    assert np.array_equal(rank_filter(img, window, "median").plane(), expected)
