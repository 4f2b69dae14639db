from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from core.raster import histogram
from core.threshold import apply_threshold, combine_channels, otsu, otsu_threshold
from domain.errors import DimensionMismatchError
from domain.models import BinaryMask, Histogram, RasterImage


def exhaustive_level(bins) -> int:
    """Exact σ_B² scan with Fractions; first maximum wins."""
    total = int(sum(bins))
    probabilities = [Fraction(int(count), total) for count in bins]
    mu_t = sum(p * level for level, p in enumerate(probabilities))
    best_level, best_sigma = None, None
    omega1 = moment1 = Fraction(0)
    for k in range(256):
        omega1 += probabilities[k]
        moment1 += probabilities[k] * k
        omega2 = 1 - omega1
        if omega1 == 0 or omega2 == 0:
            continue
        mu1 = moment1 / omega1
        mu2 = (mu_t - moment1) / omega2
        sigma = omega1 * (mu1 - mu_t) ** 2 + omega2 * (mu2 - mu_t) ** 2
        if best_sigma is None or sigma > best_sigma:
            best_level, best_sigma = k, sigma
    return best_level


def test_two_spikes():
    bins = np.zeros(256, dtype=int)
    bins[50] = bins[200] = 100
    stats = otsu(Histogram.from_bins(bins))
    assert 50 <= stats.level < 200
    assert stats.level == exhaustive_level(bins)
    assert stats.omega1 + stats.omega2 == pytest.approx(1.0, abs=1e-9)
    assert stats.omega1 * stats.mu1 + stats.omega2 * stats.mu2 == pytest.approx(stats.mu_t, abs=1e-9)
    assert not stats.degenerate


def test_constant_histogram_is_degenerate():
    stats = otsu(histogram(RasterImage(np.full((5, 5), 0.4))))
    assert stats.degenerate
    assert stats.sigma_b == 0.0
    assert stats.level == 102


def test_random_histograms_match_exhaustive_scan():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        bins = rng.integers(0, 20, 256) * (rng.random(256) < 0.3)
        if np.count_nonzero(bins) < 2:
            continue
        stats = otsu(Histogram.from_bins(bins))
        assert stats.level == exhaustive_level(bins)
        assert stats.sigma_b >= 0.0


def test_otsu_ignores_histogram_scale():
    rng = np.random.default_rng(13)
    for _ in range(50):
        bins = rng.integers(0, 50, 256)
        assert otsu(Histogram.from_bins(bins)).level == otsu(Histogram.from_bins(bins * 7)).level


def test_apply_threshold_examples():
    ones = RasterImage(np.ones((3, 3)))
    assert apply_threshold(ones, 255).count() == 0
    assert apply_threshold(ones, 0).count() == 9

    halves = np.zeros((2, 4))
    halves[:, 2:] = 1.0
    mask = apply_threshold(RasterImage(halves), 127)
    assert mask.bits.tolist() == [[False, False, True, True]] * 2
    assert otsu_threshold(RasterImage(halves)) == 0


def test_apply_threshold_is_monotone_in_level():
    img = RasterImage(np.random.default_rng(3).random((10, 10)))
    previous = apply_threshold(img, 0).bits
    for level in range(1, 256, 17):
        current = apply_threshold(img, level).bits
        assert not np.any(current & ~previous)
        previous = current


def test_combine_rules_truth_table_and_nesting():
    one, zero = BinaryMask(np.ones((1, 1))), BinaryMask(np.zeros((1, 1)))
    for rule in ("strict", "patient", "halfway"):
        assert combine_channels(one, one, one, rule).bits[0, 0]
    assert [combine_channels(one, zero, zero, rule).bits[0, 0] for rule in ("strict", "patient", "halfway")] == [
        False, True, False,
    ]
    assert [combine_channels(one, one, zero, rule).bits[0, 0] for rule in ("strict", "patient", "halfway")] == [
        False, True, True,
    ]

    rng = np.random.default_rng(17)
    masks = [BinaryMask(rng.random((12, 12)) < 0.5) for _ in range(3)]
    strict = combine_channels(*masks, "strict").bits
    halfway = combine_channels(*masks, "halfway").bits
    patient = combine_channels(*masks, "patient").bits
    assert not np.any(strict & ~halfway)
    assert not np.any(halfway & ~patient)

    with pytest.raises(DimensionMismatchError):
        combine_channels(one, one, BinaryMask(np.ones((2, 2))), "strict")
