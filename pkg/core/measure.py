"""Region measurement and sphericity classification."""
from __future__ import annotations

import math
from typing import Iterable, List

from scipy import ndimage as ndi

from core.segment import trace_region
from domain.errors import PreconditionError
from domain.models import PERIMETER_RULES, CellCounts, LabelMap, RegionStats

DEFAULT_SPHERICITY_THRESHOLD = 1.1


def region_stats(
    lmap: LabelMap,
    threshold: float = DEFAULT_SPHERICITY_THRESHOLD,
    perimeter_rule: str = "chain",
) -> List[RegionStats]:
    """Area, perimeter and sphericity r_p / r_a of every nonzero label.

    With the ``chain`` rule the perimeter is the Freeman length of the Moore
    contour; with ``points`` it is the number of distinct contour pixels.
    Either way it is at least 1.
    """
    if perimeter_rule not in PERIMETER_RULES:
        raise PreconditionError(f"Règle de périmètre inconnue: {perimeter_rule}")
    stats = []
    for index, box in enumerate(ndi.find_objects(lmap.labels)):
        if box is None:
            continue
        label = index + 1
        region = lmap.labels[box] == label
        area = int(region.sum())
        contour = trace_region(region)
        points = contour.distinct_points()
        raw = contour.length if perimeter_rule == "chain" else points
        perimeter = max(1.0, float(raw))
        r_p = perimeter / (2.0 * math.pi)
        r_a = math.sqrt(area / math.pi)
        sphericity = r_p / r_a
        stats.append(
            RegionStats(
                label=label,
                area=area,
                perimeter=perimeter,
                contour_points=points,
                r_p=r_p,
                r_a=r_a,
                sphericity=sphericity,
                is_spheric=sphericity < threshold,
            )
        )
    return stats


def count_cells(stats: Iterable[RegionStats], min_area: int = 0) -> CellCounts:
    if min_area < 0:
        raise PreconditionError("min_area doit être positif ou nul.")
    spheric = nonspheric = rejected = 0
    for stat in stats:
        if stat.area < min_area:
            rejected += 1
        elif stat.is_spheric:
            spheric += 1
        else:
            nonspheric += 1
    return CellCounts(spheric=spheric, nonspheric=nonspheric, rejected=rejected)
