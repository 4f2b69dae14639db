"""Domain models for the cell segmentation toolkit."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from domain.errors import ConfigError, PreconditionError

Offset = Tuple[int, int]

INTERVAL_RULES = ("sqrt", "log5", "sturges")
GRAY_MODES = ("Y1", "Y2", "Y3")
STATISTICS = ("min", "max", "median")
COMPARE_MODES = ("rate", "difference")
EMPHASES = ("prod", "square", "log")
COMBINE_RULES = ("strict", "patient", "halfway")
PERIMETER_RULES = ("chain", "points")
NEGATE_MODES = ("auto", "always", "never")
TOPOGRAPHIES = ("negative", "gradient")

INTENSITY_SCALE = float(2 ** 40)


def disk_offsets(radius: int) -> Tuple[Offset, ...]:
    """Lattice offsets (dy, dx) with dy² + dx² ≤ radius², in raster order."""
    if radius < 0:
        raise PreconditionError(f"Rayon négatif: {radius}")
    span = range(-radius, radius + 1)
    return tuple((dy, dx) for dy in span for dx in span if dy * dy + dx * dx <= radius * radius)


def offsets_footprint(offsets: Tuple[Offset, ...]) -> np.ndarray:
    """Boolean (2r+1)×(2r+1) footprint centred on the origin."""
    radius = max((max(abs(dy), abs(dx)) for dy, dx in offsets), default=0)
    size = 2 * radius + 1
    footprint = np.zeros((size, size), dtype=bool)
    for dy, dx in offsets:
        footprint[dy + radius, dx + radius] = True
    return footprint


@dataclass(eq=False)
class RasterImage:
    """H×W grid of intensities in [0,1] with 1 or 3 channels.

    ``data`` is stored as a read-only float64 array of shape (H, W, C).
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        array = np.array(self.data, dtype=np.float64)
        if array.ndim == 2:
            array = array[:, :, np.newaxis]
        if array.ndim != 3 or array.shape[2] not in (1, 3):
            raise PreconditionError(f"Forme d'image invalide: {array.shape}")
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise PreconditionError("Une image doit contenir au moins un pixel.")
        if not np.all(np.isfinite(array)):
            raise PreconditionError("Intensités non finies dans l'image.")
        if array.min() < -1e-12 or array.max() > 1.0 + 1e-12:
            raise PreconditionError("Les intensités doivent appartenir à [0, 1].")
        np.clip(array, 0.0, 1.0, out=array)
        # Dyadic grid: 1 - i is exact, so negation is a bit-exact involution.
        array = np.round(array * INTENSITY_SCALE) / INTENSITY_SCALE
        array.setflags(write=False)
        self.data = array

    @classmethod
    def from_array(cls, array: np.ndarray) -> "RasterImage":
        """Build an image from any float array, clamping it to [0,1]."""
        return cls(np.clip(np.asarray(array, dtype=np.float64), 0.0, 1.0))

    @classmethod
    def from_uint8(cls, array: np.ndarray) -> "RasterImage":
        return cls(np.asarray(array, dtype=np.float64) / 255.0)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def plane(self, index: int = 0) -> np.ndarray:
        """Return channel ``index`` as a 2-D read-only view."""
        return self.data[:, :, index]

    def channel(self, index: int) -> "RasterImage":
        return RasterImage(self.data[:, :, index])

    def replicate_gray(self) -> "RasterImage":
        """Return a 3-channel image; single-channel inputs are repeated."""
        if self.channels == 3:
            return self
        return RasterImage(np.repeat(self.data, 3, axis=2))

    def to_uint8(self) -> np.ndarray:
        levels = np.floor(self.data * 255.0 + 0.5).astype(np.uint8)
        return levels[:, :, 0] if self.channels == 1 else levels

    def equals(self, other: "RasterImage") -> bool:
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))


@dataclass(eq=False)
class Histogram:
    """256-bin count vector of quantized intensity levels."""

    bins: np.ndarray
    total: int

    def __post_init__(self) -> None:
        self.bins = np.asarray(self.bins, dtype=np.int64)
        if self.bins.shape != (256,):
            raise PreconditionError("Un histogramme possède exactement 256 classes.")
        if np.any(self.bins < 0):
            raise PreconditionError("Les effectifs d'histogramme sont positifs.")
        if int(self.bins.sum()) != int(self.total):
            raise PreconditionError("Le total ne correspond pas à la somme des classes.")
        self.total = int(self.total)

    @classmethod
    def from_bins(cls, bins) -> "Histogram":
        counts = np.asarray(bins, dtype=np.int64)
        return cls(bins=counts, total=int(counts.sum()))


@dataclass(eq=False)
class BinaryMask:
    """H×W boolean grid: True marks objects (cells), False the background."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise PreconditionError(f"Un masque est bidimensionnel, forme reçue {bits.shape}")
        bits.setflags(write=False)
        self.bits = bits

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def count(self) -> int:
        return int(self.bits.sum())

    def equals(self, other: "BinaryMask") -> bool:
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))


@dataclass(eq=False)
class LabelMap:
    """Region identifiers per pixel; 0 is reserved for watershed lines and background."""

    labels: np.ndarray
    region_count: Optional[int] = None

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int32)
        if labels.ndim != 2:
            raise PreconditionError(f"Une carte d'étiquettes est bidimensionnelle, forme reçue {labels.shape}")
        if labels.size and labels.min() < 0:
            raise PreconditionError("Les étiquettes sont positives ou nulles.")
        labels.setflags(write=False)
        self.labels = labels
        if self.region_count is None:
            self.region_count = int(labels.max()) if labels.size else 0

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def present_labels(self) -> List[int]:
        """Sorted nonzero labels that occur in the map."""
        values = np.unique(self.labels)
        return [int(v) for v in values if v != 0]

    def region(self, label: int) -> np.ndarray:
        return self.labels == label

    def foreground(self) -> BinaryMask:
        return BinaryMask(self.labels > 0)

    def equals(self, other: "LabelMap") -> bool:
        return (
            self.region_count == other.region_count
            and self.labels.shape == other.labels.shape
            and bool(np.array_equal(self.labels, other.labels))
        )


@dataclass(eq=False)
class Contour:
    """Ordered cyclic list of (y, x) boundary coordinates of one region."""

    points: np.ndarray

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.int64).reshape(-1, 2)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def length(self) -> float:
        """Freeman chain length: axial steps count 1, diagonal steps √2."""
        if len(self) < 2:
            return 0.0
        steps = np.abs(np.roll(self.points, -1, axis=0) - self.points)
        diagonal = int(np.count_nonzero((steps[:, 0] == 1) & (steps[:, 1] == 1)))
        axial = len(self) - diagonal
        return axial + diagonal * math.sqrt(2.0)

    def distinct_points(self) -> int:
        return int(np.unique(self.points, axis=0).shape[0]) if len(self) else 0

    def reversed(self) -> "Contour":
        return Contour(self.points[::-1].copy())


@dataclass(frozen=True)
class WindowPlan:
    """Circular window sized from a statistical interval-count rule."""

    n: int
    k: int
    radius: int
    offsets: Tuple[Offset, ...]
    rule: str

    @property
    def footprint(self) -> np.ndarray:
        return offsets_footprint(self.offsets)

    def to_dict(self) -> Dict:
        return {"n": self.n, "k": self.k, "radius": self.radius, "rule": self.rule, "size": len(self.offsets)}


@dataclass(frozen=True)
class StructuringElement:
    """Flat, origin-centred structuring element."""

    offsets: Tuple[Offset, ...]

    def __post_init__(self) -> None:
        if (0, 0) not in self.offsets:
            raise PreconditionError("Un élément structurant doit contenir l'origine.")

    @property
    def radius(self) -> int:
        return max(max(abs(dy), abs(dx)) for dy, dx in self.offsets)

    @property
    def footprint(self) -> np.ndarray:
        return offsets_footprint(self.offsets)

    def is_symmetric(self) -> bool:
        return set(self.offsets) == {(-dy, -dx) for dy, dx in self.offsets}


@dataclass(frozen=True)
class OtsuStats:
    """Otsu threshold k* with the class statistics at k*."""

    level: int
    sigma_b: float
    omega1: float
    omega2: float
    mu1: float
    mu2: float
    mu_t: float
    degenerate: bool = False


@dataclass(frozen=True)
class BcrReport:
    """Boundary curvature ratio of a candidate merge between two regions."""

    region_u: int
    region_v: int
    bcr: float
    merged_curvature_mean: float
    separate_curvature_mean: float

    @property
    def mergeable(self) -> bool:
        return math.isfinite(self.bcr)


@dataclass
class RegionStats:
    """Area, perimeter and sphericity of one labelled region."""

    label: int
    area: int
    perimeter: float
    contour_points: int
    r_p: float
    r_a: float
    sphericity: float
    is_spheric: bool

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class CellCounts:
    spheric: int = 0
    nonspheric: int = 0
    rejected: int = 0

    @property
    def total(self) -> int:
        return self.spheric + self.nonspheric + self.rejected

    def as_tuple(self) -> Tuple[int, int, int]:
        return self.spheric, self.nonspheric, self.rejected

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["total"] = self.total
        return data


_CHOICES: Dict[str, Tuple[str, ...]] = {
    "filter_kind": ("min", "median"),
    "compare_mode": COMPARE_MODES,
    "emphasis": EMPHASES,
    "combine_rule": COMBINE_RULES,
    "window_rule": INTERVAL_RULES,
    "smoothing_rule": INTERVAL_RULES,
    "gray_mode": GRAY_MODES,
    "perimeter_rule": PERIMETER_RULES,
    "negate": NEGATE_MODES,
    "topography": TOPOGRAPHIES,
}
_POSITIVE_FLOATS = ("bcr_threshold", "sphericity_threshold")
_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")


def _parse_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ConfigError(f"Valeur booléenne invalide pour {key}: {value!r}")


def _parse_number(key: str, value: Any, kind: type) -> Any:
    if isinstance(value, bool):
        raise ConfigError(f"Valeur numérique invalide pour {key}: {value!r}")
    try:
        number = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Valeur numérique invalide pour {key}: {value!r}") from exc
    if kind is int:
        if not number.is_integer():
            raise ConfigError(f"Valeur entière attendue pour {key}: {value!r}")
        return int(number)
    return number


@dataclass(frozen=True)
class PipelineConfig:
    """Parameters of one pipeline run; every field has a documented default."""

    filter_kind: str = "median"
    compare_mode: str = "rate"
    emphasis: str = "log"
    combine_rule: str = "halfway"
    window_rule: str = "sqrt"
    smoothing_rule: str = "sturges"
    bcr_threshold: float = 1.0
    sphericity_threshold: float = 1.1
    min_area: int = 0
    bcr_abs_curvature: bool = True
    gray_mode: str = "Y1"
    clearance_radius: int = 1
    curvature_sigma: float = 2.0
    perimeter_rule: str = "chain"
    invert_majority: bool = True
    negate: str = "auto"
    fill_holes: bool = True
    topography: str = "negative"

    def __post_init__(self) -> None:
        for key, allowed in _CHOICES.items():
            value = getattr(self, key)
            if value not in allowed:
                raise ConfigError(
                    f"Valeur invalide pour {key}: {value!r} (attendu: {', '.join(allowed)})"
                )
        for key in _POSITIVE_FLOATS:
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} doit être strictement positif.")
        if self.min_area < 0:
            raise ConfigError("min_area doit être positif ou nul.")
        if self.clearance_radius < 0:
            raise ConfigError("clearance_radius doit être positif ou nul.")
        if self.curvature_sigma < 0:
            raise ConfigError("curvature_sigma doit être positif ou nul.")

    @property
    def applies_negative(self) -> bool:
        if self.negate == "auto":
            return self.filter_kind == "median" and self.emphasis == "log"
        return self.negate == "always"

    @classmethod
    def keys(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        """Build a config from raw values (strings accepted), rejecting unknown keys."""
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"Clé(s) de configuration inconnue(s): {', '.join(unknown)}")
        values: Dict[str, Any] = {}
        for key, raw in data.items():
            default = known[key].default
            if isinstance(default, bool):
                values[key] = _parse_bool(key, raw)
            elif isinstance(default, int):
                values[key] = _parse_number(key, raw, int)
            elif isinstance(default, float):
                values[key] = _parse_number(key, raw, float)
            else:
                values[key] = str(raw).strip()
        return cls(**values)

    def to_dict(self) -> Dict:
        return asdict(self)

    def with_overrides(self, overrides: Dict[str, Any]) -> "PipelineConfig":
        merged = self.to_dict()
        merged.update(overrides)
        return PipelineConfig.from_dict(merged)


@dataclass(eq=False)
class SegmentationResult:
    """Outcome of the pipeline on one image, with its named intermediates."""

    mask: BinaryMask
    labels: LabelMap
    stats: List[RegionStats]
    counts: CellCounts
    stages: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "counts": self.counts.to_dict(),
            "region_count": self.labels.region_count,
            "mask_pixels": self.mask.count(),
            "window": self.stages["window"].to_dict() if "window" in self.stages else None,
            "stats": [stat.to_dict() for stat in self.stats],
        }


@dataclass
class SyntheticSpec:
    """Layout and noise parameters of a synthetic micrograph."""

    width: int = 720
    height: int = 576
    disks: int = 12
    blobs: int = 5
    disk_radius: Tuple[float, float] = (7.0, 9.0)
    blob_major: Tuple[float, float] = (16.0, 22.0)
    blob_minor: Tuple[float, float] = (4.0, 4.5)
    background: float = 0.78
    gradient: float = 0.12
    noise_sigma: float = 0.015
    speck_density: float = 0.0008
    speck_depth: float = 0.5
    cell_depth: float = 0.55
    halo_width: float = 2.0
    halo_gain: float = 0.12
    tint: Tuple[float, float, float] = (1.0, 0.96, 0.9)
    gap: int = 6
    max_attempts: int = 2000

    def __post_init__(self) -> None:
        if self.disks < 0 or self.blobs < 0:
            raise PreconditionError("Les nombres de cellules doivent être positifs ou nuls.")
        if self.width < 1 or self.height < 1:
            raise PreconditionError("Dimensions d'image invalides.")
        for name in ("disk_radius", "blob_major", "blob_minor"):
            low, high = getattr(self, name)
            if not 0 < low <= high:
                raise PreconditionError(f"Intervalle invalide pour {name}: {(low, high)}")
            setattr(self, name, (float(low), float(high)))
        self.tint = tuple(float(t) for t in self.tint)
        if len(self.tint) != 3:
            raise PreconditionError("La teinte comporte exactement trois composantes.")

    @property
    def expected_counts(self) -> CellCounts:
        return CellCounts(spheric=self.disks, nonspheric=self.blobs, rejected=0)

    @classmethod
    def from_dict(cls, data: Dict) -> "SyntheticSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Clé(s) de scène inconnue(s): {', '.join(unknown)}")
        values = dict(data)
        for name in ("disk_radius", "blob_major", "blob_minor", "tint"):
            if name in values:
                values[name] = tuple(values[name])
        return cls(**values)

    def to_dict(self) -> Dict:
        data = asdict(self)
        for name in ("disk_radius", "blob_major", "blob_minor", "tint"):
            data[name] = list(data[name])
        return data
