"""Persistence helpers: image files, pipeline configuration and result reports."""
from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from domain.errors import ConfigError, ImageReadError, ImageWriteError
from domain.models import BinaryMask, CellCounts, LabelMap, PipelineConfig, RasterImage, SegmentationResult, SyntheticSpec

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".ppm", ".pgm", ".pnm", ".png", ".bmp", ".tif", ".tiff")
COUNTS_HEADER = ("file", "spheric", "nonspheric", "rejected", "total")
_GRAY_MODES = ("1", "L", "LA")
_RGB_MODES = ("RGB", "RGBA", "P", "CMYK", "YCbCr")

Writable = Union[RasterImage, BinaryMask, LabelMap]


# ----------------------------------------------------------------------
# Images
def _decode(handle: Image.Image, source: str) -> RasterImage:
    if handle.mode in _GRAY_MODES:
        pixels = np.asarray(handle.convert("L"))
    elif handle.mode in _RGB_MODES:
        pixels = np.asarray(handle.convert("RGB"))
    else:
        raise ImageReadError(f"Mode d'image non pris en charge ({handle.mode}): {source}")
    return RasterImage.from_uint8(pixels)


def read_image(path: Path) -> RasterImage:
    """Read an 8-bit grayscale or RGB image into [0,1] intensities."""
    path = Path(path)
    try:
        with Image.open(path) as handle:
            handle.load()
            return _decode(handle, str(path))
    except (OSError, UnidentifiedImageError) as exc:
        if isinstance(exc, ImageReadError):
            raise
        raise ImageReadError(f"Image illisible: {path} ({exc})") from exc


def decode_image(payload: bytes) -> RasterImage:
    try:
        with Image.open(io.BytesIO(payload)) as handle:
            handle.load()
            return _decode(handle, "<requête>")
    except (OSError, UnidentifiedImageError) as exc:
        if isinstance(exc, ImageReadError):
            raise
        raise ImageReadError(f"Image illisible ({exc})") from exc


def label_levels(lmap: LabelMap) -> np.ndarray:
    """Grey levels for a label map: 0 stays 0, labels cycle through 1..255."""
    labels = lmap.labels.astype(np.int64)
    return np.where(labels > 0, (labels - 1) % 255 + 1, 0).astype(np.uint8)


def _to_pillow(item: Writable) -> Image.Image:
    if isinstance(item, BinaryMask):
        return Image.fromarray(item.bits.astype(np.uint8) * 255, mode="L")
    if isinstance(item, LabelMap):
        return Image.fromarray(label_levels(item), mode="L")
    return Image.fromarray(item.to_uint8(), mode="L" if item.channels == 1 else "RGB")


def encode_image(item: Writable, image_format: str = "PPM") -> bytes:
    buffer = io.BytesIO()
    _to_pillow(item).save(buffer, format=image_format)
    return buffer.getvalue()


def write_image(path: Path, item: Writable) -> Path:
    """Write an image, mask or label map; the format follows the file suffix."""
    path = Path(path)
    try:
        _to_pillow(item).save(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ImageWriteError(f"Écriture impossible: {path} ({exc})") from exc
    return path


def list_images(source: Path) -> List[Path]:
    """A single file, or the image files of a directory sorted by name."""
    source = Path(source)
    if source.is_file():
        return [source]
    if not source.is_dir():
        raise ImageReadError(f"Entrée introuvable: {source}")
    files = sorted(p for p in source.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        logger.warning("No image found in %s", source)
    return files


# ----------------------------------------------------------------------
# Configuration
def parse_key_values(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are ignored."""
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not separator or not key:
            raise ConfigError(f"{source}:{number}: ligne invalide « {raw.strip()} »")
        if key in values:
            raise ConfigError(f"{source}:{number}: clé en double « {key} »")
        values[key] = value
    return values


def parse_overrides(overrides: Iterable[str]) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for item in overrides:
        key, separator, value = item.partition("=")
        if not separator or not key.strip():
            raise ConfigError(f"Surcharge invalide « {item} » (attendu: clé=valeur)")
        values[key.strip()] = value.strip()
    return values


class ConfigRepository:
    """Loads the pipeline configuration from disk.

    ``.json`` files hold an object; any other file uses ``key = value`` lines.
    Without a path the defaults apply.
    """

    def __init__(self, config_path: Optional[Path] = None) -> None:
        self.config_path = Path(config_path) if config_path is not None else None
        self.config = self._load_config()

    def _load_config(self) -> PipelineConfig:
        if self.config_path is None:
            return PipelineConfig()
        if not self.config_path.exists():
            raise ConfigError(f"Fichier de configuration introuvable: {self.config_path}")
        try:
            text = self.config_path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"Configuration illisible: {self.config_path} ({exc})") from exc
        if self.config_path.suffix.lower() == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"JSON invalide dans {self.config_path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"{self.config_path}: un objet JSON est attendu.")
        else:
            data = parse_key_values(text, str(self.config_path))
        logger.debug("Configuration loaded from %s", self.config_path)
        return PipelineConfig.from_dict(data)

    def load(self, overrides: Sequence[str] = ()) -> PipelineConfig:
        """Configuration with ``key=value`` overrides applied on top of the file."""
        if not overrides:
            return self.config
        return self.config.with_overrides(parse_overrides(overrides))


def load_synthetic_spec(path: Path) -> SyntheticSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Description de scène introuvable: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"Description de scène illisible: {path} ({exc})") from exc
    try:
        return SyntheticSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"Description de scène invalide: {path} ({exc})") from exc


# ----------------------------------------------------------------------
# Results
class ResultRepository:
    """Writes per-image masks, overlays and the counts table into ``out_dir``."""

    def __init__(self, out_dir: Path) -> None:
        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ImageWriteError(f"Répertoire de sortie inutilisable: {self.out_dir} ({exc})") from exc

    def mask_path(self, stem: str) -> Path:
        return self.out_dir / f"{stem}_mask.pgm"

    def overlay_path(self, stem: str) -> Path:
        return self.out_dir / f"{stem}_overlay.ppm"

    def save_result(self, stem: str, result: SegmentationResult) -> None:
        write_image(self.mask_path(stem), result.mask)
        write_image(self.overlay_path(stem), result.stages["overlay"])

    def write_table(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = self.out_dir / name
        try:
            with path.open("w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as exc:
            raise ImageWriteError(f"Écriture impossible: {path} ({exc})") from exc
        return path

    def write_counts(self, rows: Iterable[Tuple[str, CellCounts]], name: str = "counts.csv") -> Path:
        return self.write_table(
            name,
            COUNTS_HEADER,
            ([file, *counts.as_tuple(), counts.total] for file, counts in rows),
        )
