"""CSV tables: the views manifest and the loss history."""

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import pandas as pd

from core.camera import Camera
from core.errors import ManifestError
from core.losses import LossReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST_COLUMNS = ["azimuth_deg", "elevation_deg", "distance", "image_path"]
LOSS_HISTORY_COLUMNS = ["iter", "iou", "laplacian", "flattening", "color", "total"]
# Round-trip precision for doubles
FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class ManifestEntry:
    azimuth: float
    elevation: float
    distance: float
    image_path: Path


def write_manifest(entries: Sequence[Tuple[Camera, PathLike]], manifest_path: PathLike) -> None:
    """One row per view; image paths are stored relative to the manifest's directory"""
    manifest_path = Path(manifest_path)
    base = manifest_path.resolve().parent
    rows = []
    for camera, image_path in entries:
        image_path = Path(image_path).resolve()
        try:
            stored = image_path.relative_to(base)
        except ValueError:
            stored = image_path
        rows.append({
            "azimuth_deg": camera.azimuth,
            "elevation_deg": camera.elevation,
            "distance": camera.distance,
            "image_path": stored.as_posix(),
        })
    pd.DataFrame(rows, columns=MANIFEST_COLUMNS).to_csv(manifest_path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote manifest {manifest_path} with {len(rows)} views")


def _parser_error_line(error: Exception) -> Union[int, None]:
    match = re.search(r"line (\d+)", str(error))
    return int(match.group(1)) if match else None


def read_manifest(manifest_path: PathLike) -> List[ManifestEntry]:
    """Parse and validate a views manifest; errors name the offending line"""
    manifest_path = Path(manifest_path)
    try:
        frame = pd.read_csv(manifest_path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ManifestError(f"{manifest_path} is empty") from None
    except pd.errors.ParserError as e:
        raise ManifestError(f"{manifest_path}: malformed row", _parser_error_line(e)) from e

    missing = [column for column in MANIFEST_COLUMNS if column not in frame.columns]
    if missing:
        raise ManifestError(f"{manifest_path}: missing columns {missing}", 1)
    if frame.empty:
        raise ManifestError(f"{manifest_path} lists no views")
    # Short rows come back as NaN
    frame = frame.fillna("")

    base = manifest_path.parent
    entries = []
    for index, row in frame.iterrows():
        # Header is line 1
        line_number = int(index) + 2
        try:
            azimuth = float(row["azimuth_deg"])
            elevation = float(row["elevation_deg"])
            distance = float(row["distance"])
        except ValueError:
            raise ManifestError(f"{manifest_path}: non-numeric camera value", line_number) from None
        if not all(math.isfinite(value) for value in (azimuth, elevation, distance)) or distance <= 0:
            raise ManifestError(f"{manifest_path}: invalid camera values", line_number)

        image_path = row["image_path"].strip()
        if not image_path:
            raise ManifestError(f"{manifest_path}: empty image_path", line_number)
        resolved = Path(image_path)
        if not resolved.is_absolute():
            resolved = base / resolved
        entries.append(ManifestEntry(azimuth, elevation, distance, resolved))

    logger.debug(f"Read manifest {manifest_path}: {len(entries)} views")
    return entries


def loss_history_frame(history: Sequence[LossReport]) -> pd.DataFrame:
    rows = [report.as_row(iteration) for iteration, report in enumerate(history)]
    return pd.DataFrame(rows, columns=LOSS_HISTORY_COLUMNS)


def write_loss_history(history: Sequence[LossReport], path: PathLike) -> None:
    """Header plus one row per iteration; color is left blank when not fitted"""
    loss_history_frame(history).to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
    logger.debug(f"Wrote loss history {path} with {len(history)} rows")
