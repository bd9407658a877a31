import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from PIL import Image

from core.errors import ImageFormatError
from core.soft_raster import BinaryMask, SoftSilhouette

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Gray levels at or above this read as solid
MASK_THRESHOLD = 128
_PGM_MAGIC = b"P5"
_PGM_MAXVAL = 255


@dataclass(frozen=True)
class GrayscaleImage:
    """8-bit grayscale image, values in scan-line order"""

    width: int
    height: int
    values: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ImageFormatError(f"image size must be positive, got {self.width}x{self.height}")
        if len(self.values) != self.width * self.height:
            raise ImageFormatError(
                f"{len(self.values)} pixel values for a {self.width}x{self.height} image"
            )

    def as_array(self) -> np.ndarray:
        """Pixels as a (height, width) uint8 array"""
        return np.frombuffer(self.values, dtype=np.uint8).reshape(self.height, self.width)

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "GrayscaleImage":
        pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
        height, width = pixels.shape
        return cls(width, height, pixels.tobytes())


def _pgm_header(data: bytes) -> Tuple[List[int], int]:
    """Width, height and maxval of a binary PGM plus the offset of its raster"""
    if data[:2] != _PGM_MAGIC:
        raise ImageFormatError(f"not a binary PGM (magic {data[:2]!r}, expected {_PGM_MAGIC!r})")

    fields: List[int] = []
    position = 2
    while len(fields) < 3:
        while position < len(data) and data[position:position + 1].isspace():
            position += 1
        if position >= len(data):
            raise ImageFormatError("PGM header is truncated")
        if data[position:position + 1] == b"#":
            end = data.find(b"\n", position)
            position = len(data) if end < 0 else end + 1
            continue
        start = position
        while position < len(data) and data[position:position + 1].isdigit():
            position += 1
        if start == position:
            raise ImageFormatError(f"unexpected byte {data[position:position + 1]!r} in PGM header")
        fields.append(int(data[start:position]))

    # Exactly one whitespace byte separates the header from the raster
    if position >= len(data) or not data[position:position + 1].isspace():
        raise ImageFormatError("PGM header is not terminated by whitespace")
    return fields, position + 1


def read_pgm(path: PathLike) -> GrayscaleImage:
    """Read a binary (P5) PGM with maxval 255"""
    with open(path, "rb") as pgm_file:
        data = pgm_file.read()

    (width, height, maxval), offset = _pgm_header(data)
    if maxval != _PGM_MAXVAL:
        raise ImageFormatError(f"{path}: maxval must be {_PGM_MAXVAL}, got {maxval}")
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: image size must be positive, got {width}x{height}")
    if len(data) - offset < width * height:
        raise ImageFormatError(
            f"{path}: payload truncated, {len(data) - offset} of {width * height} bytes present"
        )

    with Image.open(io.BytesIO(data)) as image:
        image.load()
        pixels = np.asarray(image, dtype=np.uint8)
    return GrayscaleImage.from_array(pixels)


def write_pgm(image: GrayscaleImage, path: PathLike) -> None:
    Image.fromarray(image.as_array()).save(path, format="PPM")
    logger.debug(f"Wrote {image.width}x{image.height} PGM to {path}")


def write_ppm(rgb: np.ndarray, path: PathLike) -> None:
    """Write an RGB image with channels in [0, 1] as binary PPM (P6)"""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ImageFormatError(f"RGB image must have shape (height, width, 3), got {rgb.shape}")
    pixels = np.floor(np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(pixels).save(path, format="PPM")
    logger.debug(f"Wrote {rgb.shape[1]}x{rgb.shape[0]} PPM to {path}")


def silhouette_to_image(silhouette: SoftSilhouette) -> GrayscaleImage:
    """Gray level floor(255 * value + 0.5), so 0.5 maps to 128"""
    values = np.clip(np.asarray(silhouette.values, dtype=np.float64), 0.0, 1.0)
    return GrayscaleImage.from_array(np.floor(255.0 * values + 0.5))


def mask_to_image(mask: BinaryMask) -> GrayscaleImage:
    return GrayscaleImage.from_array(np.where(mask.values, 255, 0))


def image_to_mask(image: GrayscaleImage) -> BinaryMask:
    return BinaryMask(image.as_array() >= MASK_THRESHOLD)
