import numpy as np
import pytest

from core.errors import ImageFormatError
from core.soft_raster import BinaryMask, SoftSilhouette
from utils.image_utils import (
    GrayscaleImage,
    image_to_mask,
    mask_to_image,
    read_pgm,
    silhouette_to_image,
    write_pgm,
    write_ppm,
)


@pytest.fixture
def ramp():
    return GrayscaleImage.from_array(np.arange(256, dtype=np.uint8).reshape(16, 16))


class TestPgm:
    def test_write_then_read_keeps_every_byte(self, ramp, tmp_path):
        path = tmp_path / "ramp.pgm"
        write_pgm(ramp, path)
        assert path.read_bytes().startswith(b"P5")
        assert read_pgm(path) == ramp

    def test_header_with_comment(self, tmp_path):
        path = tmp_path / "commented.pgm"
        path.write_bytes(b"P5\n# made by hand\n3 2\n255\n" + bytes([0, 10, 20, 30, 40, 255]))
        image = read_pgm(path)
        assert (image.width, image.height) == (3, 2)
        np.testing.assert_array_equal(image.as_array(), [[0, 10, 20], [30, 40, 255]])

    def test_ascii_pgm_rejected(self, tmp_path):
        path = tmp_path / "ascii.pgm"
        path.write_bytes(b"P2\n2 1\n255\n0 255\n")
        with pytest.raises(ImageFormatError):
            read_pgm(path)

    def test_maxval_must_be_255(self, tmp_path):
        path = tmp_path / "deep.pgm"
        path.write_bytes(b"P5\n2 1\n1023\n" + bytes(4))
        with pytest.raises(ImageFormatError):
            read_pgm(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
        with pytest.raises(ImageFormatError) as info:
            read_pgm(path)
        assert "truncated" in str(info.value)
        assert info.value.exit_code == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_pgm(tmp_path / "missing.pgm")

    def test_value_count_checked(self):
        with pytest.raises(ImageFormatError):
            GrayscaleImage(2, 2, bytes(3))


class TestConversions:
    def test_half_probability_rounds_up(self):
        image = silhouette_to_image(SoftSilhouette(np.array([[0.0, 0.5, 1.0]])))
        assert list(image.values) == [0, 128, 255]

    def test_mask_threshold(self):
        image = GrayscaleImage(4, 1, bytes([0, 127, 128, 255]))
        np.testing.assert_array_equal(image_to_mask(image).values, [[False, False, True, True]])

    def test_mask_to_image(self):
        mask = BinaryMask(np.array([[True, False]]))
        assert mask_to_image(mask).values == bytes([255, 0])

    def test_ppm_output(self, tmp_path):
        path = tmp_path / "color.ppm"
        rgb = np.zeros((2, 3, 3))
        rgb[0, 0] = [1.0, 0.5, 0.0]
        write_ppm(rgb, path)
        data = path.read_bytes()
        assert data.startswith(b"P6")
        assert data[-18:-15] == bytes([255, 128, 0])

    def test_ppm_needs_three_channels(self, tmp_path):
        with pytest.raises(ImageFormatError):
            write_ppm(np.zeros((2, 2)), tmp_path / "gray.ppm")
