import numpy as np
import pytest
from PIL import Image

from karyoseg import (
    BinaryMask,
    DecodeError,
    GrayImage,
    InvalidArgumentError,
    Kernel,
    decode_gray,
    encode_png,
    load_gray,
    save_gray,
)


def test_gray_image_rejects_bad_shapes():
    with pytest.raises(InvalidArgumentError):
        GrayImage(np.zeros((3,), dtype=np.uint8))
    with pytest.raises(InvalidArgumentError):
        GrayImage(np.zeros((0, 4), dtype=np.uint8))
    with pytest.raises(InvalidArgumentError):
        GrayImage(np.zeros((2, 2), dtype=np.float64))


def test_gray_image_is_read_only():
    img = GrayImage.constant(4, 3, 7)
    assert img.width == 4 and img.height == 3
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1


def test_from_array_range_check():
    with pytest.raises(InvalidArgumentError):
        GrayImage.from_array([[0, 300]])
    img = GrayImage.from_array([[0, 255], [128, 1]])
    assert img.pixels.dtype == np.uint8


def test_mask_area_and_to_gray():
    mask = BinaryMask.from_array([[1, 0], [1, 1]])
    assert mask.area == 3
    gray = mask.to_gray()
    assert gray.pixels.tolist() == [[255, 0], [255, 255]]
    inverted = mask.to_gray(fg=0, bg=255)
    assert inverted.pixels.tolist() == [[0, 255], [0, 0]]


def test_kernel_square_offsets_centered():
    k = Kernel.square(3)
    offs = {tuple(o) for o in k.offsets()}
    assert offs == {(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)}


def test_kernel_square_corner_origin():
    k = Kernel.square(2, origin=(0, 0))
    offs = {tuple(o) for o in k.offsets()}
    assert offs == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_kernel_cross_shape():
    k = Kernel.cross(3)
    offs = {tuple(o) for o in k.offsets()}
    assert offs == {(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)}
    with pytest.raises(InvalidArgumentError):
        Kernel.cross(4)


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    img = GrayImage(rng.integers(0, 256, size=(11, 7), dtype=np.uint8))
    path = tmp_path / "x.png"
    save_gray(img, path)
    back = load_gray(path)
    assert np.array_equal(back.pixels, img.pixels)


def test_encode_decode_round_trip():
    img = GrayImage.from_array([[0, 128], [255, 3]])
    data = encode_png(img)
    back = decode_gray(data)
    assert np.array_equal(back.pixels, img.pixels)


def test_encode_is_deterministic():
    img = GrayImage.constant(9, 5, 200)
    assert encode_png(img) == encode_png(img)


def test_decode_rejects_garbage():
    with pytest.raises(DecodeError):
        decode_gray(b"not a png at all")


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.png"
    path.write_bytes(b"\x89PNG\r\n\x1a\n truncated")
    with pytest.raises(DecodeError):
        load_gray(path)


def test_color_input_converts_by_luma(tmp_path):
    rgb = np.zeros((2, 2, 3), dtype=np.uint8)
    rgb[0, 0] = (255, 0, 0)
    rgb[0, 1] = (0, 255, 0)
    rgb[1, 0] = (0, 0, 255)
    rgb[1, 1] = (255, 255, 255)
    path = tmp_path / "c.png"
    Image.fromarray(rgb, mode="RGB").save(path)
    gray = load_gray(path)
    expected = np.asarray(Image.fromarray(rgb, mode="RGB").convert("L"))
    assert np.array_equal(gray.pixels, expected)
    assert gray.pixels[1, 1] == 255
