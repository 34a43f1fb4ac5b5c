import struct
import zlib

import numpy as np
import pytest

from texsyn import (
    DomainError,
    FormatError,
    TextureGrid,
    ValueDomain,
    binarize,
    binary_grid,
    load_texture,
    model_grid,
    porosity,
    save_texture,
    to_model_range,
)


# --- independent minimal PNG codec (oracle; no Pillow) ----------------------

def _png_chunk(tag, payload):
    return (
        struct.pack(">I", len(payload)) + tag + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def encode_gray_png(arr):
    """Reference encoder: 8-bit grayscale, no interlace, filter 0 rows."""
    h, w = arr.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    raw = b"".join(b"\x00" + arr[r].astype(np.uint8).tobytes() for r in range(h))
    return (
        b"\x89PNG\r\n\x1a\n"
        + _png_chunk(b"IHDR", ihdr)
        + _png_chunk(b"IDAT", zlib.compress(raw))
        + _png_chunk(b"IEND", b"")
    )


def decode_gray_png(data):
    """Reference decoder: parses chunks, inflates, undoes filters 0..4."""
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    pos = 8
    width = height = None
    idat = b""
    while pos < len(data):
        (length,) = struct.unpack_from(">I", data, pos)
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            width, height, depth, color, _, _, interlace = struct.unpack(
                ">IIBBBBB", payload
            )
            assert depth == 8 and color == 0 and interlace == 0
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    raw = zlib.decompress(idat)
    stride = width + 1
    out = np.zeros((height, width), dtype=np.uint8)
    prev = np.zeros(width, dtype=np.int32)
    for r in range(height):
        row = raw[r * stride : (r + 1) * stride]
        ftype = row[0]
        cur = np.frombuffer(row[1:], dtype=np.uint8).astype(np.int32)
        rec = np.zeros(width, dtype=np.int32)
        for c in range(width):
            left = rec[c - 1] if c else 0
            up = prev[c]
            ul = prev[c - 1] if c else 0
            if ftype == 0:
                val = cur[c]
            elif ftype == 1:
                val = cur[c] + left
            elif ftype == 2:
                val = cur[c] + up
            elif ftype == 3:
                val = cur[c] + (left + up) // 2
            elif ftype == 4:
                p = left + up - ul
                pa, pb, pc = abs(p - left), abs(p - up), abs(p - ul)
                if pa <= pb and pa <= pc:
                    val = cur[c] + left
                elif pb <= pc:
                    val = cur[c] + up
                else:
                    val = cur[c] + ul
            else:
                raise AssertionError(f"bad filter {ftype}")
            rec[c] = val & 0xFF
        out[r] = rec.astype(np.uint8)
        prev = rec
    return out


# --- TextureGrid invariants -------------------------------------------------

def test_binary_grid_rejects_other_values():
    with pytest.raises(DomainError):
        binary_grid([[0, 2], [1, 0]])


def test_model_grid_rejects_out_of_range():
    with pytest.raises(DomainError):
        model_grid([[0.0, 1.5]])
    with pytest.raises(DomainError):
        model_grid([[np.nan, 0.0]])


def test_grid_data_is_immutable():
    g = binary_grid([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        g.data[0, 0] = 1


# --- PNG I/O -----------------------------------------------------------------

def test_load_all_white_png(tmp_path):
    # saturation case: every pixel above threshold maps to 1
    path = tmp_path / "white.png"
    path.write_bytes(encode_gray_png(np.full((256, 256), 255, dtype=np.uint8)))
    g = load_texture(path)
    assert g.dims == (256, 256)
    assert g.value_domain is ValueDomain.Binary01
    assert int(g.data.sum()) == 256 * 256


def test_png_threshold_127(tmp_path):
    path = tmp_path / "gray.png"
    arr = np.array([[0, 127, 128, 255]], dtype=np.uint8)
    path.write_bytes(encode_gray_png(arr))
    g = load_texture(path)
    assert g.data.tolist() == [[0, 0, 1, 1]]


def test_png_roundtrip_random(tmp_path):
    rng = np.random.default_rng(11)
    g = binary_grid(rng.integers(0, 2, size=(31, 47)))
    path = tmp_path / "g.png"
    save_texture(g, path)
    assert load_texture(path) == g


def test_saved_png_decodes_with_reference_decoder(tmp_path):
    rng = np.random.default_rng(5)
    g = binary_grid(rng.integers(0, 2, size=(20, 33)))
    path = tmp_path / "g.png"
    save_texture(g, path)
    pixels = decode_gray_png(path.read_bytes())
    assert np.array_equal(pixels, g.data * 255)


def test_save_model_range_rejected(tmp_path):
    g = model_grid(np.zeros((4, 4)))
    with pytest.raises(DomainError):
        save_texture(g, tmp_path / "m.png")


# --- SGRD I/O ----------------------------------------------------------------

def test_sgrd_byte_level_roundtrip(tmp_path):
    # build the file with a byte-level script, then reload and count
    path = tmp_path / "v.sgrd"
    dims = (4, 4, 4)
    payload = bytes([i % 2 for i in range(64)])
    blob = b"SGRD" + bytes([1, 3]) + struct.pack("<3I", *dims) + payload
    path.write_bytes(blob)
    g = load_texture(path)
    assert g.dims == dims
    assert int(g.data.sum()) == 32


def test_sgrd_payload_length_error(tmp_path):
    path = tmp_path / "bad.sgrd"
    blob = b"SGRD" + bytes([1, 3]) + struct.pack("<3I", 4, 4, 4) + bytes(60)
    path.write_bytes(blob)
    with pytest.raises(FormatError, match="payload length"):
        load_texture(path)


def test_sgrd_magic_bytes(tmp_path):
    rng = np.random.default_rng(3)
    g = binary_grid(rng.integers(0, 2, size=(3, 5, 7)))
    path = tmp_path / "v.sgrd"
    save_texture(g, path)
    assert path.read_bytes()[:4] == b"SGRD"
    assert load_texture(path) == g


def test_sgrd_nonzero_maps_to_one(tmp_path):
    path = tmp_path / "v.sgrd"
    blob = b"SGRD" + bytes([1, 2]) + struct.pack("<2I", 2, 2) + bytes([0, 1, 7, 255])
    path.write_bytes(blob)
    g = load_texture(path)
    assert g.data.tolist() == [[0, 1], [1, 1]]


def test_sgrd_bad_magic(tmp_path):
    path = tmp_path / "x.sgrd"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(FormatError, match="magic"):
        load_texture(path)


# --- value-domain conversions -------------------------------------------------

def test_to_model_range_values():
    g = binary_grid([[0, 1], [1, 0]])
    m = to_model_range(g)
    assert m.value_domain is ValueDomain.ModelRange
    assert m.data.tolist() == [[-1.0, 1.0], [1.0, -1.0]]


def test_to_model_range_all_zero():
    m = to_model_range(binary_grid(np.zeros((3, 3), dtype=np.uint8)))
    assert np.all(m.data == -1.0)


def test_to_model_range_requires_binary():
    with pytest.raises(DomainError):
        to_model_range(model_grid(np.zeros((2, 2))))


def test_binarize_examples():
    m = model_grid(np.array([[-0.9, 0.1, 0.0]]))
    b = binarize(m, 0.0)
    assert b.data.tolist() == [[0, 1, 0]]
    # strict inequality: values equal to the threshold map to 0
    m2 = model_grid(np.full((2, 2), 0.25, dtype=np.float32))
    assert binarize(m2, 0.25).data.sum() == 0


def test_binarize_threshold_must_be_finite():
    with pytest.raises(DomainError):
        binarize(model_grid(np.zeros((2, 2))), float("nan"))


def test_binarize_inverts_to_model_range():
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = binary_grid(rng.integers(0, 2, size=(9, 6)))
        assert binarize(to_model_range(g), 0.0) == g


def test_binarize_porosity_monotone_in_threshold():
    rng = np.random.default_rng(13)
    m = model_grid(rng.uniform(-1, 1, size=(32, 32)).astype(np.float32))
    last = 1.1
    for thr in np.linspace(-0.95, 0.95, 12):
        phi = porosity(binarize(m, float(thr)))
        assert phi <= last + 1e-12
        last = phi
