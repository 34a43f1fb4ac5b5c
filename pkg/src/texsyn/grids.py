"""Texture grids and bit-exact file I/O.

A :class:`TextureGrid` is a dense 2D or 3D scalar field.  Axis order is
(row, col) for 2D and (depth, row, col) for 3D, row-major, everywhere in
this package.  Binary grids hold {0, 1} with a declared foreground phase;
model-range grids hold reals in [-1, 1] as produced by a tanh output.

On disk, 2D grids are 8-bit grayscale PNGs and 3D grids use the SGRD
container: magic ``SGRD``, version byte 1, ndim byte, little-endian u32
dims, then one u8 phase value per cell in row-major order.
"""

import enum
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DomainError, FormatError

SGRD_MAGIC = b"SGRD"
SGRD_VERSION = 1
PNG_THRESHOLD = 127  # pixel > 127 counts as foreground


class ValueDomain(enum.Enum):
    Binary01 = "binary01"
    ModelRange = "model_range"


@dataclass(frozen=True)
class TextureGrid:
    """Immutable dense grid with a declared value domain and foreground phase."""

    data: np.ndarray
    value_domain: ValueDomain = ValueDomain.Binary01
    foreground: int = 1

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim not in (2, 3):
            raise FormatError(f"grid must be 2D or 3D, got {data.ndim} dims")
        if any(d <= 0 for d in data.shape):
            raise FormatError(f"grid dims must be positive, got {data.shape}")
        if self.value_domain is ValueDomain.Binary01:
            data = np.ascontiguousarray(data, dtype=np.uint8)
            if data.size and not np.isin(data, (0, 1)).all():
                raise DomainError("Binary01 grid may only contain 0 and 1")
        else:
            data = np.ascontiguousarray(data, dtype=np.float32)
            if not np.isfinite(data).all():
                raise DomainError("ModelRange grid must be finite")
            if data.size and (data.min() < -1.0 or data.max() > 1.0):
                raise DomainError("ModelRange grid must lie in [-1, 1]")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def dims(self):
        return tuple(int(d) for d in self.data.shape)

    @property
    def ndim(self):
        return self.data.ndim

    def foreground_mask(self):
        if self.value_domain is not ValueDomain.Binary01:
            raise DomainError("foreground mask requires a Binary01 grid")
        return self.data == self.foreground

    def __eq__(self, other):
        if not isinstance(other, TextureGrid):
            return NotImplemented
        return (
            self.value_domain is other.value_domain
            and self.foreground == other.foreground
            and self.dims == other.dims
            and np.array_equal(self.data, other.data)
        )

    def __hash__(self):
        return hash((self.dims, self.value_domain, self.foreground))


def binary_grid(data, foreground=1):
    return TextureGrid(np.asarray(data), ValueDomain.Binary01, foreground)


def model_grid(data, foreground=1):
    return TextureGrid(np.asarray(data), ValueDomain.ModelRange, foreground)


# ---------------------------------------------------------------------------
# value-domain conversions
# ---------------------------------------------------------------------------

def to_model_range(grid):
    """Map a Binary01 grid onto tanh's range: 0 -> -1.0, 1 -> +1.0."""
    if grid.value_domain is not ValueDomain.Binary01:
        raise DomainError("to_model_range expects a Binary01 grid")
    data = grid.data.astype(np.float32) * 2.0 - 1.0
    return TextureGrid(data, ValueDomain.ModelRange, grid.foreground)


def binarize(grid, threshold=0.0):
    """Threshold a ModelRange grid: value > threshold becomes 1, else 0."""
    if grid.value_domain is not ValueDomain.ModelRange:
        raise DomainError("binarize expects a ModelRange grid")
    if not np.isfinite(threshold):
        raise DomainError("binarize threshold must be finite")
    data = (grid.data > float(threshold)).astype(np.uint8)
    return TextureGrid(data, ValueDomain.Binary01, grid.foreground)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def load_texture(path):
    """Load a Binary01 grid from a grayscale PNG (2D) or SGRD file (3D).

    PNG pixels above 127 map to 1; SGRD payload bytes map 0 -> 0 and any
    nonzero value -> 1.
    """
    path = str(path)
    if path.lower().endswith(".png"):
        return _load_png(path)
    if path.lower().endswith(".sgrd"):
        return _load_sgrd(path)
    # fall back on sniffing the magic bytes
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:4] == SGRD_MAGIC:
        return _load_sgrd(path)
    if head[:8] == b"\x89PNG\r\n\x1a\n":
        return _load_png(path)
    raise FormatError(f"{path}: not a PNG or SGRD texture file")


def save_texture(grid, path):
    """Write a Binary01 grid; PNG for 2D paths ending .png, SGRD otherwise.

    Round-trips exactly: ``load_texture`` of the written file equals ``grid``.
    """
    if grid.value_domain is not ValueDomain.Binary01:
        raise DomainError("save_texture expects a Binary01 grid; binarize first")
    path = str(path)
    if path.lower().endswith(".png"):
        if grid.ndim != 2:
            raise FormatError("PNG output requires a 2D grid")
        img = Image.fromarray((grid.data * np.uint8(255)), mode="L")
        img.save(path, format="PNG")
    else:
        _save_sgrd(grid, path)


def _load_png(path):
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:  # Pillow raises a zoo of types
        raise FormatError(f"{path}: unreadable PNG ({exc})") from exc
    if img.mode == "1":
        img = img.convert("L")
    if img.mode != "L":
        raise FormatError(
            f"{path}: unsupported PNG mode {img.mode!r}; need 8-bit grayscale"
        )
    arr = np.asarray(img, dtype=np.uint8)
    return TextureGrid((arr > PNG_THRESHOLD).astype(np.uint8), ValueDomain.Binary01)


def _load_sgrd(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 6 or raw[:4] != SGRD_MAGIC:
        raise FormatError(f"{path}: missing SGRD magic")
    version, ndim = raw[4], raw[5]
    if version != SGRD_VERSION:
        raise FormatError(f"{path}: unsupported SGRD version {version}")
    if ndim not in (2, 3):
        raise FormatError(f"{path}: SGRD ndim must be 2 or 3, got {ndim}")
    header_end = 6 + 4 * ndim
    if len(raw) < header_end:
        raise FormatError(f"{path}: truncated SGRD dim header")
    dims = struct.unpack(f"<{ndim}I", raw[6:header_end])
    if any(d == 0 for d in dims):
        raise FormatError(f"{path}: SGRD dims must be positive, got {dims}")
    expected = int(np.prod(dims))
    payload = raw[header_end:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload length {len(payload)} does not match "
            f"dims product {expected}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(dims)
    return TextureGrid((arr != 0).astype(np.uint8), ValueDomain.Binary01)


def _save_sgrd(grid, path):
    dims = grid.dims
    header = SGRD_MAGIC + bytes([SGRD_VERSION, grid.ndim])
    header += struct.pack(f"<{grid.ndim}I", *dims)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(grid.data.astype(np.uint8).tobytes(order="C"))
