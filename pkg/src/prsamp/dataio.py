"""Dataset ingestion and bit-exact binary file formats.

Three formats: big-endian IDX (read only, the standard MNIST container),
a small tagged matrix container (read/write, used for media, patterns,
measurements, and probability maps), and binary P5 graymaps (write only,
for reconstructed images). Readers validate before touching the payload
and report the byte offset at which parsing failed; nothing is silently
truncated or padded.
"""

import struct

import numpy as np

__all__ = [
    "FormatError",
    "load_idx",
    "central_crop",
    "rescale_nearest",
    "make_d1",
    "make_d2",
    "save_matrix",
    "load_matrix",
    "save_image_pgm",
]

_MAGIC = b"SCTM"
_VERSION = 1
_TAG_COMPLEX = 0   # little-endian complex128, 16 bytes per entry
_TAG_REAL = 1      # little-endian float64, 8 bytes per entry
_TAG_BINARY = 2    # one byte per entry, restricted to {0, 1}
_TAG_ITEM_SIZE = {_TAG_COMPLEX: 16, _TAG_REAL: 8, _TAG_BINARY: 1}

_IDX_IMAGES = 0x00000803
_IDX_LABELS = 0x00000801


class FormatError(ValueError):
    """Malformed file content; offset is the byte position of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


def load_idx(path):
    """Parse a big-endian IDX file into a numpy array.

    Magic 0x00000803 yields uint8 images of shape (count, rows, cols);
    magic 0x00000801 yields a uint8 label vector. The declared element
    count must match the file length exactly.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4:
        raise FormatError(
            f"file too short for an IDX magic number ({len(data)} bytes)", offset=0)
    magic = struct.unpack_from(">I", data, 0)[0]
    if magic == _IDX_IMAGES:
        header = 16
        if len(data) < header:
            raise FormatError(
                f"image header needs {header} bytes, file has {len(data)}",
                offset=len(data))
        count, rows, cols = struct.unpack_from(">III", data, 4)
        expected = header + count * rows * cols
        shape = (count, rows, cols)
    elif magic == _IDX_LABELS:
        header = 8
        if len(data) < header:
            raise FormatError(
                f"label header needs {header} bytes, file has {len(data)}",
                offset=len(data))
        count = struct.unpack_from(">I", data, 4)[0]
        expected = header + count
        shape = (count,)
    else:
        raise FormatError(f"bad IDX magic 0x{magic:08x}", offset=0)
    if len(data) != expected:
        raise FormatError(
            f"payload size mismatch: expected {expected} bytes, file has {len(data)}",
            offset=min(len(data), expected))
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(shape).copy()


def _as_stack(images, context):
    arr = np.asarray(images)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"{context}: expected an image or a stack, got shape "
                         f"{np.asarray(images).shape}")
    return arr, single


def central_crop(images, size):
    """Centered size x size crop of one image or a stack of images."""
    arr, single = _as_stack(images, "central_crop")
    if arr.shape[1] < size or arr.shape[2] < size:
        raise ValueError(f"cannot crop {arr.shape[1]}x{arr.shape[2]} images "
                         f"to {size}x{size}")
    r0 = (arr.shape[1] - size) // 2
    c0 = (arr.shape[2] - size) // 2
    out = arr[:, r0:r0 + size, c0:c0 + size]
    return out[0] if single else out


def rescale_nearest(images, size):
    """Nearest-neighbor resample to size x size (identity when sizes match).

    Output pixel centers are mapped back into the source grid, so the
    sampling is symmetric and resampling to the same size changes nothing.
    """
    arr, single = _as_stack(images, "rescale_nearest")
    rows = np.floor((np.arange(size) + 0.5) * arr.shape[1] / size).astype(int)
    cols = np.floor((np.arange(size) + 0.5) * arr.shape[2] / size).astype(int)
    out = arr[:, rows[:, None], cols[None, :]]
    return out[0] if single else out


def _to_unit(arr):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.size and arr.max() > 1.0:
        arr = arr / 255.0
    return arr


def make_d1(images):
    """28x28 grayscale digits to centered 20x20 binary patterns.

    Central crop keeps rows and columns 4..23, then pixels are scaled to
    [0, 1] and thresholded at 0.5.
    """
    arr, single = _as_stack(images, "make_d1")
    if arr.shape[1:] != (28, 28):
        raise ValueError(f"make_d1 expects 28x28 images, got {arr.shape[1]}x{arr.shape[2]}")
    out = (_to_unit(central_crop(arr, 20)) >= 0.5).astype(np.float64)
    return out[0] if single else out


def make_d2(images):
    """28x28 grayscale digits to 32x32 binary patterns (nearest-neighbor)."""
    arr, single = _as_stack(images, "make_d2")
    if arr.shape[1:] != (28, 28):
        raise ValueError(f"make_d2 expects 28x28 images, got {arr.shape[1]}x{arr.shape[2]}")
    out = (_to_unit(rescale_nearest(arr, 32)) >= 0.5).astype(np.float64)
    return out[0] if single else out


def save_matrix(path, matrix):
    """Write a 2-D array to the tagged container; the tag is inferred.

    Complex input is stored as complex128 (tag 0), floats as float64
    (tag 1), and bool/integer arrays as one byte per entry (tag 2, values
    must be 0 or 1). Round trips through load_matrix are bit-exact.
    """
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise ValueError(f"save_matrix needs a 2-D array, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        tag = _TAG_COMPLEX
        payload = np.ascontiguousarray(arr, dtype="<c16").tobytes()
    elif arr.dtype == np.bool_ or np.issubdtype(arr.dtype, np.integer):
        if np.any((arr != 0) & (arr != 1)):
            raise ValueError("binary storage requires values in {0, 1}")
        tag = _TAG_BINARY
        payload = np.ascontiguousarray(arr, dtype=np.uint8).tobytes()
    else:
        tag = _TAG_REAL
        payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    header = _MAGIC + bytes((_VERSION, tag)) + struct.pack(
        "<II", arr.shape[0], arr.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_matrix(path):
    """Read a matrix written by save_matrix; dtype follows the stored tag."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 14:
        raise FormatError(
            f"container header needs 14 bytes, file has {len(data)}",
            offset=len(data))
    if data[:4] != _MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {_MAGIC!r}", offset=0)
    if data[4] != _VERSION:
        raise FormatError(f"unsupported version {data[4]}", offset=4)
    tag = data[5]
    if tag not in _TAG_ITEM_SIZE:
        raise FormatError(f"unknown dtype tag {tag}", offset=5)
    rows, cols = struct.unpack_from("<II", data, 6)
    expected = 14 + rows * cols * _TAG_ITEM_SIZE[tag]
    if len(data) != expected:
        raise FormatError(
            f"payload size mismatch: expected {expected} bytes, file has {len(data)}",
            offset=min(len(data), expected))
    if tag == _TAG_COMPLEX:
        return np.frombuffer(data, dtype="<c16", offset=14).reshape(
            rows, cols).astype(np.complex128)
    if tag == _TAG_REAL:
        return np.frombuffer(data, dtype="<f8", offset=14).reshape(
            rows, cols).astype(np.float64)
    payload = np.frombuffer(data, dtype=np.uint8, offset=14)
    bad = np.flatnonzero(payload > 1)
    if bad.size:
        raise FormatError(
            f"binary payload value {payload[bad[0]]} is not in {{0, 1}}",
            offset=14 + int(bad[0]))
    return payload.reshape(rows, cols).copy()


def save_image_pgm(path, image):
    """Write a binary P5 graymap, maxval 255; input is binary or [0,1] gray."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"PGM image must be 2-D and nonempty, got shape {arr.shape}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("PGM input values must lie in [0, 1]")
    pixels = np.rint(arr * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
