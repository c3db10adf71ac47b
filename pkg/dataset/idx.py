"""IDX container parsing (the MNIST file format).

Data format (big endian):
  u32  | magic (0x00000803 images, 0x00000801 labels)
  u32  | item count
  u32  | rows, u32 | cols   (images only)
  u8[] | payload, row-wise

Files may be gzip-compressed; compression is detected by the 0x1f8b prefix.
"""
import gzip
import struct
from dataclasses import dataclass
from typing import List

import numpy as np

from utils.errors import IdxFormatError, IdxLengthError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
GZIP_PREFIX = b'\x1f\x8b'


@dataclass(frozen=True)
class IdxHeader:
    magic: int
    dims: List[int]

    @property
    def header_size(self) -> int:
        return 4 * (1 + len(self.dims))

    @property
    def payload_size(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))


def maybe_decompress(data: bytes) -> bytes:
    """Transparently inflate gzip content."""
    if data[:2] == GZIP_PREFIX:
        return gzip.decompress(data)
    return data


def read_header(data: bytes, expected_magic: int, ndims: int) -> IdxHeader:
    if len(data) < 4:
        raise IdxLengthError(4 * (1 + ndims), len(data))

    magic, = struct.unpack('>I', data[:4])
    if magic != expected_magic:
        raise IdxFormatError(expected_magic, magic)

    header_size = 4 * (1 + ndims)
    if len(data) < header_size:
        raise IdxLengthError(header_size, len(data))

    dims = list(struct.unpack('>' + 'I' * ndims, data[4:header_size]))
    return IdxHeader(magic=magic, dims=dims)


def _payload(data: bytes, header: IdxHeader) -> np.ndarray:
    expected = header.header_size + header.payload_size
    if len(data) < expected:
        raise IdxLengthError(expected, len(data))
    return np.frombuffer(data, dtype=np.uint8, count=header.payload_size, offset=header.header_size)


def parse_idx_images(data: bytes) -> np.ndarray:
    """Raw u8 images, shape (count, rows, cols), in file order."""
    data = maybe_decompress(data)
    header = read_header(data, IMAGE_MAGIC, 3)
    count, rows, cols = header.dims
    return _payload(data, header).reshape(count, rows, cols)


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Class labels in file order."""
    data = maybe_decompress(data)
    header = read_header(data, LABEL_MAGIC, 1)
    return _payload(data, header).astype(np.int64)


def read_idx_file(path: str) -> bytes:
    with open(path, 'rb') as f:
        return f.read()
