"""Small self-describing binary container for per-utterance matrices.

Layout (little-endian)::

    magic      8 bytes
    version    uint16
    dim        uint32
    n_frames   uint32
    shift_ms   float64
    length_ms  float64
    id_len     uint16, followed by id_len bytes of UTF-8 utterance id
    labels     dim x int32            (only when the container carries labels)
    payload    n_frames x dim values  (row-major, float32 or float64)

Feature files use float32 payloads without labels; posteriorgram files use
float64 payloads with a unit-id table.
"""

import struct

import numpy as np

from .errors import DimensionMismatchError, MalformedHeaderError, TruncatedPayloadError

VERSION = 1
_FIXED = struct.Struct("<8sHIIddH")


def pack(magic, utterance_id, matrix, frame_shift_ms, frame_length_ms,
         dtype, labels=None):
    matrix = np.ascontiguousarray(matrix, dtype=dtype)
    n_frames, dim = matrix.shape
    uid = utterance_id.encode("utf-8")
    parts = [_FIXED.pack(magic, VERSION, dim, n_frames, float(frame_shift_ms),
                         float(frame_length_ms), len(uid)), uid]
    if labels is not None:
        parts.append(np.asarray(labels, dtype="<i4").tobytes())
    parts.append(matrix.astype(np.dtype(dtype).newbyteorder("<"), copy=False).tobytes())
    return b"".join(parts)


def unpack(data, magic, dtype, expected_dim=None, with_labels=False, source="<bytes>"):
    """Parse a container; returns (utterance_id, matrix, shift, length, labels)."""
    if len(data) < _FIXED.size:
        raise MalformedHeaderError(f"{source}: header truncated or empty ({len(data)} bytes)")
    got_magic, version, dim, n_frames, shift, length, id_len = _FIXED.unpack_from(data, 0)
    if got_magic != magic:
        raise MalformedHeaderError(f"{source}: bad magic {got_magic!r}")
    if version != VERSION:
        raise MalformedHeaderError(f"{source}: unsupported version {version}")
    if expected_dim is not None and dim != expected_dim:
        raise DimensionMismatchError(
            f"{source}: dimension {dim}, expected {expected_dim}")
    if dim == 0:
        raise DimensionMismatchError(f"{source}: zero dimension")
    offset = _FIXED.size
    if len(data) < offset + id_len:
        raise MalformedHeaderError(f"{source}: utterance id truncated")
    try:
        uid = data[offset:offset + id_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedHeaderError(f"{source}: utterance id is not UTF-8") from exc
    offset += id_len
    labels = None
    if with_labels:
        nbytes = 4 * dim
        if len(data) < offset + nbytes:
            raise TruncatedPayloadError(f"{source}: label table truncated")
        labels = np.frombuffer(data, dtype="<i4", count=dim, offset=offset).astype(np.int64)
        offset += nbytes
    item = np.dtype(dtype).itemsize
    need = n_frames * dim * item
    have = len(data) - offset
    if have < need:
        raise TruncatedPayloadError(
            f"{source}: payload has {have} bytes, header promises {need}")
    if have > need:
        raise MalformedHeaderError(f"{source}: {have - need} trailing bytes after payload")
    mat = np.frombuffer(data, dtype=np.dtype(dtype).newbyteorder("<"),
                        count=n_frames * dim, offset=offset)
    mat = mat.astype(dtype).reshape(n_frames, dim)
    return uid, mat, shift, length, labels
