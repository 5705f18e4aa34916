"""Per-frame dynamic-point labels and their two file formats.

A label is a frame timestamp plus the sorted pixel indices (v * w + u) of the
points judged dynamic.  The JSON-lines form is the interchange format shared
by predictions, ground truth, and the annotation UI; the binary form mirrors
it compactly.  Both round-trip losslessly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

LABEL_MAGIC = b"DYNL"


@dataclass
class DynamicLabel:
    timestamp: float
    indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint32))

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.size and (np.any(idx < 0) or np.any(np.diff(idx.astype(np.int64)) <= 0)):
            raise ValueError("label indices must be sorted, unique, and non-negative")
        self.indices = idx.astype(np.uint32)

    def __len__(self) -> int:
        return int(self.indices.size)

    def pixel_set(self) -> set[int]:
        return set(int(i) for i in self.indices)


def label_from_pixels(timestamp: float, pixels, w: int) -> DynamicLabel:
    """Build a label from (u, v) pixel pairs; deduplicates and sorts."""
    flat = sorted({int(v) * w + int(u) for u, v in pixels})
    return DynamicLabel(timestamp, np.array(flat, dtype=np.uint32))


def label_from_mask(timestamp: float, mask: np.ndarray) -> DynamicLabel:
    """Build a label from a boolean (h, w) mask; raster order is already sorted."""
    return DynamicLabel(timestamp, np.flatnonzero(mask.ravel()).astype(np.uint32))


def write_labels_jsonl(labels: list[DynamicLabel], path) -> None:
    """One frame per line: {"t": <seconds>, "idx": [<pixel indices>]}.

    Compact separators keep the byte stream deterministic for a given label
    sequence, which the annotation round-trip tests rely on.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(encode_label_line(label) + "\n")


def encode_label_line(label: DynamicLabel) -> str:
    return json.dumps({"t": label.timestamp,
                       "idx": [int(i) for i in label.indices]},
                      separators=(",", ":"))


def decode_label_line(line: str, lineno: int = 0) -> DynamicLabel:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict) or "t" not in obj or "idx" not in obj:
        raise FormatError(f"line {lineno}: expected object with 't' and 'idx'")
    try:
        return DynamicLabel(float(obj["t"]),
                            np.array(sorted(set(int(i) for i in obj["idx"])), dtype=np.uint32))
    except (TypeError, ValueError) as exc:
        raise FormatError(f"line {lineno}: bad label fields: {exc}") from exc


def read_labels_jsonl(path) -> list[DynamicLabel]:
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            labels.append(decode_label_line(line, lineno))
    return labels


def write_labels_binary(labels: list[DynamicLabel], path) -> None:
    """Magic "DYNL", then per frame: f64 timestamp, u32 count, count x u32.

    Little-endian throughout.
    """
    with open(path, "wb") as fh:
        fh.write(LABEL_MAGIC)
        for label in labels:
            fh.write(struct.pack("<dI", label.timestamp, len(label)))
            fh.write(label.indices.astype("<u4").tobytes())


def read_labels_binary(path) -> list[DynamicLabel]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != LABEL_MAGIC:
        raise FormatError("bad magic, not a label file", offset=0)
    labels = []
    pos = 4
    while pos < len(data):
        if pos + 12 > len(data):
            raise FormatError(f"truncated header for frame {len(labels)}", offset=pos)
        t, count = struct.unpack_from("<dI", data, pos)
        pos += 12
        end = pos + 4 * count
        if end > len(data):
            raise FormatError(f"truncated index block for frame {len(labels)}", offset=pos)
        idx = np.frombuffer(data[pos:end], dtype="<u4")
        if idx.size and np.any(np.diff(idx.astype(np.int64)) <= 0):
            raise FormatError(f"indices not sorted/unique in frame {len(labels)}", offset=pos)
        labels.append(DynamicLabel(t, idx.astype(np.uint32)))
        pos = end
    return labels
