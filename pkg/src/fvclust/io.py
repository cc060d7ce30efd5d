"""Readers and writers for edge lists, partitions, PGM images and tables."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from .clustering import Partition
from .exceptions import ParseError
from .graphs import EdgeListGraph

log = logging.getLogger(__name__)


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def load_edge_list(path, n=None):
    """Read ``u v [w]`` lines (0-based ids, ``#`` starts a comment).

    Duplicate edges are merged by summing their weights and self-loops are
    dropped.
    """
    us, vs, ws = [], [], []
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 'u v [w]', got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise ParseError(f"cannot parse {line!r}", lineno) from None
        if u < 0 or v < 0:
            raise ParseError("vertex ids must be non-negative", lineno)
        if not np.isfinite(w) or w <= 0:
            raise ParseError("edge weight must be positive", lineno)
        us.append(u)
        vs.append(v)
        ws.append(w)
    return EdgeListGraph.from_edges(us, vs, ws, n=n)


def save_edge_list(path, graph):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={graph.n} m={graph.m}\n")
        unit = np.all(graph.w == 1.0)
        for u, v, w in zip(graph.u, graph.v, graph.w):
            fh.write(f"{u} {v}\n" if unit else f"{u} {v} {w:.17g}\n")


def load_partition(path):
    """Read one integer label per line; gaps in the label set are compacted."""
    labels = []
    for lineno, line in _data_lines(path):
        try:
            lab = int(line)
        except ValueError:
            raise ParseError(f"expected an integer label, got {line!r}", lineno) from None
        if lab < 0:
            raise ParseError("labels must be non-negative", lineno)
        labels.append(lab)
    if not labels:
        raise ParseError("partition file has no labels")
    labels = np.asarray(labels)
    used = np.unique(labels)
    if used.size != used[-1] + 1:
        log.warning("partition labels have gaps; compacting %d labels", used.size)
        labels = np.searchsorted(used, labels)
    return Partition(labels)


def save_partition(path, p):
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{lab}\n" for lab in p.labels)


def _pgm_tokens(data, start, count):
    """Header tokens of a PGM file, skipping comments."""
    tokens, i = [], start
    while len(tokens) < count:
        while i < len(data) and chr(data[i]).isspace():
            i += 1
        if i >= len(data):
            raise ParseError("truncated PGM header")
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not chr(data[j]).isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i


def load_pgm(path):
    """Read a binary (P5) or ASCII (P2) PGM image, scaled to ``[0, 1]``."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise ParseError("not a P2/P5 PGM file")
    try:
        (w, h, maxval), pos = _pgm_tokens(data, 2, 3)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise ParseError("malformed PGM header") from None
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise ParseError("invalid PGM dimensions or maxval")
    if magic == b"P5":
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        body = data[pos + 1 :]
        need = w * h * np.dtype(dtype).itemsize
        if len(body) < need:
            raise ParseError("truncated PGM pixel data")
        img = np.frombuffer(body[:need], dtype=dtype).reshape(h, w)
    else:
        try:
            vals = [int(tok) for tok in data[pos:].split()]
        except ValueError:
            raise ParseError("non-integer pixel in ASCII PGM") from None
        if len(vals) < w * h:
            raise ParseError("truncated PGM pixel data")
        img = np.asarray(vals[: w * h]).reshape(h, w)
    if img.max(initial=0) > maxval:
        raise ParseError("pixel value exceeds maxval")
    return img.astype(float) / maxval


def save_pgm(path, image, binary=True):
    """Write an image with values in ``[0, 1]`` as 8-bit PGM."""
    img = np.clip(np.rint(np.asarray(image, dtype=float) * 255), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n255\n".encode())
            fh.write(img.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n255\n".encode())
            for row in img:
                fh.write((" ".join(map(str, row)) + "\n").encode())


def write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(path, rows, fieldnames=None):
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
