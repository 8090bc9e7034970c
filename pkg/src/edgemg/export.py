"""Image and array files: 16-bit PGM previews and raw float64 with JSON sidecars."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["write_pgm", "read_pgm", "write_raw", "read_raw", "write_json"]


def write_pgm(path, img) -> dict:
    """Write a binary 16-bit PGM (P5), min-max scaled to ``0..65535``.

    Returns the scaling as ``{"min": ..., "max": ...}``; a constant image
    maps to all zeros.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-D image")
    lo, hi = float(img.min()), float(img.max())
    span = hi - lo
    scaled = np.zeros(img.shape) if span == 0 else (img - lo) / span
    pix = np.rint(scaled * 65535.0).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(pix.tobytes())
    return {"min": lo, "max": hi}


def read_pgm(path) -> np.ndarray:
    """Read a 16-bit P5 file written by :func:`write_pgm` (raw counts)."""
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5" or int(parts[3]) != 65535:
        raise ValueError(f"{path}: not a 16-bit binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4], dtype=">u2", count=w * h).reshape(h, w)


def _sidecar(path):
    return Path(str(path) + ".json")


def write_raw(path, array, **meta) -> Path:
    """Little-endian float64 dump plus ``<path>.json`` with shape, order and range."""
    a = np.asarray(array, dtype="<f8")
    a.tofile(path)
    info = {
        "dtype": "float64",
        "byte_order": "little",
        "shape": list(a.shape),
        "order": "C",
        "min": float(a.min()) if a.size else None,
        "max": float(a.max()) if a.size else None,
        **meta,
    }
    write_json(_sidecar(path), info)
    return _sidecar(path)


def read_raw(path) -> np.ndarray:
    info = json.loads(_sidecar(path).read_text())
    if info.get("dtype") != "float64":
        raise ValueError(f"{path}: unsupported dtype {info.get('dtype')!r}")
    a = np.fromfile(path, dtype="<f8")
    shape = tuple(info["shape"])
    if a.size != int(np.prod(shape)):
        raise ValueError(f"{path}: {a.size} values, sidecar says shape {shape}")
    return a.reshape(shape)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
