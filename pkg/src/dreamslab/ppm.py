"""Binary PPM (P6) and PGM (P5) image serialization.

Float images live in [0, 1]; encoding is linear to [0, 255] with round-half-up,
so a pixel value of 0.5 maps to 128. Decoding divides by 255.
"""

from __future__ import annotations

import os

import numpy as np


def _encode_u8(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_ppm(path: str | os.PathLike, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) rgb image, got {rgb.shape}")
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(_encode_u8(rgb).tobytes())


def write_pgm(path: str | os.PathLike, gray: np.ndarray) -> None:
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ValueError(f"expected (H, W) gray image, got {gray.shape}")
    h, w = gray.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(_encode_u8(gray).tobytes())


def _read_header(f) -> tuple[bytes, int, int, int]:
    # header tokens may be separated by any whitespace and '#' comments
    tokens: list[bytes] = []
    while len(tokens) < 4:
        chunk = f.read(1)
        if not chunk:
            raise ValueError("truncated netpbm header")
        if chunk == b"#":
            while chunk not in (b"\n", b""):
                chunk = f.read(1)
            continue
        if chunk.isspace():
            continue
        token = chunk
        while True:
            c = f.read(1)
            if not c or c.isspace():
                break
            token += c
        tokens.append(token)
    magic = tokens[0]
    w, h, maxval = (int(t) for t in tokens[1:4])
    return magic, w, h, maxval


def read_ppm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        magic, w, h, maxval = _read_header(f)
        if magic != b"P6" or maxval != 255:
            raise ValueError(f"unsupported ppm: magic={magic!r} maxval={maxval}")
        data = np.frombuffer(f.read(w * h * 3), dtype=np.uint8)
    if data.size != w * h * 3:
        raise ValueError("truncated ppm payload")
    return data.reshape(h, w, 3).astype(np.float64) / 255.0


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        magic, w, h, maxval = _read_header(f)
        if magic != b"P5" or maxval != 255:
            raise ValueError(f"unsupported pgm: magic={magic!r} maxval={maxval}")
        data = np.frombuffer(f.read(w * h), dtype=np.uint8)
    if data.size != w * h:
        raise ValueError("truncated pgm payload")
    return data.reshape(h, w).astype(np.float64) / 255.0
