"""Frame container plus binary PPM/PGM reading and writing."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MIN_FRAME_DIM = 16


class FrameFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Frame:
    """One RGB observation. ``pixels`` is a read-only (height, width, 3) uint8 array."""

    pixels: np.ndarray
    index: int = 1

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise FrameFormatError(f"expected (height, width, 3) pixels, got shape {px.shape}")
        if px.shape[0] < MIN_FRAME_DIM or px.shape[1] < MIN_FRAME_DIM:
            raise FrameFormatError(
                f"frame must be at least {MIN_FRAME_DIM}x{MIN_FRAME_DIM}, got {px.shape[1]}x{px.shape[0]}"
            )
        if self.index < 1:
            raise FrameFormatError(f"frame index must be >= 1, got {self.index}")
        px = np.array(px, dtype=np.uint8, copy=True)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width


def _read_header_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and comments
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def _parse_netpbm(path: Path, magic: bytes, channels: int) -> np.ndarray:
    data = path.read_bytes()
    tokens = []
    pos = 0
    for _ in range(4):
        tok, pos = _read_header_token(data, pos)
        tokens.append(tok)
    if tokens[0] != magic:
        raise FrameFormatError(f"{path}: not a {magic.decode()} file (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FrameFormatError(f"{path}: malformed header") from None
    if maxval != 255:
        raise FrameFormatError(f"{path}: maxval must be 255, got {maxval}")
    # exactly one whitespace byte after maxval
    pos += 1
    expected = width * height * channels
    raster = data[pos:pos + expected]
    if len(raster) != expected:
        raise FrameFormatError(f"{path}: truncated raster ({len(raster)} of {expected} bytes)")
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width)
    return arr.reshape(height, width, channels)


def read_ppm(path, index: int = 1) -> Frame:
    path = Path(path)
    return Frame(_parse_netpbm(path, b"P6", 3), index=index)


def read_pgm(path) -> np.ndarray:
    return _parse_netpbm(Path(path), b"P5", 1).copy()


def write_ppm(path, pixels) -> None:
    px = np.ascontiguousarray(pixels.pixels if isinstance(pixels, Frame) else pixels, dtype=np.uint8)
    h, w = px.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(px.tobytes())


def write_pgm(path, gray) -> None:
    """Write a 2-D array (bool or uint8) as binary PGM. Booleans map to 0/255."""
    g = np.asarray(gray)
    if g.dtype == bool:
        g = g.astype(np.uint8) * 255
    g = np.ascontiguousarray(g, dtype=np.uint8)
    h, w = g.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(g.tobytes())


_NUM_RE = re.compile(r"(\d+)")


def _sort_key(path: Path):
    nums = _NUM_RE.findall(path.name)
    return (int(nums[-1]) if nums else -1, path.name)


def load_sequence(dir_path, pattern: str = "*.ppm") -> list[Frame]:
    """Load every PPM in ``dir_path`` matching ``pattern``.

    Files are ordered by the last run of digits in the filename, ties broken
    lexicographically, and assigned indices 1..T.
    """
    d = Path(dir_path)
    if not d.is_dir():
        raise FileNotFoundError(f"frame directory not found: {d}")
    paths = sorted((p for p in d.glob(pattern) if p.is_file()), key=_sort_key)
    frames = []
    for i, p in enumerate(paths, start=1):
        frame = read_ppm(p, index=i)
        if frames and frame.shape != frames[0].shape:
            raise FrameFormatError(
                f"{p}: dimensions {frame.width}x{frame.height} differ from "
                f"{frames[0].width}x{frames[0].height}"
            )
        frames.append(frame)
    return frames


def box_outline(height: int, width: int, box) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of a 1-pixel rectangle outline, clipped to the image.

    ``box`` is (cx, cy, hx, hy). The rectangle spans columns
    round(cx - hx)..round(cx + hx) and likewise for rows. If either half extent
    rounds to zero, the outline degenerates to the single center pixel.
    """
    cx, cy, hx, hy = (float(v) for v in box)
    if round(hx) == 0 or round(hy) == 0:
        x, y = int(round(cx)), int(round(cy))
        if 0 <= x < width and 0 <= y < height:
            return np.array([y]), np.array([x])
        return np.array([], dtype=int), np.array([], dtype=int)
    x0, x1 = int(round(cx - hx)), int(round(cx + hx))
    y0, y1 = int(round(cy - hy)), int(round(cy + hy))
    outline = np.zeros((height, width), dtype=bool)
    cols = np.arange(max(x0, 0), min(x1, width - 1) + 1)
    rows = np.arange(max(y0, 0), min(y1, height - 1) + 1)
    if 0 <= y0 < height:
        outline[y0, cols] = True
    if 0 <= y1 < height:
        outline[y1, cols] = True
    if 0 <= x0 < width:
        outline[rows, x0] = True
    if 0 <= x1 < width:
        outline[rows, x1] = True
    return np.nonzero(outline)


def draw_box(frame: Frame, box, color=(255, 255, 255)) -> np.ndarray:
    """Return a copy of the frame's pixels with the box outline painted on."""
    rows, cols = box_outline(frame.height, frame.width, box)
    out = frame.pixels.copy()
    out[rows, cols] = color
    return out


def write_overlay(frame: Frame, box, out_path) -> None:
    """Write ``frame`` with a white outline of ``box`` = (cx, cy, hx, hy) as P6."""
    cx, cy, hx, hy = (float(v) for v in box)
    x0, x1 = round(cx - max(hx, 0.0)), round(cx + max(hx, 0.0))
    y0, y1 = round(cy - max(hy, 0.0)), round(cy + max(hy, 0.0))
    if x1 < 0 or y1 < 0 or x0 > frame.width - 1 or y0 > frame.height - 1:
        raise ValueError(f"box {tuple(box)} does not intersect the {frame.width}x{frame.height} frame")
    write_ppm(out_path, draw_box(frame, box))
