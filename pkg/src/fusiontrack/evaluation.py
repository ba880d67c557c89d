"""Per-frame comparison of a tracked box sequence against ground truth."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

BOX_COLUMNS = ("frame", "cx", "cy", "hx", "hy")
ERROR_HEADER = ("frame", "center_error", "hx_error", "hy_error")


@dataclass
class EvalResult:
    # (frame, center error, |hx - hx_true|, |hy - hy_true|) over the overlapping frames
    rows: list[tuple[int, float, float, float]]

    @property
    def mean_center_error(self) -> float:
        return sum(r[1] for r in self.rows) / len(self.rows)

    @property
    def mean_extent_error(self) -> float:
        """Mean absolute half-extent error, averaged over both axes."""
        return sum(r[2] + r[3] for r in self.rows) / (2 * len(self.rows))


def read_boxes(path) -> dict[int, tuple[float, float, float, float]]:
    """Read ``frame,cx,cy,hx,hy[,...]`` rows keyed by frame; extra columns are ignored."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in BOX_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        out = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                out[int(row["frame"])] = tuple(float(row[c]) for c in BOX_COLUMNS[1:])
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{lineno}: malformed row") from None
    return out


def evaluate(track: dict, truth: dict) -> EvalResult:
    common = sorted(set(track) & set(truth))
    if not common:
        raise ValueError("track and ground truth share no frames")
    rows = []
    for f in common:
        cx, cy, hx, hy = track[f]
        tx, ty, thx, thy = truth[f]
        rows.append((f, math.hypot(cx - tx, cy - ty), abs(hx - thx), abs(hy - thy)))
    return EvalResult(rows)


def write_errors_csv(path, result: EvalResult) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(ERROR_HEADER)
        for f, e, ex, ey in result.rows:
            wr.writerow([f, repr(e), repr(ex), repr(ey)])
