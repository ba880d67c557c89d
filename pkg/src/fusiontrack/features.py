"""Kernel-weighted color and LBP texture histograms and their likelihoods.

A region is the axis-aligned rectangle of half extents (hx, hy) around a
subpixel center. Every integer pixel center inside it (clipped to the frame)
contributes ``k(dist / H)`` to its bin, with ``k(r) = 1 - r**2`` for r < 1 and
``H = sqrt(hx**2 + hy**2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frame_io import Frame

COLOR_BINS = 512
TEXTURE_BINS = 256

# neighbor offsets (drow, dcol), clockwise from top-left; top-left is the MSB
LBP_NEIGHBORS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


class DegenerateRegionError(ValueError):
    """Region has no pixel with nonzero kernel weight."""


@dataclass(frozen=True)
class RegionSpec:
    center: tuple[float, float]
    half_extents: tuple[float, float]

    def __post_init__(self):
        hx, hy = self.half_extents
        object.__setattr__(self, "half_extents", (max(float(hx), 1.0), max(float(hy), 1.0)))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def H(self) -> float:
        return math.sqrt(self.half_extents[0] ** 2 + self.half_extents[1] ** 2)


@dataclass(frozen=True, eq=False)
class FeatureHistogram:
    bins: np.ndarray
    kind: str  # "color" or "texture"

    @property
    def m(self) -> int:
        return self.bins.shape[0]


def kernel(r):
    """Epanechnikov-style profile: 1 - r^2 inside the unit radius, else 0."""
    r = np.asarray(r, dtype=float)
    out = np.where(r < 1.0, 1.0 - r * r, 0.0)
    return float(out) if out.ndim == 0 else out


def gray_levels(pixels: np.ndarray) -> np.ndarray:
    p = pixels.astype(np.float64)
    return np.rint(0.299 * p[..., 0] + 0.587 * p[..., 1] + 0.114 * p[..., 2]).astype(np.int16)


def color_bin_map(pixels: np.ndarray) -> np.ndarray:
    p = pixels.astype(np.int32) >> 5
    return p[..., 0] * 64 + p[..., 1] * 8 + p[..., 2]


def lbp_code_map(pixels: np.ndarray) -> np.ndarray:
    """8-neighbor LBP code per pixel; the 1-pixel outer border is marked -1."""
    g = gray_levels(pixels)
    h, w = g.shape
    codes = np.full((h, w), -1, dtype=np.int32)
    center = g[1:-1, 1:-1]
    acc = np.zeros_like(center, dtype=np.int32)
    for bit, (dr, dc) in zip(range(7, -1, -1), LBP_NEIGHBORS):
        nb = g[1 + dr:h - 1 + dr, 1 + dc:w - 1 + dc]
        acc |= (nb >= center).astype(np.int32) << bit
    codes[1:-1, 1:-1] = acc
    return codes


class FeatureMaps:
    """Per-frame color-bin and LBP-code maps, computed once and shared by all regions."""

    def __init__(self, frame: Frame):
        self.width = frame.width
        self.height = frame.height
        self.color = color_bin_map(frame.pixels)
        self.texture = lbp_code_map(frame.pixels)

    def histogram(self, kind: str, cx, cy, hx, hy) -> FeatureHistogram:
        if kind == "color":
            return _histogram(self.color, COLOR_BINS, kind, cx, cy, hx, hy, 0)
        if kind == "texture":
            return _histogram(self.texture, TEXTURE_BINS, kind, cx, cy, hx, hy, 1)
        raise ValueError(f"unknown feature kind {kind!r}")


def _histogram(code_map, m, kind, cx, cy, hx, hy, margin) -> FeatureHistogram:
    h, w = code_map.shape
    hx = max(float(hx), 1.0)
    hy = max(float(hy), 1.0)
    x0 = max(math.ceil(cx - hx), margin)
    x1 = min(math.floor(cx + hx), w - 1 - margin)
    y0 = max(math.ceil(cy - hy), margin)
    y1 = min(math.floor(cy + hy), h - 1 - margin)
    if x1 < x0 or y1 < y0:
        raise DegenerateRegionError(f"{kind} region at ({cx:.2f}, {cy:.2f}) is empty after clipping")
    dx2 = (np.arange(x0, x1 + 1) - cx) ** 2
    dy2 = (np.arange(y0, y1 + 1) - cy) ** 2
    r2 = (dy2[:, None] + dx2[None, :]) / (hx * hx + hy * hy)
    k = np.where(r2 < 1.0, 1.0 - r2, 0.0)
    total = k.sum()
    if total <= 0.0:
        raise DegenerateRegionError(f"{kind} region at ({cx:.2f}, {cy:.2f}) has zero kernel mass")
    codes = code_map[y0:y1 + 1, x0:x1 + 1]
    bins = np.bincount(codes.ravel(), weights=k.ravel(), minlength=m) / total
    return FeatureHistogram(bins, kind)


def color_histogram(frame: Frame, region: RegionSpec) -> FeatureHistogram:
    (cx, cy), (hx, hy) = region.center, region.half_extents
    return _histogram(color_bin_map(frame.pixels), COLOR_BINS, "color", cx, cy, hx, hy, 0)


def texture_histogram(frame: Frame, region: RegionSpec) -> FeatureHistogram:
    (cx, cy), (hx, hy) = region.center, region.half_extents
    return _histogram(lbp_code_map(frame.pixels), TEXTURE_BINS, "texture", cx, cy, hx, hy, 1)


def bhattacharyya_coefficient(p: FeatureHistogram, q: FeatureHistogram) -> float:
    if p.kind != q.kind or p.m != q.m:
        raise ValueError(f"cannot compare {p.kind}[{p.m}] with {q.kind}[{q.m}]")
    return float(np.sqrt(p.bins * q.bins).sum())


def _one_minus_rho(sqrt_p: np.ndarray, sqrt_q: np.ndarray) -> float:
    # for normalized p, q: 1 - rho == 0.5 * sum((sqrt p - sqrt q)^2), exactly 0 when p == q
    diff = sqrt_p - sqrt_q
    return min(max(0.5 * float(diff @ diff), 0.0), 1.0)


def bhattacharyya_distance(p: FeatureHistogram, q: FeatureHistogram) -> float:
    if p.kind != q.kind or p.m != q.m:
        raise ValueError(f"cannot compare {p.kind}[{p.m}] with {q.kind}[{q.m}]")
    return math.sqrt(_one_minus_rho(np.sqrt(p.bins), np.sqrt(q.bins)))


def feature_likelihood(d, sigma: float = 0.1):
    """Gaussian density of the histogram distance: exp(-d^2 / 2 sigma^2) / (sqrt(2 pi) sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = np.asarray(d, dtype=float)
    out = np.exp(-d * d / (2.0 * sigma * sigma)) / (math.sqrt(2.0 * math.pi) * sigma)
    return float(out) if out.ndim == 0 else out


def region_likelihoods(maps: FeatureMaps, template: FeatureHistogram, states: np.ndarray,
                       sigma: float) -> np.ndarray:
    """Likelihood of each particle's region against ``template``.

    ``states`` is (N, 7) in the particle layout (lx, vx, ly, vy, hx, hy, a).
    Regions with no usable pixels get likelihood 0.
    """
    sq_q = np.sqrt(template.bins)
    dists = np.ones(states.shape[0])
    valid = np.ones(states.shape[0], dtype=bool)
    for i, s in enumerate(states):
        try:
            p = maps.histogram(template.kind, s[0], s[2], s[4], s[5])
        except DegenerateRegionError:
            valid[i] = False
            continue
        dists[i] = math.sqrt(_one_minus_rho(np.sqrt(p.bins), sq_q))
    return np.where(valid, feature_likelihood(dists, sigma), 0.0)
