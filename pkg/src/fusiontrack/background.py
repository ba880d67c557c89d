"""Per-pixel adaptive Gaussian-mixture background model and blob detection.

Each pixel keeps up to K components, each with an RGB mean, one scalar
variance shared by the three channels, and a weight. Components are kept
sorted by weight / sigma, and the leading components that together first
exceed ``background_fraction`` of the weight make up the background.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .frame_io import Frame


@dataclass
class GMMParams:
    n_components: int = 4
    alpha: float = 0.01
    match_sigma: float = 2.5
    background_fraction: float = 0.7
    variance_floor: float = 4.0
    initial_variance: float = 225.0
    initial_weight: float = 0.05
    min_blob_area: int = 50
    burn_in_frames: int = 30


@dataclass(frozen=True)
class Detection:
    center: tuple[float, float]
    half_extents: tuple[float, float]
    area: int

    @property
    def box(self) -> tuple[float, float, float, float]:
        return (*self.center, *self.half_extents)


class BackgroundModel:
    """Mixture state for every pixel of a fixed-size frame.

    ``workers > 1`` splits the update into row bands processed on a thread
    pool. Pixels never read each other's state, so the result is identical
    to the sequential update.
    """

    def __init__(self, params: GMMParams | None = None, workers: int = 1):
        self.params = params or GMMParams()
        self.workers = max(int(workers), 1)
        self.means = None
        self.variances = None
        self.weights = None

    @property
    def initialized(self) -> bool:
        return self.means is not None

    @property
    def shape(self):
        return None if self.means is None else self.means.shape[:2]

    def _seed(self, pixels: np.ndarray) -> None:
        h, w = pixels.shape[:2]
        k = self.params.n_components
        self.means = np.zeros((h, w, k, 3))
        self.means[:, :, 0, :] = pixels
        self.variances = np.full((h, w, k), self.params.initial_variance)
        self.weights = np.zeros((h, w, k))
        self.weights[:, :, 0] = 1.0

    def update_and_classify(self, frame: Frame) -> np.ndarray:
        """Fold ``frame`` into the model and return its foreground mask."""
        pixels = frame.pixels
        if not self.initialized:
            self._seed(pixels)
            return np.zeros(frame.shape, dtype=bool)
        if frame.shape != self.shape:
            raise ValueError(f"frame is {frame.width}x{frame.height}, model is {self.shape[1]}x{self.shape[0]}")
        mask = np.empty(frame.shape, dtype=bool)
        h = frame.height
        if self.workers == 1:
            self._update_rows(pixels, 0, h, mask)
        else:
            bounds = np.linspace(0, h, self.workers + 1).astype(int)
            with ThreadPoolExecutor(self.workers) as pool:
                list(pool.map(lambda b: self._update_rows(pixels, b[0], b[1], mask),
                              zip(bounds[:-1], bounds[1:])))
        return mask

    def _update_rows(self, pixels, r0, r1, mask) -> None:
        if r1 <= r0:
            return
        p = self.params
        x = pixels[r0:r1].astype(np.float64)
        mu = self.means[r0:r1]
        var = self.variances[r0:r1]
        w = self.weights[r0:r1]

        d2 = ((x[:, :, None, :] - mu) ** 2).sum(axis=-1)
        ok = (w > 0) & (d2 <= p.match_sigma ** 2 * var)
        best = np.argmin(np.where(ok, d2 / var, np.inf), axis=-1)
        matched = ok.any(axis=-1)
        hit = np.zeros(w.shape, dtype=bool)
        np.put_along_axis(hit, best[..., None], matched[..., None], axis=-1)

        w *= 1.0 - p.alpha
        w += p.alpha * hit
        a = p.alpha
        mu_hit = mu + a * (x[:, :, None, :] - mu)
        mu[hit] = mu_hit[hit]
        resid = ((x[:, :, None, :] - mu) ** 2).sum(axis=-1) / 3.0
        var[hit] = np.maximum((1.0 - a) * var[hit] + a * resid[hit], p.variance_floor)

        miss = ~matched
        if miss.any():
            weakest = np.argmin(w, axis=-1)
            rows, cols = np.nonzero(miss)
            ks = weakest[rows, cols]
            mu[rows, cols, ks] = x[rows, cols]
            var[rows, cols, ks] = p.initial_variance
            w[rows, cols, ks] = p.initial_weight
        w /= w.sum(axis=-1, keepdims=True)

        fitness = w / np.sqrt(var)
        order = np.argsort(-fitness, axis=-1, kind="stable")
        w[...] = np.take_along_axis(w, order, axis=-1)
        var[...] = np.take_along_axis(var, order, axis=-1)
        mu[...] = np.take_along_axis(mu, order[..., None], axis=-2)

        # background = leading components until cumulative weight exceeds T
        before = np.cumsum(w, axis=-1) - w
        is_bg = before < p.background_fraction
        rank = np.argmax(order == best[..., None], axis=-1)
        bg = np.take_along_axis(is_bg, rank[..., None], axis=-1)[..., 0]
        mask[r0:r1] = ~(matched & bg)


def majority_filter(mask: np.ndarray) -> np.ndarray:
    """3x3 majority vote (>= 5 of 9); out-of-frame neighbors count as false."""
    votes = ndimage.convolve(mask.astype(np.uint8), np.ones((3, 3), dtype=np.uint8),
                             mode="constant", cval=0)
    return votes >= 5


def extract_detection(mask: np.ndarray, min_blob_area: int = 50, cleanup: bool = True) -> Detection | None:
    """Bounding box of the largest 8-connected blob with at least ``min_blob_area`` pixels."""
    m = majority_filter(mask) if cleanup else np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(m, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return None
    areas = np.bincount(labels.ravel())[1:]
    best = int(np.argmax(areas))
    if areas[best] < min_blob_area:
        return None
    ys, xs = np.nonzero(labels == best + 1)
    x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    return Detection(
        center=((x0 + x1) / 2.0, (y0 + y1) / 2.0),
        half_extents=((x1 - x0 + 1) / 2.0, (y1 - y0 + 1) / 2.0),
        area=int(areas[best]),
    )


class BackgroundDetector:
    """Runs the mixture model frame by frame and reports the first usable detection.

    Detections are suppressed for the first ``burn_in_frames`` frames.
    """

    def __init__(self, params: GMMParams | None = None, workers: int = 1):
        self.params = params or GMMParams()
        self.model = BackgroundModel(self.params, workers=workers)
        self.frames_seen = 0
        self.last_mask = None

    def process(self, frame: Frame) -> Detection | None:
        self.last_mask = self.model.update_and_classify(frame)
        self.frames_seen += 1
        if self.frames_seen <= self.params.burn_in_frames:
            return None
        return extract_detection(self.last_mask, self.params.min_blob_area)
