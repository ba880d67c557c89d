"""Dual-feature tracker: color and texture weighting fused by marginal likelihood.

Each step transitions the particles, weights them separately under the
color and texture templates, and mixes the two weight vectors in proportion
to each feature's marginal likelihood. A feature whose marginal likelihood
jumps more than ``abrupt_multiplier`` standard errors away from the mean of
its last five accepted values is flagged as changed. One flagged feature gets
its template re-extracted at the fused estimate; both flagged means the
object is occluded and the tracker coasts on a constant-velocity prediction.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import particle_filter as pf
from .features import DegenerateRegionError, FeatureHistogram, FeatureMaps, region_likelihoods
from .frame_io import Frame

HISTORY_LEN = 5


@dataclass
class TrackerConfig:
    n_particles: int = 200
    seed: int = 42
    sigma_cr: float = 0.1
    sigma_tx: float = 0.1
    noise: pf.TransitionNoise = field(default_factory=pf.TransitionNoise)
    abrupt_multiplier: float = 2.0
    # "stderr": sample std / sqrt(n); "std": plain sample std
    spread: str = "stderr"
    # wipe a feature's likelihood history when its template is replaced
    clear_history_on_update: bool = False
    # "track": displacement of recent estimates per frame; "state": the estimate's own vx, vy
    coast_velocity: str = "track"
    workers: int = 1


def abrupt_change(history, current: float, multiplier: float = 2.0, spread: str = "stderr") -> bool:
    """True when ``current`` lies more than ``multiplier`` spreads from the history mean.

    Needs a full window of five values; anything shorter returns False.
    """
    vals = list(history)
    if len(vals) < HISTORY_LEN:
        return False
    vals = np.asarray(vals[-HISTORY_LEN:], dtype=float)
    mu = vals.mean()
    sd = vals.std(ddof=1)
    if spread == "stderr":
        sd /= math.sqrt(HISTORY_LEN)
    elif spread != "std":
        raise ValueError(f"unknown spread {spread!r}")
    return bool(abs(current - mu) > multiplier * sd)


@dataclass(eq=False)
class TemplateModel:
    color: FeatureHistogram
    texture: FeatureHistogram
    color_history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_LEN))
    texture_history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_LEN))

    def template(self, kind: str) -> FeatureHistogram:
        return self.color if kind == "color" else self.texture

    def history(self, kind: str) -> deque:
        return self.color_history if kind == "color" else self.texture_history

    def replace(self, hist: FeatureHistogram, clear: bool = True) -> None:
        if hist.kind == "color":
            self.color = hist
        else:
            self.texture = hist
        if clear:
            self.history(hist.kind).clear()

    def snapshot(self) -> tuple:
        return (self.color.bins.copy(), self.texture.bins.copy(),
                tuple(self.color_history), tuple(self.texture_history))


def initialize_templates(frame: Frame, detection) -> TemplateModel:
    maps = FeatureMaps(frame)
    (cx, cy), (hx, hy) = detection.center, detection.half_extents
    return TemplateModel(maps.histogram("color", cx, cy, hx, hy),
                         maps.histogram("texture", cx, cy, hx, hy))


@dataclass
class FusionResult:
    pr_cr: float
    pr_tx: float
    s_cr: np.ndarray
    s_tx: np.ndarray
    s_hat: np.ndarray
    weights: np.ndarray


def fuse(states, w_cr, L_cr, w_tx, L_tx, frame_size) -> FusionResult:
    """Combine per-feature posteriors under a uniform prior over the two features."""
    pr_cr = L_cr / (L_cr + L_tx)
    pr_tx = 1.0 - pr_cr
    s_cr = pf.weighted_mean(states, w_cr, frame_size)
    s_tx = pf.weighted_mean(states, w_tx, frame_size)
    s_hat = pr_cr * s_cr + pr_tx * s_tx
    s_hat[pf.A] = pf.area_ratio(s_hat[pf.HX], s_hat[pf.HY], frame_size)
    return FusionResult(pr_cr, pr_tx, s_cr, s_tx, s_hat, pr_cr * w_cr + pr_tx * w_tx)


@dataclass
class FusionRecord:
    frame_index: int
    L_cr: float
    L_tx: float
    Pr_cr: float
    Pr_tx: float
    s_hat_cr: pf.ObjectState
    s_hat_tx: pf.ObjectState
    s_hat: pf.ObjectState
    occluded: bool
    template_updated: str  # "none", "color" or "texture"
    abrupt_cr: bool = False
    abrupt_tx: bool = False
    occlusion_run: int = 0


class FusionTracker:
    """Tracker state after initialization from a detection; call ``step`` once per frame."""

    def __init__(self, frame: Frame, detection, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.frame_size = (frame.width, frame.height)
        self.particles = pf.initialize(detection, self.config.n_particles, self.config.noise,
                                       self.config.seed, self.frame_size)
        self.templates = initialize_templates(frame, detection)
        (cx, cy), (hx, hy) = detection.center, detection.half_extents
        self.estimate = pf.ObjectState(cx, 0.0, cy, 0.0, hx, hy,
                                       float(pf.area_ratio(hx, hy, self.frame_size)))
        self.iteration = 0
        self.occlusion_run = 0
        self.recent = deque([(0, cx, cy)], maxlen=HISTORY_LEN + 1)

    def _likelihoods(self, maps, states):
        cfg = self.config
        jobs = [("color", cfg.sigma_cr), ("texture", cfg.sigma_tx)]
        if cfg.workers <= 1:
            return [region_likelihoods(maps, self.templates.template(k), states, s) for k, s in jobs]
        chunks = np.array_split(np.arange(states.shape[0]), cfg.workers)
        with ThreadPoolExecutor(cfg.workers) as pool:
            out = []
            for kind, sigma in jobs:
                tmpl = self.templates.template(kind)
                parts = pool.map(lambda idx: region_likelihoods(maps, tmpl, states[idx], sigma), chunks)
                out.append(np.concatenate(list(parts)))
            return out

    def _weigh(self, moved, lik):
        try:
            return pf.weight_by_likelihood(moved, lik)
        except pf.TrackLostError:
            return None, 0.0

    def step(self, frame: Frame) -> FusionRecord:
        if (frame.width, frame.height) != self.frame_size:
            raise ValueError("frame size changed during tracking")
        cfg = self.config
        self.iteration += 1
        prior_w = self.particles.weights.copy()
        moved = pf.transition(self.particles, cfg.noise)
        maps = FeatureMaps(frame)
        lik_cr, lik_tx = self._likelihoods(maps, moved.states)
        w_cr, L_cr = self._weigh(moved, lik_cr)
        w_tx, L_tx = self._weigh(moved, lik_tx)

        tm = self.templates
        abrupt_cr = w_cr is None or abrupt_change(tm.color_history, L_cr, cfg.abrupt_multiplier, cfg.spread)
        abrupt_tx = w_tx is None or abrupt_change(tm.texture_history, L_tx, cfg.abrupt_multiplier, cfg.spread)

        if abrupt_cr and abrupt_tx:
            return self._coast(frame, moved, prior_w, L_cr, L_tx, w_cr, w_tx)

        if w_cr is None:
            w_cr = prior_w
        if w_tx is None:
            w_tx = prior_w
        res = fuse(moved.states, w_cr, L_cr, w_tx, L_tx, self.frame_size)
        self.estimate = pf.ObjectState.from_array(res.s_hat)

        updated = "none"
        if abrupt_cr or abrupt_tx:
            kind = "color" if abrupt_cr else "texture"
            s = self.estimate
            try:
                tm.replace(maps.histogram(kind, s.lx, s.ly, s.hx, s.hy), clear=cfg.clear_history_on_update)
                updated = kind
            except DegenerateRegionError:
                pass
        if not abrupt_cr:
            tm.color_history.append(L_cr)
        if not abrupt_tx:
            tm.texture_history.append(L_tx)

        self.particles = pf.resample(moved, res.weights)
        self.recent.append((self.iteration, self.estimate.lx, self.estimate.ly))
        self.occlusion_run = 0
        return FusionRecord(
            frame.index, L_cr, L_tx, res.pr_cr, res.pr_tx,
            pf.ObjectState.from_array(res.s_cr), pf.ObjectState.from_array(res.s_tx), self.estimate,
            occluded=False, template_updated=updated, abrupt_cr=abrupt_cr, abrupt_tx=abrupt_tx,
        )

    def _coast(self, frame, moved, prior_w, L_cr, L_tx, w_cr, w_tx) -> FusionRecord:
        prev = self.estimate.as_array()
        pred = prev.copy()
        if self.config.coast_velocity == "track" and len(self.recent) > 1:
            # (iteration, lx, ly) of the last accepted estimates; gaps from earlier coasting are divided out
            pts = np.asarray(self.recent)
            vx, vy = (pts[-1, 1:] - pts[0, 1:]) / (pts[-1, 0] - pts[0, 0])
        else:
            vx, vy = prev[pf.VX], prev[pf.VY]
        pred[pf.VX], pred[pf.VY] = vx, vy
        pred[pf.LX] += vx
        pred[pf.LY] += vy
        pf.constrain(pred[None, :], self.frame_size)
        self.estimate = pf.ObjectState.from_array(pred)
        total = L_cr + L_tx
        pr_cr = L_cr / total if total > 0 else 0.5
        s_cr = pf.weighted_mean(moved.states, prior_w if w_cr is None else w_cr, self.frame_size)
        s_tx = pf.weighted_mean(moved.states, prior_w if w_tx is None else w_tx, self.frame_size)
        # the cloud rides along with the prediction so it is waiting where the object should reappear
        moved.weights = prior_w
        moved.states[:, pf.LX] += vx
        moved.states[:, pf.LY] += vy
        pf.constrain(moved.states, self.frame_size)
        self.particles = moved
        self.occlusion_run += 1
        return FusionRecord(
            frame.index, L_cr, L_tx, pr_cr, 1.0 - pr_cr,
            pf.ObjectState.from_array(s_cr), pf.ObjectState.from_array(s_tx), self.estimate,
            occluded=True, template_updated="none", abrupt_cr=True, abrupt_tx=True,
            occlusion_run=self.occlusion_run,
        )
