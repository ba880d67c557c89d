"""Bootstrap particle filter over the 7-component object state.

States are stored as rows of an (N, 7) array in the order
(lx, vx, ly, vy, hx, hy, a). The area ratio ``a`` is never diffused; it is
re-derived from the half extents after every operation that moves them.

Randomness comes from numpy's PCG64 bit generator seeded with the set's
``seed``; the same seed reproduces the same trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LX, VX, LY, VY, HX, HY, A = range(7)
STATE_FIELDS = ("lx", "vx", "ly", "vy", "hx", "hy", "a")


class TrackLostError(RuntimeError):
    """Every particle has zero likelihood, so the weights cannot be normalized."""


@dataclass
class ObjectState:
    lx: float
    vx: float
    ly: float
    vy: float
    hx: float
    hy: float
    a: float

    def as_array(self) -> np.ndarray:
        return np.array([self.lx, self.vx, self.ly, self.vy, self.hx, self.hy, self.a])

    @classmethod
    def from_array(cls, arr) -> "ObjectState":
        return cls(*(float(v) for v in arr))

    @property
    def box(self) -> tuple[float, float, float, float]:
        return self.lx, self.ly, self.hx, self.hy


@dataclass
class TransitionNoise:
    lx: float = 6.0
    vx: float = 1.5
    ly: float = 6.0
    vy: float = 1.5
    hx: float = 1.0
    hy: float = 1.0

    def __post_init__(self):
        if any(s < 0 for s in self.sigmas()):
            raise ValueError("transition noise sigmas must be >= 0")

    def sigmas(self) -> np.ndarray:
        return np.array([self.lx, self.vx, self.ly, self.vy, self.hx, self.hy])

    @classmethod
    def zero(cls) -> "TransitionNoise":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(eq=False)
class ParticleSet:
    states: np.ndarray
    weights: np.ndarray
    frame_size: tuple[int, int]  # (width, height)
    seed: int
    rng: np.random.Generator = field(repr=False, default=None)

    def __post_init__(self):
        if self.rng is None:
            self.rng = make_rng(self.seed)

    @property
    def n(self) -> int:
        return self.states.shape[0]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def area_ratio(hx, hy, frame_size) -> np.ndarray:
    width, height = frame_size
    return (2.0 * np.asarray(hx)) * (2.0 * np.asarray(hy)) / (width * height)


def constrain(states: np.ndarray, frame_size) -> np.ndarray:
    """Clamp centers to the frame and half extents to [1, dim/2]; refresh ``a`` in place."""
    width, height = frame_size
    np.clip(states[:, LX], 0.0, width - 1.0, out=states[:, LX])
    np.clip(states[:, LY], 0.0, height - 1.0, out=states[:, LY])
    np.clip(states[:, HX], 1.0, width / 2.0, out=states[:, HX])
    np.clip(states[:, HY], 1.0, height / 2.0, out=states[:, HY])
    states[:, A] = area_ratio(states[:, HX], states[:, HY], frame_size)
    return states


def initialize(detection, n: int, noise: TransitionNoise, seed: int, frame_size) -> ParticleSet:
    """Scatter ``n`` particles around a detection with uniform weights."""
    if n < 2:
        raise ValueError(f"need at least 2 particles, got {n}")
    rng = make_rng(seed)
    (cx, cy), (hx, hy) = detection.center, detection.half_extents
    mean = np.array([cx, 0.0, cy, 0.0, hx, hy])
    states = np.zeros((n, 7))
    states[:, :6] = mean + rng.normal(0.0, 1.0, size=(n, 6)) * noise.sigmas()
    constrain(states, frame_size)
    return ParticleSet(states, np.full(n, 1.0 / n), tuple(frame_size), seed, rng)


def transition(pset: ParticleSet, noise: TransitionNoise) -> ParticleSet:
    """Random-walk every state component by independent zero-mean Gaussian noise."""
    states = pset.states.copy()
    states[:, :6] += pset.rng.normal(0.0, 1.0, size=(pset.n, 6)) * noise.sigmas()
    constrain(states, pset.frame_size)
    return ParticleSet(states, pset.weights.copy(), pset.frame_size, pset.seed, pset.rng)


def weight_by_likelihood(pset: ParticleSet, likelihoods) -> tuple[np.ndarray, float]:
    """Return normalized posterior weights and the marginal likelihood sum(w_prev * L)."""
    lik = np.asarray(likelihoods, dtype=float)
    if lik.shape != pset.weights.shape:
        raise ValueError(f"expected {pset.n} likelihoods, got {lik.shape}")
    if not np.all(np.isfinite(lik)) or np.any(lik < 0):
        raise ValueError("likelihoods must be finite and non-negative")
    unnorm = pset.weights * lik
    marginal = float(unnorm.sum())
    if marginal <= 0.0:
        raise TrackLostError("all particle likelihoods are zero")
    return unnorm / marginal, marginal


def weighted_mean(states: np.ndarray, weights: np.ndarray, frame_size) -> np.ndarray:
    mean = weights @ states
    mean[A] = area_ratio(mean[HX], mean[HY], frame_size)
    return mean


def estimate(pset: ParticleSet, weights=None) -> ObjectState:
    w = pset.weights if weights is None else np.asarray(weights, dtype=float)
    return ObjectState.from_array(weighted_mean(pset.states, w, pset.frame_size))


def systematic_indices(weights, u: float) -> np.ndarray:
    """Ancestor indices for systematic resampling with offset ``u`` in [0, 1/N)."""
    w = np.asarray(weights, dtype=float)
    n = w.shape[0]
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    positions = u + np.arange(n) / n
    return np.minimum(np.searchsorted(cdf, positions, side="right"), n - 1)


def resample(pset: ParticleSet, weights) -> ParticleSet:
    """Systematic resampling; the output carries uniform weights 1/N."""
    n = pset.n
    u = pset.rng.uniform(0.0, 1.0 / n)
    idx = systematic_indices(weights, u)
    return ParticleSet(pset.states[idx].copy(), np.full(n, 1.0 / n), pset.frame_size, pset.seed, pset.rng)
