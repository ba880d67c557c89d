"""Detector-to-tracker loop over an in-memory frame sequence."""

from __future__ import annotations

from dataclasses import dataclass, field

from .background import BackgroundDetector, Detection, GMMParams
from .fusion import FusionRecord, FusionTracker, TrackerConfig
from .particle_filter import area_ratio


@dataclass
class TrackResult:
    detection_frame: int | None = None
    detection: Detection | None = None
    # (frame, cx, cy, hx, hy, a) from the detection frame to the end
    track: list[tuple] = field(default_factory=list)
    records: list[FusionRecord] = field(default_factory=list)
    tracker: FusionTracker | None = None


def track_sequence(frames, config: TrackerConfig | None = None, gmm: GMMParams | None = None,
                   on_step=None) -> TrackResult:
    """Run the detector until its first detection, then track every later frame.

    ``on_step(tracker, frame)`` is called before each tracking step; tests
    use it to snapshot tracker state.
    """
    config = config or TrackerConfig()
    detector = BackgroundDetector(gmm, workers=config.workers)
    result = TrackResult()
    tracker = None
    for frame in frames:
        if tracker is None:
            det = detector.process(frame)
            if det is None:
                continue
            tracker = FusionTracker(frame, det, config)
            result.detection_frame = frame.index
            result.detection = det
            result.tracker = tracker
            (cx, cy), (hx, hy) = det.center, det.half_extents
            a = float(area_ratio(hx, hy, (frame.width, frame.height)))
            result.track.append((frame.index, cx, cy, hx, hy, a))
            continue
        if on_step is not None:
            on_step(tracker, frame)
        rec = tracker.step(frame)
        result.records.append(rec)
        s = rec.s_hat
        result.track.append((frame.index, s.lx, s.ly, s.hx, s.hy, s.a))
    return result
