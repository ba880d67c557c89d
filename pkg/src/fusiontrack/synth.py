"""Deterministic synthetic sequences with ground truth.

The object is a rectangle filled with a two-color checkerboard anchored to
its top-left corner, so its texture moves with it. It covers the pixels
whose centers satisfy |x - cx| < hx and |y - cy| < hy. Occluders are drawn
on top of it; background patches are drawn beneath it.

Scripts can be written as flat ``key = value`` text; see ``parse_script``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frame_io import Frame, write_ppm

BACKGROUND_KINDS = ("uniform", "two_tone", "noise")
TRUTH_HEADER = ("frame", "cx", "cy", "hx", "hy", "visibility")


class ScriptError(ValueError):
    pass


@dataclass
class Rect:
    """Inclusive pixel rectangle with a fill color."""

    x0: int
    y0: int
    x1: int
    y1: int
    color: tuple[int, int, int]


@dataclass
class SceneScript:
    width: int = 320
    height: int = 240
    frame_count: int = 60
    seed: int = 0
    background: str = "uniform"
    background_color: tuple[int, int, int] = (128, 128, 128)
    # two_tone: columns >= split_x take background_color2
    background_color2: tuple[int, int, int] = (128, 128, 128)
    split_x: int = 0
    jitter: int = 0
    appearance_frame: int | None = None
    trajectory: list[tuple[float, float]] = field(default_factory=list)
    half_extents: list[tuple[float, float]] = field(default_factory=list)
    colors: tuple[tuple[int, int, int], tuple[int, int, int]] = ((255, 255, 255), (0, 0, 0))
    checker_size: int = 2
    flip_frame: int | None = None
    flip_colors: tuple[tuple[int, int, int], tuple[int, int, int]] | None = None
    occluders: list[Rect] = field(default_factory=list)
    patches: list[Rect] = field(default_factory=list)

    @property
    def has_object(self) -> bool:
        return self.appearance_frame is not None

    def object_at(self, frame_index: int):
        """(cx, cy, hx, hy) at a 1-based frame index, or None before appearance."""
        if not self.has_object or frame_index < self.appearance_frame:
            return None
        k = frame_index - self.appearance_frame
        return (*self.trajectory[k], *self.half_extents[k])

    def colors_at(self, frame_index: int):
        if self.flip_frame is not None and frame_index >= self.flip_frame:
            return self.flip_colors
        return self.colors


def validate(script: SceneScript) -> None:
    if script.width < 16 or script.height < 16:
        raise ScriptError("frame size must be at least 16x16")
    if script.frame_count < 1:
        raise ScriptError("frame_count must be >= 1")
    if script.background not in BACKGROUND_KINDS:
        raise ScriptError(f"unknown background kind {script.background!r}")
    if script.checker_size < 1:
        raise ScriptError("checker_size must be >= 1")
    if not script.has_object:
        return
    if not 1 <= script.appearance_frame <= script.frame_count:
        raise ScriptError(f"appearance_frame {script.appearance_frame} outside 1..{script.frame_count}")
    expected = script.frame_count - script.appearance_frame + 1
    if len(script.trajectory) != expected:
        raise ScriptError(f"trajectory has {len(script.trajectory)} points, expected {expected}")
    if len(script.half_extents) != expected:
        raise ScriptError(f"half_extents has {len(script.half_extents)} entries, expected {expected}")
    if script.flip_frame is not None and script.flip_colors is None:
        raise ScriptError("flip_frame given without flip_colors")
    for k in range(expected):
        t = script.appearance_frame + k
        cx, cy, hx, hy = script.object_at(t)
        if hx < 0.5 or hy < 0.5:
            raise ScriptError(f"frame {t}: half extents ({hx}, {hy}) too small")
        if cx - hx < -0.5 or cy - hy < -0.5 or cx + hx > script.width - 0.5 or cy + hy > script.height - 0.5:
            raise ScriptError(f"frame {t}: object ({cx}, {cy}) +/- ({hx}, {hy}) leaves the frame")


def _background(script: SceneScript) -> np.ndarray:
    h, w = script.height, script.width
    img = np.empty((h, w, 3), dtype=np.int32)
    img[:] = script.background_color
    if script.background == "two_tone":
        img[:, script.split_x:] = script.background_color2
    jitter = script.jitter if script.background != "noise" or script.jitter else 8
    if jitter:
        rng = np.random.default_rng(script.seed)
        img += rng.integers(-jitter, jitter + 1, size=img.shape)
    for r in script.patches:
        img[r.y0:r.y1 + 1, r.x0:r.x1 + 1] = r.color
    return np.clip(img, 0, 255).astype(np.uint8)


def object_mask(script: SceneScript, frame_index: int) -> tuple[np.ndarray, np.ndarray] | None:
    """Boolean coverage and checker parity (True = first color) for the object."""
    obj = script.object_at(frame_index)
    if obj is None:
        return None
    cx, cy, hx, hy = obj
    xs = np.arange(script.width)
    ys = np.arange(script.height)
    in_x = np.abs(xs - cx) < hx
    in_y = np.abs(ys - cy) < hy
    cover = in_y[:, None] & in_x[None, :]
    x_left = xs[in_x].min() if in_x.any() else 0
    y_top = ys[in_y].min() if in_y.any() else 0
    c = script.checker_size
    parity = (((xs - x_left) // c)[None, :] + ((ys - y_top) // c)[:, None]) % 2 == 0
    return cover, parity


def _occluder_mask(script: SceneScript) -> np.ndarray:
    m = np.zeros((script.height, script.width), dtype=bool)
    for r in script.occluders:
        m[r.y0:r.y1 + 1, r.x0:r.x1 + 1] = True
    return m


def render(script: SceneScript) -> tuple[list[Frame], list[tuple]]:
    """Render every frame back to front; return frames and ground-truth rows."""
    validate(script)
    bg = _background(script)
    occ = _occluder_mask(script)
    frames, truth = [], []
    for t in range(1, script.frame_count + 1):
        img = bg.copy()
        om = object_mask(script, t)
        if om is not None:
            cover, parity = om
            first, second = script.colors_at(t)
            img[cover & parity] = first
            img[cover & ~parity] = second
            total = int(cover.sum())
            visible = int((cover & ~occ).sum())
            cx, cy, hx, hy = script.object_at(t)
            truth.append((t, cx, cy, hx, hy, visible / total if total else 0.0))
        for r in script.occluders:
            img[r.y0:r.y1 + 1, r.x0:r.x1 + 1] = r.color
        frames.append(Frame(img, index=t))
    return frames, truth


def write_truth_csv(path, truth) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(TRUTH_HEADER)
        for row in truth:
            wr.writerow([row[0], *(repr(float(v)) for v in row[1:])])


def write_sequence(script: SceneScript, out_dir) -> tuple[list[Frame], list[tuple]]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames, truth = render(script)
    for f in frames:
        write_ppm(out / f"f{f.index:04d}.ppm", f)
    write_truth_csv(out / "truth.csv", truth)
    return frames, truth


def linear_path(start, velocity, n):
    return [(start[0] + k * velocity[0], start[1] + k * velocity[1]) for k in range(n)]


def linear_ramp(first, last, n):
    if n == 1:
        return [tuple(first)]
    return [tuple(float(a + (b - a) * k / (n - 1)) for a, b in zip(first, last)) for k in range(n)]


def case1() -> SceneScript:
    """A dim car over a road of nearly the same gray.

    The car enters from a dark wall strip, grows from hx 10 to 16, and its
    colors flip to red at frame 45 while keeping the brighter/darker checker
    order, so its texture survives the flip.
    """
    appear, count = 38, 60
    n = count - appear + 1
    return SceneScript(
        width=320, height=240, frame_count=count, seed=11,
        background="two_tone", background_color=(30, 30, 40), background_color2=(88, 88, 88),
        split_x=70, jitter=8,
        appearance_frame=appear,
        trajectory=linear_path((45.5, 160.5), (6.0, 0.0), n),
        half_extents=linear_ramp((10.0, 8.0), (16.0, 8.0), n),
        colors=((104, 104, 104), (97, 97, 97)),
        flip_frame=45, flip_colors=((230, 70, 50), (190, 40, 30)),
    )


def case2() -> SceneScript:
    """A green object crosses behind a trunk over a textured sky.

    Green tree crowns in the lower right share the object's colors. The trunk
    is 38 px wide, hiding the 15 px object completely on frames 55 to 58.
    """
    appear, count = 35, 70
    n = count - appear + 1
    return SceneScript(
        width=320, height=240, frame_count=count, seed=23,
        background="noise", background_color=(140, 180, 220), jitter=8,
        appearance_frame=appear,
        trajectory=linear_path((40.5, 100.5), (6.0, 0.0), n),
        half_extents=[(8.0, 8.0)] * n,
        colors=((70, 170, 70), (40, 120, 40)),
        occluders=[Rect(150, 60, 187, 200, (100, 70, 40))],
        patches=[Rect(220, 170, 319, 239, (50, 130, 50)), Rect(240, 150, 300, 175, (70, 170, 70))],
    )


BUILTIN_SCRIPTS = {"case1": case1, "case2": case2}


def _ints(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in value.split(","))


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(","))


def _color_pair(value: str):
    parts = [p.strip() for p in value.split(";")]
    if len(parts) != 2:
        raise ScriptError(f"expected two colors separated by ';', got {value!r}")
    return _ints(parts[0]), _ints(parts[1])


def _rect(value: str) -> Rect:
    v = _ints(value)
    if len(v) != 7:
        raise ScriptError(f"rectangle needs x0,y0,x1,y1,r,g,b, got {value!r}")
    return Rect(*v[:4], v[4:])


def parse_script(text: str) -> SceneScript:
    """Parse the flat ``key = value`` script format.

    Keys: width, height, frame_count, seed, background, background_color,
    background_color2, split_x, jitter, appearance_frame, checker_size,
    object_colors ("r,g,b; r,g,b"), flip_frame, flip_colors, occluder and
    patch (repeatable, "x0,y0,x1,y1,r,g,b"). The path is either
    ``trajectory = x,y; x,y; ...`` or ``object_start`` plus
    ``object_velocity``; the size is ``half_extents = hx,hy; ...`` or
    ``half_extents_start`` with optional ``half_extents_end`` (linear ramp).
    Lines starting with '#' are comments.
    """
    kv: dict[str, str] = {}
    occluders, patches = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScriptError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "occluder":
                occluders.append(_rect(value))
            elif key == "patch":
                patches.append(_rect(value))
            else:
                kv[key] = value
        except ValueError as exc:
            raise ScriptError(f"line {lineno}: {exc}") from None

    try:
        s = SceneScript(occluders=occluders, patches=patches)
        for key in ("width", "height", "frame_count", "seed", "split_x", "jitter", "checker_size"):
            if key in kv:
                setattr(s, key, int(kv.pop(key)))
        if "background" in kv:
            s.background = kv.pop("background")
        for key in ("background_color", "background_color2"):
            if key in kv:
                setattr(s, key, _ints(kv.pop(key)))
        if "object_colors" in kv:
            s.colors = _color_pair(kv.pop("object_colors"))
        if "flip_frame" in kv:
            s.flip_frame = int(kv.pop("flip_frame"))
        if "flip_colors" in kv:
            s.flip_colors = _color_pair(kv.pop("flip_colors"))
        if "appearance_frame" in kv:
            s.appearance_frame = int(kv.pop("appearance_frame"))
            n = s.frame_count - s.appearance_frame + 1
            if "trajectory" in kv:
                s.trajectory = [_floats(p) for p in kv.pop("trajectory").split(";") if p.strip()]
            else:
                start = _floats(kv.pop("object_start"))
                vel = _floats(kv.pop("object_velocity", "0,0"))
                s.trajectory = linear_path(start, vel, n)
            if "half_extents" in kv:
                s.half_extents = [_floats(p) for p in kv.pop("half_extents").split(";") if p.strip()]
            else:
                first = _floats(kv.pop("half_extents_start"))
                last = _floats(kv.pop("half_extents_end", ",".join(map(str, first))))
                s.half_extents = linear_ramp(first, last, n)
    except KeyError as exc:
        raise ScriptError(f"missing key {exc.args[0]}") from None
    except ValueError as exc:
        raise ScriptError(str(exc)) from None
    if kv:
        raise ScriptError(f"unknown keys: {', '.join(sorted(kv))}")
    validate(s)
    return s


def load_script(path) -> SceneScript:
    return parse_script(Path(path).read_text())
