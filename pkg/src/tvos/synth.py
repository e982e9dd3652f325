"""Deterministic synthetic videos with exact per-frame object masks.

Scenes are flat-colored shapes with a gentle gradient ramp over a ramped
background, plus seeded Gaussian noise (sigma = 2/255). Presets:

``translation``
    One grid-aligned square moving one pixel per frame along a seeded axis,
    bouncing off the frame edges. Per-step velocities are in the manifest.
``two_object_crossing``
    Two squares moving in opposite directions; the second passes in front
    of the first.
``occlusion_reappear``
    A small square is covered completely by a larger one for a span of
    frames, then uncovered again.
``deform``
    A drifting ellipse whose axes oscillate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .io import ensure_dir, write_pgm, write_ppm

__all__ = ["ScenePreset", "SynthSequence", "generate", "save_sequence", "load_sequence",
           "PRESETS", "NOISE_SIGMA"]

PRESETS = ("translation", "two_object_crossing", "occlusion_reappear", "deform")
NOISE_SIGMA = 2.0 / 255.0

BACKGROUND = (25, 35, 200)
PALETTE = {1: (215, 30, 25), 2: (30, 205, 35), 3: (200, 30, 195)}
RAMP = 24.0  # peak-to-peak ramp amplitude, 8-bit units


@dataclass(frozen=True)
class ScenePreset:
    preset: str = "translation"
    frames: int = 40
    width: int = 64
    height: int = 64
    seed: int = 0
    stride: int = 8

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        if self.frames < 2:
            raise ValueError(f"need at least 2 frames, got {self.frames}")
        if self.width < 2 * self.stride or self.height < 2 * self.stride:
            raise ValueError(f"frame {self.width}x{self.height} too small for stride {self.stride}")
        if self.preset == "occlusion_reappear" and self.frames < 40:
            raise ValueError("occlusion_reappear needs at least 40 frames")


@dataclass
class SynthSequence:
    frames: np.ndarray   # (T, H, W, 3) uint8
    masks: np.ndarray    # (T, H, W) uint8, 0 = background
    clean: np.ndarray    # (T, H, W, 3) float, noise-free render
    manifest: dict


def _ramp(h, w, angle, base):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    u = (np.cos(angle) * xx / max(w - 1, 1) + np.sin(angle) * yy / max(h - 1, 1))
    u = u - u.mean()
    span = np.ptp(u) or 1.0
    return np.asarray(base, dtype=np.float64)[None, None, :] + (RAMP * u / span)[..., None]


class _Canvas:
    def __init__(self, h, w, rng):
        self.h, self.w = h, w
        self.bg = _ramp(h, w, rng.uniform(0, 2 * np.pi), BACKGROUND)
        self.textures = {}
        self.rng = rng

    def texture(self, obj_id):
        if obj_id not in self.textures:
            self.textures[obj_id] = _ramp(self.h, self.w, self.rng.uniform(0, 2 * np.pi),
                                          PALETTE[obj_id])
        return self.textures[obj_id]

    def render(self, layers):
        """``layers`` is a list of (obj_id, bool mask), back to front."""
        img = self.bg.copy()
        mask = np.zeros((self.h, self.w), dtype=np.uint8)
        for obj_id, m in layers:
            img[m] = self.texture(obj_id)[m]
            mask[m] = obj_id
        return img, mask


def _square(h, w, x, y, size):
    m = np.zeros((h, w), dtype=bool)
    x0, y0 = max(int(x), 0), max(int(y), 0)
    x1, y1 = min(int(x) + size, w), min(int(y) + size, h)
    if x1 > x0 and y1 > y0:
        m[y0:y1, x0:x1] = True
    return m


def _ellipse(h, w, cx, cy, ax, ay):
    yy, xx = np.mgrid[0:h, 0:w]
    return ((xx + 0.5 - cx) / ax) ** 2 + ((yy + 0.5 - cy) / ay) ** 2 <= 1.0


def _translation(p, canvas, rng):
    h, w, T = p.height, p.width, p.frames
    # side is a stride multiple and the start is grid-aligned, so the frame-0
    # mask is exactly representable on the cell grid
    side = max(p.stride, int(round(0.625 * min(h, w))) // p.stride * p.stride)
    axis = int(rng.integers(0, 2))  # 0: horizontal, 1: vertical
    step = int(rng.choice([-1, 1]))
    extent = (w, h)
    pos = [0, 0]
    for a in (0, 1):
        cells = max((extent[a] - side) // p.stride, 0)
        pos[a] = int(rng.integers(0, cells + 1)) * p.stride
    vel = [0, 0]
    vel[axis] = step
    layers, track, velocities, clipped = [], [], [], []
    for t in range(T):
        m = _square(h, w, pos[0], pos[1], side)
        if np.count_nonzero(m) != side * side:
            clipped.append(t)
        layers.append([(1, m)])
        track.append(list(pos))
        if t == T - 1:
            break
        # bounce off the frame edge instead of leaving it
        nxt = pos[axis] + vel[axis]
        if nxt < 0 or nxt + side > extent[axis]:
            vel[axis] = -vel[axis]
        if side < extent[axis]:
            pos[axis] += vel[axis]
        velocities.append(list(vel) if side < extent[axis] else [0, 0])
    objects = [{"id": 1, "shape": "square", "size": side, "velocity": velocities[0] if velocities else [0, 0],
                "velocities": velocities, "positions": track}]
    return layers, {"objects": objects, "clipped_frames": clipped}


def _crossing(p, canvas, rng):
    h, w, T = p.height, p.width, p.frames
    size = max(p.stride, int(round(0.3 * min(h, w))))
    speed = max(1, int(np.ceil((w - size) / max(T - 1, 1))))
    ya = int(rng.integers(0, max(h // 2 - size // 2, 1)))
    yb = min(ya + size // 2, h - size)
    layers, pa, pb = [], [], []
    for t in range(T):
        xa = min(speed * t, w - size)
        xb = max(w - size - speed * t, 0)
        layers.append([(1, _square(h, w, xa, ya, size)), (2, _square(h, w, xb, yb, size))])
        pa.append([xa, ya])
        pb.append([xb, yb])
    objects = [{"id": 1, "shape": "square", "size": size, "positions": pa},
               {"id": 2, "shape": "square", "size": size, "positions": pb}]
    return layers, {"objects": objects}


def _occlusion(p, canvas, rng):
    h, w, T = p.height, p.width, p.frames
    small = max(p.stride, int(round(0.22 * min(h, w))))
    margin = max(2, int(round(0.06 * min(h, w))))
    big = small + 2 * margin
    # hidden object sits in the middle band; occluder approaches from the left
    x1 = int(rng.integers(w // 2 - small // 2 - margin, w // 2 - small // 2 + margin + 1))
    y1 = int(rng.integers(h // 2 - small // 2 - margin, h // 2 - small // 2 + margin + 1))
    cover_x, cover_y = x1 - margin, y1 - margin
    span = 12 + int(rng.integers(0, 3))
    speed = 2
    approach = int(np.ceil((cover_x + big) / speed))  # frames to slide in from off-screen left
    t_a = min(approach, T - span - 22)
    t_b = t_a + span
    layers, p1, p2 = [], [], []
    for t in range(T):
        if t <= t_a:
            x2 = cover_x - speed * (t_a - t)
        elif t <= t_b:
            x2 = cover_x
        else:
            x2 = cover_x + speed * (t - t_b)
        m1 = _square(h, w, x1, y1, small)
        m2 = _square(h, w, x2, cover_y, big)
        layers.append([(1, m1), (2, m2)])
        p1.append([x1, y1])
        p2.append([x2, cover_y])
    hidden = [t for t in range(T) if not np.any(layers[t][0][1] & ~layers[t][1][1])]
    visible = [t for t in range(T) if not np.any(layers[t][0][1] & layers[t][1][1])]
    t_reveal = min(t for t in visible if t > t_b)
    objects = [{"id": 1, "shape": "square", "size": small, "positions": p1},
               {"id": 2, "shape": "square", "size": big, "positions": p2}]
    occ = {"object": 1, "occluder": 2, "span": [hidden[0], hidden[-1]],
           "fully_visible_again": t_reveal}
    return layers, {"objects": objects, "occlusion": occ}


def _deform(p, canvas, rng):
    h, w, T = p.height, p.width, p.frames
    r0 = 0.22 * min(h, w)
    period = float(rng.integers(16, 25))
    cx0 = w / 2 + rng.uniform(-0.1, 0.1) * w
    cy0 = h / 2 + rng.uniform(-0.1, 0.1) * h
    drift = 0.15 * min(h, w) / max(T - 1, 1)
    layers, track = [], []
    for t in range(T):
        phase = 2 * np.pi * t / period
        ax = r0 * (1 + 0.25 * np.sin(phase))
        ay = r0 * (1 - 0.25 * np.sin(phase))
        cx = cx0 + drift * t * np.cos(phase / 3)
        cy = cy0
        layers.append([(1, _ellipse(h, w, cx, cy, ax, ay))])
        track.append([float(cx), float(cy), float(ax), float(ay)])
    objects = [{"id": 1, "shape": "ellipse", "period": period, "ellipses": track}]
    return layers, {"objects": objects}


_BUILDERS = {"translation": _translation, "two_object_crossing": _crossing,
             "occlusion_reappear": _occlusion, "deform": _deform}


def generate(preset: ScenePreset) -> SynthSequence:
    """Render a preset; identical presets give bit-identical output."""
    rng = np.random.default_rng(preset.seed)
    canvas = _Canvas(preset.height, preset.width, rng)
    layers, info = _BUILDERS[preset.preset](preset, canvas, rng)
    clean, masks = zip(*(canvas.render(ls) for ls in layers))
    clean = np.stack(clean)
    noise = rng.normal(0.0, NOISE_SIGMA * 255.0, size=clean.shape)
    frames = np.clip(np.rint(clean + noise), 0, 255).astype(np.uint8)
    manifest = {
        "preset": preset.preset,
        "seed": preset.seed,
        "frames": preset.frames,
        "width": preset.width,
        "height": preset.height,
        "noise_sigma": NOISE_SIGMA,
        "background": list(BACKGROUND),
        "palette": {str(k): list(v) for k, v in PALETTE.items()},
        **info,
    }
    return SynthSequence(frames, np.stack(masks), clean, manifest)


def save_sequence(seq: SynthSequence, out_dir) -> Path:
    """Write ``frames/%05d.ppm``, ``gt/%05d.pgm`` and ``manifest.json``."""
    out = ensure_dir(out_dir)
    fdir, gdir = ensure_dir(out / "frames"), ensure_dir(out / "gt")
    for t, (img, mask) in enumerate(zip(seq.frames, seq.masks)):
        write_ppm(fdir / f"{t:05d}.ppm", img)
        write_pgm(gdir / f"{t:05d}.pgm", mask)
    (out / "manifest.json").write_text(json.dumps(seq.manifest, indent=2, sort_keys=True) + "\n")
    return out


def load_sequence(seq_dir):
    """Read a saved sequence back as ``(frames, masks)`` arrays."""
    from .io import list_frames, read_pgm, read_ppm
    seq_dir = Path(seq_dir)
    frames = np.stack([read_ppm(f) for f in list_frames(seq_dir / "frames", ".ppm")])
    masks = np.stack([read_pgm(f) for f in list_frames(seq_dir / "gt", ".pgm")])
    return frames, masks
