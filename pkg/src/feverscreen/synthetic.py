"""Procedural paired visual/thermal dataset generator.

Every pair is a drawn face-like figure with five visually distinct fiducial
marks whose positions are known analytically; the thermal half is a
documented deterministic transform of a drawn figure plus a warm
inner-canthus spot. Two dataset kinds:

``tiles``
    Face-registered square crops (both domains aligned), for translation
    training. Distance still drives the thermal intensity ramp and the
    canthus spot temperature.

``scenes``
    Full frames from a two-camera rig. The visual and thermal cameras share
    an optical axis direction but differ in focal length (``focal_ratio``)
    and are separated horizontally by ``baseline_ft``, so each fiducial is
    displaced between the frames. The displacement of mark ``j`` for a
    person at distance ``d``, lateral offset ``o``, face height ``h`` (feet)
    follows the pinhole closed form::

        du_j = f_x*(X_j - b)/Z_j - f_y*X_j/Z_j + thermal_cx_shift
        dv_j = -(f_x - f_y)*Y_j/Z_j

    with X_j = o + dx_j, Y_j = h + dy_j, Z_j = d + relief_j and
    f_x = focal_ratio * f_y. Horizontal shift magnitude decays as
    1/(distance + relief): marks sit at five distinct depth reliefs, which
    is what makes distance recoverable from displacement vectors alone.

Thermal transform (applied to a drawn figure, all constants below): gray
channel mixing -> affine counts mapping -> additive count ramp decreasing
with distance on figure pixels -> 3x3 binomial blur -> exact warm canthus
spot whose temperature is ``CANTHUS_BASE_C - CANTHUS_SLOPE_C_PER_FT * d``
(plus ``FEVER_DELTA_C`` when feverish). Counts map to Celsius through the
linear calibration (``THERMAL_GAIN_C``, ``THERMAL_OFFSET_C``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import dataio
from .errors import DataError

# thermal calibration: temperature = gain * counts + offset
THERMAL_GAIN_C = 0.01
THERMAL_OFFSET_C = 0.0

# gray mixing and counts mapping for the drawn figure
GRAY_WEIGHTS = (0.5, 0.3, 0.2)
COUNT_BASE = 2000.0
COUNT_PER_GRAY = 7.7
FACE_RAMP_COUNTS_PER_FT = 10.0

# canthus physiology of the synthetic population
CANTHUS_BASE_C = 37.4
CANTHUS_SLOPE_C_PER_FT = 0.10
FEVER_DELTA_C = 1.6
PERSON_TEMP_JITTER_C = 0.15

# drawn palette
SKIN_RGB = (205.0, 165.0, 140.0)
BACKGROUND_RGB = (24.0, 28.0, 34.0)
GLYPH_RGB = (30.0, 34.0, 40.0)
CATCHLIGHT_RGB = (235.0, 232.0, 224.0)

# face proportions: half extents in feet, mark layout in half-extent units
FACE_HALF_W_FT = 0.30
FACE_HALF_H_FT = 0.375
LANDMARK_NAMES = ("canthus_left", "canthus_right", "nose",
                  "mouth_left", "mouth_right")
LANDMARK_LAYOUT = np.array([
    [-0.45, -0.35],
    [0.45, -0.35],
    [0.00, 0.05],
    [-0.38, 0.48],
    [0.38, 0.48],
])
# depth relief of each mark relative to the labeled distance (feet);
# anatomical scale (a few cm), nose tip as the zero reference — a larger
# spread would bend the mark constellation under off-axis poses until
# neighboring marks swap places in the projection
LANDMARK_RELIEF_FT = np.array([0.10, 0.13, 0.00, 0.04, 0.07])
GLYPH_KINDS = ("cross", "saltire", "ring", "hbar", "vbar")
CANTHUS_INDICES = (0, 1)

LANDMARK_DX_FT = LANDMARK_LAYOUT[:, 0] * FACE_HALF_W_FT
# raster y grows downward; world y grows upward
LANDMARK_DY_FT = -LANDMARK_LAYOUT[:, 1] * FACE_HALF_H_FT


def counts_for_temp(t_celsius: float) -> int:
    return int(round((t_celsius - THERMAL_OFFSET_C) / THERMAL_GAIN_C))


def temp_for_counts(counts) -> np.ndarray | float:
    return THERMAL_GAIN_C * np.asarray(counts, dtype=np.float64) + THERMAL_OFFSET_C


# ---------------------------------------------------------------------------
# specs
# ---------------------------------------------------------------------------

@dataclass
class TileSpec:
    size: int = 64
    dist_range: tuple[float, float] = (4.0, 15.0)
    fever_rate: float = 0.0

    def as_dict(self):
        return asdict(self)


@dataclass
class SceneSpec:
    frame_w: int = 640
    frame_h: int = 480
    f_y: float = 120.0
    focal_ratio: float = 1.1
    baseline_ft: float = 1.5
    thermal_cx_shift: float = 0.0
    dist_range: tuple[float, float] = (4.0, 15.0)
    offset_range: tuple[float, float] = (0.0, 6.0)
    height_range: tuple[float, float] = (0.8, 1.6)
    fever_rate: float = 0.0
    # per-mark depth relief; faces use the anatomical default
    relief_ft: tuple[float, ...] = tuple(LANDMARK_RELIEF_FT.tolist())

    @property
    def f_x(self) -> float:
        return self.focal_ratio * self.f_y

    @staticmethod
    def pose_survey(**overrides) -> "SceneSpec":
        """Wide-angle rig covering the full 4-15 ft x 0-6 ft pose grid.

        Marks follow a depth-staggered calibration target rather than a
        face: spreading the marks in depth keeps the per-mark displacement
        magnitudes linearly independent across the distance span, which is
        what lets a linear readout track distance over 4-15 ft. The raster
        shift keeps displacement angles far from the atan2 wrap at +-pi,
        where measurement noise would flip the angle features by 2 pi.
        """
        base = dict(relief_ft=(0.45, 0.60, 0.00, 0.15, 0.30),
                    thermal_cx_shift=150.0)
        base.update(overrides)
        return SceneSpec(**base)

    @staticmethod
    def walkway(**overrides) -> "SceneSpec":
        """Narrow-angle rig with large faces, for association/screening."""
        base = dict(f_y=480.0, thermal_cx_shift=150.0,
                    dist_range=(4.5, 7.0), offset_range=(-1.2, 1.2))
        base.update(overrides)
        return SceneSpec(**base)

    def as_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# glyph and figure drawing
# ---------------------------------------------------------------------------

def _glyph_masks(kind: str, size: int) -> tuple[np.ndarray, np.ndarray]:
    """(dark, bright) coverage masks in [0,1], supersampled 3x."""
    if kind not in GLYPH_KINDS:
        raise ValueError(f"unknown glyph kind {kind!r}")
    s3 = size * 3
    c = (np.arange(s3) + 0.5) / s3 * 2.0 - 1.0
    u = c[None, :]
    v = c[:, None]
    r = np.hypot(u, v)
    t = 0.30
    if kind == "cross":
        dark = ((np.abs(u) <= t) | (np.abs(v) <= t)) & (r <= 1.0)
    elif kind == "saltire":
        dark = ((np.abs(u - v) <= t * math.sqrt(2))
                | (np.abs(u + v) <= t * math.sqrt(2))) & (r <= 1.0)
    elif kind == "ring":
        dark = (r >= 0.55) & (r <= 1.0)
    elif kind == "hbar":
        dark = (np.abs(v) <= t) & (np.abs(u) <= 1.0)
    else:  # vbar
        dark = (np.abs(u) <= t) & (np.abs(v) <= 1.0)
    bright = r <= 0.33 if kind == "cross" else np.zeros_like(dark)
    pool = lambda m: m.astype(np.float64).reshape(size, 3, size, 3).mean(axis=(1, 3))
    return pool(dark), pool(bright)


def _glyph_size(half_w_px: float) -> int:
    g = int(round(0.28 * half_w_px))
    if g % 2 == 0:
        g += 1
    return max(3, g)


def _stamp(alpha: np.ndarray, mask: np.ndarray, x: float, y: float) -> None:
    """Splat ``mask`` into ``alpha`` centered at float (x, y), bilinearly.

    The four weighted copies of one splat sum to a proper bilinear shift of
    the mask; callers clip the accumulated alpha to [0, 1] afterwards.
    """
    g = mask.shape[0]
    x0f = x - (g - 1) / 2.0
    y0f = y - (g - 1) / 2.0
    x0, y0 = math.floor(x0f), math.floor(y0f)
    fx, fy = x0f - x0, y0f - y0
    h, w = alpha.shape
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            if wy * wx == 0.0:
                continue
            ys, xs = y0 + dy, x0 + dx
            ye, xe = ys + g, xs + g
            cys, cxs = max(ys, 0), max(xs, 0)
            cye, cxe = min(ye, h), min(xe, w)
            if cys >= cye or cxs >= cxe:
                continue
            alpha[cys:cye, cxs:cxe] += (
                wy * wx * mask[cys - ys:cye - ys, cxs - xs:cxe - xs])


def _ellipse_alpha(h: int, w: int, cx: float, cy: float,
                   ax: float, ay: float) -> tuple[np.ndarray, np.ndarray]:
    """(coverage alpha, normalized squared radius) over the frame, 2x sampled."""
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    alpha = np.zeros((h, w))
    for oy in (-0.25, 0.25):
        for ox in (-0.25, 0.25):
            q = (((xs + ox - cx) / ax) ** 2 + ((ys + oy - cy) / ay) ** 2)
            alpha += (q <= 1.0) * 0.25
    q_center = ((xs - cx) / ax) ** 2 + ((ys - cy) / ay) ** 2
    return alpha, q_center


def draw_figure(h: int, w: int, center: tuple[float, float],
                half_w_px: float, half_h_px: float, marks_px: np.ndarray,
                rng: np.random.Generator | None,
                brightness: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Render the figure; returns (uint8 RGB (h, w, 3), face mask (h, w) bool).

    ``rng=None`` draws the noise-free canonical figure (used for templates).
    """
    img = np.empty((h, w, 3))
    img[:] = BACKGROUND_RGB
    if rng is not None:
        img += rng.normal(0.0, 5.0, size=(h, w, 3))
    cx, cy = center
    alpha, q = _ellipse_alpha(h, w, cx, cy, half_w_px, half_h_px)
    shade = 1.0 - 0.18 * np.clip(q, 0.0, 1.0)
    skin = np.asarray(SKIN_RGB) * brightness
    face = skin[None, None, :] * shade[:, :, None]
    img = img * (1 - alpha[:, :, None]) + face * alpha[:, :, None]

    gsize = _glyph_size(half_w_px)
    dark_a = np.zeros((h, w))
    bright_a = np.zeros((h, w))
    for j, kind in enumerate(GLYPH_KINDS):
        dark, bright = _glyph_masks(kind, gsize)
        _stamp(dark_a, dark, marks_px[j, 0], marks_px[j, 1])
        if bright.any():
            _stamp(bright_a, bright, marks_px[j, 0], marks_px[j, 1])
    dark_a = np.clip(dark_a, 0.0, 1.0)
    bright_a = np.clip(bright_a, 0.0, 1.0)
    img = img * (1 - dark_a[:, :, None]) + np.asarray(GLYPH_RGB) * dark_a[:, :, None]
    img = img * (1 - bright_a[:, :, None]) + np.asarray(CATCHLIGHT_RGB) * bright_a[:, :, None]
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), alpha > 0.5


def thermal_from_figure(rgb: np.ndarray, face_mask: np.ndarray,
                        distance_ft: float, canthus_px: np.ndarray,
                        canthus_temp_c: float) -> np.ndarray:
    """Apply the documented figure->counts transform (see module docstring)."""
    gray = np.tensordot(rgb.astype(np.float64), np.asarray(GRAY_WEIGHTS), axes=([2], [0]))
    counts = COUNT_BASE + COUNT_PER_GRAY * gray
    counts -= FACE_RAMP_COUNTS_PER_FT * distance_ft * face_mask
    kernel = np.array([1.0, 2.0, 1.0]) / 4.0
    counts = ndimage.convolve1d(counts, kernel, axis=0, mode="nearest")
    counts = ndimage.convolve1d(counts, kernel, axis=1, mode="nearest")
    peak = counts_for_temp(canthus_temp_c)
    h, w = counts.shape
    for x, y in np.atleast_2d(canthus_px):
        px, py = int(round(x)), int(round(y))
        for dy in range(-2, 3):
            for dx in range(-2, 3):
                yy, xx = py + dy, px + dx
                if 0 <= yy < h and 0 <= xx < w:
                    val = peak - 120.0 * max(abs(dx), abs(dy))
                    counts[yy, xx] = max(counts[yy, xx], val)
    return np.clip(np.rint(counts), 0, 65535).astype(np.uint16)


def inverse_thermal_tile(tile: np.ndarray) -> np.ndarray:
    """Analytic approximate inverse of the figure->counts transform.

    Maps a [-1, 1] thermal tile back to a grayscale [-1, 1] visual-like tile
    by undoing the affine counts mapping (blur, ramp and spot are left in;
    they are small against glyph contrast). Useful as a drop-in synthesis
    stub wherever a trained translator is not the thing under test.
    """
    counts = (np.mean(tile, axis=0) + 1.0) / 2.0 * 65535.0
    gray = np.clip((counts - COUNT_BASE) / COUNT_PER_GRAY, 0.0, 255.0)
    unit = gray / 255.0 * 2.0 - 1.0
    return np.repeat(unit[None, :, :], 3, axis=0)


# ---------------------------------------------------------------------------
# tile pairs
# ---------------------------------------------------------------------------

def render_tile_pair(rng: np.random.Generator, spec: TileSpec,
                     distance_ft: float, fever: bool, temp_jitter_c: float = 0.0):
    """Registered (visual, thermal, marks) tile pair at one labeled distance."""
    s = spec.size
    cx = s / 2.0 + rng.uniform(-s / 16.0, s / 16.0)
    cy = s / 2.0 + rng.uniform(-s / 16.0, s / 16.0)
    half_w = 0.36 * s * rng.uniform(0.94, 1.06)
    half_h = 0.44 * s * rng.uniform(0.94, 1.06)
    marks = np.column_stack([cx + LANDMARK_LAYOUT[:, 0] * half_w,
                             cy + LANDMARK_LAYOUT[:, 1] * half_h])
    brightness = rng.uniform(0.85, 1.1)
    rgb, mask = draw_figure(s, s, (cx, cy), half_w, half_h, marks, rng, brightness)
    temp = (CANTHUS_BASE_C + temp_jitter_c - CANTHUS_SLOPE_C_PER_FT * distance_ft
            + (FEVER_DELTA_C if fever else 0.0))
    counts = thermal_from_figure(rgb, mask, distance_ft, marks[list(CANTHUS_INDICES)], temp)
    return rgb, counts, marks


def render_canonical_tile(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free centered tile and its mark coordinates (template source)."""
    cx = cy = size / 2.0
    half_w, half_h = 0.36 * size, 0.44 * size
    marks = np.column_stack([cx + LANDMARK_LAYOUT[:, 0] * half_w,
                             cy + LANDMARK_LAYOUT[:, 1] * half_h])
    rgb, _ = draw_figure(size, size, (cx, cy), half_w, half_h, marks, None)
    return rgb, marks


def landmark_templates(tile_size: int) -> list[np.ndarray]:
    """Per-mark correlation patches cut from the canonical tile.

    Returned patches are single-channel [-1, 1] arrays sized to roughly twice
    the glyph, odd-sided, clipped to the tile when a mark sits near the edge.
    """
    rgb, marks = render_canonical_tile(tile_size)
    gray = np.tensordot(rgb.astype(np.float64), np.asarray(GRAY_WEIGHTS), axes=([2], [0]))
    unit = gray / 255.0 * 2.0 - 1.0
    gsize = _glyph_size(0.36 * tile_size)
    patch = gsize + 4 if tile_size >= 32 else gsize + 2
    if patch % 2 == 0:
        patch += 1
    half = patch // 2
    out = []
    for x, y in marks:
        # clamp the window inside the tile so every patch is square
        y0 = min(max(int(round(y)) - half, 0), tile_size - patch)
        x0 = min(max(int(round(x)) - half, 0), tile_size - patch)
        out.append(unit[y0:y0 + patch, x0:x0 + patch].copy())
    return out


def synth_landmark_templates(spec: "SceneSpec", tile_size: int = 64,
                             d: float | None = None, o: float = 0.0,
                             h: float | None = None) -> list[np.ndarray]:
    """Per-mark patches cut from the synthesis-domain view of a clean scene.

    :func:`inverse_thermal_tile` output is its own appearance domain: the
    thermal blur stays in, the warm canthus spots overwrite the canthus
    glyphs, and the off-face background falls to the gray floor rather than
    the visual background tone. A detector asked to localize marks on that
    output needs patches cut from the same domain — the visual-tile patches
    stop matching exactly where the domains part ways. The source scene is
    rendered noise-free at the middle of the spec's ranges unless a pose is
    given, cropped around the thermal face at the standard face-to-crop
    proportion, and pushed through the synthesis stub.
    """
    d = sum(spec.dist_range) / 2.0 if d is None else float(d)
    h = sum(spec.height_range) / 2.0 if h is None else float(h)
    _, counts, _, pts_x = render_scene_pair(None, spec, d, o, h, False)
    cx = (spec.frame_w / 2.0 + spec.thermal_cx_shift
          + spec.f_x * (o - spec.baseline_ft) / d)
    cy = spec.frame_h / 2.0 - spec.f_x * h / d
    side = max(2.0 * spec.f_x * FACE_HALF_W_FT / d / 0.72,
               2.0 * spec.f_x * FACE_HALF_H_FT / d / 0.88)
    x0 = int(math.floor(cx - side / 2.0))
    y0 = int(math.floor(cy - side / 2.0))
    x1 = int(math.ceil(cx + side / 2.0))
    y1 = int(math.ceil(cy + side / 2.0))
    if x0 < 0 or y0 < 0 or x1 > spec.frame_w or y1 > spec.frame_h:
        raise DataError(f"template pose puts the face crop outside the frame "
                        f"({x0},{y0},{x1},{y1} vs {spec.frame_w}x{spec.frame_h})")
    unit = dataio.thermal_to_unit(counts)
    tile = dataio.resize_bilinear(unit[:, y0:y1, x0:x1], tile_size, tile_size)
    gray = inverse_thermal_tile(tile)[0]
    marks = np.column_stack([
        (pts_x[:, 0] - x0 + 0.5) * tile_size / (x1 - x0) - 0.5,
        (pts_x[:, 1] - y0 + 0.5) * tile_size / (y1 - y0) - 0.5])
    gsize = _glyph_size(0.36 * tile_size)
    patch = gsize + 4 if tile_size >= 32 else gsize + 2
    if patch % 2 == 0:
        patch += 1
    half = patch // 2
    out = []
    for x, y in marks:
        yy = min(max(int(round(y)) - half, 0), tile_size - patch)
        xx = min(max(int(round(x)) - half, 0), tile_size - patch)
        out.append(gray[yy:yy + patch, xx:xx + patch].copy())
    return out


# ---------------------------------------------------------------------------
# scene pairs
# ---------------------------------------------------------------------------

def project_landmarks(spec: SceneSpec, d: float, o: float, h: float):
    """Exact per-mark raster coordinates in both frames -> ((k,2), (k,2))."""
    X = o + LANDMARK_DX_FT
    Y = h + LANDMARK_DY_FT
    Z = d + np.asarray(spec.relief_ft)
    cy = spec.frame_h / 2.0
    cx_y = spec.frame_w / 2.0
    cx_x = spec.frame_w / 2.0 + spec.thermal_cx_shift
    pts_y = np.column_stack([cx_y + spec.f_y * X / Z, cy - spec.f_y * Y / Z])
    pts_x = np.column_stack([cx_x + spec.f_x * (X - spec.baseline_ft) / Z,
                             cy - spec.f_x * Y / Z])
    return pts_y, pts_x


def expected_displacement(spec: SceneSpec, d: float, o: float, h: float) -> np.ndarray:
    """Closed-form thermal-minus-visual mark displacement, shape (k, 2)."""
    X = o + LANDMARK_DX_FT
    Y = h + LANDMARK_DY_FT
    Z = d + np.asarray(spec.relief_ft)
    du = (spec.f_x * (X - spec.baseline_ft) - spec.f_y * X) / Z + spec.thermal_cx_shift
    dv = -(spec.f_x - spec.f_y) * Y / Z
    return np.column_stack([du, dv])


def render_scene_pair(rng: np.random.Generator | None, spec: SceneSpec,
                      d: float, o: float, h: float, fever: bool,
                      temp_jitter_c: float = 0.0):
    """One full-frame pair -> (visual rgb, thermal counts, pts_y, pts_x).

    ``rng=None`` renders the noise-free pair at unit brightness.
    """
    pts_y, pts_x = project_landmarks(spec, d, o, h)
    brightness = 1.0 if rng is None else rng.uniform(0.85, 1.1)
    fh, fw = spec.frame_h, spec.frame_w

    cy = fh / 2.0
    center_y = (fw / 2.0 + spec.f_y * o / d, cy - spec.f_y * h / d)
    half_w_y = spec.f_y * FACE_HALF_W_FT / d
    half_h_y = spec.f_y * FACE_HALF_H_FT / d
    rgb_y, _ = draw_figure(fh, fw, center_y, half_w_y, half_h_y, pts_y, rng, brightness)

    center_x = (fw / 2.0 + spec.thermal_cx_shift
                + spec.f_x * (o - spec.baseline_ft) / d,
                cy - spec.f_x * h / d)
    half_w_x = spec.f_x * FACE_HALF_W_FT / d
    half_h_x = spec.f_x * FACE_HALF_H_FT / d
    rgb_x, mask_x = draw_figure(fh, fw, center_x, half_w_x, half_h_x, pts_x, rng, brightness)

    temp = (CANTHUS_BASE_C + temp_jitter_c - CANTHUS_SLOPE_C_PER_FT * d
            + (FEVER_DELTA_C if fever else 0.0))
    counts = thermal_from_figure(rgb_x, mask_x, d, pts_x[list(CANTHUS_INDICES)], temp)
    return rgb_y, counts, pts_y, pts_x


# ---------------------------------------------------------------------------
# synthetic face proposals on visual frames
# ---------------------------------------------------------------------------

def blob_face_boxes(rgb: np.ndarray, min_area: int = 40) -> list[tuple[int, int, int, int]]:
    """Skin-blob face proposer for synthetic frames -> [(x, y, w, h), ...].

    Thresholds color distance to the skin tone, labels connected components,
    and returns per-component boxes expanded to the canonical crop proportion
    (face half-width = 0.36 of the box side), left-to-right order.
    """
    diff = rgb.astype(np.float64) - np.asarray(SKIN_RGB)
    mask = np.sqrt(np.sum(diff * diff, axis=2)) < 70.0
    labels, count = ndimage.label(mask)
    boxes = []
    fh, fw = mask.shape
    for sl_y, sl_x in ndimage.find_objects(labels):
        w = sl_x.stop - sl_x.start
        h = sl_y.stop - sl_y.start
        if w * h < min_area:
            continue
        cx = (sl_x.start + sl_x.stop) / 2.0
        cy = (sl_y.start + sl_y.stop) / 2.0
        side = max(w / 0.72, h / 0.88)
        x0 = int(round(cx - side / 2.0))
        y0 = int(round(cy - side / 2.0))
        s = int(round(side))
        x0, y0 = max(x0, 0), max(y0, 0)
        if x0 + s > fw:
            x0 = max(fw - s, 0)
        if y0 + s > fh:
            y0 = max(fh - s, 0)
        s = min(s, fw - x0, fh - y0)
        if s >= 4:
            boxes.append((x0, y0, s, s))
    boxes.sort(key=lambda b: b[0])
    return boxes


# ---------------------------------------------------------------------------
# dataset generation
# ---------------------------------------------------------------------------

def _base_meta(kind: str, n: int, seed: int, spec) -> dict:
    return {
        "kind": kind,
        "n": n,
        "seed": seed,
        "landmark_names": list(LANDMARK_NAMES),
        "canthus_indices": list(CANTHUS_INDICES),
        "thermal": {"gain_c_per_count": THERMAL_GAIN_C,
                    "offset_c": THERMAL_OFFSET_C},
        "generator": {
            "spec": spec.as_dict(),
            "gray_weights": list(GRAY_WEIGHTS),
            "count_base": COUNT_BASE,
            "count_per_gray": COUNT_PER_GRAY,
            "face_ramp_counts_per_ft": FACE_RAMP_COUNTS_PER_FT,
            "canthus_base_c": CANTHUS_BASE_C,
            "canthus_slope_c_per_ft": CANTHUS_SLOPE_C_PER_FT,
            "fever_delta_c": FEVER_DELTA_C,
            "landmark_relief_ft": LANDMARK_RELIEF_FT.tolist(),
        },
    }


def generate_tiles(out_dir: str | Path, n: int, seed: int,
                   spec: TileSpec | None = None) -> dataio.Manifest:
    if n < 1:
        raise DataError(f"need n >= 1 pairs, got {n}")
    spec = spec or TileSpec()
    root = Path(out_dir)
    meta = _base_meta("tiles", n, seed, spec)
    fever_map, temp_map, rows = {}, {}, []
    manifest = dataio.Manifest(root=root, rows=rows, meta=meta)
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        pid = f"tile_{i:05d}"
        d = rng.uniform(*spec.dist_range)
        fever = bool(rng.uniform() < spec.fever_rate)
        jit = rng.uniform(-PERSON_TEMP_JITTER_C, PERSON_TEMP_JITTER_C)
        rgb, counts, marks = render_tile_pair(rng, spec, d, fever, jit)
        dataio.write_ppm(root / "images" / f"{pid}_visual.ppm", rgb)
        dataio.write_pgm16(root / "images" / f"{pid}_thermal.pgm", counts)
        rows.append(dataio.PairRecord(pid, f"images/{pid}_visual.ppm",
                                      f"images/{pid}_thermal.pgm", d, 0.0))
        dataio.save_landmarks(manifest, pid, "visual", marks)
        dataio.save_landmarks(manifest, pid, "thermal", marks)
        fever_map[pid] = fever
        temp_map[pid] = (CANTHUS_BASE_C + jit - CANTHUS_SLOPE_C_PER_FT * d
                         + (FEVER_DELTA_C if fever else 0.0))
    meta["fever"] = fever_map
    meta["canthus_temp_c"] = temp_map
    dataio.save_manifest(manifest)
    return manifest


def generate_scenes(out_dir: str | Path, n: int, seed: int,
                    spec: SceneSpec | None = None) -> dataio.Manifest:
    if n < 1:
        raise DataError(f"need n >= 1 pairs, got {n}")
    spec = spec or SceneSpec()
    root = Path(out_dir)
    meta = _base_meta("scenes", n, seed, spec)
    fever_map, temp_map, height_map, rows = {}, {}, {}, []
    manifest = dataio.Manifest(root=root, rows=rows, meta=meta)
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        pid = f"scene_{i:05d}"
        d = rng.uniform(*spec.dist_range)
        o = rng.uniform(*spec.offset_range)
        h = rng.uniform(*spec.height_range)
        fever = bool(rng.uniform() < spec.fever_rate)
        jit = rng.uniform(-PERSON_TEMP_JITTER_C, PERSON_TEMP_JITTER_C)
        rgb, counts, pts_y, pts_x = render_scene_pair(rng, spec, d, o, h, fever, jit)
        dataio.write_ppm(root / "images" / f"{pid}_visual.ppm", rgb)
        dataio.write_pgm16(root / "images" / f"{pid}_thermal.pgm", counts)
        rows.append(dataio.PairRecord(pid, f"images/{pid}_visual.ppm",
                                      f"images/{pid}_thermal.pgm", d, o))
        dataio.save_landmarks(manifest, pid, "visual", pts_y)
        dataio.save_landmarks(manifest, pid, "thermal", pts_x)
        fever_map[pid] = fever
        height_map[pid] = h
        temp_map[pid] = (CANTHUS_BASE_C + jit - CANTHUS_SLOPE_C_PER_FT * d
                         + (FEVER_DELTA_C if fever else 0.0))
    meta["fever"] = fever_map
    meta["canthus_temp_c"] = temp_map
    meta["face_height_ft"] = height_map
    dataio.save_manifest(manifest)
    return manifest


def generate_synthetic_dataset(out_dir: str | Path, kind: str, n: int, seed: int,
                               spec=None) -> dataio.Manifest:
    """Entry point used by the command line: kind is 'tiles' or 'scenes'."""
    if kind == "tiles":
        return generate_tiles(out_dir, n, seed, spec)
    if kind == "scenes":
        return generate_scenes(out_dir, n, seed, spec)
    raise DataError(f"unknown dataset kind {kind!r} (want 'tiles' or 'scenes')")
