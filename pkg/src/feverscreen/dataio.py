"""File formats and dataset plumbing.

Images are portable pixmaps: 8-bit P6 PPM for visual frames and 16-bit P5 PGM
(big-endian samples, per the format) for thermal count rasters. Datasets are
directories holding a ``manifest.csv``, a ``dataset.json`` with generator
parameters and thermal calibration, per-pair images and landmark CSVs.

All writes go through a temp-file + rename so readers never observe a partial
file. JSON is serialized canonically (sorted keys) so identical inputs give
byte-identical outputs.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

MANIFEST_COLUMNS = ["id", "visual_path", "thermal_path", "distance_ft", "offset_ft"]


# ---------------------------------------------------------------------------
# atomic writes
# ---------------------------------------------------------------------------

def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str | Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def write_jsonl(path: str | Path, records: list[dict]) -> None:
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    atomic_write_text(path, text)


# ---------------------------------------------------------------------------
# netpbm images
# ---------------------------------------------------------------------------

def write_ppm(path: str | Path, img: np.ndarray) -> None:
    """8-bit RGB, shape (h, w, 3)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise DataError(f"PPM wants uint8 (h, w, 3), got {img.dtype} {img.shape}")
    h, w = img.shape[:2]
    atomic_write_bytes(path, b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())


def write_pgm16(path: str | Path, img: np.ndarray) -> None:
    """16-bit grayscale counts, shape (h, w); samples stored big-endian."""
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint16:
        raise DataError(f"16-bit PGM wants uint16 (h, w), got {img.dtype} {img.shape}")
    h, w = img.shape
    atomic_write_bytes(path, b"P5\n%d %d\n65535\n" % (w, h)
                       + img.astype(">u2").tobytes())


def _read_pnm_header(blob: bytes, path) -> tuple[bytes, int, int, int, int]:
    # magic, then whitespace/comment-separated width, height, maxval
    if len(blob) < 2:
        raise DataError(f"{path}: empty image file")
    magic = blob[:2]
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError(f"{path}: truncated header")
        try:
            fields.append(int(blob[start:pos]))
        except ValueError:
            raise DataError(f"{path}: bad header token {blob[start:pos]!r}") from None
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    return magic, w, h, maxval, pos


def read_ppm(path: str | Path) -> np.ndarray:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    magic, w, h, maxval, pos = _read_pnm_header(blob, path)
    if magic != b"P6" or maxval != 255:
        raise DataError(f"{path}: expected binary 8-bit PPM (P6/255), "
                        f"got {magic!r}/{maxval}")
    need = w * h * 3
    data = blob[pos:pos + need]
    if len(data) != need:
        raise DataError(f"{path}: truncated pixel data ({len(data)}/{need} bytes)")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()


def read_pgm16(path: str | Path) -> np.ndarray:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    magic, w, h, maxval, pos = _read_pnm_header(blob, path)
    if magic != b"P5" or maxval != 65535:
        raise DataError(f"{path}: expected binary 16-bit PGM (P5/65535), "
                        f"got {magic!r}/{maxval}")
    need = w * h * 2
    data = blob[pos:pos + need]
    if len(data) != need:
        raise DataError(f"{path}: truncated pixel data ({len(data)}/{need} bytes)")
    return np.frombuffer(data, dtype=">u2").reshape(h, w).astype(np.uint16)


# ---------------------------------------------------------------------------
# value mapping between rasters and model tiles
# ---------------------------------------------------------------------------

def visual_to_unit(img: np.ndarray) -> np.ndarray:
    """uint8 (h, w, 3) -> float64 (3, h, w) in [-1, 1]."""
    if img.dtype != np.uint8 or img.ndim != 3:
        raise DataError(f"expected uint8 (h, w, 3), got {img.dtype} {img.shape}")
    return img.astype(np.float64).transpose(2, 0, 1) / 255.0 * 2.0 - 1.0


def unit_to_visual(tile: np.ndarray) -> np.ndarray:
    """float (3, h, w) in [-1, 1] -> uint8 (h, w, 3), clipping out-of-range."""
    arr = np.clip(tile, -1.0, 1.0)
    arr = (arr + 1.0) / 2.0 * 255.0
    return np.rint(arr).astype(np.uint8).transpose(1, 2, 0)


def thermal_to_unit(counts: np.ndarray) -> np.ndarray:
    """uint16 (h, w) -> float64 (3, h, w): 1-channel counts replicated to 3."""
    if counts.dtype != np.uint16 or counts.ndim != 2:
        raise DataError(f"expected uint16 (h, w), got {counts.dtype} {counts.shape}")
    one = counts.astype(np.float64) / 65535.0 * 2.0 - 1.0
    return np.repeat(one[None, :, :], 3, axis=0)


def unit_to_thermal(tile: np.ndarray) -> np.ndarray:
    """float (3, h, w) in [-1, 1] -> uint16 (h, w), channel-averaged."""
    one = np.clip(np.mean(tile, axis=0), -1.0, 1.0)
    return np.rint((one + 1.0) / 2.0 * 65535.0).astype(np.uint16)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample over the last two axes (half-pixel-center convention)."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"bad output size {out_h}x{out_w}")
    h, w = img.shape[-2], img.shape[-1]
    arr = np.asarray(img, dtype=np.float64)
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).reshape(-1, 1)
    fx = (xs - x0).reshape(1, -1)
    a = arr[..., y0[:, None], x0[None, :]]
    b = arr[..., y0[:, None], x1[None, :]]
    c = arr[..., y1[:, None], x0[None, :]]
    d = arr[..., y1[:, None], x1[None, :]]
    return (a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx
            + c * fy * (1 - fx) + d * fy * fx)


# ---------------------------------------------------------------------------
# dataset manifests
# ---------------------------------------------------------------------------

@dataclass
class PairRecord:
    pair_id: str
    visual_path: str
    thermal_path: str
    distance_ft: float | None = None
    offset_ft: float | None = None


@dataclass
class Manifest:
    root: Path
    rows: list[PairRecord]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.root = Path(self.root)

    def __len__(self):
        return len(self.rows)

    def path(self, rel: str) -> Path:
        return self.root / rel

    def load_visual(self, i: int) -> np.ndarray:
        return read_ppm(self.path(self.rows[i].visual_path))

    def load_thermal(self, i: int) -> np.ndarray:
        return read_pgm16(self.path(self.rows[i].thermal_path))

    def _landmark_file(self, i: int, domain: str) -> Path:
        return self.path(f"landmarks/{self.rows[i].pair_id}_{domain}.csv")

    def load_landmarks(self, i: int, domain: str) -> np.ndarray:
        """(k, 2) float array of (x, y) frame coordinates, ordered by index."""
        path = self._landmark_file(i, domain)
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        except OSError as exc:
            raise DataError(f"cannot read landmark file {path}: {exc}") from exc
        pts = np.full((len(rows), 2), np.nan)
        for row in rows:
            pts[int(row["index"])] = (float(row["x"]), float(row["y"]))
        if np.any(np.isnan(pts)):
            raise DataError(f"{path}: missing landmark indices")
        return pts

    def has_pose_labels(self) -> bool:
        return all(r.distance_ft is not None and r.offset_ft is not None
                   for r in self.rows)


def save_manifest(manifest: Manifest) -> None:
    root = Path(manifest.root)
    root.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_COLUMNS)
    for r in manifest.rows:
        writer.writerow([
            r.pair_id, r.visual_path, r.thermal_path,
            "" if r.distance_ft is None else repr(float(r.distance_ft)),
            "" if r.offset_ft is None else repr(float(r.offset_ft)),
        ])
    atomic_write_text(root / "manifest.csv", buf.getvalue())
    write_json(root / "dataset.json", manifest.meta)


def save_landmarks(manifest: Manifest, pair_id: str, domain: str,
                   points: np.ndarray) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "x", "y"])
    for i, (x, y) in enumerate(np.asarray(points, dtype=np.float64)):
        writer.writerow([i, repr(float(x)), repr(float(y))])
    atomic_write_text(manifest.root / "landmarks" / f"{pair_id}_{domain}.csv",
                      buf.getvalue())


def load_manifest(root: str | Path) -> Manifest:
    root = Path(root)
    csv_path = root / "manifest.csv"
    try:
        with open(csv_path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != MANIFEST_COLUMNS:
                raise DataError(f"{csv_path}: bad columns {reader.fieldnames}, "
                                f"expected {MANIFEST_COLUMNS}")
            raw = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read manifest {csv_path}: {exc}") from exc
    rows = []
    for r in raw:
        rows.append(PairRecord(
            pair_id=r["id"],
            visual_path=r["visual_path"],
            thermal_path=r["thermal_path"],
            distance_ft=float(r["distance_ft"]) if r["distance_ft"] else None,
            offset_ft=float(r["offset_ft"]) if r["offset_ft"] else None,
        ))
    meta = read_json(root / "dataset.json") if (root / "dataset.json").exists() else {}
    manifest = Manifest(root=root, rows=rows, meta=meta)
    missing = [str(p) for r in rows
               for p in (root / r.visual_path, root / r.thermal_path)
               if not p.exists()]
    if missing:
        raise DataError(f"{root}: manifest references missing files: {missing[:5]}")
    return manifest


def load_paired_directory(visual_dir: str | Path, thermal_dir: str | Path,
                          allow_partial: bool = False) -> Manifest:
    """Pair ``<stem>.ppm`` visual images with ``<stem>.pgm`` thermal rasters.

    Pairing is by filename stem. Unmatched stems raise DataError listing the
    offenders unless ``allow_partial`` is set, in which case they are skipped.
    """
    visual_dir, thermal_dir = Path(visual_dir), Path(thermal_dir)
    vis = {p.stem: p for p in sorted(visual_dir.glob("*.ppm"))}
    th = {p.stem: p for p in sorted(thermal_dir.glob("*.pgm"))}
    if not vis or not th:
        raise DataError(f"no images found under {visual_dir} / {thermal_dir}")
    unmatched = sorted(set(vis) ^ set(th))
    if unmatched and not allow_partial:
        raise DataError(f"unpaired stems (use allow_partial to skip): {unmatched}")
    common = sorted(set(vis) & set(th))
    if not common:
        raise DataError("no matching visual/thermal pairs")
    rows = [PairRecord(pair_id=stem,
                       visual_path=os.path.relpath(vis[stem], visual_dir),
                       thermal_path=os.path.relpath(th[stem], visual_dir))
            for stem in common]
    return Manifest(root=visual_dir, rows=rows,
                    meta={"kind": "paired-directory", "skipped": unmatched})


def load_tile_pairs(manifest: Manifest, tile_size: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Load (thermal, visual) unit tiles, resizing to ``tile_size`` if needed."""
    thermal, visual = [], []
    for i in range(len(manifest)):
        v = visual_to_unit(manifest.load_visual(i))
        t = thermal_to_unit(manifest.load_thermal(i))
        if v.shape[1:] != (tile_size, tile_size):
            v = resize_bilinear(v, tile_size, tile_size)
        if t.shape[1:] != (tile_size, tile_size):
            t = resize_bilinear(t, tile_size, tile_size)
        visual.append(v)
        thermal.append(t)
    if not visual:
        raise DataError(f"{manifest.root}: empty dataset")
    return thermal, visual
