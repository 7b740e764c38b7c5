"""Bi-temporal sample generation, directory loading, and image file I/O.

The synthetic generator builds a shared background (elliptical blobs plus
texture noise), then inserts bright shapes into one frame or the other; the
ground-truth mask is exactly the union of those shapes, which by color
construction is also exactly where the two noiseless geometries differ.
Brightness/contrast jitter is applied per frame afterwards and never enters
the mask.

Real datasets load from the conventional A/ B/ label/ directory layout with
matching filenames.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

SIZE_MULTIPLE = 32


@dataclass(frozen=True)
class BiTemporalSample:
    """One pair of co-registered images plus its binary change mask."""
    img_t1: np.ndarray          # (1, 3, H, W) in [0, 1]
    img_t2: np.ndarray          # (1, 3, H, W) in [0, 1]
    mask: np.ndarray            # (1, 1, H, W) in {0, 1}
    id: str

    def __post_init__(self):
        h, w = self.mask.shape[2:]
        if h % SIZE_MULTIPLE or w % SIZE_MULTIPLE:
            raise ValueError(
                f"sample {self.id}: size {h}x{w} must be divisible by {SIZE_MULTIPLE}")
        if not np.isin(self.mask, (0.0, 1.0)).all():
            raise ValueError(f"sample {self.id}: mask must be exactly binary")


@dataclass(frozen=True)
class SynthConfig:
    """Fully seed-determined recipe for synthetic change pairs."""
    size: int = 64
    background_blobs: tuple[int, int] = (3, 6)
    blob_size: tuple[int, int] = (8, 24)
    change_shapes: tuple[int, int] = (1, 3)
    shape_size: tuple[int, int] = (10, 22)
    texture_amp: float = 0.02
    jitter: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.size < SIZE_MULTIPLE or self.size % SIZE_MULTIPLE:
            raise ValueError(
                f"synthetic size {self.size} must be a positive multiple of {SIZE_MULTIPLE}")


@dataclass
class _Shape:
    kind: str                   # "rect" or "ellipse"
    cy: float
    cx: float
    ry: float
    rx: float
    color: tuple[float, float, float]
    inserted: bool              # True: appears in T2; False: appears in T1 only


def _rasterize(shape: _Shape, size: int) -> np.ndarray:
    ys = np.arange(size)[:, None]
    xs = np.arange(size)[None, :]
    if shape.kind == "rect":
        return (np.abs(ys - shape.cy) <= shape.ry) & (np.abs(xs - shape.cx) <= shape.rx)
    return ((ys - shape.cy) / shape.ry) ** 2 + ((xs - shape.cx) / shape.rx) ** 2 <= 1.0


def _generate_one(cfg: SynthConfig, rng: np.random.Generator,
                  sample_id: str) -> tuple[BiTemporalSample, list[_Shape]]:
    s = cfg.size
    base = rng.uniform(0.2, 0.4)
    background = np.full((3, s, s), base)
    n_blobs = int(rng.integers(cfg.background_blobs[0], cfg.background_blobs[1] + 1))
    for _ in range(n_blobs):
        blob = _Shape(
            kind="ellipse",
            cy=rng.uniform(0, s), cx=rng.uniform(0, s),
            ry=rng.uniform(*cfg.blob_size) / 2, rx=rng.uniform(*cfg.blob_size) / 2,
            color=tuple(rng.uniform(0.10, 0.55, size=3)),
            inserted=False)
        inside = _rasterize(blob, s)
        for ch in range(3):
            background[ch][inside] = blob.color[ch]
    background += rng.uniform(-cfg.texture_amp, cfg.texture_amp, size=(3, s, s))
    background = np.clip(background, 0.0, 1.0)

    n_changes = int(rng.integers(cfg.change_shapes[0], cfg.change_shapes[1] + 1))
    shapes: list[_Shape] = []
    for i in range(n_changes):
        # bright, per-shape-distinct colors so changed pixels always differ
        # from the darker background and from each other
        lead = 0.72 + 0.22 * (i + rng.uniform(0.05, 0.95)) / max(n_changes, 1)
        shapes.append(_Shape(
            kind="rect" if rng.uniform() < 0.5 else "ellipse",
            cy=rng.uniform(0.15 * s, 0.85 * s), cx=rng.uniform(0.15 * s, 0.85 * s),
            ry=rng.uniform(*cfg.shape_size) / 2, rx=rng.uniform(*cfg.shape_size) / 2,
            color=(lead, lead * 0.92, lead * 0.85),
            inserted=bool(rng.uniform() < 0.5)))

    geo1 = background.copy()
    geo2 = background.copy()
    mask = np.zeros((s, s), dtype=bool)
    for shape in shapes:
        inside = _rasterize(shape, s)
        mask |= inside
        target = geo2 if shape.inserted else geo1
        for ch in range(3):
            target[ch][inside] = shape.color[ch]

    frames = []
    for geo in (geo1, geo2):
        gain = 1.0 + rng.uniform(-cfg.jitter, cfg.jitter)
        offset = 0.3 * rng.uniform(-cfg.jitter, cfg.jitter)
        frames.append(np.clip(gain * geo + offset, 0.0, 1.0))

    sample = BiTemporalSample(
        img_t1=frames[0][None],
        img_t2=frames[1][None],
        mask=mask.astype(np.float64)[None, None],
        id=sample_id)
    return sample, shapes


def synth_generate(cfg: SynthConfig, n: int) -> list[BiTemporalSample]:
    """n seed-determined samples; the same config always yields identical bits."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(cfg.seed)
    return [_generate_one(cfg, rng, f"synth_{i:04d}")[0] for i in range(n)]


# -- file I/O ----------------------------------------------------------------


def _to_uint8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)


def save_image(img: np.ndarray, path: str | Path) -> None:
    """Write a (3,H,W) or (H,W) array in [0,1] as an 8-bit PNG."""
    img = np.asarray(img)
    if img.ndim == 3:
        Image.fromarray(_to_uint8(img).transpose(1, 2, 0), mode="RGB").save(path)
    else:
        Image.fromarray(_to_uint8(img), mode="L").save(path)


def load_image(path: str | Path) -> np.ndarray:
    """Read an image file to a float (C,H,W) or (H,W) array in [0,1]."""
    with Image.open(path) as im:
        arr = np.asarray(im, dtype=np.float64) / 255.0
    if arr.ndim == 3:
        return arr[..., :3].transpose(2, 0, 1)
    return arr


def save_mask_image(mask: np.ndarray, path: str | Path) -> None:
    """Write a mask or probability map (values in [0,1]) as grayscale PNG."""
    mask = np.asarray(mask, dtype=np.float64).squeeze()
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D after squeeze, got shape {mask.shape}")
    if mask.min() < 0 or mask.max() > 1:
        raise ValueError("mask values must lie in [0, 1]")
    save_image(mask, path)


# four-color rendering: TP white, TN black, FP red, FN green
COMPARISON_COLORS = {
    "tp": (255, 255, 255),
    "tn": (0, 0, 0),
    "fp": (255, 0, 0),
    "fn": (0, 255, 0),
}


def save_comparison_image(pred: np.ndarray, target: np.ndarray,
                          path: str | Path) -> None:
    pred = np.asarray(pred).squeeze().astype(bool)
    target = np.asarray(target).squeeze().astype(bool)
    if pred.shape != target.shape:
        raise ValueError(f"comparison shapes differ: {pred.shape} vs {target.shape}")
    out = np.zeros(pred.shape + (3,), dtype=np.uint8)
    out[pred & target] = COMPARISON_COLORS["tp"]
    out[~pred & ~target] = COMPARISON_COLORS["tn"]
    out[pred & ~target] = COMPARISON_COLORS["fp"]
    out[~pred & target] = COMPARISON_COLORS["fn"]
    Image.fromarray(out, mode="RGB").save(path)


# -- pair directories --------------------------------------------------------


def save_pair_dir(samples: list[BiTemporalSample], root: str | Path) -> None:
    """Write samples in the A/ B/ label/ layout plus a manifest of ids."""
    root = Path(root)
    for sub in ("A", "B", "label"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for sample in samples:
        name = f"{sample.id}.png"
        save_image(sample.img_t1[0], root / "A" / name)
        save_image(sample.img_t2[0], root / "B" / name)
        save_image(sample.mask[0, 0], root / "label" / name)
    manifest = root / "manifest.txt"
    manifest.write_text("".join(f"{s.id}\n" for s in samples), encoding="utf-8")


def load_pair_dir(root: str | Path) -> list[BiTemporalSample]:
    """Load a dataset from A/ B/ label/ subdirectories with matching filenames."""
    root = Path(root)
    for sub in ("A", "B", "label"):
        if not (root / sub).is_dir():
            raise FileNotFoundError(f"{root}: missing required subdirectory {sub}/")
    names = sorted(p.name for p in (root / "A").iterdir() if p.is_file())
    if not names:
        raise FileNotFoundError(f"{root}/A contains no image files")
    samples = []
    for name in names:
        for sub in ("B", "label"):
            if not (root / sub / name).is_file():
                raise FileNotFoundError(f"{root}/{sub}: missing counterpart {name}")
        img1 = load_image(root / "A" / name)
        img2 = load_image(root / "B" / name)
        label = load_image(root / "label" / name)
        if label.ndim == 3:
            label = label[0]
        shapes = {img1.shape[-2:], img2.shape[-2:], label.shape[-2:]}
        if len(shapes) != 1:
            raise ValueError(f"{name}: sizes differ within the triple: {sorted(shapes)}")
        mask = (label > 127.0 / 255.0).astype(np.float64)
        samples.append(BiTemporalSample(
            img_t1=img1[None], img_t2=img2[None],
            mask=mask[None, None], id=Path(name).stem))
    return samples
