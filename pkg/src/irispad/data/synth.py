"""Procedural iris-like images for desk-scale end-to-end runs.

Every image is a synthetic eye: dark pupil, radially textured iris annulus and
bright sclera with smooth band edges and sensor noise. Attacks start from the
same bona fide rendering of the subject's eye and add an artefact:

``textured_lens``
    periodic dot lattice printed over the iris annulus.
``printout``
    halftone grid (strongest in mid-tones) followed by a global blur.
``print_lens``
    printout of an eye wearing a textured lens.
``replay``
    moire banding and a specular screen-reflection rectangle.

Subjects own their iris texture and geometry, so a subject-disjoint split
really separates identities. The generator also writes ``geometry.csv``
(normalized pupil/iris circles per file) next to the manifest.
"""

import csv
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .manifest import ATTACK_TYPES, SPECTRA, SampleRecord, write_manifest
from .video import write_video

GEOMETRY_COLUMNS = ("path", "cx", "cy", "pupil_r", "iris_r")


@dataclass
class SynthSpec:
    """Counts per split, keyed by ``attack_type`` or ``attack_type@spectrum``."""

    train: dict = field(default_factory=lambda: {"none": 300, "textured_lens": 150, "printout": 150})
    test: dict = field(default_factory=lambda: {"none": 100, "textured_lens": 50, "printout": 50})
    spectrum: str = "nir"
    image_size: int = 128
    images_per_subject: int = 6
    database: str = "synthetic"
    sensor: str = "procedural"
    video_frames: int = 0

    def items(self, split):
        counts = self.train if split == "train" else self.test
        out = []
        for key in sorted(counts):
            n = int(counts[key])
            attack_type, _, spectrum = key.partition("@")
            spectrum = (spectrum or self.spectrum).lower()
            if attack_type not in ATTACK_TYPES or spectrum not in SPECTRA:
                raise ValueError(f"bad synth count key {key!r}")
            out.extend([(attack_type, spectrum)] * max(n, 0))
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return {
            "train": dict(self.train),
            "test": dict(self.test),
            "spectrum": self.spectrum,
            "image_size": self.image_size,
            "images_per_subject": self.images_per_subject,
            "database": self.database,
            "sensor": self.sensor,
            "video_frames": self.video_frames,
        }


def _smoothstep(edge, r, width):
    return 1.0 / (1.0 + np.exp(-(r - edge) / width))


def _subject_params(seed, subject):
    rng = np.random.default_rng([seed, zlib.crc32(subject.encode())])
    k = rng.integers(6, 22, size=5)
    return {
        "freqs": k,
        "phases": rng.uniform(0, 2 * np.pi, size=5),
        "amps": rng.uniform(0.03, 0.08, size=5),
        "iris_level": rng.uniform(0.38, 0.52),
        "pupil_r": rng.uniform(0.11, 0.15),
        "iris_r": rng.uniform(0.31, 0.37),
        "tint": rng.uniform(0.7, 1.1, size=3),
        "ring_freq": rng.uniform(25, 45),
    }


def _render_eye(params, rng, size):
    """Bona fide rendering; returns (intensity in [0, 1], geometry dict)."""
    cx = 0.5 + rng.uniform(-0.04, 0.04)
    cy = 0.5 + rng.uniform(-0.04, 0.04)
    pupil_r = params["pupil_r"] * rng.uniform(0.92, 1.08)
    iris_r = params["iris_r"] * rng.uniform(0.97, 1.03)
    yy, xx = np.mgrid[0:size, 0:size] / float(size)
    dx, dy = xx - cx, yy - cy
    r = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx) + rng.uniform(-0.15, 0.15)
    soft = 0.008

    radial = (r - pupil_r) / max(iris_r - pupil_r, 1e-3)
    texture = sum(a * np.cos(k * theta + p + 3.0 * radial)
                  for k, p, a in zip(params["freqs"], params["phases"], params["amps"]))
    texture += 0.04 * np.cos(params["ring_freq"] * r)
    iris = params["iris_level"] + texture - 0.12 * radial

    sclera = 0.86 - 0.25 * np.clip(r - iris_r - 0.15, 0, None)
    img = sclera
    img = img + (iris - img) * (1 - _smoothstep(iris_r, r, soft))
    img = img + (0.06 - img) * (1 - _smoothstep(pupil_r, r, soft * 0.7))
    # corneal glint inside the pupil
    gx, gy = cx + 0.4 * pupil_r, cy - 0.4 * pupil_r
    img = img + 0.8 * np.exp(-((xx - gx) ** 2 + (yy - gy) ** 2) / (2 * (0.012) ** 2))
    img = img + rng.normal(0, 0.015, size=img.shape)
    geometry = {"cx": cx, "cy": cy, "pupil_r": pupil_r, "iris_r": iris_r}
    return np.clip(img, 0, 1), geometry


def _iris_mask(size, g, outer=1.04):
    yy, xx = np.mgrid[0:size, 0:size] / float(size)
    r = np.hypot(xx - g["cx"], yy - g["cy"])
    return (r >= g["pupil_r"]) & (r <= g["iris_r"] * outer)


def _apply_lens(img, rng, g, size):
    period = rng.uniform(0.09, 0.11) * size
    angle = rng.uniform(0, np.pi)
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    u = xx * np.cos(angle) + yy * np.sin(angle)
    v = -xx * np.sin(angle) + yy * np.cos(angle)
    lattice = (np.cos(2 * np.pi * u / period) + 1) * (np.cos(2 * np.pi * v / period) + 1) / 4
    dots = lattice ** 2
    mask = gaussian_filter(_iris_mask(size, g).astype(float), 0.8)
    level = rng.uniform(0.3, 0.5)
    # the printed layer hides most of the natural texture and carries a dark limbal ring
    r = np.hypot(xx / size - g["cx"], yy / size - g["cy"])
    ring = np.exp(-((r - 0.93 * g["iris_r"]) / (0.035 * g["iris_r"] + 0.01)) ** 2)
    covered = 0.45 * img + 0.55 * level
    printed = covered * (1 - 0.8 * dots) + level * 0.5 * dots
    printed = printed * (1 - 0.6 * ring)
    return img + (printed - img) * mask


def _apply_printout(img, rng, size):
    period = rng.uniform(0.055, 0.07) * size
    angle = rng.uniform(0, np.pi / 2)
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    u = xx * np.cos(angle) + yy * np.sin(angle)
    v = -xx * np.sin(angle) + yy * np.cos(angle)
    grid = np.cos(2 * np.pi * u / period) * np.cos(2 * np.pi * v / period)
    # halftone modulation peaks in mid-tones, vanishes near white and full black
    midtone = 4 * img * (1 - img)
    toned = img + 0.22 * midtone * grid
    return gaussian_filter(toned, rng.uniform(0.006, 0.01) * size)


def _apply_replay(img, rng, size):
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    a1, a2 = rng.uniform(0, np.pi, size=2)
    f1 = rng.uniform(0.35, 0.45)
    f2 = f1 * rng.uniform(0.9, 1.1)
    moire = np.cos(f1 * (xx * np.cos(a1) + yy * np.sin(a1))) * np.cos(f2 * (xx * np.cos(a2) + yy * np.sin(a2)))
    out = img * (1 + 0.12 * moire)
    w, h = rng.integers(size // 8, size // 4, size=2)
    x0, y0 = rng.integers(0, size - w), rng.integers(0, size - h)
    out[y0:y0 + h, x0:x0 + w] = out[y0:y0 + h, x0:x0 + w] * 0.4 + 0.6
    return out


def render_sample(params, attack_type, spectrum, rng, size):
    img, g = _render_eye(params, rng, size)
    if attack_type in ("textured_lens", "print_lens"):
        img = _apply_lens(img, rng, g, size)
    if attack_type in ("printout", "print_lens"):
        img = _apply_printout(img, rng, size)
    if attack_type == "replay":
        img = _apply_replay(img, rng, size)
    img = np.clip(img, 0, 1)
    if spectrum == "vis":
        img = np.clip(img[:, :, None] * params["tint"][None, None, :], 0, 1)
    return np.rint(img * 255).astype(np.uint8), g


def _save_png(array, path):
    Image.fromarray(array).save(path, format="PNG", optimize=False, compress_level=6)


def synthesize_dataset(spec, out_dir, seed=0):
    """Write images, ``manifest.csv`` and ``geometry.csv`` under ``out_dir``.

    Returns the list of SampleRecords written. Identical seeds give
    byte-identical files.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    records, geometry = [], []
    for split in ("train", "test"):
        items = spec.items(split)
        if not items:
            continue
        order = np.random.default_rng([seed, 0 if split == "train" else 1]).permutation(len(items))
        for slot, idx in enumerate(order):
            attack_type, spectrum = items[idx]
            subject = f"{split[:2]}{slot // spec.images_per_subject:04d}"
            params = _subject_params(seed, subject)
            rng = np.random.default_rng([seed, 2 if split == "train" else 3, slot])
            label = "bona_fide" if attack_type == "none" else "attack"
            stem = f"{split}_{slot:05d}_{attack_type}_{spectrum}"
            if spec.video_frames > 0 and spectrum == "vis":
                rel = f"images/{stem}.avi"
                frames = []
                for _ in range(spec.video_frames):
                    frame, g = render_sample(params, attack_type, spectrum, rng, spec.image_size)
                    frames.append(frame)
                write_video(out_dir / rel, frames)
            else:
                rel = f"images/{stem}.png"
                image, g = render_sample(params, attack_type, spectrum, rng, spec.image_size)
                _save_png(image, out_dir / rel)
            records.append(SampleRecord(
                path=rel, subject_id=subject, label=label, attack_type=attack_type,
                spectrum=spectrum, database=spec.database, sensor=spec.sensor, split=split,
                root=str(out_dir.resolve()),
            ))
            geometry.append({"path": rel, **{k: f"{g[k]:.6f}" for k in GEOMETRY_COLUMNS[1:]}})
    write_manifest(records, out_dir / "manifest.csv")
    with open(out_dir / "geometry.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=GEOMETRY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(geometry)
    return records


def load_geometry(file):
    """Read ``geometry.csv`` into {path: {cx, cy, pupil_r, iris_r}} (normalized units)."""
    with open(file, encoding="utf-8", newline="") as fh:
        return {row["path"]: {k: float(row[k]) for k in GEOMETRY_COLUMNS[1:]} for row in csv.DictReader(fh)}


def annulus_mask(geometry, size):
    """Boolean size x size mask of the iris annulus for one geometry entry."""
    return _iris_mask(size, geometry, outer=1.0)
