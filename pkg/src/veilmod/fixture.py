"""Placeholder corpus generator.

Real moderation corpora cannot be redistributed, so tests and demos run on
procedurally generated pattern images that carry the same labels and the same
category x realism distribution as the study dataset (785 images). Generation
is fully deterministic for a given seed.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np
from PIL import Image

DEFAULT_DISTRIBUTION = {
    ("sex_nudity", "realistic"): 152,
    ("sex_nudity", "synthetic"): 148,
    ("graphic", "realistic"): 123,
    ("graphic", "synthetic"): 116,
    ("safe", "realistic"): 108,
    ("safe", "synthetic"): 138,
}

_BASE_TONES = {
    "sex_nudity": (200, 160, 120),
    "graphic": (180, 70, 60),
    "safe": (90, 160, 200),
}


def _pattern(image_id: str, category: str, realism: str, width: int, height: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, zlib.crc32(image_id.encode())])
    base = np.array(_BASE_TONES[category], dtype=np.float64)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    phase = rng.uniform(0, 2 * np.pi)
    freq = rng.uniform(0.05, 0.25)
    wave = np.sin(freq * xx + phase) * np.cos(freq * yy - phase)
    img = base[None, None, :] * (0.6 + 0.4 * (wave[:, :, None] + 1) / 2)
    if realism == "realistic":
        img += rng.normal(0, 18, size=img.shape)
    else:
        img = np.round(img / 32) * 32  # posterized, cartoon-flat bands
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def generate_placeholder_corpus(
    out_dir: Path | str,
    seed: int = 0,
    width: int = 96,
    height: int = 64,
    distribution: dict[tuple[str, str], int] | None = None,
) -> Path:
    """Write placeholder images plus their manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    distribution = distribution or DEFAULT_DISTRIBUTION

    lines = []
    for (category, realism), count in distribution.items():
        for i in range(count):
            image_id = f"{category}-{realism}-{i:03d}"
            rel_path = f"images/{image_id}.png"
            pixels = _pattern(image_id, category, realism, width, height, seed)
            Image.fromarray(pixels).save(images_dir / f"{image_id}.png")
            lines.append(
                json.dumps(
                    {"id": image_id, "path": rel_path, "category": category, "realism": realism},
                    separators=(", ", ": "),
                )
            )
    manifest_path = out_dir / "manifest.jsonl"
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest_path
