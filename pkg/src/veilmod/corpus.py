"""Image corpus: manifest ingestion, schema enforcement, stratified sampling.

The manifest is UTF-8 JSON-lines, one record per line with keys
``id``, ``path``, ``category``, ``realism``. Paths are relative to the
manifest's directory. Image decoding lives here too; the blur engine only
ever sees in-memory rasters.
"""

from __future__ import annotations

import io
import json
import random
import re
import shutil
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .blur import RasterImage
from .errors import InvalidParameterError, SchemaError

CATEGORIES = ("sex_nudity", "graphic", "safe")
REALISM = ("realistic", "synthetic")


@dataclass(frozen=True)
class ImageRecord:
    id: str
    file_path: str
    category: str
    realism: str
    width: int
    height: int


@dataclass
class Corpus:
    """Immutable after ingestion; counts are tallied once at construction."""

    root: Path
    records: list[ImageRecord]
    counts: dict[str, dict[str, int]]

    def __len__(self) -> int:
        return len(self.records)

    def record(self, image_id: str) -> ImageRecord:
        return self._by_id[image_id]

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id

    def __post_init__(self):
        self._by_id = {r.id: r for r in self.records}

    def image_path(self, image_id: str) -> Path:
        return self.root / self._by_id[image_id].file_path


def _tally(records: list[ImageRecord]) -> dict[str, dict[str, int]]:
    counts = {cat: {real: 0 for real in REALISM} for cat in CATEGORIES}
    for rec in records:
        counts[rec.category][rec.realism] += 1
    return counts


def category_counts(corpus: Corpus) -> dict[str, dict[str, int]]:
    """Fresh category x realism tally over the corpus records."""
    return _tally(corpus.records)


def decode_image(path: Path) -> RasterImage:
    """Decode a PNG or JPEG file into an 8-bit RGB(A) raster."""
    with Image.open(path) as img:
        if img.mode not in ("RGB", "RGBA"):
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.uint8)
    return RasterImage.from_array(arr)


def encode_png(image: RasterImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image.pixels).save(buf, format="PNG")
    return buf.getvalue()


def encode_jpeg(image: RasterImage, quality: int = 90) -> bytes:
    # JPEG carries no alpha; RGBA rasters are flattened onto their RGB planes.
    pixels = image.pixels[:, :, :3] if image.channels == 4 else image.pixels
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def _parse_manifest_line(line: str, lineno: int) -> dict:
    try:
        entry = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest line {lineno}: not valid JSON ({exc})") from exc
    if not isinstance(entry, dict):
        raise SchemaError(f"manifest line {lineno}: expected an object")
    missing = [k for k in ("id", "path", "category", "realism") if k not in entry]
    if missing:
        raise SchemaError(f"manifest line {lineno}: missing keys {missing}")
    return entry


def ingest_manifest(manifest_path: Path | str) -> Corpus:
    """Load and validate a corpus manifest, decoding every referenced image.

    Raises OSError for missing/unreadable files and SchemaError for schema
    violations (unknown category or realism, duplicate id, empty corpus).
    """
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    text = manifest_path.read_text(encoding="utf-8")

    records: list[ImageRecord] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        entry = _parse_manifest_line(line, lineno)
        rec_id = str(entry["id"])
        if entry["category"] not in CATEGORIES:
            raise SchemaError(
                f"record {rec_id!r}: unknown category {entry['category']!r} "
                f"(expected one of {list(CATEGORIES)})"
            )
        if entry["realism"] not in REALISM:
            raise SchemaError(
                f"record {rec_id!r}: unknown realism {entry['realism']!r} "
                f"(expected one of {list(REALISM)})"
            )
        if rec_id in seen_ids:
            raise SchemaError(f"duplicate id {rec_id!r} in manifest")
        seen_ids.add(rec_id)

        image_path = root / entry["path"]
        if not image_path.is_file():
            raise OSError(f"record {rec_id!r}: image file not found: {image_path}")
        try:
            raster = decode_image(image_path)
        except OSError:
            raise
        except Exception as exc:
            raise OSError(f"record {rec_id!r}: cannot decode {image_path}: {exc}") from exc

        records.append(
            ImageRecord(
                id=rec_id,
                file_path=str(entry["path"]),
                category=entry["category"],
                realism=entry["realism"],
                width=raster.width,
                height=raster.height,
            )
        )

    if not records:
        raise SchemaError("empty corpus")
    return Corpus(root=root, records=records, counts=_tally(records))


def export_manifest(corpus: Corpus, manifest_path: Path | str) -> None:
    """Write the manifest back out, bit-stable for a fixed record order."""
    lines = []
    for rec in corpus.records:
        lines.append(
            json.dumps(
                {"id": rec.id, "path": rec.file_path, "category": rec.category, "realism": rec.realism},
                separators=(", ", ": "),
            )
        )
    Path(manifest_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sample_task_set(corpus: Corpus, n: int, seed: int, balance: bool = True) -> list[ImageRecord]:
    """Deterministic seeded sample of n records, optionally category-balanced.

    With balance, per-category counts in the sample differ by at most one
    (corpus supply permitting); the returned order is shuffled by the seeded
    generator either way.
    """
    if not 1 <= n <= len(corpus.records):
        raise InvalidParameterError(f"sample size {n} not in 1..{len(corpus.records)}")
    rng = random.Random(seed)
    if not balance:
        return rng.sample(corpus.records, n)

    groups = {cat: [r for r in corpus.records if r.category == cat] for cat in CATEGORIES}
    quotas = {cat: n // len(CATEGORIES) for cat in CATEGORIES}
    for cat in CATEGORIES[: n % len(CATEGORIES)]:
        quotas[cat] += 1

    picked: list[ImageRecord] = []
    leftovers: list[ImageRecord] = []
    for cat in CATEGORIES:
        pool = groups[cat]
        take = min(quotas[cat], len(pool))
        chosen = rng.sample(pool, take)
        picked.extend(chosen)
        chosen_ids = {r.id for r in chosen}
        leftovers.extend(r for r in pool if r.id not in chosen_ids)
    if len(picked) < n:
        # some category ran short; perfect balance is impossible, fill from the rest
        picked.extend(rng.sample(leftovers, n - len(picked)))
    rng.shuffle(picked)
    return picked


_SAFE_ID = re.compile(r"^[A-Za-z0-9._-]+$")


def materialize_corpus(corpus: Corpus, out_dir: Path | str) -> Corpus:
    """Copy a validated corpus into a self-contained directory.

    Image files land under images/ named by record id; the manifest is
    rewritten with the new relative paths.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    new_records = []
    for record in corpus.records:
        if not _SAFE_ID.match(record.id):
            raise SchemaError(f"image id {record.id!r} is not filename-safe")
        src = corpus.image_path(record.id)
        suffix = src.suffix or ".png"
        relative = f"images/{record.id}{suffix}"
        shutil.copyfile(src, out_dir / relative)
        new_records.append(replace(record, file_path=relative))
    result = Corpus(root=out_dir, records=new_records, counts=_tally(new_records))
    export_manifest(result, out_dir / "manifest.jsonl")
    return result
