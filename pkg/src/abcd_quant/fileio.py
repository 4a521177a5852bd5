"""File formats: PNG/PPM rasters, PNG masks, CSV and JSON documents."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InputError
from .imaging import check_rgb

IMAGE_SUFFIXES = (".png", ".ppm")


def read_image(path) -> np.ndarray:
    """Load an 8-bit PNG (gray, RGB or RGBA; alpha dropped) or binary PPM as RGB."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode not in ("RGB", "RGBA", "L", "LA", "P"):
                raise InputError(f"{path}: unsupported pixel mode {im.mode}")
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    return check_rgb(arr)


def write_png(path, img: np.ndarray) -> None:
    Image.fromarray(check_rgb(img), mode="RGB").save(path, format="PNG")


def write_mask_png(path, mask: np.ndarray) -> None:
    """8-bit grayscale PNG with 255 marking lesion pixels."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def find_image(image_dir, image_id: str) -> Path | None:
    for suffix in IMAGE_SUFFIXES:
        p = Path(image_dir) / f"{image_id}{suffix}"
        if p.is_file():
            return p
    return None


def read_csv(path, required=()) -> list[dict]:
    """Read a headed CSV into dicts, checking that ``required`` columns exist."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in required if c not in header]
            if missing:
                raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
            return list(reader)
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise InputError(f"cannot read CSV {path}: {exc}") from exc


def format_csv(header, rows) -> str:
    """Render rows as CSV text with LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_text(path, text: str) -> None:
    """Write text atomically (temp file + rename) so readers never see partial output."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path, header, rows) -> None:
    write_text(path, format_csv(header, rows))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    write_text(path, dump_json(obj))


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON {path}: {exc}") from exc


def fmt6(x: float) -> str:
    """Fixed six-decimal rendering used by every numeric CSV column."""
    text = f"{x:.6f}"
    return "0.000000" if text == "-0.000000" else text
