"""HAM10000-style metadata: loading, lesion-grouped splits, class balancing, labeling."""

from __future__ import annotations

import hashlib
import os
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import fileio
from .errors import AbcdError, InputError
from .features import CalibrationParams, analyze_lesion, max_feret_diameter
from .imaging import normalize_colors, remove_hair, segment_lesion

CLASSES = ("nv", "mel", "bcc", "akiec", "bkl", "df", "vasc")
SPLITS = ("train", "val", "test")
SPLIT_FRACTIONS = (0.7, 0.1, 0.2)
JOBS_ENV = "ABCD_QUANT_JOBS"

LABEL_HEADER = ("image_id", "a", "b", "c", "d", "status")


@dataclass(frozen=True)
class DatasetRecord:
    image_id: str
    lesion_id: str
    diagnosis: str
    split: str = "unassigned"

    def __post_init__(self):
        if self.diagnosis not in CLASSES:
            raise InputError(f"unknown diagnosis {self.diagnosis!r}")
        if self.split not in (*SPLITS, "unassigned"):
            raise InputError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class LabelRow:
    image_id: str
    a: float | None = None
    b: float | None = None
    c: float | None = None
    d: float | None = None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def values(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def csv_row(self) -> list[str]:
        if self.ok:
            return [self.image_id, *(fileio.fmt6(v) for v in self.values), "ok"]
        return [self.image_id, "", "", "", "", self.status]

    @classmethod
    def failed(cls, image_id: str, reason: str) -> "LabelRow":
        return cls(image_id, status=f"failed({reason})")


def load_metadata(csv_path) -> list[DatasetRecord]:
    """Read ``image_id,lesion_id,dx`` metadata; extra columns are ignored."""
    rows = fileio.read_csv(csv_path, required=("image_id", "lesion_id", "dx"))
    records = []
    seen = {}
    for n, row in enumerate(rows, start=1):
        image_id = (row["image_id"] or "").strip()
        dx = (row["dx"] or "").strip()
        if not image_id:
            raise InputError(f"{csv_path}: row {n}: empty image_id")
        if dx not in CLASSES:
            raise InputError(f"{csv_path}: row {n}: unknown class label {dx!r}")
        if image_id in seen:
            raise InputError(f"{csv_path}: row {n}: duplicate image_id {image_id!r} (first at row {seen[image_id]})")
        seen[image_id] = n
        records.append(DatasetRecord(image_id, (row["lesion_id"] or "").strip() or image_id, dx))
    return records


def _largest_remainder(total: int, fractions) -> list[int]:
    exact = [total * f for f in fractions]
    counts = [int(np.floor(x)) for x in exact]
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def split_dataset(records, seed: int) -> list[DatasetRecord]:
    """Assign train/val/test, keeping every lesion's images in one split.

    Within each diagnosis the lesion groups are shuffled with a seeded RNG
    and handed, largest first, to whichever split is furthest below its
    70/10/20 image target.
    """
    records = list(records)
    groups: dict[str, list[int]] = defaultdict(list)
    for i, r in enumerate(records):
        groups[r.lesion_id].append(i)

    by_class: dict[str, list[str]] = defaultdict(list)
    for lesion_id, idx in groups.items():
        dx = Counter(records[i].diagnosis for i in idx).most_common(1)[0][0]
        by_class[dx].append(lesion_id)

    assignment: dict[str, str] = {}
    for ci, dx in enumerate(CLASSES):
        lesions = by_class.get(dx, [])
        if not lesions:
            continue
        rng = np.random.default_rng([int(seed), ci])
        shuffled = [lesions[k] for k in rng.permutation(len(lesions))]
        shuffled.sort(key=lambda lid: -len(groups[lid]))  # stable: keeps shuffle among equals
        n_images = sum(len(groups[lid]) for lid in lesions)
        target = _largest_remainder(n_images, SPLIT_FRACTIONS)
        filled = [0, 0, 0]
        for lid in shuffled:
            deficit = [t - f for t, f in zip(target, filled)]
            k = max(range(3), key=lambda s: (deficit[s], -s))
            filled[k] += len(groups[lid])
            assignment[lid] = SPLITS[k]
    return [replace(r, split=assignment[r.lesion_id]) for r in records]


def inverse_frequency_weights(counts) -> dict[str, float]:
    """``N / n_k`` per class, rescaled so the weights average to one."""
    counts = dict(counts)
    if not counts or any(n <= 0 for n in counts.values()):
        raise InputError("every class needs a positive count")
    total = sum(counts.values())
    raw = {k: total / n for k, n in counts.items()}
    mean = sum(raw.values()) / len(raw)
    return {k: w / mean for k, w in raw.items()}


def _train(records) -> list[DatasetRecord]:
    train = [r for r in records if r.split == "train"]
    if not train:
        raise InputError("no records are assigned to the train split")
    return train


def class_weights(records) -> dict[str, float]:
    """Inverse-frequency weights from train-split counts of every class in the dataset."""
    records = list(records)
    present = [c for c in CLASSES if any(r.diagnosis == c for r in records)]
    counts = Counter(r.diagnosis for r in _train(records))
    absent = [c for c in present if counts[c] == 0]
    if absent:
        raise InputError(f"class(es) absent from the train split: {', '.join(absent)}")
    return inverse_frequency_weights({c: counts[c] for c in present})


def oversample_plan(records, seed: int) -> list[str]:
    """One balanced epoch of train image ids.

    Every class is brought up to the largest class count: whole copies of
    its ids first, then a seeded draw without replacement for the
    remainder, so per-id multiplicities differ by at most one.
    """
    by_class: dict[str, list[str]] = defaultdict(list)
    for r in _train(records):
        by_class[r.diagnosis].append(r.image_id)
    target = max(len(v) for v in by_class.values())
    rng = np.random.default_rng(int(seed))
    plan: list[str] = []
    for dx in CLASSES:
        ids = by_class.get(dx)
        if not ids:
            continue
        whole, rest = divmod(target, len(ids))
        plan.extend(ids * whole)
        plan.extend(ids[k] for k in sorted(rng.choice(len(ids), rest, replace=False)))
    return [plan[k] for k in rng.permutation(len(plan))]


def image_seed(seed: int, image_id: str) -> int:
    """Stable per-image seed so results do not depend on scheduling order."""
    digest = hashlib.sha256(f"{int(seed)}:{image_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def default_jobs() -> int:
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise InputError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
        if jobs < 1:
            raise InputError(f"{JOBS_ENV} must be >= 1")
        return jobs
    return os.cpu_count() or 1


def _failure_reason(exc: Exception) -> str:
    name = type(exc).__name__
    return name[:-5] if name.endswith("Error") else name


def _label_one(task) -> LabelRow:
    image_id, image_dir, p6mm_px, seed = task
    path = fileio.find_image(image_dir, image_id)
    if path is None:
        return LabelRow.failed(image_id, "MissingImage")
    try:
        img = fileio.read_image(path)
    except InputError:
        return LabelRow.failed(image_id, "UnreadableImage")
    try:
        scores = analyze_lesion(img, CalibrationParams(p6mm_px), image_seed(seed, image_id)).scores
    except AbcdError as exc:
        return LabelRow.failed(image_id, _failure_reason(exc))
    return LabelRow(image_id, *scores.as_tuple())


def _measure_one(task) -> tuple[str, float | None, str]:
    image_id, image_dir = task
    path = fileio.find_image(image_dir, image_id)
    if path is None:
        return image_id, None, "failed(MissingImage)"
    try:
        img = fileio.read_image(path)
    except InputError:
        return image_id, None, "failed(UnreadableImage)"
    try:
        img = remove_hair(img)
        img = normalize_colors(img, ~segment_lesion(img).mask)
        return image_id, max_feret_diameter(segment_lesion(img).mask), "ok"
    except AbcdError as exc:
        return image_id, None, f"failed({_failure_reason(exc)})"


def _run(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (jobs * 8))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _check_dir(image_dir) -> Path:
    d = Path(image_dir)
    if not d.is_dir() or not os.access(d, os.R_OK | os.X_OK):
        raise InputError(f"image directory {d} is not readable")
    return d


def label_dataset(records, image_dir, cal: CalibrationParams, seed: int, jobs: int | None = None) -> list[LabelRow]:
    """Score every record's image; failures become ``failed(...)`` rows.

    Output is sorted by image_id and independent of ``jobs``.
    """
    d = str(_check_dir(image_dir))
    tasks = [(r.image_id, d, cal.p6mm_px, int(seed)) for r in records]
    rows = _run(_label_one, tasks, jobs or default_jobs())
    return sorted(rows, key=lambda r: r.image_id)


def measure_diameters(records, image_dir, jobs: int | None = None):
    """Max Feret diameter (px) per image, the raw input for calibration."""
    d = str(_check_dir(image_dir))
    rows = _run(_measure_one, [(r.image_id, d) for r in records], jobs or default_jobs())
    return sorted(rows, key=lambda r: r[0])


def format_labels(rows) -> str:
    return fileio.format_csv(LABEL_HEADER, [r.csv_row() for r in rows])


def _parse_unit(value: str, where: str) -> float:
    try:
        v = float(value)
    except ValueError:
        raise InputError(f"{where}: not a number: {value!r}") from None
    if not np.isfinite(v):
        raise InputError(f"{where}: non-finite value")
    return v


def read_feature_rows(path) -> list[LabelRow]:
    """Read ``image_id,a,b,c,d[,status]`` rows (labels or feature predictions)."""
    rows = fileio.read_csv(path, required=("image_id", "a", "b", "c", "d"))
    out = []
    for n, row in enumerate(rows, start=1):
        status = (row.get("status") or "ok").strip()
        if status != "ok":
            out.append(LabelRow(row["image_id"], status=status))
            continue
        vals = [_parse_unit(row[k], f"{path}: row {n}, column {k}") for k in "abcd"]
        out.append(LabelRow(row["image_id"], *vals))
    return out


def format_splits(records) -> str:
    ordered = sorted(records, key=lambda r: r.image_id)
    return fileio.format_csv(("image_id", "split"), [(r.image_id, r.split) for r in ordered])


def apply_splits(records, split_csv) -> list[DatasetRecord]:
    rows = fileio.read_csv(split_csv, required=("image_id", "split"))
    mapping = {}
    for n, row in enumerate(rows, start=1):
        if row["split"] not in (*SPLITS, "unassigned"):
            raise InputError(f"{split_csv}: row {n}: unknown split {row['split']!r}")
        mapping[row["image_id"]] = row["split"]
    missing = [r.image_id for r in records if r.image_id not in mapping]
    if missing:
        raise InputError(f"{split_csv}: no split for {len(missing)} image(s), e.g. {missing[0]!r}")
    return [replace(r, split=mapping[r.image_id]) for r in records]
