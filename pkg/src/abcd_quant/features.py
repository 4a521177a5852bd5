"""ABCD scores from an RGB raster and its lesion segmentation.

Every score lives in [0, 1] with 0 meaning "benign-looking":

* A  - mirror asymmetry of shape (1 - IoU) and of luminance (1 - SSIM)
  about both principal axes, averaged.
* B  - half convexity defect, half inverted edge sharpness.
* C  - within-cluster color dispersion plus 0.1 per extra color cluster.
* D  - max Feret diameter relative to a 6 mm pixel length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import InputError, TinyLesionError
from .imaging import (
    SegmentationResult,
    boundary_pixels,
    check_rgb,
    iou,
    luminance,
    normalize_colors,
    reflect_mask,
    reflect_points,
    remove_hair,
    segment_lesion,
    sobel_magnitude,
)

SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2

MIN_LESION_AREA = 50
GRADIENT_REF = 128.0

KMEANS_K = 6
KMEANS_MAX_ITER = 50
MIN_CLUSTER_FRACTION = 0.02
MERGE_RADIUS = 25.0
DISPERSION_REF = 120.0
COLOR_STEP = 0.1

# Uncalibrated fallback: ~30 px across for a 5 mm nevus, scaled to 6 mm.
DEFAULT_P6MM_PX = 36.0
CALIBRATION_PERCENTILE = 95.0
MIN_CALIBRATION_SAMPLES = 20


def _clamp01(x: float) -> float:
    return float(min(max(x, 0.0), 1.0))


@dataclass(frozen=True)
class AbcdScores:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"score {name}={v!r} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)


@dataclass(frozen=True)
class AsymmetryBreakdown:
    shape_major: float
    shape_minor: float
    color_major: float
    color_minor: float
    a: float


@dataclass(frozen=True)
class BorderBreakdown:
    b_shape: float
    b_grad: float
    b: float

    @classmethod
    def combine(cls, b_shape: float, b_grad: float) -> "BorderBreakdown":
        return cls(b_shape, b_grad, 0.5 * b_shape + 0.5 * (1.0 - b_grad))


@dataclass(frozen=True)
class ColorBreakdown:
    dispersion: float
    n_colors: int
    c: float
    centroids: tuple[tuple[float, float, float], ...] = ()


@dataclass(frozen=True)
class DiameterBreakdown:
    max_diameter_px: float
    eq_diameter_px: float
    d: float


@dataclass(frozen=True)
class CalibrationParams:
    p6mm_px: float = DEFAULT_P6MM_PX

    def __post_init__(self):
        if not (math.isfinite(self.p6mm_px) and self.p6mm_px > 0):
            raise InputError(f"p6mm_px must be a positive finite number, got {self.p6mm_px!r}")


def global_ssim(x: np.ndarray, y: np.ndarray) -> float:
    """SSIM of two equally sized samples using whole-sample statistics."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mx, my = x.mean(), y.mean()
    vx = np.mean((x - mx) ** 2)
    vy = np.mean((y - my) ** 2)
    cov = np.mean((x - mx) * (y - my))
    num = (2 * mx * my + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)
    return float(num / den)


def _half_plane_ssim(lum: np.ndarray, seg: SegmentationResult, angle: float) -> float:
    """SSIM between one side of the lesion bounding box and its mirror image."""
    ys, xs = np.nonzero(seg.mask)
    y0, y1, x0, x1 = ys.min(), ys.max(), xs.min(), xs.max()
    by, bx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    cx, cy = seg.centroid
    side = -(bx - cx) * math.sin(angle) + (by - cy) * math.cos(angle)
    near_y, near_x = by[side > 0], bx[side > 0]
    rx, ry = reflect_points(near_x, near_y, seg.centroid, angle)
    ix = np.floor(rx + 0.5).astype(np.intp)
    iy = np.floor(ry + 0.5).astype(np.intp)
    h, w = lum.shape
    ok = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    if not ok.any():
        return 1.0
    return global_ssim(lum[near_y[ok], near_x[ok]], lum[iy[ok], ix[ok]])


def asymmetry_breakdown(img: np.ndarray, seg: SegmentationResult) -> AsymmetryBreakdown:
    img = check_rgb(img)
    lum = luminance(img)
    terms = []
    for angle in (seg.orientation, seg.orientation + math.pi / 2):
        mirrored = reflect_mask(seg.mask, seg.centroid, angle)
        shape = 1.0 - iou(seg.mask, mirrored)
        color = 1.0 - _clamp01(_half_plane_ssim(lum, seg, angle))
        terms.append((shape, color))
    (s_major, c_major), (s_minor, c_minor) = terms
    a = _clamp01((s_major + s_minor + c_major + c_minor) / 4.0)
    return AsymmetryBreakdown(s_major, s_minor, c_major, c_minor, a)


def asymmetry_score(img: np.ndarray, seg: SegmentationResult) -> float:
    """Mean of shape and luminance asymmetry about the major and minor axes."""
    return asymmetry_breakdown(img, seg).a


def _require_area(seg: SegmentationResult) -> None:
    if seg.area < MIN_LESION_AREA:
        raise TinyLesionError(f"lesion area {seg.area} px is below {MIN_LESION_AREA} px")


def border_score(img: np.ndarray, seg: SegmentationResult) -> BorderBreakdown:
    """Convexity defect and edge sharpness, combined into B."""
    img = check_rgb(img)
    _require_area(seg)
    hull_area = geometry.polygon_area(geometry.pixel_hull(seg.mask))
    if hull_area <= 0:
        raise TinyLesionError("lesion hull is degenerate (zero area)")
    b_shape = _clamp01(1.0 - seg.area / hull_area)

    edge = boundary_pixels(seg.mask)
    grad = sobel_magnitude(luminance(img))
    b_grad = _clamp01(float(grad[edge].mean()) / GRADIENT_REF)
    return BorderBreakdown.combine(b_shape, b_grad)


def _farthest_point_init(points, weights, k, rng):
    first = int(rng.choice(len(points), p=weights / weights.sum()))
    centers = [points[first]]
    d2 = np.sum((points - points[first]) ** 2, axis=1)
    while len(centers) < k:
        i = int(np.argmax(d2))
        if d2[i] <= 0:
            break
        centers.append(points[i])
        d2 = np.minimum(d2, np.sum((points - points[i]) ** 2, axis=1))
    return np.array(centers)


def _assign(points, centers):
    d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1)


def weighted_kmeans(points, weights, k, rng, max_iter=KMEANS_MAX_ITER):
    """Lloyd's k-means on weighted points with farthest-point seeding.

    Returns ``(centers, labels)``; clusters that end up empty keep their
    last center and simply own no points.
    """
    points = np.asarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    centers = _farthest_point_init(points, weights, k, rng)
    labels = None
    for _ in range(max_iter):
        new = _assign(points, centers)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        mass = np.bincount(labels, weights, minlength=len(centers))
        for ch in range(points.shape[1]):
            total = np.bincount(labels, weights * points[:, ch], minlength=len(centers))
            np.divide(total, mass, out=centers[:, ch], where=mass > 0)
    else:
        labels = _assign(points, centers)
    return centers, labels


def _weighted_centroids(points, weights, labels, n):
    mass = np.bincount(labels, weights, minlength=n)
    out = np.zeros((n, points.shape[1]))
    for ch in range(points.shape[1]):
        out[:, ch] = np.bincount(labels, weights * points[:, ch], minlength=n) / mass
    return out, mass


def color_score(img: np.ndarray, seg: SegmentationResult, seed: int = 0) -> ColorBreakdown:
    """Cluster lesion colors and turn spread plus cluster count into C."""
    img = check_rgb(img)
    _require_area(seg)
    pixels = img[seg.mask].astype(np.int64)
    codes = (pixels[:, 0] << 16) | (pixels[:, 1] << 8) | pixels[:, 2]
    uniq, counts = np.unique(codes, return_counts=True)
    points = np.column_stack([(uniq >> 16) & 255, (uniq >> 8) & 255, uniq & 255]).astype(np.float64)
    weights = counts.astype(np.float64)
    total = weights.sum()

    rng = np.random.default_rng(seed)
    centers, labels = weighted_kmeans(points, weights, KMEANS_K, rng)
    mass = np.bincount(labels, weights, minlength=len(centers))
    alive = [j for j in range(len(centers)) if mass[j] >= MIN_CLUSTER_FRACTION * total]

    # greedy merge of the closest surviving pair until all are >= MERGE_RADIUS apart
    groups = [[j] for j in alive]
    g_center = [centers[j].copy() for j in alive]
    g_mass = [float(mass[j]) for j in alive]
    while len(groups) > 1:
        best = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                dist = float(np.linalg.norm(g_center[i] - g_center[j]))
                if best is None or dist < best[0]:
                    best = (dist, i, j)
        dist, i, j = best
        if dist >= MERGE_RADIUS:
            break
        m = g_mass[i] + g_mass[j]
        g_center[i] = (g_center[i] * g_mass[i] + g_center[j] * g_mass[j]) / m
        g_mass[i] = m
        groups[i] += groups.pop(j)
        g_center.pop(j)
        g_mass.pop(j)

    cluster_to_group = np.full(len(centers), -1)
    for g, members in enumerate(groups):
        cluster_to_group[members] = g
    final = cluster_to_group[labels]
    orphans = final < 0
    if orphans.any():
        final[orphans] = _assign(points[orphans], np.array(g_center))

    n_colors = len(groups)
    cents, g_weight = _weighted_centroids(points, weights, final, n_colors)
    dist = np.linalg.norm(points - cents[final], axis=1)
    mean_d = np.bincount(final, weights * dist, minlength=n_colors) / g_weight
    mean_d2 = np.bincount(final, weights * dist * dist, minlength=n_colors) / g_weight
    std_d = np.sqrt(np.maximum(mean_d2 - mean_d * mean_d, 0.0))
    raw = float(np.sum(g_weight / total * std_d))

    dispersion = _clamp01(raw / DISPERSION_REF)
    c = _clamp01(dispersion + COLOR_STEP * (n_colors - 1))
    return ColorBreakdown(
        dispersion=dispersion,
        n_colors=n_colors,
        c=c,
        centroids=tuple(tuple(float(v) for v in row) for row in cents),
    )


def max_feret_diameter(mask: np.ndarray) -> float:
    """Largest extent of the mask, treating pixels as unit squares."""
    return geometry.max_feret(geometry.pixel_outline_hull(mask))


def diameter_score(seg: SegmentationResult, cal: CalibrationParams) -> DiameterBreakdown:
    if seg.area == 0:
        raise InputError("empty mask")
    max_d = max_feret_diameter(seg.mask)
    eq_d = 2.0 * math.sqrt(seg.area / math.pi)
    return DiameterBreakdown(max_d, eq_d, _clamp01(max_d / cal.p6mm_px))


def calibrate_p6mm(max_diameters) -> CalibrationParams:
    """Pick the 6 mm pixel length so the largest 5% of lesions saturate D."""
    values = np.asarray(list(max_diameters), dtype=np.float64)
    if values.size < MIN_CALIBRATION_SAMPLES:
        raise InputError(
            f"calibration needs at least {MIN_CALIBRATION_SAMPLES} diameters, got {values.size}"
        )
    if not np.all(np.isfinite(values)):
        raise InputError("calibration diameters must be finite")
    p = float(np.percentile(values, CALIBRATION_PERCENTILE, method="linear"))
    if p <= 0:
        raise InputError("95th percentile diameter is not positive")
    return CalibrationParams(p)


@dataclass(frozen=True)
class LesionAnalysis:
    scores: AbcdScores
    asymmetry: AsymmetryBreakdown
    border: BorderBreakdown
    color: ColorBreakdown
    diameter: DiameterBreakdown
    segmentation: SegmentationResult

    def to_dict(self) -> dict:
        return {
            "a": self.scores.a,
            "b": self.scores.b,
            "c": self.scores.c,
            "d": self.scores.d,
            "b_shape": self.border.b_shape,
            "b_grad": self.border.b_grad,
            "dispersion": self.color.dispersion,
            "n_colors": self.color.n_colors,
            "max_diameter_px": self.diameter.max_diameter_px,
            "eq_diameter_px": self.diameter.eq_diameter_px,
        }


def features_from_segmentation(
    img: np.ndarray, seg: SegmentationResult, cal: CalibrationParams, seed: int = 0
) -> LesionAnalysis:
    """Run the four feature operations on an already segmented image."""
    _require_area(seg)
    asym = asymmetry_breakdown(img, seg)
    border = border_score(img, seg)
    color = color_score(img, seg, seed)
    diam = diameter_score(seg, cal)
    scores = AbcdScores(asym.a, border.b, color.c, diam.d)
    return LesionAnalysis(scores, asym, border, color, diam, seg)


def analyze_lesion(
    img: np.ndarray, cal: CalibrationParams | None = None, seed: int = 0
) -> LesionAnalysis:
    """Full pipeline: hair removal, color normalization, segmentation, features."""
    cal = cal or CalibrationParams()
    img = remove_hair(check_rgb(img))
    provisional = segment_lesion(img)
    img = normalize_colors(img, ~provisional.mask)
    seg = segment_lesion(img)
    return features_from_segmentation(img, seg, cal, seed)


def score_lesion(img: np.ndarray, cal: CalibrationParams | None = None, seed: int = 0) -> AbcdScores:
    return analyze_lesion(img, cal, seed).scores
