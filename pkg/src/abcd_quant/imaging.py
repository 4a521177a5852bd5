"""Raster primitives and the preprocessing chain.

Images are plain numpy arrays: RGB rasters are ``(H, W, 3)`` uint8, gray
planes are ``(H, W)`` float64 in [0, 255] and masks are ``(H, W)`` bool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionError, EmptyBackgroundError, InputError, NoLesionFound

MIN_SIDE = 8

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

REFERENCE_BACKGROUND = (200.0, 160.0, 140.0)
GAIN_LIMITS = (0.5, 2.0)
MIN_BACKGROUND_FRACTION = 0.01

HAIR_SE_RADIUS = 4  # 9-px disk
HAIR_RESPONSE = 30.0
HAIR_MAX_WIDTH = 7
HAIR_MIN_ELONGATION = 3.0
HAIR_MIN_AREA = 10

# below this relative moment anisotropy the major axis is rasterization noise
ISOTROPY_TOL = 0.01

MIN_COVERAGE = 0.005
MAX_COVERAGE = 0.95


@dataclass(frozen=True)
class SegmentationResult:
    """Lesion mask plus its first- and second-order moment summary.

    ``centroid`` is ``(x, y)`` in pixel-center coordinates and ``orientation``
    is the major-axis angle in radians, measured from +x towards +y (image
    rows grow downwards).
    """

    mask: np.ndarray
    area: int
    centroid: tuple[float, float]
    orientation: float
    major_axis_len: float
    minor_axis_len: float


def check_rgb(img: np.ndarray) -> np.ndarray:
    """Validate an RGB raster and return it as a uint8 array."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InputError(f"expected an (H, W, 3) RGB raster, got shape {arr.shape}")
    if arr.shape[0] < MIN_SIDE or arr.shape[1] < MIN_SIDE:
        raise DimensionError(
            f"image must be at least {MIN_SIDE}x{MIN_SIDE}, got {arr.shape[1]}x{arr.shape[0]}"
        )
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
            raise InputError("image contains non-finite values")
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    return arr


def disk(radius: int) -> np.ndarray:
    """Disk-shaped structuring element of the given integer radius."""
    r = int(radius)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return xx * xx + yy * yy <= r * r


def luminance(img: np.ndarray) -> np.ndarray:
    """BT.601 luma plane of an RGB raster, float64 in [0, 255]."""
    return np.asarray(img, dtype=np.float64) @ LUMA_WEIGHTS


def resize_image(img: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment.

    Resizing to the current size returns an identical copy.
    """
    img = check_rgb(img)
    if target_w < MIN_SIDE or target_h < MIN_SIDE:
        raise DimensionError(f"target size {target_w}x{target_h} is below {MIN_SIDE}x{MIN_SIDE}")
    h, w = img.shape[:2]
    if (h, w) == (target_h, target_w):
        return img.copy()

    def sample_grid(n_out: int, n_in: int):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = sample_grid(target_h, h)
    x0, x1, fx = sample_grid(target_w, w)
    src = img.astype(np.float64)
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    fy = fy[:, None, None]
    out = top * (1 - fy) + bottom * fy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def detect_hair(img: np.ndarray) -> np.ndarray:
    """Mask of thin, dark, elongated structures (hair candidates)."""
    img = check_rgb(img)
    lum = luminance(img)
    bottom_hat = ndimage.grey_closing(lum, footprint=disk(HAIR_SE_RADIUS), mode="nearest") - lum
    candidates = bottom_hat > HAIR_RESPONSE
    if not candidates.any():
        return candidates

    labels, n = ndimage.label(candidates, structure=np.ones((3, 3), bool))
    index = np.arange(1, n + 1)
    area = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    depth = ndimage.distance_transform_edt(candidates)
    # width of a w-px stroke is 2 * max(edt) - 1
    width = 2.0 * ndimage.maximum(depth, labels, index) - 1.0
    # length over width; unlike moment ratios this stays high for crossing hairs
    elongation = area / np.maximum(width, 1.0) ** 2
    keep = (
        (area >= HAIR_MIN_AREA)
        & (width <= HAIR_MAX_WIDTH)
        & (elongation >= HAIR_MIN_ELONGATION)
    )
    if not keep.any():
        return np.zeros_like(candidates)
    hair = np.concatenate([[False], keep])[labels]
    # swallow the one-pixel antialiasing fringe around each stroke
    return ndimage.binary_dilation(hair) & (bottom_hat > 0)


def inpaint_mean(img: np.ndarray, hole: np.ndarray) -> np.ndarray:
    """Fill ``hole`` pixels from the outside in with the mean of known 8-neighbors."""
    out = img.astype(np.float64)
    known = ~hole
    kernel = np.ones((3, 3))
    while not known.all():
        weights = known.astype(np.float64)
        count = ndimage.correlate(weights, kernel, mode="constant")
        front = ~known & (count > 0)
        if not front.any():  # nothing known at all
            break
        for ch in range(3):
            total = ndimage.correlate(out[..., ch] * weights, kernel, mode="constant")
            out[..., ch][front] = total[front] / count[front]
        known = known | front
    return out


def remove_hair(img: np.ndarray) -> np.ndarray:
    """Detect dark hairs with a morphological bottom-hat and inpaint them.

    Pixels outside the detected hair mask are returned unchanged; an image
    without hair comes back identical.
    """
    img = check_rgb(img)
    hair = detect_hair(img)
    if not hair.any():
        return img.copy()
    filled = inpaint_mean(img, hair)
    out = img.copy()
    out[hair] = np.clip(np.rint(filled[hair]), 0, 255).astype(np.uint8)
    return out


def normalize_colors(img: np.ndarray, background_mask: np.ndarray) -> np.ndarray:
    """Scale each channel so the background mean hits ``REFERENCE_BACKGROUND``.

    Gains are clamped to ``GAIN_LIMITS``; raises EmptyBackgroundError when the
    mask covers less than 1% of the frame.
    """
    img = check_rgb(img)
    bg = np.asarray(background_mask, dtype=bool)
    if bg.shape != img.shape[:2]:
        raise DimensionError(f"mask shape {bg.shape} does not match image {img.shape[:2]}")
    if bg.sum() < MIN_BACKGROUND_FRACTION * bg.size:
        raise EmptyBackgroundError("background mask covers less than 1% of the image")
    mean = img[bg].astype(np.float64).mean(axis=0)
    ref = np.asarray(REFERENCE_BACKGROUND)
    with np.errstate(divide="ignore"):
        gains = np.where(mean > 0, ref / np.where(mean > 0, mean, 1.0), GAIN_LIMITS[1])
    gains = np.clip(gains, *GAIN_LIMITS)
    return np.clip(np.rint(img * gains), 0, 255).astype(np.uint8)


def otsu_threshold(gray: np.ndarray) -> int | None:
    """Otsu threshold on a 256-bin histogram; ``None`` when only one level occurs.

    Pixels ``<= t`` form the dark class.
    """
    levels = np.clip(np.rint(gray), 0, 255).astype(np.intp)
    hist = np.bincount(levels.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        return None
    p = hist / hist.sum()
    omega = np.cumsum(p)
    mu = np.cumsum(p * np.arange(256))
    mu_t = mu[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mu_t * omega - mu) ** 2 / (omega * (1.0 - omega))
    between[~np.isfinite(between)] = -1.0
    return int(np.argmax(between))


def _closing(mask: np.ndarray, se: np.ndarray) -> np.ndarray:
    # pad so the erosion half does not eat lesions touching the frame
    r = se.shape[0] // 2
    padded = np.pad(mask, r)
    closed = ndimage.binary_closing(padded, structure=se)
    return closed[r:-r, r:-r]


def mask_moments(mask: np.ndarray) -> SegmentationResult:
    """Area, centroid, orientation and axis lengths of a nonempty mask."""
    mask = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(mask)
    area = int(xs.size)
    if area == 0:
        raise NoLesionFound("mask is empty")
    cx, cy = xs.mean(), ys.mean()
    dx, dy = xs - cx, ys - cy
    mu20 = float(np.dot(dx, dx))
    mu02 = float(np.dot(dy, dy))
    mu11 = float(np.dot(dx, dy))
    anisotropy = math.hypot(mu20 - mu02, 2.0 * mu11) / (mu20 + mu02) if area > 1 else 0.0
    if anisotropy <= ISOTROPY_TOL:
        orientation = 0.0
    else:
        orientation = 0.5 * math.atan2(2.0 * mu11, mu20 - mu02)
        if orientation <= -math.pi / 2:
            orientation += math.pi
    half_trace = 0.5 * (mu20 + mu02) / area
    root = math.sqrt(max(0.25 * (mu20 - mu02) ** 2 + mu11 * mu11, 0.0)) / area
    major = 4.0 * math.sqrt(half_trace + root)
    minor = 4.0 * math.sqrt(max(half_trace - root, 0.0))
    return SegmentationResult(
        mask=mask,
        area=area,
        centroid=(float(cx), float(cy)),
        orientation=float(orientation),
        major_axis_len=major,
        minor_axis_len=minor,
    )


def segment_lesion(img: np.ndarray) -> SegmentationResult:
    """Otsu segmentation of the darker region, cleaned and reduced to one blob.

    Raises NoLesionFound when the image has no contrast or the selected
    component covers less than 0.5% or more than 95% of the frame.
    """
    img = check_rgb(img)
    h, w = img.shape[:2]
    lum = luminance(img)
    t = otsu_threshold(lum)
    if t is None:
        raise NoLesionFound("image has a single intensity level")
    mask = np.rint(lum) <= t

    se = disk(max(1, min(w, h) // 112))
    mask = ndimage.binary_opening(mask, structure=se)
    mask = _closing(mask, se)
    mask = ndimage.binary_fill_holes(mask)

    labels, n = ndimage.label(mask)
    if n == 0:
        raise NoLesionFound("no foreground left after morphological cleanup")
    sizes = np.bincount(labels.ravel())[1:]
    # argmax takes the first label on ties, which is raster order
    lesion = labels == (int(np.argmax(sizes)) + 1)

    coverage = sizes.max() / lesion.size
    if coverage < MIN_COVERAGE or coverage > MAX_COVERAGE:
        raise NoLesionFound(f"degenerate segmentation: lesion covers {coverage:.2%} of the frame")
    return mask_moments(lesion)


def reflect_points(xs, ys, axis_point, axis_angle):
    """Mirror coordinates about the line through ``axis_point`` at ``axis_angle``."""
    cx, cy = axis_point
    ux, uy = math.cos(axis_angle), math.sin(axis_angle)
    dx = np.asarray(xs, dtype=np.float64) - cx
    dy = np.asarray(ys, dtype=np.float64) - cy
    along = dx * ux + dy * uy
    return cx + 2.0 * along * ux - dx, cy + 2.0 * along * uy - dy


def reflect_mask(mask: np.ndarray, axis_point, axis_angle: float) -> np.ndarray:
    """Mirror a mask about a line, with nearest-pixel rounding.

    The reflection is its own inverse, so every output pixel samples the
    input at its mirror position; this avoids the pinholes a forward splat
    leaves at oblique angles. Reflections that leave the frame are dropped.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    ys, xs = np.indices((h, w))
    rx, ry = reflect_points(xs, ys, axis_point, axis_angle)
    ix = np.floor(rx + 0.5).astype(np.intp)
    iy = np.floor(ry + 0.5).astype(np.intp)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.zeros_like(mask)
    out[inside] = mask[iy[inside], ix[inside]]
    return out


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Mask pixels with at least one 4-neighbor outside the mask (or the frame)."""
    mask = np.asarray(mask, dtype=bool)
    return mask & ~ndimage.binary_erosion(mask, border_value=0)


def sobel_magnitude(gray: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude with kernels scaled by 1/4.

    With this scaling an ideal step of height ``h`` reads ``h`` on the
    pixels either side of it.
    """
    gray = np.asarray(gray, dtype=np.float64)
    gx = ndimage.sobel(gray, axis=1, mode="nearest") / 4.0
    gy = ndimage.sobel(gray, axis=0, mode="nearest") / 4.0
    return np.hypot(gx, gy)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two boolean masks (1.0 when both empty)."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union
