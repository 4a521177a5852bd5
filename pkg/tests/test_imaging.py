import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from abcd_quant import imaging
from abcd_quant.errors import DimensionError, EmptyBackgroundError, InputError, NoLesionFound
from abcd_quant.imaging import (
    detect_hair,
    iou,
    luminance,
    normalize_colors,
    reflect_mask,
    remove_hair,
    resize_image,
    segment_lesion,
    sobel_magnitude,
)

from conftest import disk_image


# ---- resize ----------------------------------------------------------------


def test_resize_halves_centered_disk():
    big, _ = disk_image(n=448, r=100.0)
    small = resize_image(big, 224, 224)
    assert small.shape == (224, 224, 3)
    seg = segment_lesion(small)
    cx, cy = seg.centroid
    assert abs(cx - 111.5) < 0.5 and abs(cy - 111.5) < 0.5
    assert abs(math.sqrt(seg.area / math.pi) - 50.0) <= 1.0


def test_resize_identity_is_pixel_identical(rng):
    img = rng.integers(0, 256, (40, 30, 3), dtype=np.uint8)
    out = resize_image(img, 30, 40)
    assert np.array_equal(out, img) and out is not img


def test_resize_rejects_tiny_target():
    img, _ = disk_image(n=64, r=10)
    with pytest.raises(DimensionError):
        resize_image(img, 3, 3)


def test_rejects_non_rgb():
    with pytest.raises(InputError):
        luminance(imaging.check_rgb(np.zeros((10, 10))))


# ---- hair removal ----------------------------------------------------------


def test_remove_hair_noop_on_uniform_image():
    img = np.full((64, 64, 3), (200, 160, 140), np.uint8)
    assert np.array_equal(remove_hair(img), img)


def _draw_hairs(img):
    out = img.copy()
    n = img.shape[0]
    yy, xx = np.indices((n, n))
    lines = np.zeros((n, n), bool)
    for slope, icpt in ((0.6, 20.0), (-0.9, 190.0), (0.1, 140.0)):
        # 3-px wide dark lines crossing the lesion and the skin
        dist = np.abs(yy - (slope * xx + icpt)) / math.hypot(slope, 1.0)
        lines |= dist <= 1.5
    out[lines] = (25, 18, 12)
    return out, lines


def test_remove_hair_reduces_error_against_clean_scene():
    clean, _ = disk_image(r=50)
    hairy, lines = _draw_hairs(clean)
    cleaned = remove_hair(hairy)
    before = np.abs(hairy.astype(float) - clean).mean()
    after = np.abs(cleaned.astype(float) - clean).mean()
    assert after < before
    assert detect_hair(hairy)[lines].mean() > 0.8


def test_remove_hair_leaves_thick_blob_alone():
    img, mask = disk_image(n=160, r=20.0, inside=(40, 30, 20))
    out = remove_hair(img)
    assert np.array_equal(out[mask], img[mask])
    assert not detect_hair(img).any()


# ---- color normalization ---------------------------------------------------


def _background_scene(bg_rgb):
    img, mask = disk_image(n=100, r=20, inside=(60, 40, 30), outside=bg_rgb)
    return img, ~mask


def test_normalize_identity_at_reference():
    img, bg = _background_scene((200, 160, 140))
    assert np.array_equal(normalize_colors(img, bg), img)


def test_normalize_clamps_at_two():
    img, bg = _background_scene((100, 80, 70))
    out = normalize_colors(img, bg)
    assert np.allclose(out[bg].mean(axis=0), (200, 160, 140))


def test_normalize_gains_by_division():
    img, bg = _background_scene((220, 180, 150))
    gains = np.array([200 / 220, 160 / 180, 140 / 150])
    assert np.allclose(gains, (0.909, 0.889, 0.933), atol=1e-3)
    out = normalize_colors(img, bg)
    assert np.all(np.abs(out[bg].mean(axis=0) - (200, 160, 140)) <= 1.0)
    lesion = out[~bg][0].astype(float)
    assert np.allclose(lesion, np.rint(np.array([60, 40, 30]) * gains))


def test_normalize_needs_background():
    img, _ = _background_scene((200, 160, 140))
    with pytest.raises(EmptyBackgroundError):
        normalize_colors(img, np.zeros(img.shape[:2], bool))


@given(st.tuples(*[st.integers(110, 250)] * 3))
def test_normalize_idempotent_without_clamp(bg):
    img, mask = _background_scene(bg)
    once = normalize_colors(img, mask)
    twice = normalize_colors(once, mask)
    assert np.max(np.abs(twice.astype(int) - once)) <= 1


# ---- segmentation ----------------------------------------------------------


def test_segment_disk_iou():
    img, ideal = disk_image(r=50)
    seg = segment_lesion(img)
    assert iou(seg.mask, ideal) >= 0.95
    assert seg.orientation == 0.0


def test_segment_keeps_largest_component():
    img = np.full((200, 200, 3), 210, np.uint8)
    big = np.zeros((200, 200), bool)
    big[40:60, 40:65] = True  # 500 px
    small = np.zeros((200, 200), bool)
    small[140:150, 140:152] = True  # 120 px
    img[big | small] = 50
    # brute-force component sizes on the thresholded bitmap
    labels, n = ndimage.label(luminance(img) < 128)
    sizes = sorted(np.bincount(labels.ravel())[1:])
    assert sizes == [120, 500]
    seg = segment_lesion(img)
    assert iou(seg.mask, big) >= 0.98
    assert not (seg.mask & small).any()


def test_segment_uniform_raises():
    with pytest.raises(NoLesionFound):
        segment_lesion(np.full((64, 64, 3), 128, np.uint8))


def test_segment_rejects_degenerate_coverage():
    img = np.full((224, 224, 3), 220, np.uint8)
    img[100:103, 100:103] = 30  # 9 px, far below 0.5%
    with pytest.raises(NoLesionFound):
        segment_lesion(img)


def test_segment_deterministic(rng):
    img, _ = disk_image(r=45)
    noisy = np.clip(img + rng.integers(-10, 11, img.shape), 0, 255).astype(np.uint8)
    a, b = segment_lesion(noisy), segment_lesion(noisy.copy())
    assert np.array_equal(a.mask, b.mask)
    labels, n = ndimage.label(a.mask)
    assert n == 1


@given(st.floats(25, 70), st.floats(0.3, 1.0), st.floats(0, math.pi))
def test_area_invariant_under_rotation(a, ratio, angle):
    n = 200
    yy, xx = np.indices((n, n)) - (n - 1) / 2
    u = xx * math.cos(angle) + yy * math.sin(angle)
    v = -xx * math.sin(angle) + yy * math.cos(angle)
    mask = (u / a) ** 2 + (v / (a * ratio)) ** 2 <= 1
    img = np.full((n, n, 3), 210, np.uint8)
    img[mask] = 60
    s0 = segment_lesion(img)
    s1 = segment_lesion(np.rot90(img).copy())
    assert abs(s0.area - s1.area) <= 0.02 * s0.area


def test_moments_orientation_of_tilted_ellipse():
    n = 200
    yy, xx = np.indices((n, n)) - (n - 1) / 2
    t = math.radians(30)
    u = xx * math.cos(t) + yy * math.sin(t)
    v = -xx * math.sin(t) + yy * math.cos(t)
    seg = imaging.mask_moments((u / 60) ** 2 + (v / 25) ** 2 <= 1)
    assert abs(seg.orientation - t) < 0.01
    assert abs(seg.major_axis_len - 120) < 2 and abs(seg.minor_axis_len - 50) < 2


# ---- reflection ------------------------------------------------------------


def test_reflect_single_pixel_vertical_axis():
    mask = np.zeros((40, 80), bool)
    mask[20, 10] = True
    out = reflect_mask(mask, (30.0, 0.0), math.pi / 2)
    assert list(zip(*np.nonzero(out))) == [(20, 50)]


def test_reflect_disk_about_diameter():
    _, mask = disk_image(r=40)
    for angle in (0.0, 0.3, math.pi / 4, 1.2):
        assert iou(mask, reflect_mask(mask, (111.5, 111.5), angle)) >= 0.98


@given(
    st.lists(
        st.tuples(st.integers(80, 120), st.integers(80, 120), st.integers(32, 45)),
        min_size=1,
        max_size=4,
    ),
    st.floats(0, math.pi),
)
def test_reflect_twice_is_identity(blobs, angle):
    # lesion-scale masks: rounding twice costs about 0.3 / radius of IoU,
    # so small blobs cannot meet the 0.99 bound
    yy, xx = np.indices((200, 200))
    mask = np.zeros((200, 200), bool)
    for x, y, r in blobs:
        mask |= np.hypot(xx - x, yy - y) <= r
    center = (100.0, 100.0)
    back = reflect_mask(reflect_mask(mask, center, angle), center, angle)
    assert iou(mask, back) >= 0.99


# ---- gradients -------------------------------------------------------------


def _reference_sobel(gray):
    g = np.pad(gray.astype(float), 1, mode="edge")
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]) / 4.0
    h, w = gray.shape
    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    for dy in range(3):
        for dx in range(3):
            win = g[dy : dy + h, dx : dx + w]
            gx += kx[dy, dx] * win
            gy += kx.T[dy, dx] * win
    return np.hypot(gx, gy)


def test_sobel_matches_reference_convolution(rng):
    gray = rng.uniform(0, 255, (30, 25))
    assert np.allclose(sobel_magnitude(gray), _reference_sobel(gray), atol=1e-9)


def test_sobel_step_reads_step_height():
    gray = np.zeros((10, 10))
    gray[:, 5:] = 160
    mag = sobel_magnitude(gray)
    assert np.allclose(mag[:, 4:6], 160.0) and np.allclose(mag[:, :4], 0.0)
