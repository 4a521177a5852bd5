"""Parametric synthetic lesions with known geometry and colors."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError

SHAPES = ("disk", "half_disk", "star_blob")
DEFAULT_BACKGROUND = (220, 180, 160)

# sectors start at 12 o'clock and run clockwise on screen (rows grow downwards)
SECTOR_START = -math.pi / 2


@dataclass(frozen=True)
class SynthSpec:
    """Square canvas with one lesion drawn around the canvas center.

    ``amplitude`` and ``lobes`` only apply to ``star_blob``, whose boundary
    radius is ``r * (1 + amplitude * sin(lobes * theta + phase))`` with the
    phase drawn from the render seed.
    """

    canvas: int = 224
    shape: str = "disk"
    r: float = 50.0
    amplitude: float = 0.0
    lobes: int = 5
    colors: tuple = ((120, 80, 50),)
    edge_blur_sigma: float = 0.0
    background: tuple = DEFAULT_BACKGROUND

    def __post_init__(self):
        object.__setattr__(self, "colors", tuple(tuple(int(v) for v in c) for c in self.colors))
        object.__setattr__(self, "background", tuple(int(v) for v in self.background))
        self.validate()

    def validate(self) -> None:
        if int(self.canvas) != self.canvas or self.canvas < 8:
            raise InputError(f"canvas must be an integer >= 8, got {self.canvas!r}")
        if self.shape not in SHAPES:
            raise InputError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if not (0 < self.r < self.canvas / 2):
            raise InputError(f"radius {self.r} must lie in (0, canvas/2)")
        if not (0.0 <= self.amplitude <= 1.0):
            raise InputError(f"amplitude {self.amplitude} outside [0, 1]")
        if self.shape == "star_blob" and self.lobes < 3:
            raise InputError("star_blob needs at least 3 lobes")
        if not (1 <= len(self.colors) <= 6):
            raise InputError("between 1 and 6 fill colors are required")
        for rgb in (*self.colors, self.background):
            if len(rgb) != 3 or any(not 0 <= v <= 255 for v in rgb):
                raise InputError(f"invalid RGB triple {rgb!r}")
        if not (math.isfinite(self.edge_blur_sigma) and self.edge_blur_sigma >= 0):
            raise InputError("edge_blur_sigma must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["colors"] = [list(c) for c in self.colors]
        d["background"] = list(self.background)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown synth spec keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"invalid synth spec: {exc}") from exc


def star_phase(seed: int) -> float:
    return float(np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi))


def lesion_mask(spec: SynthSpec, seed: int = 0) -> np.ndarray:
    """Boolean footprint of the lesion before any blur."""
    n = spec.canvas
    c = (n - 1) / 2.0
    yy, xx = np.indices((n, n), dtype=np.float64)
    dx, dy = xx - c, yy - c
    rho = np.hypot(dx, dy)
    if spec.shape == "disk" or (spec.shape == "star_blob" and spec.amplitude == 0):
        return rho <= spec.r
    if spec.shape == "half_disk":
        return (rho <= spec.r) & (dy <= 0)
    theta = np.arctan2(dy, dx)
    radius = spec.r * (1.0 + spec.amplitude * np.sin(spec.lobes * theta + star_phase(seed)))
    return rho <= radius


def sector_index(spec: SynthSpec) -> np.ndarray:
    """Which of the equal angular sectors each pixel falls in."""
    n = spec.canvas
    c = (n - 1) / 2.0
    yy, xx = np.indices((n, n), dtype=np.float64)
    theta = np.mod(np.arctan2(yy - c, xx - c) - SECTOR_START, 2.0 * math.pi)
    k = len(spec.colors)
    return np.minimum((theta / (2.0 * math.pi / k)).astype(np.intp), k - 1)


def render(spec: SynthSpec, seed: int = 0) -> np.ndarray:
    """Draw ``spec`` as an (H, W, 3) uint8 raster; bit-identical for a fixed seed."""
    spec.validate()
    mask = lesion_mask(spec, seed)
    palette = np.asarray(spec.colors, dtype=np.float64)
    img = np.empty((spec.canvas, spec.canvas, 3), dtype=np.float64)
    img[:] = spec.background
    img[mask] = palette[sector_index(spec)[mask]]
    if spec.edge_blur_sigma > 0:
        for ch in range(3):
            img[..., ch] = ndimage.gaussian_filter(img[..., ch], spec.edge_blur_sigma, mode="nearest")
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def analytic_area(spec: SynthSpec) -> float:
    """Continuous area of the lesion outline (star_blob via its polar integral)."""
    if spec.shape == "disk":
        return math.pi * spec.r**2
    if spec.shape == "half_disk":
        return 0.5 * math.pi * spec.r**2
    # 0.5 * integral of r^2 (1 + a sin)^2 dtheta; the sine terms integrate to zero
    return math.pi * spec.r**2 * (1.0 + 0.5 * spec.amplitude**2)


def benign_prototype(p6mm_px: float, canvas: int = 224) -> SynthSpec:
    """One-color sharp disk whose diameter is 0.3 of the 6 mm length."""
    return SynthSpec(canvas=canvas, shape="disk", r=0.15 * p6mm_px, colors=((90, 60, 40),))


def malignant_prototype(p6mm_px: float, canvas: int = 224) -> SynthSpec:
    """Four-color, lobed, blurred blob spanning at least the 6 mm length."""
    amplitude = 0.35
    return SynthSpec(
        canvas=canvas,
        shape="star_blob",
        r=0.52 * p6mm_px / (1.0 + amplitude),
        amplitude=amplitude,
        lobes=5,
        colors=((150, 100, 70), (90, 55, 35), (45, 30, 25), (120, 70, 110)),
        edge_blur_sigma=3.0,
    )
