"""Feature-space lesion evolution: affine drift fitting, rollouts, PCA projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, DimensionError, DivergenceError, InputError
from .features import AbcdScores

RIDGE = 1e-6
DEFAULT_STEPS = 6


@dataclass(frozen=True)
class DriftModel:
    """Per-step change ``delta = W @ z + bias``, applied with ``step_scale``."""

    W: np.ndarray
    bias: np.ndarray
    step_scale: float = 1.0

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] != bias.size:
            raise DimensionError(f"W {W.shape} and bias ({bias.size},) are inconsistent")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(bias))):
            raise InputError("drift model has non-finite entries")
        if not (np.isfinite(self.step_scale) and self.step_scale > 0):
            raise InputError("step_scale must be positive")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "bias", bias)

    @property
    def n(self) -> int:
        return self.bias.size

    @classmethod
    def zero(cls, n: int) -> "DriftModel":
        return cls(np.zeros((n, n)), np.zeros(n))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "W": [float(v) for v in self.W.ravel()],
            "bias": [float(v) for v in self.bias],
            "step_scale": float(self.step_scale),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DriftModel":
        try:
            n = int(data["n"])
            W = np.asarray(data["W"], dtype=np.float64).reshape(n, n)
            return cls(W, data["bias"], float(data.get("step_scale", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed drift model: {exc}") from exc


def _as_matrix(vectors, name: str) -> np.ndarray:
    try:
        arr = np.asarray(vectors, dtype=np.float64)
    except ValueError:
        raise DimensionError(f"{name}: vectors have inconsistent lengths") from None
    if arr.ndim != 2:
        raise DimensionError(f"{name}: expected a list of equal-length vectors")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: non-finite entries")
    return arr


def fit_drift(pairs, ridge: float = RIDGE) -> DriftModel:
    """Least-squares affine fit of ``end - start`` on ``start``.

    The intercept is left unpenalized; ``ridge`` only shrinks ``W`` so that
    rank-deficient starts still give a unique answer.
    """
    pairs = list(pairs)
    if not pairs:
        raise InputError("fit_drift needs at least one pair")
    starts = _as_matrix([p[0] for p in pairs], "start")
    ends = _as_matrix([p[1] for p in pairs], "end")
    if starts.shape != ends.shape:
        raise DimensionError(f"start {starts.shape} and end {ends.shape} dimensions differ")
    m, n = starts.shape
    if n < 1:
        raise DimensionError("feature vectors are empty")
    if m < n + 1:
        raise InputError(f"need at least {n + 1} pairs for {n}-d features, got {m}")

    delta = ends - starts
    x_mean = starts.mean(axis=0)
    d_mean = delta.mean(axis=0)
    xc = starts - x_mean
    dc = delta - d_mean
    gram = xc.T @ xc + ridge * np.eye(n)
    W = np.linalg.solve(gram, xc.T @ dc).T
    bias = d_mean - W @ x_mean
    return DriftModel(W, bias)


@dataclass(frozen=True)
class FeatureTrajectory:
    steps: np.ndarray  # (K + 1, n), row 0 is the start

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.float64)
        if steps.ndim != 2 or steps.shape[0] < 2:
            raise DimensionError("a trajectory needs at least two steps of equal-length vectors")
        object.__setattr__(self, "steps", steps)

    @property
    def K(self) -> int:
        return self.steps.shape[0] - 1

    def __len__(self) -> int:
        return self.steps.shape[0]


def rollout(model: DriftModel, start, K: int = DEFAULT_STEPS, clamp: bool = False) -> FeatureTrajectory:
    """Iterate ``z <- z + step_scale * (W z + bias)`` K times.

    ``clamp=True`` keeps every step inside [0, 1]^n, which is what ABCD
    trajectories need; generic latent rollouts leave it off.
    """
    if int(K) != K or K < 1:
        raise InputError(f"K must be a positive integer, got {K!r}")
    z = np.asarray(start, dtype=np.float64).reshape(-1)
    if z.size != model.n:
        raise DimensionError(f"start has {z.size} features, model expects {model.n}")
    if clamp:
        z = np.clip(z, 0.0, 1.0)
    steps = [z]
    for t in range(1, int(K) + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            z = z + model.step_scale * (model.W @ z + model.bias)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"rollout diverged at step {t}")
        if clamp:
            z = np.clip(z, 0.0, 1.0)
        steps.append(z)
    return FeatureTrajectory(np.array(steps))


def abcd_trajectory(start, target, K: int = DEFAULT_STEPS) -> FeatureTrajectory:
    """Straight-line interpolation from ``start`` to ``target`` in [0, 1]^4."""
    if int(K) != K or K < 1:
        raise InputError(f"K must be a positive integer, got {K!r}")
    s, g = (
        np.asarray(v.as_tuple() if isinstance(v, AbcdScores) else v, dtype=np.float64)
        for v in (start, target)
    )
    if s.shape != (4,) or g.shape != (4,):
        raise DimensionError("ABCD trajectories need 4-component start and target")
    t = np.arange(int(K) + 1)[:, None] / K
    return FeatureTrajectory(np.clip(s + t * (g - s), 0.0, 1.0))


@dataclass(frozen=True)
class PcaProjection:
    mean: np.ndarray
    components: np.ndarray  # (2, n), orthonormal rows
    explained_variance_ratio: np.ndarray


def pca_fit(points) -> PcaProjection:
    """Top-two principal axes of the points' covariance.

    Each axis is signed so its largest-magnitude entry is positive, which
    keeps plots reproducible across runs and platforms.
    """
    x = _as_matrix(points, "points")
    m, n = x.shape
    if m < 3:
        raise InputError(f"PCA needs at least 3 points, got {m}")
    if n < 2:
        raise DimensionError("PCA needs at least 2 features")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (m - 1)
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals[::-1], 0.0, None)
    evecs = evecs[:, ::-1]
    trace = float(evals.sum())
    if trace <= 0.0 or not np.isfinite(trace):
        raise DegenerateDataError("points have zero variance")
    comps = evecs[:, :2].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaProjection(mean, comps, evals[:2] / trace)


def project(proj: PcaProjection, traj) -> np.ndarray:
    """(K + 1, 2) array of (pc1, pc2) per step, in trajectory order."""
    steps = traj.steps if isinstance(traj, FeatureTrajectory) else _as_matrix(traj, "trajectory")
    if steps.shape[1] != proj.mean.size:
        raise DimensionError(f"trajectory has {steps.shape[1]} features, projection expects {proj.mean.size}")
    return (steps - proj.mean) @ proj.components.T
