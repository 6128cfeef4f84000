"""Speaker-change detection on the MFCC stream.

A split of a feature window is scored by how much better two full-covariance
Gaussians explain the window than one, minus a penalty for the extra model
parameters. The detector grows its analysis window until a clearly positive
maximum appears, then restarts just after the emitted change point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_features import FeatureSequence
from .errors import ClipTooShort, InsufficientSamples, SingularCovariance
from .segments import Boundary

# Relative ridge keeps log-determinants defined for small sample counts while
# staying far below the 1e-6 scale at which it would disturb affine invariance
# of the score.
RIDGE_SCALE = 1e-12


@dataclass(frozen=True)
class BicConfig:
    penalty_weight: float = 1.0
    initial_window_s: float = 4.0
    growth_step_s: float = 2.0
    max_window_s: float = 30.0
    min_margin_frames: int = 5
    clearance: float = 0.0

    def __post_init__(self):
        if min(self.penalty_weight, self.initial_window_s, self.growth_step_s, self.max_window_s) <= 0:
            raise ValueError("penalty weight and window sizes must be positive")
        if self.min_margin_frames < 1:
            raise ValueError("min_margin_frames must be at least 1")


def model_penalty(n: int, dim: int, penalty_weight: float) -> float:
    """Parameter-count penalty for splitting n frames of dim-dimensional data."""
    return penalty_weight * 0.5 * (dim + dim * (dim + 1) / 2) * np.log(n)


def _log_det_cov(x: np.ndarray) -> float:
    cov = np.cov(x, rowvar=False, bias=True)
    ridge = RIDGE_SCALE * np.trace(cov) / cov.shape[0]
    sign, logdet = np.linalg.slogdet(cov + ridge * np.eye(cov.shape[0]))
    if sign <= 0:
        raise SingularCovariance("covariance log-determinant undefined")
    return logdet


def bic_delta(features: np.ndarray, split: int, penalty_weight: float = 1.0) -> float:
    """Score a split of a contiguous feature slice; positive favors two models.

    Returns (N/2)ln|S| - (N1/2)ln|S1| - (N2/2)ln|S2| - penalty, with ML
    covariances over the whole slice and the two sides.
    """
    x = np.asarray(features, dtype=np.float64)
    n, dim = x.shape
    if min(split, n - split) < dim + 1:
        raise InsufficientSamples(
            f"split {split} of {n} leaves a side below {dim + 1} frames"
        )
    data_term = (
        n / 2 * _log_det_cov(x)
        - split / 2 * _log_det_cov(x[:split])
        - (n - split) / 2 * _log_det_cov(x[split:])
    )
    return float(data_term - model_penalty(n, dim, penalty_weight))


def _split_deltas(x: np.ndarray, min_side: int, penalty_weight: float) -> np.ndarray:
    """bic_delta for every split in [min_side, n - min_side], vectorized.

    Entries whose covariances degenerate are -inf. Matches the scalar
    bic_delta up to floating-point rounding.
    """
    n, dim = x.shape
    splits = np.arange(min_side, n - min_side + 1)
    x = x - x.mean(axis=0)  # covariances are translation invariant; this tames the sums
    cum = np.cumsum(x, axis=0)
    cum_sq = np.cumsum(np.einsum("ni,nj->nij", x, x), axis=0)

    def covs(sums, sqs, counts):
        means = sums / counts[:, None]
        c = sqs / counts[:, None, None] - np.einsum("ki,kj->kij", means, means)
        ridge = RIDGE_SCALE * np.trace(c, axis1=1, axis2=2) / dim
        return c + ridge[:, None, None] * np.eye(dim)

    n1 = splits.astype(np.float64)
    n2 = n - n1
    cov_left = covs(cum[splits - 1], cum_sq[splits - 1], n1)
    cov_right = covs(cum[-1] - cum[splits - 1], cum_sq[-1] - cum_sq[splits - 1], n2)
    cov_full = covs(cum[-1][None, :], cum_sq[-1][None, :], np.array([float(n)]))

    sign_f, logdet_f = np.linalg.slogdet(cov_full)
    sign_l, logdet_l = np.linalg.slogdet(cov_left)
    sign_r, logdet_r = np.linalg.slogdet(cov_right)

    deltas = (
        n / 2 * logdet_f[0]
        - n1 / 2 * logdet_l
        - n2 / 2 * logdet_r
        - model_penalty(n, dim, penalty_weight)
    )
    deltas[(sign_l <= 0) | (sign_r <= 0)] = -np.inf
    if sign_f[0] <= 0:
        deltas[:] = -np.inf
    return deltas


def detect_speaker_changes(features: FeatureSequence, cfg: BicConfig = BicConfig()) -> list[Boundary]:
    """Growing-window scan for speaker changes; boundaries increase in time.

    A window starting at the current origin is scored at every admissible
    split. A positive maximum emits a boundary and restarts the window just
    after it; otherwise the window grows, and once it hits max_window_s the
    origin slides forward instead.
    """
    x = features.matrix()
    n, dim = x.shape if x.size else (0, 13)
    sps = features.sets_per_second
    if n / sps < cfg.initial_window_s:
        raise ClipTooShort(
            f"{n} frames span {n / sps:.2f}s < initial window {cfg.initial_window_s}s"
        )
    times = features.times()
    init = max(1, round(cfg.initial_window_s * sps))
    step = max(1, round(cfg.growth_step_s * sps))
    cap = max(init, round(cfg.max_window_s * sps))
    min_side = max(cfg.min_margin_frames, dim + 1)

    boundaries: list[Boundary] = []
    origin = 0
    win = init
    while origin + 2 * min_side <= n:
        end = min(origin + win, n)
        if end - origin >= 2 * min_side:
            deltas = _split_deltas(x[origin:end], min_side, cfg.penalty_weight)
            best = int(np.argmax(deltas))
            if deltas[best] > cfg.clearance:
                split = origin + min_side + best
                boundaries.append(Boundary(t=float(times[split]), score=float(deltas[best])))
                origin = split
                win = init
                continue
        if end == n:
            break
        if win >= cap:
            origin += step
            win = init
        else:
            win += step
    return boundaries
