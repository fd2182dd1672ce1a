"""RANSAC polynomial regression from source-camera boxes to destination-camera boxes."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import FilterConfig


class InsufficientDataError(ValueError):
    pass


class RankDeficiencyError(ValueError):
    pass


def polynomial_features(x: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of the columns of x up to `degree`, intercept first."""
    n, d = x.shape
    cols = [np.ones(n)]
    for k in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(d), k):
            cols.append(np.prod(x[:, combo], axis=1))
    return np.column_stack(cols)


def n_poly_features(dim: int, degree: int) -> int:
    return math.comb(dim + degree, degree)


def mad(values: np.ndarray) -> float:
    v = np.asarray(values, dtype=float).ravel()
    return float(np.median(np.abs(v - np.median(v))))


@dataclass
class RegressionModel:
    source_camera: int
    dest_camera: int
    degree: int
    coefficients: np.ndarray      # (n_features, 4): one weight vector per output dim
    x_mean: np.ndarray
    x_scale: np.ndarray
    residual_threshold: float
    inlier_flags: np.ndarray
    iterations: int = 0

    def design(self, src: np.ndarray) -> np.ndarray:
        z = (np.asarray(src, dtype=float).reshape(-1, 4) - self.x_mean) / self.x_scale
        return polynomial_features(z, self.degree)

    def predict(self, src) -> np.ndarray:
        return self.design(src) @ self.coefficients

    def residuals(self, src, dst) -> np.ndarray:
        """Largest absolute error over (left, top, width, height), in pixels."""
        dst = np.asarray(dst, dtype=float).reshape(-1, 4)
        return np.abs(self.predict(src) - dst).max(axis=1)

    def is_outlier(self, src, dst) -> np.ndarray:
        return self.residuals(src, dst) > self.residual_threshold

    @property
    def inlier_ratio(self) -> float:
        return float(np.mean(self.inlier_flags)) if len(self.inlier_flags) else 0.0


def _lstsq(phi: np.ndarray, y: np.ndarray) -> np.ndarray | None:
    coef, _, rank, _ = np.linalg.lstsq(phi, y, rcond=None)
    if rank < phi.shape[1]:
        return None
    return coef


def fit_ransac(pairs: Sequence, config: FilterConfig, source_camera: int = 0, dest_camera: int = 1,
               seed: int | np.random.SeedSequence | None = None) -> RegressionModel:
    """Fit dest box = poly(source box) with RANSAC.

    `pairs` holds (source box, dest box) as 4-vectors or BBox objects. A sample
    is an inlier when its residual is at most theta * MAD of the dest box
    values. Each new best consensus set is polished by least-squares refits,
    and the final set (most inliers, then least inlier error) is refit once
    more.
    """
    src = np.array([_vec(p[0]) for p in pairs], dtype=float).reshape(-1, 4)
    dst = np.array([_vec(p[1]) for p in pairs], dtype=float).reshape(-1, 4)
    n = len(src)
    n_feat = n_poly_features(4, config.regression_degree)
    min_samples = n_feat
    if n < min_samples:
        raise InsufficientDataError(f"{n} pairs, need at least {min_samples} for degree {config.regression_degree}")

    x_mean = src.mean(axis=0)
    x_scale = src.std(axis=0)
    x_scale[x_scale == 0] = 1.0
    phi = polynomial_features((src - x_mean) / x_scale, config.regression_degree)
    if np.linalg.matrix_rank(phi) < n_feat:
        raise RankDeficiencyError("source boxes do not span the polynomial feature space")
    threshold = config.theta * mad(dst)

    rng = np.random.default_rng(seed if seed is not None else config.seed)
    best_count, best_err, best_mask = -1, math.inf, None
    max_trials = config.ransac_iterations
    trial = 0
    while trial < max_trials:
        batch = min(_BATCH, max_trials - trial)
        idx = np.stack([rng.choice(n, size=min_samples, replace=False) for _ in range(batch)])
        a = phi[idx]                                   # (batch, k, k)
        ok = np.abs(np.linalg.det(a)) > 1e-12
        coefs = np.zeros((batch, n_feat, 4))
        if ok.any():
            coefs[ok] = np.linalg.solve(a[ok], dst[idx[ok]])
        for b in range(batch):
            trial += 1
            if not ok[b] or not np.all(np.isfinite(coefs[b])):
                continue
            res = np.abs(phi @ coefs[b] - dst).max(axis=1)
            mask = res <= threshold
            count = int(mask.sum())
            err = float(res[mask].sum())
            if count > best_count or (count == best_count and err < best_err):
                mask, count, err = _local_refit(phi, dst, mask, count, err, threshold, min_samples)
                best_count, best_err, best_mask = count, err, mask
                max_trials = min(max_trials, _trials_needed(count / n, min_samples, config.stop_probability))
            if trial >= max_trials:
                break

    coef = None
    if best_mask is not None and best_count >= min_samples:
        coef = _lstsq(phi[best_mask], dst[best_mask])
    if coef is None:
        coef = _lstsq(phi, dst)
    res = np.abs(phi @ coef - dst).max(axis=1)
    return RegressionModel(source_camera, dest_camera, config.regression_degree, coef, x_mean, x_scale,
                           threshold, res <= threshold, trial)


_BATCH = 64


def _local_refit(phi, dst, mask, count, err, threshold, min_samples, rounds: int = 4):
    """Refit on the consensus set while that grows it."""
    for _ in range(rounds):
        if count < min_samples:
            break
        coef = _lstsq(phi[mask], dst[mask])
        if coef is None:
            break
        res = np.abs(phi @ coef - dst).max(axis=1)
        new_mask = res <= threshold
        new_count = int(new_mask.sum())
        new_err = float(res[new_mask].sum())
        if new_count < count or (new_count == count and new_err >= err):
            break
        mask, count, err = new_mask, new_count, new_err
    return mask, count, err


def _trials_needed(inlier_ratio: float, min_samples: int, probability: float) -> int:
    good = inlier_ratio ** min_samples
    if good <= 0:
        return 10 ** 12
    if good >= 1:
        return 1
    denom = math.log1p(-good)
    if denom == 0.0:
        return 10 ** 12
    return int(math.ceil(math.log(1 - probability) / denom))


def _vec(b) -> tuple:
    return b.as_tuple() if hasattr(b, "as_tuple") else tuple(b)
