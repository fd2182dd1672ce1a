"""Soft-margin RBF SVM trained by sequential minimal optimisation.

Working-set selection uses second-order information (as in LIBSVM); training
stops once the maximal KKT violation drops below the configured tolerance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..tiling import FrameSpec
from .config import FilterConfig

log = logging.getLogger(__name__)

_TAU = 1e-12


class DegenerateTrainingError(ValueError):
    pass


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def box_features(boxes, frame: FrameSpec | None) -> np.ndarray:
    """(left, top, width, height) rows, scaled to [0, 1] by the frame when given."""
    x = np.array([b.as_tuple() if hasattr(b, "as_tuple") else tuple(b) for b in boxes], dtype=float).reshape(-1, 4)
    if frame is not None:
        x = x / np.array([frame.width_px, frame.height_px, frame.width_px, frame.height_px], dtype=float)
    return x


def kernel_gamma(config: FilterConfig, frame: FrameSpec | None) -> float:
    return config.gamma * frame.area if frame is not None else config.gamma


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray    # y_i * alpha_i
    bias: float
    gamma: float
    cost: float
    iterations: int = 0
    frame: FrameSpec | None = None

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        if len(self.support_vectors) == 0:
            return np.full(len(features), self.bias)
        k = rbf_kernel(np.asarray(features, dtype=float), self.support_vectors, self.gamma)
        return k @ self.dual_coefficients + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        """1 for the positive class, 0 otherwise."""
        return (self.decision_function(features) > 0).astype(int)

    def predict_boxes(self, boxes) -> np.ndarray:
        return self.predict(box_features(boxes, self.frame))


def train_svm(samples: Sequence, config: FilterConfig, frame: FrameSpec | None = None,
              kernel: np.ndarray | None = None) -> SvmModel:
    """Train on (features, label in {0, 1}) pairs.

    With `frame`, features are raw pixel boxes and get normalised first.
    `kernel` may carry a precomputed Gram matrix of the normalised features.
    """
    x_raw = [s[0] for s in samples]
    labels = np.array([int(s[1]) for s in samples])
    if len(set(labels.tolist())) < 2:
        raise DegenerateTrainingError("SVM training needs both positive and negative samples")
    x = box_features(x_raw, frame) if frame is not None else np.asarray(x_raw, dtype=float)
    gamma = kernel_gamma(config, frame)
    y = np.where(labels > 0, 1.0, -1.0)
    k = rbf_kernel(x, x, gamma) if kernel is None else kernel
    alpha, bias, it = _smo(k, y, config.svm_cost, config.svm_tolerance)
    sv = alpha > 0
    return SvmModel(x[sv], (alpha * y)[sv], bias, gamma, config.svm_cost, it, frame)


def _smo(k: np.ndarray, y: np.ndarray, c: float, eps: float):
    n = len(y)
    q_diag = np.diag(k).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)          # gradient of 1/2 a'Qa - e'a, Q = yy' * K
    max_iter = max(10_000_000, 100 * n)
    it = 0
    pos = y > 0
    while it < max_iter:
        it += 1
        up = (pos & (alpha < c)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < c))
        score = -y * grad
        up_scores = np.where(up, score, -np.inf)
        i = int(np.argmax(up_scores))
        g_max = up_scores[i]
        low_scores = np.where(low, score, np.inf)
        g_min = low_scores.min()
        if g_max - g_min < eps:
            break
        # second-order choice of j among violating low-set members
        k_i = k[i]
        b = g_max - score
        cand = low & (b > 0)
        quad = q_diag[i] + q_diag - 2.0 * k_i          # K_ii + K_tt - 2 K_it (y-independent)
        quad = np.where(quad > 0, quad, _TAU)
        obj = np.where(cand, -(b * b) / quad, np.inf)
        j = int(np.argmin(obj))

        a_i, a_j = alpha[i], alpha[j]
        y_i, y_j = y[i], y[j]
        eta = max(q_diag[i] + q_diag[j] - 2.0 * k_i[j], _TAU)
        if y_i != y_j:
            delta = (-grad[i] - grad[j]) / eta
            diff = a_i - a_j
            new_i, new_j = a_i + delta, a_j + delta
            if diff > 0:
                if new_j < 0:
                    new_j, new_i = 0.0, diff
            else:
                if new_i < 0:
                    new_i, new_j = 0.0, -diff
            if diff > 0:
                if new_i > c:
                    new_i, new_j = c, c - diff
            else:
                if new_j > c:
                    new_j, new_i = c, c + diff
        else:
            delta = (grad[i] - grad[j]) / eta
            total = a_i + a_j
            new_i, new_j = a_i - delta, a_j + delta
            if total > c:
                if new_i > c:
                    new_i, new_j = c, total - c
            else:
                if new_j < 0:
                    new_j, new_i = 0.0, total
            if total > c:
                if new_j > c:
                    new_j, new_i = c, total - c
            else:
                if new_i < 0:
                    new_i, new_j = 0.0, total
        d_i, d_j = new_i - a_i, new_j - a_j
        alpha[i], alpha[j] = new_i, new_j
        # Q[:, t] = y * y_t * K[:, t]
        grad += y * (y_i * d_i * k_i + y_j * d_j * k[j])
    else:
        log.warning("SMO stopped at the iteration cap (%d) before reaching tolerance", max_iter)

    # bias from free vectors, else midpoint of the feasible range
    yg = y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(yg[free].mean())
    else:
        ub_mask = (pos & (alpha >= c)) | (~pos & (alpha <= 0))
        lb_mask = (pos & (alpha <= 0)) | (~pos & (alpha >= c))
        ub = yg[lb_mask].min() if lb_mask.any() else np.inf
        lb = yg[ub_mask].max() if ub_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else float(ub if np.isfinite(ub) else lb)
    return alpha, -rho, it
