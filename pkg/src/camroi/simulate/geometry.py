"""Ground-plane to image homographies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ProjectionError(ValueError):
    pass


_EPS = 1e-9


@dataclass(frozen=True)
class Homography:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ProjectionError(f"homography must be 3x3, got {m.shape}")
        if abs(np.linalg.det(m)) <= _EPS:
            raise ProjectionError("homography is singular")
        object.__setattr__(self, "matrix", m)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def to_list(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self.matrix]

    @classmethod
    def from_list(cls, rows) -> "Homography":
        return cls(np.array(rows, dtype=float))


def project_ground_to_camera(h: Homography, point) -> tuple[float, float]:
    x, y = point
    u, v, w = h.matrix @ np.array([x, y, 1.0])
    if abs(w) <= _EPS:
        raise ProjectionError(f"point {point} maps to infinity")
    return (u / w, v / w)


def project_many(h: Homography, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project an (n, 2) array; returns (pixels, ok) where ok marks finite points in front."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    hom = np.column_stack([pts, np.ones(len(pts))]) @ h.matrix.T
    w = hom[:, 2]
    ok = w > _EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        px = hom[:, :2] / w[:, None]
    return px, ok


def homography_from_points(src, dst) -> Homography:
    """Exact homography taking four source points onto four destination points."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.shape != (4, 2) or dst.shape != (4, 2):
        raise ProjectionError("need exactly four point correspondences")
    a = []
    b = []
    for (x, y), (u, v) in zip(src, dst):
        a.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
        b.append(u)
        a.append([0, 0, 0, x, y, 1, -v * x, -v * y])
        b.append(v)
    try:
        h = np.linalg.solve(np.array(a), np.array(b))
    except np.linalg.LinAlgError as e:
        raise ProjectionError("degenerate point correspondences") from e
    return Homography(np.append(h, 1.0).reshape(3, 3))
