from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class FilterConfig:
    """Knobs of the regression and SVM filters.

    ``gamma`` is the RBF width per squared pixel. Box features are scaled to
    [0, 1] by the frame size before training and gamma is rescaled by the frame
    area to match, so one value works for cameras of any resolution.
    """
    theta: float = 0.01
    gamma: float = 1e-4
    svm_cost: float = 1.0
    regression_degree: int = 2
    ransac_iterations: int = 1000
    seed: int = 0
    stop_probability: float = 0.99
    svm_tolerance: float = 1e-3
    min_positive_pairs: int = 10

    def __post_init__(self):
        if self.theta <= 0 or self.gamma <= 0 or self.svm_cost <= 0:
            raise ValueError("theta, gamma and svm_cost must be positive")
        if self.regression_degree < 1:
            raise ValueError("regression_degree must be >= 1")
        if self.ransac_iterations < 1:
            raise ValueError("ransac_iterations must be >= 1")
        if not 0 < self.stop_probability < 1:
            raise ValueError("stop_probability must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FilterConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown filter settings: {sorted(unknown)}")
        return cls(**d)
