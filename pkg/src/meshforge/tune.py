"""Phase programming: find the schedule that makes a model output a target."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .learn import CV_THRESHOLD
from .matcore import Rng, ShapeError, as_square, frobenius_distance
from .mesh import MeshModel, forward, grad_phases, wrap_phases
from .optim import OptimizerConfig, minimize


@dataclass(frozen=True)
class TuneConfig:
    restarts: int = 10
    optimizer: OptimizerConfig = OptimizerConfig(max_iterations=500, gradient_tolerance=1e-10)
    threshold: float = CV_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")


@dataclass(frozen=True)
class TuneResult:
    phases: np.ndarray
    achieved_j: float
    per_restart: list = field(default_factory=list)
    threshold: float = CV_THRESHOLD

    @property
    def success(self) -> bool:
        return self.achieved_j <= self.threshold

    def to_dict(self) -> dict:
        return {
            "phases": self.phases.tolist(),
            "achieved_j": self.achieved_j,
            "per_restart": list(self.per_restart),
        }


def program_phases(model: MeshModel, target, config: TuneConfig = TuneConfig()) -> TuneResult:
    """Multi-start L-BFGS over all (L+1)*N phases.

    Restart r starts from the r-th uniform draw of the seeded stream, so the
    first R restarts are identical whatever the total. Ties go to the lowest
    restart index. Returned phases are wrapped into [0, 2*pi) and the
    reported J is recomputed from those wrapped values.
    """
    target = as_square(target, "target")
    if target.shape[0] != model.n_modes:
        raise ShapeError(f"target is {target.shape[0]}x{target.shape[0]}, model has N={model.n_modes}")
    rng = Rng(config.seed)
    shape = model.phase_shape

    def objective(x):
        p = x.reshape(shape)
        u = forward(model, p)
        return frobenius_distance(u, target), grad_phases(model, p, target).ravel()

    best_j, best_p, per_restart = np.inf, None, []
    for _ in range(config.restarts):
        x0 = rng.phases(shape).ravel()
        x, _trace = minimize(objective, x0, config.optimizer)
        p = wrap_phases(x.reshape(shape))
        j = frobenius_distance(forward(model, p), target)
        per_restart.append(j)
        if j < best_j:
            best_j, best_p = j, p
    return TuneResult(best_p, best_j, per_restart, config.threshold)
