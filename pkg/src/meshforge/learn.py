"""Fitting basis matrices to observed (phases, unitary) samples.

Each epoch draws a small mini-batch from the training set, runs a bounded
number of L-BFGS iterations on the batch-mean J_FR over the real and
imaginary parts of all basis entries, then snaps every basis matrix back to
the nearest unitary. The model with the lowest test J seen so far is kept.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .matcore import Rng, ShapeError, perturb_unitary, polar_unitary_factor
from .mesh import MeshModel, batch_distance, forward, mean_objective
from .optim import OptimizerConfig, minimize

logger = logging.getLogger(__name__)

CV_THRESHOLD = 1e-2


class TrainingPair(NamedTuple):
    phases: np.ndarray
    observed: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """Stacked samples: ``phases`` is (M, L+1, N), ``unitaries`` is (M, N, N)."""

    phases: np.ndarray
    unitaries: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.phases, dtype=float)
        u = np.asarray(self.unitaries, dtype=np.complex128)
        if p.ndim != 3 or u.ndim != 3 or len(p) == 0:
            raise ShapeError("dataset must hold at least one pair with (L+1, N) phases and (N, N) unitaries")
        if len(p) != len(u) or u.shape[1] != u.shape[2] or p.shape[2] != u.shape[1]:
            raise ShapeError(f"inconsistent dataset shapes: phases {p.shape}, unitaries {u.shape}")
        object.__setattr__(self, "phases", p)
        object.__setattr__(self, "unitaries", u)

    def __len__(self):
        return len(self.phases)

    @property
    def n_modes(self) -> int:
        return self.unitaries.shape[1]

    @property
    def phase_shape(self) -> tuple[int, int]:
        return self.phases.shape[1:]

    @property
    def pairs(self) -> list[TrainingPair]:
        return [TrainingPair(p, u) for p, u in zip(self.phases, self.unitaries)]

    @classmethod
    def from_pairs(cls, pairs, provenance=None) -> "Dataset":
        return cls(
            np.stack([p.phases for p in pairs]),
            np.stack([p.observed for p in pairs]),
            dict(provenance or {}),
        )


def default_epochs(n_modes: int) -> int:
    """Epoch budget used when none is given: larger meshes learn more slowly."""
    return 1000 if n_modes <= 5 else 3000


@dataclass(frozen=True)
class LearnConfig:
    minibatch_size: int = 5
    epochs: int = 1000
    inner_iterations: int = 20
    threshold: float = CV_THRESHOLD
    # stop as soon as the test J drops to this value; None disables
    stop_j: float | None = 1e-12
    project_each_epoch: bool = True
    optimizer: OptimizerConfig = OptimizerConfig(gradient_tolerance=1e-10)
    seed: int = 0

    def __post_init__(self):
        if self.minibatch_size < 1 or self.epochs < 0 or self.inner_iterations < 1:
            raise ValueError("minibatch_size and inner_iterations must be >= 1, epochs >= 0")


@dataclass
class ConvergenceTrace:
    epochs: list = field(default_factory=list)
    j_train: list = field(default_factory=list)
    j_test: list = field(default_factory=list)

    def __len__(self):
        return len(self.epochs)

    def record(self, epoch, j_train, j_test):
        self.epochs.append(int(epoch))
        self.j_train.append(float(j_train))
        self.j_test.append(float(j_test))

    @property
    def best_j_test(self) -> np.ndarray:
        """Best-so-far test J after each epoch."""
        return np.minimum.accumulate(np.asarray(self.j_test))

    @property
    def final_j_test(self) -> float:
        return float(self.best_j_test[-1])


@dataclass(frozen=True)
class CrossValidationReport:
    per_sample: np.ndarray
    mean_j: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.mean_j <= self.threshold

    def to_dict(self) -> dict:
        return {
            "mean_j": self.mean_j,
            "threshold": self.threshold,
            "passed": self.passed,
            "per_sample": [float(v) for v in self.per_sample],
        }


def generate_dataset(device: MeshModel, count: int, alpha: float, rng: Rng) -> Dataset:
    """Sample ``count`` uniform phase schedules and the device's (noisy) response.

    Each observed unitary is the ideal transfer matrix pushed through
    :func:`perturb_unitary` with its own noise draw; ``alpha=0`` gives exact
    samples.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    phases = np.empty((count,) + device.phase_shape)
    unitaries = np.empty((count, device.n_modes, device.n_modes), dtype=np.complex128)
    for i in range(count):
        phases[i] = rng.phases(device.phase_shape)
        unitaries[i] = perturb_unitary(forward(device, phases[i]), alpha, rng)
    return Dataset(phases, unitaries, {"alpha": float(alpha), "seed": rng.seed})


def init_black_box(n: int, n_mixers: int, rng: Rng) -> MeshModel:
    return MeshModel.haar(n, n_mixers, rng)


def init_a_priori(reference: MeshModel, alpha: float, rng: Rng) -> MeshModel:
    """Reference basis with every matrix independently perturbed at ``alpha``."""
    return MeshModel(np.stack([perturb_unitary(u, alpha, rng) for u in reference.basis]))


def _check_compatible(model: MeshModel, data: Dataset, name: str):
    if data.n_modes != model.n_modes or tuple(data.phase_shape) != model.phase_shape:
        raise ShapeError(
            f"{name} set has phases {data.phase_shape} and N={data.n_modes}; "
            f"model expects {model.phase_shape}"
        )


def cross_validate(model: MeshModel, test: Dataset, threshold: float = CV_THRESHOLD) -> CrossValidationReport:
    if test is None or len(test) == 0:
        raise ValueError("cross-validation needs a non-empty test set")
    _check_compatible(model, test, "test")
    js = batch_distance(model, test.phases, test.unitaries)
    return CrossValidationReport(js, float(np.mean(js)), float(threshold))


def _project(basis):
    return np.stack([polar_unitary_factor(u) for u in basis])


def learn_model(train: Dataset, test: Dataset | None, init: MeshModel, config: LearnConfig = LearnConfig()):
    """Fit basis matrices to ``train``; returns ``(best_model, trace)``.

    ``test`` drives the best-model selection and the j_test column; the
    training set is used when it is None. Epoch 0 records the initial model
    (j_train over the whole training set); later rows record the model after
    each epoch, with j_train over that epoch's mini-batch.
    """
    _check_compatible(init, train, "training")
    if test is None:
        test = train
    _check_compatible(init, test, "test")
    m = config.minibatch_size
    if m > len(train):  # tiny training sets: whole set per batch
        m = len(train)

    rng = Rng(config.seed)
    L, N = init.n_mixers, init.n_modes
    size = L * N * N
    train_e = np.exp(1j * train.phases)
    test_e = np.exp(1j * test.phases)
    opt = OptimizerConfig(**{**config.optimizer.__dict__, "max_iterations": config.inner_iterations})

    def test_j(basis):
        return mean_objective(basis, test_e, test.unitaries)[0]

    basis = np.array(init.basis)
    trace = ConvergenceTrace()
    j_test = test_j(basis)
    trace.record(0, mean_objective(basis, train_e, train.unitaries)[0], j_test)
    best_j, best_basis = j_test, basis

    for epoch in range(1, config.epochs + 1):
        if config.stop_j is not None and best_j <= config.stop_j:
            break
        idx = rng.integers(0, len(train), m)
        e, targets = train_e[idx], train.unitaries[idx]

        def objective(x):
            b = (x[:size] + 1j * x[size:]).reshape(L, N, N)
            j, g = mean_objective(b, e, targets)
            return j, np.concatenate([g.real.ravel(), g.imag.ravel()])

        x, _ = minimize(objective, np.concatenate([basis.real.ravel(), basis.imag.ravel()]), opt)
        basis = (x[:size] + 1j * x[size:]).reshape(L, N, N)
        if config.project_each_epoch:
            basis = _project(basis)
        j_test = test_j(basis)
        trace.record(epoch, mean_objective(basis, e, targets)[0], j_test)
        if j_test < best_j:
            best_j, best_basis = j_test, basis
        if epoch % 100 == 0:
            logger.debug("epoch %d: j_test=%.3e best=%.3e", epoch, j_test, best_j)

    return MeshModel(best_basis), trace
