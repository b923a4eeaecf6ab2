"""Repeated simulated learning experiments and parameter sweeps.

A *trial* builds a Haar-random ground-truth device, samples training and test
sets from it, learns a model from a black-box or a-priori start and
cross-validates it. Every random draw in a trial derives from one integer
seed, so trials are reproducible one by one and can run in any order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .learn import (
    CV_THRESHOLD,
    ConvergenceTrace,
    CrossValidationReport,
    LearnConfig,
    cross_validate,
    default_epochs,
    generate_dataset,
    init_a_priori,
    init_black_box,
    learn_model,
)
from .matcore import Rng, derive_seed, fidelity, frobenius_distance, haar_random_unitary, perturb_unitary
from .mesh import MeshModel

SWEEP_KINDS = ("train-size", "noise", "apriori", "fidelity-calibration")

# per-trial stream labels for derive_seed
_DEVICE, _TRAIN, _TEST, _INIT, _LEARN = range(5)


@dataclass(frozen=True)
class TrialSpec:
    n_modes: int
    train_size: int
    alpha: float = 0.0
    init: str = "blackbox"  # or "apriori"
    apriori_alpha: float = 0.0
    epochs: int | None = None  # None: default_epochs(n_modes)
    test_size: int = 100
    noisy_test: bool = True
    threshold: float = CV_THRESHOLD
    stop_j: float | None = 1e-10
    seed: int = 0


@dataclass
class TrialResult:
    spec: TrialSpec
    device: MeshModel
    model: MeshModel
    trace: ConvergenceTrace
    report: CrossValidationReport

    @property
    def passed(self) -> bool:
        return self.report.passed


def learning_trial(spec: TrialSpec) -> TrialResult:
    s, n = spec.seed, spec.n_modes
    device = MeshModel.haar(n, None, Rng(derive_seed(s, _DEVICE)))
    train = generate_dataset(device, spec.train_size, spec.alpha, Rng(derive_seed(s, _TRAIN)))
    test_alpha = spec.alpha if spec.noisy_test else 0.0
    test = generate_dataset(device, spec.test_size, test_alpha, Rng(derive_seed(s, _TEST)))
    init_rng = Rng(derive_seed(s, _INIT))
    if spec.init == "blackbox":
        init = init_black_box(n, n, init_rng)
    elif spec.init == "apriori":
        init = init_a_priori(device, spec.apriori_alpha, init_rng)
    else:
        raise ValueError(f"unknown init {spec.init!r}")
    config = LearnConfig(
        epochs=default_epochs(n) if spec.epochs is None else spec.epochs,
        threshold=spec.threshold,
        stop_j=spec.stop_j,
        seed=derive_seed(s, _LEARN),
    )
    model, trace = learn_model(train, test, init, config)
    return TrialResult(spec, device, model, trace, cross_validate(model, test, spec.threshold))


def max_workers() -> int:
    env = os.environ.get("MESHFORGE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_map(fn, items) -> list:
    """``list(map(fn, items))``, spread over worker processes when allowed.

    Results always come back in input order.
    """
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _summary(results):
    js = np.array([r.report.mean_j for r in results])
    return [len(js), float(np.mean(js)), float(np.median(js)), float(np.mean(js <= results[0].spec.threshold))]


SUMMARY_COLUMNS = ["reps", "mean_j_test", "median_j_test", "pass_fraction"]


def _grid_trials(points, reps, seed, make_spec):
    specs = [
        make_spec(pt, derive_seed(seed, i, r))
        for i, pt in enumerate(points)
        for r in range(reps)
    ]
    results = run_map(learning_trial, specs)
    return [results[i * reps:(i + 1) * reps] for i in range(len(points))]


def _require(grid, name):
    if not grid:
        raise ValueError(f"empty grid: {name}")


def sweep_train_size(modes, sizes, reps=10, epochs=None, test_size=100, seed=0):
    """Mean cross-validation J over (N, M) pairs, black-box start, exact data."""
    _require(modes, "modes")
    _require(sizes, "sizes")
    points = [(n, m) for n in modes for m in sizes]
    groups = _grid_trials(
        points, reps, seed,
        lambda pt, s: TrialSpec(pt[0], pt[1], epochs=epochs, test_size=test_size, seed=s),
    )
    header = ["n_modes", "train_size", *SUMMARY_COLUMNS]
    return header, [[n, m, *_summary(g)] for (n, m), g in zip(points, groups)]


def sweep_noise(n_modes, train_size, alphas, reps=10, epochs=None, test_size=100, seed=0):
    """Mean cross-validation J against the data noise level alpha."""
    _require(alphas, "alphas")
    groups = _grid_trials(
        alphas, reps, seed,
        lambda a, s: TrialSpec(n_modes, train_size, alpha=a, epochs=epochs, test_size=test_size, seed=s),
    )
    header = ["n_modes", "train_size", "alpha", *SUMMARY_COLUMNS]
    return header, [[n_modes, train_size, a, *_summary(g)] for a, g in zip(alphas, groups)]


def sweep_apriori(modes, alphas, train_size, reps=10, epochs=None, test_size=100, seed=0):
    """Learning from perturbed copies of the true basis, over (N, alpha)."""
    _require(modes, "modes")
    _require(alphas, "alphas")
    points = [(n, a) for n in modes for a in alphas]
    groups = _grid_trials(
        points, reps, seed,
        lambda pt, s: TrialSpec(
            pt[0], train_size, init="apriori", apriori_alpha=pt[1], epochs=epochs, test_size=test_size, seed=s
        ),
    )
    header = ["n_modes", "apriori_alpha", "train_size", *SUMMARY_COLUMNS]
    return header, [[n, a, train_size, *_summary(g)] for (n, a), g in zip(points, groups)]


def fidelity_calibration(n_modes, alpha, samples, rng: Rng):
    """Fidelity and J_FR between Haar unitaries and their perturbed copies."""
    f = np.empty(samples)
    j = np.empty(samples)
    for i in range(samples):
        u = haar_random_unitary(n_modes, rng)
        v = perturb_unitary(u, alpha, rng)
        f[i] = fidelity(u, v)
        j[i] = frobenius_distance(u, v)
    return f, j


def sweep_fidelity(n_modes, alphas, samples=1000, seed=0):
    _require(alphas, "alphas")
    rows = []
    for i, a in enumerate(alphas):
        f, j = fidelity_calibration(n_modes, a, samples, Rng(derive_seed(seed, i)))
        rows.append([n_modes, a, samples, float(f.mean()), float(f.std(ddof=1)) if samples > 1 else 0.0, float(j.mean())])
    return ["n_modes", "alpha", "samples", "mean_fidelity", "std_fidelity", "mean_j"], rows
