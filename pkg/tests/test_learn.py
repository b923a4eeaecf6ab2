import numpy as np
import pytest

from meshforge.learn import (
    Dataset,
    LearnConfig,
    TrainingPair,
    cross_validate,
    default_epochs,
    generate_dataset,
    init_a_priori,
    init_black_box,
    learn_model,
)
from meshforge.matcore import Rng, ShapeError, derive_seed, fidelity, unitarity_error
from meshforge.mesh import MeshModel, forward
from meshforge.sweeps import TrialSpec, fidelity_calibration, learning_trial


@pytest.fixture
def device3():
    return MeshModel.haar(3, None, Rng(1))


# --- datasets ---------------------------------------------------------------------

def test_exact_dataset(device3):
    data = generate_dataset(device3, 3, 0.0, Rng(2))
    assert len(data) == 3 and data.n_modes == 3 and data.phase_shape == (4, 3)
    for p, u in zip(data.phases, data.unitaries):
        assert np.all((p >= 0) & (p < 2 * np.pi))
        assert np.max(np.abs(u - forward(device3, p))) <= 1e-10


def test_dataset_deterministic(device3):
    a = generate_dataset(device3, 4, 0.05, Rng(9))
    b = generate_dataset(device3, 4, 0.05, Rng(9))
    assert np.array_equal(a.phases, b.phases)
    assert np.array_equal(a.unitaries, b.unitaries)


def test_noisy_dataset_matches_calibration():
    dev = MeshModel.haar(2, None, Rng(3))
    data = generate_dataset(dev, 5, 0.025, Rng(4))
    f = [fidelity(u, forward(dev, p)) for p, u in zip(data.phases, data.unitaries)]
    ref, _ = fidelity_calibration(2, 0.025, 5000, Rng(5))
    # mean of 5 draws against the calibrated mean, 4 standard errors
    assert abs(np.mean(f) - ref.mean()) <= 4 * ref.std() / np.sqrt(5)
    assert all(unitarity_error(u) <= 1e-10 for u in data.unitaries)


def test_dataset_validation(device3):
    with pytest.raises(ValueError):
        generate_dataset(device3, 0, 0.0, Rng(0))
    with pytest.raises(ShapeError):
        Dataset(np.zeros((2, 4, 3)), np.zeros((3, 3, 3)))


def test_dataset_from_pairs(device3):
    data = generate_dataset(device3, 2, 0.0, Rng(2))
    again = Dataset.from_pairs([TrainingPair(p.phases, p.observed) for p in data.pairs])
    assert np.array_equal(again.unitaries, data.unitaries)


# --- initialisation ---------------------------------------------------------------

def test_black_box_init():
    m = init_black_box(4, 4, Rng(0))
    assert m.basis.shape == (4, 4, 4) and m.is_unitary()
    assert np.array_equal(m.basis, init_black_box(4, 4, Rng(0)).basis)


def test_black_box_init_fidelity_between_seeds():
    # Haar pairs: E|Tr(V^H U)|^2 / N^2 = 1/N^2
    fs = []
    for k in range(100):
        a = init_black_box(4, 4, Rng(derive_seed(1, k)))
        b = init_black_box(4, 4, Rng(derive_seed(2, k)))
        fs.extend(fidelity(u, v) for u, v in zip(a.basis, b.basis))
    assert abs(np.mean(fs) - 1 / 16) <= 0.05


def test_a_priori_zero_alpha():
    ref = MeshModel.haar(3, None, Rng(0))
    assert np.max(np.abs(init_a_priori(ref, 0.0, Rng(1)).basis - ref.basis)) <= 1e-10


def test_a_priori_matches_calibration():
    ref = MeshModel.haar(10, None, Rng(0))
    init = init_a_priori(ref, 0.1, Rng(1))
    assert init.is_unitary()
    f = [fidelity(u, v) for u, v in zip(init.basis, ref.basis)]
    cal, _ = fidelity_calibration(10, 0.1, 2000, Rng(2))
    assert abs(np.mean(f) - cal.mean()) <= 4 * cal.std() / np.sqrt(len(f))


# --- cross-validation -----------------------------------------------------------

def test_cross_validate_exact_model(device3):
    test = generate_dataset(device3, 20, 0.0, Rng(5))
    report = cross_validate(device3, test)
    assert report.mean_j <= 1e-20 and report.passed
    assert report.per_sample.shape == (20,)


def test_cross_validate_fails_for_random_model(device3):
    test = generate_dataset(device3, 20, 0.0, Rng(5))
    assert not cross_validate(MeshModel.haar(3, None, Rng(99)), test).passed


def test_cross_validate_shape_mismatch(device3):
    test = generate_dataset(MeshModel.haar(2, None, Rng(0)), 3, 0.0, Rng(1))
    with pytest.raises(ShapeError):
        cross_validate(device3, test)


# --- learning -------------------------------------------------------------------

def test_perfect_start_stops_immediately():
    dev = MeshModel.haar(3, None, Rng(4))
    pair = generate_dataset(dev, 1, 0.0, Rng(5))
    zero = Dataset(np.zeros_like(pair.phases), forward(dev, np.zeros(dev.phase_shape))[None])
    model, trace = learn_model(zero, zero, dev, LearnConfig(epochs=50))
    assert trace.j_test[0] <= 1e-20
    assert len(trace) == 1
    assert np.array_equal(model.basis, dev.basis)


def test_perfect_start_does_not_degrade():
    dev = MeshModel.haar(3, None, Rng(4))
    train = generate_dataset(dev, 6, 0.0, Rng(5))
    model, trace = learn_model(train, train, dev, LearnConfig(epochs=20, stop_j=None))
    assert max(trace.best_j_test) <= 1e-20
    assert cross_validate(model, train).mean_j <= 1e-20


def test_learn_n2_black_box_majority():
    passed = [learning_trial(TrialSpec(2, 5, epochs=1000, seed=s)).passed for s in range(20)]
    assert sum(passed) > 10


def test_learn_invariants():
    dev = MeshModel.haar(3, None, Rng(6))
    train = generate_dataset(dev, 6, 0.0, Rng(7))
    test = generate_dataset(dev, 30, 0.0, Rng(8))
    model, trace = learn_model(train, test, init_black_box(3, 3, Rng(9)), LearnConfig(epochs=40, stop_j=None))
    assert model.is_unitary()
    assert len(trace) == 41
    assert np.all(np.diff(trace.best_j_test) <= 0)
    assert min(trace.j_test) == pytest.approx(cross_validate(model, test).mean_j, rel=1e-9)
    assert all(j >= 0 for j in trace.j_train + trace.j_test)


def test_learn_deterministic():
    spec = TrialSpec(3, 4, epochs=30, stop_j=None, seed=3)
    a, b = learning_trial(spec), learning_trial(spec)
    assert np.array_equal(a.model.basis, b.model.basis)
    assert a.trace.j_test == b.trace.j_test


def test_learn_small_training_set_clamps_batch():
    dev = MeshModel.haar(2, None, Rng(1))
    train = generate_dataset(dev, 2, 0.0, Rng(2))
    _, trace = learn_model(train, None, init_black_box(2, 2, Rng(3)), LearnConfig(epochs=3, stop_j=None))
    assert len(trace) == 4


def test_learn_shape_mismatch():
    dev = MeshModel.haar(2, None, Rng(1))
    train = generate_dataset(dev, 5, 0.0, Rng(2))
    with pytest.raises(ShapeError):
        learn_model(train, None, init_black_box(3, 3, Rng(3)))


def test_underdetermined_training_fails_cross_validation():
    # N=3 with two training pairs cannot pin down the basis
    results = [learning_trial(TrialSpec(3, 2, epochs=300, seed=s)) for s in range(3)]
    assert not any(r.passed for r in results)


def test_default_epoch_budget():
    assert default_epochs(5) == 1000 and default_epochs(6) == 3000
